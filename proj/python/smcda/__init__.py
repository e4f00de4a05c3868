"""Sequential MCMC data assimilation toolkit.

Python bindings over the C++ core: linear-Gaussian benchmarks (Kalman and
ensemble filters), the sequential-MCMC filter, the rotating shallow-water
forward model with sine-mode stochastic forcing, and drifter observation
operators.
"""

from smcda._core import (
    LinearModel,
    Rng,
    SineModeNoise,
    SwFixture,
    SwGrid,
    accuracy_metric,
    advect_drifters,
    enkf_analysis,
    estkf_analysis,
    etkf_analysis,
    kalman_filter,
    load_fixture,
    make_preset_fixture,
    observe,
    run_experiment,
    run_smcmc_linear,
    save_fixture,
    select_observed_indices,
    simulate_linear,
    sw_flow,
)

__all__ = [
    "LinearModel",
    "Rng",
    "SineModeNoise",
    "SwFixture",
    "SwGrid",
    "accuracy_metric",
    "advect_drifters",
    "enkf_analysis",
    "estkf_analysis",
    "etkf_analysis",
    "kalman_filter",
    "load_fixture",
    "make_preset_fixture",
    "observe",
    "run_experiment",
    "run_smcmc_linear",
    "save_fixture",
    "select_observed_indices",
    "simulate_linear",
    "sw_flow",
]

__version__ = "0.1.0"
