#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "smcda/csv.hpp"
#include "smcda/drifters.hpp"
#include "smcda/ensemble.hpp"
#include "smcda/linear_gaussian.hpp"
#include "smcda/smcmc.hpp"
#include "smcda/sw/fixtures.hpp"
#include "smcda/sw/model.hpp"

namespace smcda {

struct LinearSection {
  int d = 25;
  double a = 0.2;  // A = a I
  int r_hat = 1;
  int L = 1;
  int n_obs = 100;
  double sigma_z = 0.05;
  double sigma_y = 0.05;
  double z0_scale = -0.45;        // z0 ~ z0_scale * U[0,1] per coordinate
  std::string z0_active = "all";  // "all" | "first_third"
  std::vector<std::string> methods{"kf", "smcmc"};
  int ensemble_size = 500;
  int n_retain = 500;
  int n_burn = 100;
  double q = 0.33;
  double sigma_prime = 0.0;  // 0 -> tuned by a pre-run
  int gamma = 1;
  double radius = 0.0;  // <= 0 -> infinite
  std::string taper = "gaspari-cohn";
};

struct SwSection {
  std::string fixtures_dir;
  int n_obs = 20;
  int L = 10;
  double tau = 60.0;
  int n_modes = 8;
  double sigma = 0.02;
  double sigma_y = 0.01;
  int n_drifters = 6;
  int n_retain = 400;
  int n_burn = 100;
  double q = 0.33;
  double sigma_prime = 0.0;
  std::string integrator = "heun";
  std::string advection = "bilinear";
  int reference_runs = 8;  // K free runs for the prior reference
  std::vector<int> snapshot_steps;
};

struct RunConfig {
  std::string experiment;  // linear | linear-partial | sw-known | sw-unknown
  std::uint64_t seed = 1;
  std::uint64_t repeat_seed_base = 0;  // 0 -> seed
  int repeats = 1;                     // M
  std::string out_dir = "out";
  std::vector<int> mean_coords;  // emitted coordinate subset; empty -> all
  LinearSection linear;
  SwSection sw;

  static RunConfig from_json_file(const std::string& path);
  std::uint64_t repeat_base() const { return repeat_seed_base ? repeat_seed_base : seed; }
};

struct BenchmarkRow {
  std::string method;
  int d = 0;
  std::string ensemble;  // N_e, or "N+N_burn" for the MCMC filter
  int repeats = 1;
  double fraction = 0.0;
  double seconds = 0.0;
};

struct ExperimentResult {
  int exit_code = 0;
  std::vector<BenchmarkRow> rows;
  std::map<std::string, double> metrics;
  std::vector<std::string> repeat_status;
};

/// Runs the configured experiment, writing CSV/JSON artifacts under
/// cfg.out_dir.  Repeats use seeds repeat_base + m; any repeat failure
/// yields a nonzero exit code with per-repeat status preserved.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Histogram rows over [0, max(errors)] with uniform right-open bins (the
/// last bin closed); fractions sum to one.
CsvTable emit_histogram(const std::vector<double>& errors, int bins);

/// Gridded snapshot of packed SW fields plus labelled drifter tracks.
using LabelledTrack = std::pair<std::string, std::vector<Eigen::Vector2d>>;
void emit_snapshot(const std::string& dir, const std::string& stem, const Eigen::VectorXd& state,
                   const sw::SwGrid& grid, const std::vector<LabelledTrack>& tracks, double t);

/// Mean of K independent noise-driven free runs from z0 (no assimilation);
/// `antithetic` pairs the noise streams as (W, -W) for variance tests.
std::vector<Eigen::VectorXd> prior_reference_mean(const TransitionModel& transition, int n_obs,
                                                  const Eigen::VectorXd& z0, int k_runs,
                                                  std::uint64_t seed, bool antithetic = false);

/// Synthetic SW twin data: hidden signal, drifter tracks, observations.
struct SwTwinData {
  std::vector<Eigen::VectorXd> states;                    // Z_{t_k}
  std::vector<Eigen::VectorXd> observations;              // Y_{t_k}
  std::vector<std::vector<Eigen::Vector2d>> tracks;       // positions at t_0..t_n
  std::vector<ObsSelection> selections;                   // per t_k
};

SwTwinData generate_sw_twin(const sw::SwTransitionModel& model, const Eigen::VectorXd& z0,
                            const std::vector<Eigen::Vector2d>& x0, double sigma_y, int n_obs,
                            Rng& rng);

/// Builds the SW transition model described by a config section on top of a
/// fixture.  The noise support tolerance is infinite inside filters (the
/// projection convention); standalone density checks construct their own
/// descriptor with a strict tolerance.
sw::SwTransitionModel make_sw_model(const sw::SwFixture& fixture, const SwSection& sw_cfg);

}  // namespace smcda
