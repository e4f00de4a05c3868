#pragma once

#include <memory>
#include <vector>

#include "smcda/drifters.hpp"
#include "smcda/state_space.hpp"
#include "smcda/sw/noise.hpp"
#include "smcda/sw/solver.hpp"
#include "smcda/time_grid.hpp"

namespace smcda::sw {

/// Shallow-water state-space model: the deterministic flow is the FV solver
/// over one observation interval (L inner steps) and the process noise is
/// the sine-mode forcing added at observation times.
class SwTransitionModel final : public LagrangianTransitionModel {
 public:
  SwTransitionModel(SwGrid grid, SwParams params, BoundaryForcing bc, TimeGrid time_grid,
                    std::shared_ptr<const SineModeNoise> noise,
                    Integrator integrator = Integrator::Heun,
                    AdvectionMode advection = AdvectionMode::Bilinear);

  Eigen::Index dim() const override { return grid_.state_dim(); }
  const NoiseModel& process_noise(int) const override { return *noise_; }
  Eigen::VectorXd flow(const Eigen::VectorXd& prev, int k) const override;
  Eigen::VectorXd flow_advect(const Eigen::VectorXd& prev, int k,
                              std::vector<Eigen::Vector2d>& positions,
                              long* clamp_count) const override;

  const SwGrid& grid() const { return grid_; }
  const SwParams& params() const { return params_; }
  const BoundaryForcing& boundary() const { return bc_; }
  const TimeGrid& time_grid() const { return time_grid_; }
  const SineModeNoise& noise() const { return *noise_; }
  Integrator integrator() const { return integrator_; }

 private:
  SwGrid grid_;
  SwParams params_;
  BoundaryForcing bc_;
  TimeGrid time_grid_;
  std::shared_ptr<const SineModeNoise> noise_;
  Integrator integrator_;
  AdvectionMode advection_;
};

}  // namespace smcda::sw
