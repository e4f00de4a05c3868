#include "smcda/sw/model.hpp"

#include <stdexcept>

namespace smcda::sw {

SwTransitionModel::SwTransitionModel(SwGrid grid, SwParams params, BoundaryForcing bc,
                                     TimeGrid time_grid,
                                     std::shared_ptr<const SineModeNoise> noise,
                                     Integrator integrator, AdvectionMode advection)
    : grid_(grid),
      params_(std::move(params)),
      bc_(std::move(bc)),
      time_grid_(std::move(time_grid)),
      noise_(std::move(noise)),
      integrator_(integrator),
      advection_(advection) {
  grid_.validate();
  time_grid_.validate();
  if (!noise_) throw std::invalid_argument("SwTransitionModel: noise descriptor missing");
  if (noise_->dim() != grid_.state_dim())
    throw std::invalid_argument("SwTransitionModel: noise dimension mismatch");
}

Eigen::VectorXd SwTransitionModel::flow(const Eigen::VectorXd& prev, int k) const {
  SwState s = unpack_state(prev, grid_);
  s = sw_flow(s, params_, grid_, bc_, time_grid_.times[k - 1], time_grid_.times[k],
              time_grid_.inner_steps, integrator_);
  return pack_state(s, grid_);
}

Eigen::VectorXd SwTransitionModel::flow_advect(const Eigen::VectorXd& prev, int k,
                                               std::vector<Eigen::Vector2d>& positions,
                                               long* clamp_count) const {
  const double tau = time_grid_.tau(k);
  const double t0 = time_grid_.times[k - 1];
  SwState s = unpack_state(prev, grid_);
  Eigen::VectorXd packed = prev;
  long clamped = 0;
  for (int l = 0; l < time_grid_.inner_steps; ++l) {
    // Positions advance with the velocity field at the start of the step.
    clamped += advect_step_inplace(positions, packed, grid_, tau, advection_);
    s = sw_step(s, params_, grid_, bc_, t0 + l * tau, tau, integrator_);
    packed = pack_state(s, grid_);
  }
  if (clamp_count) *clamp_count += clamped;
  return packed;
}

}  // namespace smcda::sw
