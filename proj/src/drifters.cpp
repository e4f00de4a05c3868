#include "smcda/drifters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smcda {

DrifterSet DrifterSet::at(std::vector<Eigen::Vector2d> positions, double t) {
  DrifterSet d;
  d.positions = std::move(positions);
  d.ids.resize(d.positions.size());
  for (std::size_t i = 0; i < d.ids.size(); ++i) d.ids[i] = static_cast<int>(i);
  d.t = t;
  return d;
}

bool clamp_to_domain(Eigen::Vector2d& p, const sw::SwGrid& grid) {
  const double x = std::clamp(p.x(), 0.0, grid.max_x());
  const double y = std::clamp(p.y(), 0.0, grid.max_y());
  const bool moved = x != p.x() || y != p.y();
  p.x() = x;
  p.y() = y;
  return moved;
}

namespace {

struct CellLocation {
  int i0, j0;          // lower-left node (1-based), i0 in 1..nx-1
  double fx, fy;       // fractional offsets in [0, 1]
};

CellLocation locate(const Eigen::Vector2d& pos, const sw::SwGrid& grid) {
  CellLocation c;
  const double gx = pos.x() / grid.dx;
  const double gy = pos.y() / grid.dy;
  c.i0 = std::clamp(static_cast<int>(std::floor(gx)), 0, grid.nx - 2) + 1;
  c.j0 = std::clamp(static_cast<int>(std::floor(gy)), 0, grid.ny - 2) + 1;
  c.fx = gx - (c.i0 - 1);
  c.fy = gy - (c.j0 - 1);
  return c;
}

}  // namespace

Eigen::Vector2d velocity_at(const Eigen::VectorXd& state, const sw::SwGrid& grid,
                            const Eigen::Vector2d& pos, AdvectionMode mode) {
  const int fs = grid.field_size();
  const CellLocation c = locate(pos, grid);
  auto u_at = [&](int i, int j) { return state[fs + grid.flat(i, j)]; };
  auto v_at = [&](int i, int j) { return state[2 * fs + grid.flat(i, j)]; };
  if (mode == AdvectionMode::NearestNode) {
    const int i = c.fx <= 0.5 ? c.i0 : c.i0 + 1;
    const int j = c.fy <= 0.5 ? c.j0 : c.j0 + 1;
    return {u_at(i, j), v_at(i, j)};
  }
  const double w00 = (1 - c.fx) * (1 - c.fy);
  const double w10 = c.fx * (1 - c.fy);
  const double w01 = (1 - c.fx) * c.fy;
  const double w11 = c.fx * c.fy;
  return {w00 * u_at(c.i0, c.j0) + w10 * u_at(c.i0 + 1, c.j0) + w01 * u_at(c.i0, c.j0 + 1) +
              w11 * u_at(c.i0 + 1, c.j0 + 1),
          w00 * v_at(c.i0, c.j0) + w10 * v_at(c.i0 + 1, c.j0) + w01 * v_at(c.i0, c.j0 + 1) +
              w11 * v_at(c.i0 + 1, c.j0 + 1)};
}

long advect_step_inplace(std::vector<Eigen::Vector2d>& positions, const Eigen::VectorXd& state,
                         const sw::SwGrid& grid, double tau, AdvectionMode mode) {
  long clamped = 0;
  for (auto& p : positions) {
    p += tau * velocity_at(state, grid, p, mode);
    if (clamp_to_domain(p, grid)) ++clamped;
  }
  return clamped;
}

DrifterSet advect_drifters(const DrifterSet& drifters,
                           std::span<const Eigen::VectorXd> states_per_inner_step,
                           const sw::SwGrid& grid, double tau, AdvectionMode mode,
                           long* clamp_count) {
  DrifterSet out = drifters;
  long clamped = 0;
  for (const auto& state : states_per_inner_step)
    clamped += advect_step_inplace(out.positions, state, grid, tau, mode);
  out.t = drifters.t + tau * static_cast<double>(states_per_inner_step.size());
  if (clamp_count) *clamp_count += clamped;
  return out;
}

ObsSelection select_observed_indices(const std::vector<Eigen::Vector2d>& positions,
                                     const sw::SwGrid& grid) {
  const int fs = grid.field_size();
  ObsSelection sel;
  sel.nodes.reserve(positions.size());
  for (const auto& raw : positions) {
    Eigen::Vector2d pos = raw;
    if (!pos.allFinite()) throw std::invalid_argument("select_observed_indices: non-finite position");
    clamp_to_domain(pos, grid);
    const CellLocation c = locate(pos, grid);
    // Scan the four surrounding nodes in (i, j) order; strict improvement
    // keeps the earliest, which is the documented tie-break.
    ObsSelection::Node best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int i = c.i0; i <= c.i0 + 1; ++i)
      for (int j = c.j0; j <= c.j0 + 1; ++j) {
        const double dist =
            std::hypot(pos.x() - grid.x_of(i), pos.y() - grid.y_of(j));
        if (dist < best_dist) {
          best_dist = dist;
          best = {i, j, fs + grid.flat(i, j), 2 * fs + grid.flat(i, j)};
        }
      }
    sel.nodes.push_back(best);
  }
  return sel;
}

ObsSelection select_observed_indices(const DrifterSet& drifters, const sw::SwGrid& grid) {
  return select_observed_indices(drifters.positions, grid);
}

Eigen::VectorXd observe(const Eigen::VectorXd& state, const ObsSelection& sel, double sigma_y,
                        Rng* rng) {
  Eigen::VectorXd y(sel.obs_dim());
  for (std::size_t m = 0; m < sel.nodes.size(); ++m) {
    const auto& node = sel.nodes[m];
    if (node.u_flat < 0 || node.v_flat >= state.size())
      throw std::out_of_range("observe: selection index out of bounds");
    y[2 * m] = state[node.u_flat];
    y[2 * m + 1] = state[node.v_flat];
  }
  if (rng && sigma_y > 0) y += sigma_y * rng->normal_vector(y.size());
  return y;
}

double likelihood_known(const Eigen::VectorXd& state, const Eigen::VectorXd& y,
                        const ObsSelection& sel, double sigma_y) {
  if (y.size() != sel.obs_dim())
    throw std::invalid_argument("likelihood_known: observation length mismatch");
  double quad = 0.0;
  for (std::size_t m = 0; m < sel.nodes.size(); ++m) {
    const auto& node = sel.nodes[m];
    const double ru = y[2 * m] - state[node.u_flat];
    const double rv = y[2 * m + 1] - state[node.v_flat];
    quad += ru * ru + rv * rv;
  }
  return -0.5 * quad / (sigma_y * sigma_y);
}

double likelihood_unknown(const Eigen::VectorXd& state, const Eigen::VectorXd& y,
                          const std::vector<Eigen::Vector2d>& xbar, const sw::SwGrid& grid,
                          double sigma_y) {
  return likelihood_known(state, y, select_observed_indices(xbar, grid), sigma_y);
}

DrifterObservationModel::DrifterObservationModel(std::vector<ObsSelection> selections_per_k,
                                                 double sigma_y)
    : selections_(std::move(selections_per_k)), sigma_y_(sigma_y) {
  if (selections_.empty())
    throw std::invalid_argument("DrifterObservationModel: no selections");
}

Eigen::Index DrifterObservationModel::obs_dim() const { return selections_.front().obs_dim(); }

Eigen::VectorXd DrifterObservationModel::observe_mean(const Eigen::VectorXd& z, int k) const {
  if (k < 1 || k > static_cast<int>(selections_.size()))
    throw std::out_of_range("DrifterObservationModel: no selection for step " + std::to_string(k));
  return observe(z, selections_[k - 1], 0.0, nullptr);
}

LogLik DrifterLikelihoodFactory::make(const std::vector<Eigen::Vector2d>& xbar,
                                      const Eigen::VectorXd& y, int) const {
  ObsSelection sel = select_observed_indices(xbar, grid_);
  const double sigma_y = sigma_y_;
  return [sel = std::move(sel), y, sigma_y](const Eigen::VectorXd& z) {
    return likelihood_known(z, y, sel, sigma_y);
  };
}

}  // namespace smcda
