#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "smcda/rng.hpp"
#include "smcda/smcmc.hpp"
#include "smcda/state_space.hpp"
#include "smcda/sw/grid.hpp"

namespace smcda {

/// N_d drifter positions (meters, domain coordinates) with stable ids.
struct DrifterSet {
  std::vector<Eigen::Vector2d> positions;
  std::vector<int> ids;
  double t = 0.0;

  int size() const { return static_cast<int>(positions.size()); }
  static DrifterSet at(std::vector<Eigen::Vector2d> positions, double t = 0.0);
};

/// Per-drifter nearest grid node and the flat state-vector indices of the
/// u and v values at that node.
struct ObsSelection {
  struct Node {
    int i = 0, j = 0;       // 1-based grid node
    int u_flat = 0, v_flat = 0;  // 0-based indices into the packed state
  };
  std::vector<Node> nodes;

  int obs_dim() const { return 2 * static_cast<int>(nodes.size()); }
};

enum class AdvectionMode { Bilinear, NearestNode };

/// Clamps a position to the hull of the physical nodes; returns true if it moved.
bool clamp_to_domain(Eigen::Vector2d& p, const sw::SwGrid& grid);

/// Velocity (u, v) read from a packed state at an arbitrary position;
/// bilinear interpolation of the four surrounding nodes (default) or the
/// nearest-node value behind the sensitivity flag.
Eigen::Vector2d velocity_at(const Eigen::VectorXd& state, const sw::SwGrid& grid,
                            const Eigen::Vector2d& pos, AdvectionMode mode);

/// One Euler increment x <- x + h(x, Z) tau for every position; out-of-domain
/// results are clamped and counted.
long advect_step_inplace(std::vector<Eigen::Vector2d>& positions, const Eigen::VectorXd& state,
                         const sw::SwGrid& grid, double tau, AdvectionMode mode);

/// L Euler increments against the supplied per-inner-step velocity states.
DrifterSet advect_drifters(const DrifterSet& drifters,
                           std::span<const Eigen::VectorXd> states_per_inner_step,
                           const sw::SwGrid& grid, double tau,
                           AdvectionMode mode = AdvectionMode::Bilinear,
                           long* clamp_count = nullptr);

/// Nearest of the four surrounding nodes per drifter; ties break to the
/// smallest i, then smallest j.
ObsSelection select_observed_indices(const DrifterSet& drifters, const sw::SwGrid& grid);
ObsSelection select_observed_indices(const std::vector<Eigen::Vector2d>& positions,
                                     const sw::SwGrid& grid);

/// Gathers (u, v) per drifter in id order into a 2*N_d vector; adds
/// N(0, sigma_y^2) noise when an rng is supplied.
Eigen::VectorXd observe(const Eigen::VectorXd& state, const ObsSelection& sel, double sigma_y,
                        Rng* rng = nullptr);

/// Isotropic Gaussian log-likelihoods (dropped constant); the unknown-
/// location variant recomputes the selection from the predicted positions.
double likelihood_known(const Eigen::VectorXd& state, const Eigen::VectorXd& y,
                        const ObsSelection& sel, double sigma_y);
double likelihood_unknown(const Eigen::VectorXd& state, const Eigen::VectorXd& y,
                          const std::vector<Eigen::Vector2d>& xbar, const sw::SwGrid& grid,
                          double sigma_y);

/// Known-locations observation model: one selection per observation time,
/// built from the (known) drifter tracks.
class DrifterObservationModel final : public ObservationModel {
 public:
  DrifterObservationModel(std::vector<ObsSelection> selections_per_k, double sigma_y);

  Eigen::Index obs_dim() const override;
  double noise_scale() const override { return sigma_y_; }
  Eigen::VectorXd observe_mean(const Eigen::VectorXd& z, int k) const override;

 private:
  std::vector<ObsSelection> selections_;
  double sigma_y_;
};

/// Unknown-locations likelihood factory: G((z, xbar), y) with the selection
/// recomputed from xbar each step.
class DrifterLikelihoodFactory final : public LocationLikelihoodFactory {
 public:
  DrifterLikelihoodFactory(const sw::SwGrid& grid, double sigma_y)
      : grid_(grid), sigma_y_(sigma_y) {}

  LogLik make(const std::vector<Eigen::Vector2d>& xbar, const Eigen::VectorXd& y,
              int k) const override;

 private:
  sw::SwGrid grid_;
  double sigma_y_;
};

}  // namespace smcda
