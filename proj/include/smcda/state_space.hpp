#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "smcda/noise.hpp"
#include "smcda/rng.hpp"
#include "smcda/time_grid.hpp"

namespace smcda {

/// Markov transition over one observation interval: a deterministic flow Phi
/// plus additive zero-mean Gaussian noise W_k with descriptor Q, so that
/// f_k(z', z) is the density of z - Phi(z', t_{k-1}, t_k) under Q.
/// All intervals are indexed by k in 1..n_obs.
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;

  virtual Eigen::Index dim() const = 0;
  virtual const NoiseModel& process_noise(int k) const = 0;
  virtual Eigen::VectorXd flow(const Eigen::VectorXd& prev, int k) const = 0;

  Eigen::VectorXd sample(const Eigen::VectorXd& prev, int k, Rng& rng) const {
    return flow(prev, k) + process_noise(k).sample(rng);
  }

  double log_density(const Eigen::VectorXd& prev, const Eigen::VectorXd& next, int k) const;
};

/// Transition whose flow also transports Lagrangian observer positions
/// through the inner integration steps of the interval.
class LagrangianTransitionModel : public TransitionModel {
 public:
  /// Advances `positions` through the L inner steps of the deterministic flow
  /// (explicit Euler on the observer kinematics) and returns the flowed state.
  /// Positions leaving the domain are clamped; clamp events are counted.
  virtual Eigen::VectorXd flow_advect(const Eigen::VectorXd& prev, int k,
                                      std::vector<Eigen::Vector2d>& positions,
                                      long* clamp_count) const = 0;
};

class ObservationModel {
 public:
  virtual ~ObservationModel() = default;

  virtual Eigen::Index obs_dim() const = 0;
  virtual double noise_scale() const = 0;  // sigma_y
  virtual Eigen::VectorXd observe_mean(const Eigen::VectorXd& z, int k) const = 0;

  /// Isotropic Gaussian log-likelihood around observe_mean, dropped constant.
  virtual double log_likelihood(const Eigen::VectorXd& z, const Eigen::VectorXd& y, int k) const;

  Eigen::VectorXd sample(const Eigen::VectorXd& z, int k, Rng& rng) const;
};

/// log N(next; mean_fn(prev), Q) under the dropped-constant convention.
double gaussian_transition_logdensity(
    const Eigen::VectorXd& prev, const Eigen::VectorXd& next,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& mean_fn,
    const NoiseModel& q);

/// Generic transition built from a flow callback and a noise descriptor.
class GaussianTransitionModel final : public TransitionModel {
 public:
  using FlowFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

  GaussianTransitionModel(FlowFn flow, std::shared_ptr<const NoiseModel> q)
      : flow_(std::move(flow)), q_(std::move(q)) {}

  Eigen::Index dim() const override { return q_->dim(); }
  const NoiseModel& process_noise(int) const override { return *q_; }
  Eigen::VectorXd flow(const Eigen::VectorXd& prev, int k) const override {
    return flow_(prev, k);
  }

 private:
  FlowFn flow_;
  std::shared_ptr<const NoiseModel> q_;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> states;        // Z_{t_1} .. Z_{t_n}
  std::vector<Eigen::VectorXd> observations;  // Y_{t_1} .. Y_{t_n}
};

/// Twin-experiment data generator: runs the transition recursion from z0 and
/// draws one observation per t_k.  Bit-reproducible for a fixed seed.
Trajectory simulate_trajectory(const TransitionModel& transition, const ObservationModel& observation,
                               const TimeGrid& grid, const Eigen::VectorXd& z0, Rng& rng);

}  // namespace smcda
