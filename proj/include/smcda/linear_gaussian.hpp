#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "smcda/rng.hpp"
#include "smcda/state_space.hpp"

namespace smcda {

/// Discrete-time linear-Gaussian benchmark model
///   Z_{n+1} = A Z_n + sigma_z W_{n+1},   Y_m = C Z_{mL} + sigma_y V_m,
/// where C picks every r_hat-th coordinate (one unit entry per row).
struct LinearModel {
  Eigen::MatrixXd A;
  int r_hat = 1;
  int obs_interval = 1;  // L
  double sigma_z = 1.0;
  double sigma_y = 1.0;
  Eigen::VectorXd z0;

  int dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return dim() / r_hat; }
  std::vector<int> observed_indices() const;  // 0-based: r_hat-1, 2*r_hat-1, ...
  Eigen::MatrixXd dense_C() const;

  /// True when A is exactly a scalar multiple of the identity; enables the
  /// diagonal covariance recursions.
  std::optional<double> scalar_coefficient() const;

  void validate() const;  // spectral radius <= 1, shapes, positive scales
};

LinearModel make_scaled_identity_model(int d, double a, int r_hat, int obs_interval,
                                       double sigma_z, double sigma_y);

/// Transition/observation adaptors so the MCMC filter can consume the model.
/// The transition spans one observation interval (L model steps): the flow is
/// A^L z and the noise covariance is sigma_z^2 * sum_l A^l (A^l)^T.
std::shared_ptr<TransitionModel> make_linear_transition(const LinearModel& model);
std::shared_ptr<ObservationModel> make_linear_observation(const LinearModel& model);

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct KalmanOptions {
  /// Initial covariance; empty means P0 = 0 (z0 known exactly).
  Eigen::MatrixXd P0;
};

/// Exact filter: standard predict/update recursion.  The pre-fit residual
/// system is solved via Cholesky, never by forming an inverse.
std::vector<GaussianBelief> kalman_filter(const LinearModel& model,
                                          const std::vector<Eigen::VectorXd>& observations,
                                          const KalmanOptions& options = {});

/// Simulates T = n_obs * L model steps from z0, returning the states at
/// observation times and the noisy observations.
Trajectory simulate_linear(const LinearModel& model, int n_obs, Rng& rng);

/// Fraction over all times and coordinates of |filter - reference| <= sigma_y/2.
double accuracy_metric(const std::vector<Eigen::VectorXd>& filter_means,
                       const std::vector<Eigen::VectorXd>& reference_means, double sigma_y);

}  // namespace smcda
