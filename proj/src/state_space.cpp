#include "smcda/state_space.hpp"

#include <stdexcept>
#include <string>

namespace smcda {

double TransitionModel::log_density(const Eigen::VectorXd& prev, const Eigen::VectorXd& next,
                                    int k) const {
  if (!prev.allFinite() || !next.allFinite())
    throw std::invalid_argument("TransitionModel::log_density: non-finite state");
  return process_noise(k).log_density(next - flow(prev, k));
}

double ObservationModel::log_likelihood(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                        int k) const {
  const Eigen::VectorXd mean = observe_mean(z, k);
  if (y.size() != mean.size())
    throw std::invalid_argument("ObservationModel::log_likelihood: dimension mismatch");
  const double s = noise_scale();
  return -0.5 * (y - mean).squaredNorm() / (s * s);
}

Eigen::VectorXd ObservationModel::sample(const Eigen::VectorXd& z, int k, Rng& rng) const {
  Eigen::VectorXd y = observe_mean(z, k);
  const double s = noise_scale();
  if (s > 0.0) y += s * rng.normal_vector(y.size());
  return y;
}

double gaussian_transition_logdensity(
    const Eigen::VectorXd& prev, const Eigen::VectorXd& next,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& mean_fn, const NoiseModel& q) {
  if (!prev.allFinite() || !next.allFinite())
    throw std::invalid_argument("gaussian_transition_logdensity: non-finite input");
  return q.log_density(next - mean_fn(prev));
}

Trajectory simulate_trajectory(const TransitionModel& transition,
                               const ObservationModel& observation, const TimeGrid& grid,
                               const Eigen::VectorXd& z0, Rng& rng) {
  if (!z0.allFinite()) throw std::invalid_argument("simulate_trajectory: z0 not finite");
  Trajectory out;
  const int n = grid.n_obs();
  out.states.reserve(n);
  out.observations.reserve(n);
  Eigen::VectorXd z = z0;
  for (int k = 1; k <= n; ++k) {
    z = transition.sample(z, k, rng);
    if (!z.allFinite())
      throw std::runtime_error("simulate_trajectory: non-finite state at k=" + std::to_string(k));
    out.states.push_back(z);
    out.observations.push_back(observation.sample(z, k, rng));
  }
  return out;
}

}  // namespace smcda
