#pragma once

#include <stdexcept>
#include <vector>

namespace smcda {

/// Observation time grid: times t_0 = 0 < t_1 < ... < t_n with L inner
/// integration steps per observation interval.
struct TimeGrid {
  std::vector<double> times;  // size n_obs() + 1, times[0] == 0
  int inner_steps = 1;        // L

  int n_obs() const { return static_cast<int>(times.size()) - 1; }

  /// Inner step size tau_k = (t_k - t_{k-1}) / L for interval k in 1..n_obs.
  double tau(int k) const { return (times[k] - times[k - 1]) / inner_steps; }

  static TimeGrid uniform(int n_obs, double obs_dt, int inner_steps = 1) {
    TimeGrid g;
    g.inner_steps = inner_steps;
    g.times.resize(n_obs + 1);
    for (int k = 0; k <= n_obs; ++k) g.times[k] = k * obs_dt;
    g.validate();
    return g;
  }

  void validate() const {
    if (inner_steps < 1) throw std::invalid_argument("TimeGrid: L must be >= 1");
    if (times.empty() || times.front() != 0.0)
      throw std::invalid_argument("TimeGrid: times must start at t_0 = 0");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1]))
        throw std::invalid_argument("TimeGrid: times must be strictly increasing");
  }
};

}  // namespace smcda
