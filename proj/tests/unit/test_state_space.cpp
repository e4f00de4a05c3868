#include <doctest.h>

#include <memory>

#include "smcda/linear_gaussian.hpp"
#include "smcda/smcmc.hpp"
#include "smcda/state_space.hpp"

using namespace smcda;

TEST_CASE("gaussian_transition_logdensity at the mean is the dropped-constant maximum") {
  auto mean_fn = [](const Eigen::VectorXd& z) { return (2.0 * z.array()).matrix().eval(); };
  DiagonalNoise q(Eigen::VectorXd::Constant(3, 0.7));
  Eigen::VectorXd prev(3);
  prev << 1.0, -2.0, 0.5;
  CHECK(gaussian_transition_logdensity(prev, mean_fn(prev), mean_fn, q) == 0.0);
}

TEST_CASE("gaussian_transition_logdensity d=1 unit case") {
  auto mean_fn = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1).eval(); };
  DiagonalNoise q(Eigen::VectorXd::Constant(1, 1.0));
  CHECK(gaussian_transition_logdensity(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0),
                                       mean_fn, q) == doctest::Approx(-0.5));
}

TEST_CASE("gaussian_transition_logdensity rejects non-finite input") {
  auto mean_fn = [](const Eigen::VectorXd& z) { return z; };
  DiagonalNoise q(Eigen::VectorXd::Constant(1, 1.0));
  Eigen::VectorXd bad = Eigen::VectorXd::Constant(1, std::nan(""));
  CHECK_THROWS(gaussian_transition_logdensity(bad, Eigen::VectorXd::Zero(1), mean_fn, q));
}

TEST_CASE("simulate_trajectory is deterministic given a seed") {
  LinearModel model = make_scaled_identity_model(3, 0.5, 1, 1, 0.2, 0.1);
  model.z0 = Eigen::VectorXd::Constant(3, 0.3);
  auto trans = make_linear_transition(model);
  auto obs = make_linear_observation(model);
  const TimeGrid grid = TimeGrid::uniform(8, 1.0);
  Rng r1(99), r2(99);
  const Trajectory a = simulate_trajectory(*trans, *obs, grid, model.z0, r1);
  const Trajectory b = simulate_trajectory(*trans, *obs, grid, model.z0, r2);
  for (int k = 0; k < 8; ++k) {
    CHECK(a.states[k] == b.states[k]);
    CHECK(a.observations[k] == b.observations[k]);
  }
}

TEST_CASE("simulate_trajectory with zero noise and identity flow is constant") {
  auto trans = std::make_shared<GaussianTransitionModel>(
      [](const Eigen::VectorXd& z, int) { return z; }, std::make_shared<DiagonalNoise>(2, 1e-300));
  LinearModel model = make_scaled_identity_model(2, 1.0, 1, 1, 1.0, 0.0);
  auto obs = make_linear_observation(model);
  Eigen::VectorXd z0(2);
  z0 << 0.4, -0.8;
  Rng rng(1);
  const Trajectory t = simulate_trajectory(*trans, *obs, TimeGrid::uniform(5, 1.0), z0, rng);
  for (const auto& z : t.states) CHECK((z - z0).lpNorm<Eigen::Infinity>() < 1e-12);
  for (const auto& y : t.observations) CHECK((y - z0).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("simulated moments match the analytic covariance recursion (d=2)") {
  // Lyapunov oracle: P_{k} = a^2 P_{k-1} + sigma_z^2 I elementwise for A = a I.
  const double a = 0.7, sz = 0.3;
  LinearModel model = make_scaled_identity_model(2, a, 1, 1, sz, 0.01);
  model.z0 = Eigen::VectorXd::Zero(2);
  auto trans = make_linear_transition(model);
  auto obs = make_linear_observation(model);
  const int t_end = 10, reps = 10000;
  double var_oracle = 0.0;
  for (int k = 0; k < t_end; ++k) var_oracle = a * a * var_oracle + sz * sz;

  Rng rng(123);
  double mean_acc = 0.0, var_acc = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Trajectory t = simulate_trajectory(*trans, *obs, TimeGrid::uniform(t_end, 1.0),
                                             model.z0, rng);
    mean_acc += t.states.back()[0];
    var_acc += t.states.back()[0] * t.states.back()[0];
  }
  const double mean = mean_acc / reps;
  const double var = var_acc / reps - mean * mean;
  // 4 sigma Monte Carlo bands.
  CHECK(std::abs(mean) < 4.0 * std::sqrt(var_oracle / reps));
  CHECK(std::abs(var - var_oracle) < 4.0 * var_oracle * std::sqrt(2.0 / reps));
}

TEST_CASE("estimate is the plain sample average") {
  SampleSet s;
  s.samples = Eigen::MatrixXd::Zero(1, 4);
  s.samples << 1.0, 2.0, 3.0, 4.0;
  CHECK(estimate(s, [](const Eigen::VectorXd&) { return 1.0; }) == 1.0);
  CHECK(estimate(s, [](const Eigen::VectorXd& z) { return z[0]; }) == doctest::Approx(2.5));
}
