#include <doctest.h>

#include <cmath>

#include "smcda/drifters.hpp"

using namespace smcda;
using sw::SwGrid;

namespace {

/// Packed state with uniform fields (eta, u, v).
Eigen::VectorXd uniform_state(const SwGrid& grid, double eta, double u, double v) {
  const int fs = grid.field_size();
  Eigen::VectorXd z(grid.state_dim());
  z.segment(0, fs).setConstant(eta);
  z.segment(fs, fs).setConstant(u);
  z.segment(2 * fs, fs).setConstant(v);
  return z;
}

/// u(x) = slope * x, v = 0.
Eigen::VectorXd linear_u_state(const SwGrid& grid, double slope) {
  const int fs = grid.field_size();
  Eigen::VectorXd z = uniform_state(grid, 10.0, 0.0, 0.0);
  for (int i = 1; i <= grid.nx; ++i)
    for (int j = 1; j <= grid.ny; ++j) z[fs + grid.flat(i, j)] = slope * grid.x_of(i);
  return z;
}

}  // namespace

TEST_CASE("zero velocity leaves drifters unchanged") {
  const SwGrid grid{8, 8, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 5.0, 0.0, 0.0);
  DrifterSet d = DrifterSet::at({{1500.0, 2500.0}, {3000.0, 500.0}});
  std::vector<Eigen::VectorXd> states(10, state);
  const DrifterSet out = advect_drifters(d, states, grid, 60.0);
  for (int m = 0; m < d.size(); ++m)
    CHECK((out.positions[m] - d.positions[m]).norm() == 0.0);
}

TEST_CASE("constant field advection is exact") {
  const SwGrid grid{10, 10, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 5.0, 0.5, -0.5);
  DrifterSet d = DrifterSet::at({{4000.0, 5000.0}});
  std::vector<Eigen::VectorXd> states(10, state);
  const DrifterSet out = advect_drifters(d, states, grid, 60.0);
  CHECK(out.positions[0].x() == doctest::Approx(4000.0 + 300.0).epsilon(1e-14));
  CHECK(out.positions[0].y() == doctest::Approx(5000.0 - 300.0).epsilon(1e-14));
}

TEST_CASE("linear field: Euler error stays within the first-order bound") {
  // Oracle: dx/dt = a x has the exact solution x0 exp(a t); explicit Euler
  // gives x0 (1 + a tau)^L with error below 2 a^2 t tau x0 for a*tau <= 0.01.
  const SwGrid grid{64, 4, 1000.0, 1000.0};
  const double a = 1e-4;  // 1/s
  const Eigen::VectorXd state = linear_u_state(grid, a);
  const double tau = 50.0;
  const int L = 20;
  DrifterSet d = DrifterSet::at({{10000.0, 2000.0}});
  std::vector<Eigen::VectorXd> states(L, state);
  const DrifterSet out = advect_drifters(d, states, grid, tau);
  const double t = tau * L;
  const double exact = 10000.0 * std::exp(a * t);
  const double bound = 2.0 * a * a * t * tau * 10000.0;
  CHECK(std::abs(out.positions[0].x() - exact) < bound);
}

TEST_CASE("positions are clamped to the domain and counted") {
  const SwGrid grid{6, 6, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 5.0, 2.0, 0.0);
  DrifterSet d = DrifterSet::at({{4900.0, 2000.0}});
  std::vector<Eigen::VectorXd> states(5, state);
  long clamps = 0;
  const DrifterSet out = advect_drifters(d, states, grid, 60.0, AdvectionMode::Bilinear, &clamps);
  CHECK(out.positions[0].x() == grid.max_x());
  CHECK(clamps > 0);
}

TEST_CASE("selection: a drifter exactly on a node picks that node") {
  const SwGrid grid{9, 9, 500.0, 500.0};
  const ObsSelection sel = select_observed_indices(std::vector<Eigen::Vector2d>{{1000.0, 1500.0}}, grid);
  CHECK(sel.nodes[0].i == 3);
  CHECK(sel.nodes[0].j == 4);
}

TEST_CASE("selection: exact cell-centre ties break to the smallest (i, j)") {
  const SwGrid grid{9, 9, 500.0, 500.0};
  // Centre of the square formed by nodes (2,2),(3,2),(2,3),(3,3).
  const ObsSelection sel = select_observed_indices(std::vector<Eigen::Vector2d>{{750.0, 750.0}}, grid);
  CHECK(sel.nodes[0].i == 2);
  CHECK(sel.nodes[0].j == 2);
}

TEST_CASE("selection beats an exhaustive nearest-node scan") {
  const SwGrid grid{12, 9, 700.0, 900.0};
  Rng rng(44);
  std::vector<Eigen::Vector2d> positions;
  for (int t = 0; t < 200; ++t)
    positions.emplace_back(rng.uniform() * grid.max_x(), rng.uniform() * grid.max_y());
  const ObsSelection sel = select_observed_indices(positions, grid);
  for (std::size_t m = 0; m < positions.size(); ++m) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= grid.nx; ++i)
      for (int j = 1; j <= grid.ny; ++j)
        best = std::min(best, std::hypot(positions[m].x() - grid.x_of(i),
                                         positions[m].y() - grid.y_of(j)));
    const double got = std::hypot(positions[m].x() - grid.x_of(sel.nodes[m].i),
                                  positions[m].y() - grid.y_of(sel.nodes[m].j));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    CHECK(got <= std::hypot(grid.dx / 2, grid.dy / 2) + 1e-9);
  }
}

TEST_CASE("selection shifts with a whole-cell translation away from boundaries") {
  const SwGrid grid{12, 12, 800.0, 800.0};
  std::vector<Eigen::Vector2d> positions{{2100.0, 3300.0}, {4050.0, 5250.0}};
  const ObsSelection a = select_observed_indices(positions, grid);
  for (auto& p : positions) p += Eigen::Vector2d(grid.dx, grid.dy);
  const ObsSelection b = select_observed_indices(positions, grid);
  for (std::size_t m = 0; m < positions.size(); ++m) {
    CHECK(b.nodes[m].i == a.nodes[m].i + 1);
    CHECK(b.nodes[m].j == a.nodes[m].j + 1);
  }
}

TEST_CASE("observe gathers (u, v) pairs in drifter order") {
  const SwGrid grid{5, 5, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 3.0, 1.0, 2.0);
  const ObsSelection sel =
      select_observed_indices(std::vector<Eigen::Vector2d>{{0.0, 0.0}, {2000.0, 2000.0}}, grid);
  const Eigen::VectorXd y = observe(state, sel, 0.0, nullptr);
  CHECK(y.size() == 4);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 1.0);
  CHECK(y[3] == 2.0);
}

TEST_CASE("observe with sigma_y = 0 and an rng equals the noiseless read") {
  const SwGrid grid{5, 5, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 3.0, 0.7, -0.4);
  const ObsSelection sel = select_observed_indices(std::vector<Eigen::Vector2d>{{1500.0, 700.0}}, grid);
  Rng rng(2);
  CHECK(observe(state, sel, 0.0, &rng) == observe(state, sel, 0.0, nullptr));
}

TEST_CASE("observation noise variance is close to sigma_y^2") {
  const SwGrid grid{5, 5, 1000.0, 1000.0};
  const Eigen::VectorXd state = uniform_state(grid, 3.0, 0.0, 0.0);
  const ObsSelection sel = select_observed_indices(std::vector<Eigen::Vector2d>{{1500.0, 700.0}}, grid);
  Rng rng(3);
  const double sy = 0.25;
  double acc = 0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd y = observe(state, sel, sy, &rng);
    acc += y.squaredNorm() / 2.0;
  }
  CHECK(std::abs(acc / n - sy * sy) < 0.05 * sy * sy);
}

TEST_CASE("likelihoods: maximal at the observation, -d_y/2 at one-sigma residuals") {
  const SwGrid grid{6, 6, 500.0, 500.0};
  const Eigen::VectorXd state = uniform_state(grid, 2.0, 0.3, -0.1);
  const std::vector<Eigen::Vector2d> pos{{800.0, 900.0}, {2100.0, 400.0}};
  const ObsSelection sel = select_observed_indices(pos, grid);
  const double sy = 0.05;
  const Eigen::VectorXd y0 = observe(state, sel, 0.0, nullptr);
  CHECK(likelihood_known(state, y0, sel, sy) == 0.0);
  const Eigen::VectorXd y1 = y0.array() + sy;
  CHECK(likelihood_known(state, y1, sel, sy) == doctest::Approx(-2.0));  // -d_y/2 with d_y = 4

  // Dense multivariate-normal oracle on random inputs.
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd y = y0 + 0.1 * rng.normal_vector(4);
    const double expected = -0.5 * (y - y0).squaredNorm() / (sy * sy);
    CHECK(likelihood_known(state, y, sel, sy) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("unknown-location likelihood equals the known one at the true positions") {
  const SwGrid grid{7, 7, 600.0, 600.0};
  Rng rng(9);
  Eigen::VectorXd state = uniform_state(grid, 2.0, 0.0, 0.0);
  for (Eigen::Index i = grid.field_size(); i < state.size(); ++i) state[i] = 0.2 * rng.normal();
  const std::vector<Eigen::Vector2d> pos{{1000.0, 2000.0}, {2500.0, 3100.0}};
  const ObsSelection sel = select_observed_indices(pos, grid);
  const Eigen::VectorXd y = observe(state, sel, 0.0, nullptr).array() + 0.01;
  CHECK(likelihood_unknown(state, y, pos, grid, 0.05) ==
        doctest::Approx(likelihood_known(state, y, sel, 0.05)).epsilon(1e-12));
}
