#include "smcda/sw/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace smcda::sw {

SwState SwState::zero(const SwGrid& grid) {
  SwState s;
  s.eta = Eigen::ArrayXXd::Zero(grid.full_y(), grid.full_x());
  s.hu = Eigen::ArrayXXd::Zero(grid.full_y(), grid.full_x());
  s.hv = Eigen::ArrayXXd::Zero(grid.full_y(), grid.full_x());
  return s;
}

double SwParams::coriolis_from_latitude(double psi0_radians) {
  constexpr double earth_rotation = 7.29e-5;  // s^-1
  return 2.0 * earth_rotation * std::sin(psi0_radians);
}

BoundaryForcing BoundaryForcing::periodic() {
  BoundaryForcing bc;
  bc.kind_ = Kind::Periodic;
  return bc;
}

BoundaryForcing BoundaryForcing::dirichlet(std::vector<Frame> frames) {
  if (frames.empty()) throw std::invalid_argument("BoundaryForcing: no frames");
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (!(frames[i].t > frames[i - 1].t))
      throw std::invalid_argument("BoundaryForcing: frame times must increase");
  BoundaryForcing bc;
  bc.kind_ = Kind::Dirichlet;
  bc.frames_ = std::move(frames);
  return bc;
}

BoundaryForcing BoundaryForcing::constant_from_state(const SwState& state, const SwGrid& grid) {
  const int fy = grid.full_y();
  const int fx = grid.full_x();
  Frame f;
  f.t = 0.0;
  f.west_eta.resize(fy); f.west_u.resize(fy); f.west_v.resize(fy);
  f.east_eta.resize(fy); f.east_u.resize(fy); f.east_v.resize(fy);
  f.south_eta.resize(fx); f.south_u.resize(fx); f.south_v.resize(fx);
  f.north_eta.resize(fx); f.north_u.resize(fx); f.north_v.resize(fx);
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int j = 0; j < fy; ++j) {
    const int jj = clampi(j, 1, grid.ny);
    f.west_eta[j] = state.eta(jj, 1);
    f.west_u[j] = state.hu(jj, 1) / state.eta(jj, 1);
    f.west_v[j] = state.hv(jj, 1) / state.eta(jj, 1);
    f.east_eta[j] = state.eta(jj, grid.nx);
    f.east_u[j] = state.hu(jj, grid.nx) / state.eta(jj, grid.nx);
    f.east_v[j] = state.hv(jj, grid.nx) / state.eta(jj, grid.nx);
  }
  for (int i = 0; i < fx; ++i) {
    const int ii = clampi(i, 1, grid.nx);
    f.south_eta[i] = state.eta(1, ii);
    f.south_u[i] = state.hu(1, ii) / state.eta(1, ii);
    f.south_v[i] = state.hv(1, ii) / state.eta(1, ii);
    f.north_eta[i] = state.eta(grid.ny, ii);
    f.north_u[i] = state.hu(grid.ny, ii) / state.eta(grid.ny, ii);
    f.north_v[i] = state.hv(grid.ny, ii) / state.eta(grid.ny, ii);
  }
  return dirichlet({std::move(f)});
}

namespace {

BoundaryForcing::Frame interpolate_frames(const std::vector<BoundaryForcing::Frame>& frames,
                                          double t) {
  if (frames.size() == 1 || t <= frames.front().t) return frames.front();
  if (t >= frames.back().t) return frames.back();
  std::size_t hi = 1;
  while (frames[hi].t < t) ++hi;
  const auto& a = frames[hi - 1];
  const auto& b = frames[hi];
  const double w = (t - a.t) / (b.t - a.t);
  BoundaryForcing::Frame f;
  f.t = t;
  auto mix = [w](const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    return ((1.0 - w) * x + w * y).eval();
  };
  f.west_eta = mix(a.west_eta, b.west_eta); f.west_u = mix(a.west_u, b.west_u); f.west_v = mix(a.west_v, b.west_v);
  f.east_eta = mix(a.east_eta, b.east_eta); f.east_u = mix(a.east_u, b.east_u); f.east_v = mix(a.east_v, b.east_v);
  f.south_eta = mix(a.south_eta, b.south_eta); f.south_u = mix(a.south_u, b.south_u); f.south_v = mix(a.south_v, b.south_v);
  f.north_eta = mix(a.north_eta, b.north_eta); f.north_u = mix(a.north_u, b.north_u); f.north_v = mix(a.north_v, b.north_v);
  return f;
}

}  // namespace

void BoundaryForcing::fill_ghosts(SwState& state, const SwGrid& grid, double t) const {
  const int nx = grid.nx, ny = grid.ny;
  if (kind_ == Kind::Periodic) {
    for (Eigen::ArrayXXd* a : {&state.eta, &state.hu, &state.hv}) {
      a->col(0) = a->col(nx);
      a->col(nx + 1) = a->col(1);
      a->row(0) = a->row(ny);
      a->row(ny + 1) = a->row(1);
    }
    return;
  }
  const Frame f = interpolate_frames(frames_, t);
  for (int j = 0; j < grid.full_y(); ++j) {
    state.eta(j, 0) = f.west_eta[j];
    state.hu(j, 0) = f.west_eta[j] * f.west_u[j];
    state.hv(j, 0) = f.west_eta[j] * f.west_v[j];
    state.eta(j, nx + 1) = f.east_eta[j];
    state.hu(j, nx + 1) = f.east_eta[j] * f.east_u[j];
    state.hv(j, nx + 1) = f.east_eta[j] * f.east_v[j];
  }
  for (int i = 0; i < grid.full_x(); ++i) {
    state.eta(0, i) = f.south_eta[i];
    state.hu(0, i) = f.south_eta[i] * f.south_u[i];
    state.hv(0, i) = f.south_eta[i] * f.south_v[i];
    state.eta(ny + 1, i) = f.north_eta[i];
    state.hu(ny + 1, i) = f.north_eta[i] * f.north_u[i];
    state.hv(ny + 1, i) = f.north_eta[i] * f.north_v[i];
  }
}

namespace {

using Arr = Eigen::ArrayXXd;

/// One forward-Euler stage with the local Lax-Friedrichs fluxes.
SwState euler_stage(const SwState& input, const SwParams& params, const SwGrid& grid,
                    const BoundaryForcing& bc, double t, double tau) {
  SwState s = input;
  bc.fill_ghosts(s, grid, t);

  const int nx = grid.nx, ny = grid.ny;
  const double g = params.gravity;

  if (!(s.eta > 0.0).all()) {
    for (int j = 0; j < grid.full_y(); ++j)
      for (int i = 0; i < grid.full_x(); ++i)
        if (!(s.eta(j, i) > 0.0))
          throw std::runtime_error("sw_step: non-positive depth at cell (i=" + std::to_string(i) +
                                   ", j=" + std::to_string(j) + ")");
  }

  const Arr u = s.hu / s.eta;
  const Arr v = s.hv / s.eta;
  const Arr c = (g * s.eta).sqrt();
  const Arr lamx = u.abs() + c;
  const Arr lamy = v.abs() + c;

  // CFL on the interior.
  {
    const Arr cfl = tau * (lamx.block(1, 1, ny, nx) / grid.dx + lamy.block(1, 1, ny, nx) / grid.dy);
    Eigen::Index jmax = 0, imax = 0;
    const double worst = cfl.maxCoeff(&jmax, &imax);
    if (!(worst < 1.0))
      throw std::runtime_error("sw_step: CFL violation (" + std::to_string(worst) +
                               ") at cell (i=" + std::to_string(imax + 1) +
                               ", j=" + std::to_string(jmax + 1) + ")");
  }

  // Physical fluxes on the full array.
  const Arr half_g_eta2 = 0.5 * g * s.eta.square();
  const Arr a1 = s.hu;
  const Arr a2 = s.hu * u + half_g_eta2;
  const Arr a3 = s.hu * v;
  const Arr b1 = s.hv;
  const Arr b2 = s.hu * v;
  const Arr b3 = s.hv * v + half_g_eta2;

  auto centre = [&](const Arr& a) { return a.block(1, 1, ny, nx); };
  auto east = [&](const Arr& a) { return a.block(1, 2, ny, nx); };
  auto west = [&](const Arr& a) { return a.block(1, 0, ny, nx); };
  auto north = [&](const Arr& a) { return a.block(2, 1, ny, nx); };
  auto south = [&](const Arr& a) { return a.block(0, 1, ny, nx); };

  // Interface wave speeds: the larger of the two adjacent cell values.
  const Arr lam_e = centre(lamx).max(east(lamx));
  const Arr lam_w = west(lamx).max(centre(lamx));
  const Arr lam_n = centre(lamy).max(north(lamy));
  const Arr lam_s = south(lamy).max(centre(lamy));

  auto flux_diff_x = [&](const Arr& f, const Arr& q) {
    return (0.5 * (east(f) - west(f)) -
            0.5 * (lam_e * (east(q) - centre(q)) - lam_w * (centre(q) - west(q))))
        .eval();
  };
  auto flux_diff_y = [&](const Arr& f, const Arr& q) {
    return (0.5 * (north(f) - south(f)) -
            0.5 * (lam_n * (north(q) - centre(q)) - lam_s * (centre(q) - south(q))))
        .eval();
  };

  // Bathymetry gradient: centered inside, one-sided at the first and last
  // interior columns/rows.
  const Arr& h = params.bathymetry;
  Arr dhdx = (east(h) - west(h)) / (2.0 * grid.dx);
  dhdx.col(0) = (h.block(1, 2, ny, 1) - h.block(1, 1, ny, 1)) / grid.dx;
  dhdx.col(nx - 1) = (h.block(1, nx, ny, 1) - h.block(1, nx - 1, ny, 1)) / grid.dx;
  Arr dhdy = (north(h) - south(h)) / (2.0 * grid.dy);
  dhdy.row(0) = (h.block(2, 1, 1, nx) - h.block(1, 1, 1, nx)) / grid.dy;
  dhdy.row(ny - 1) = (h.block(ny, 1, 1, nx) - h.block(ny - 1, 1, 1, nx)) / grid.dy;

  Eigen::ArrayXd f_row(ny);
  for (int j = 1; j <= ny; ++j) f_row[j - 1] = params.coriolis_at(grid.y_of(j));

  SwState out = input;
  out.eta.block(1, 1, ny, nx) =
      centre(s.eta) - (tau / grid.dx) * flux_diff_x(a1, s.eta) -
      (tau / grid.dy) * flux_diff_y(b1, s.eta);
  out.hu.block(1, 1, ny, nx) =
      centre(s.hu) - (tau / grid.dx) * flux_diff_x(a2, s.hu) -
      (tau / grid.dy) * flux_diff_y(b2, s.hu) +
      tau * (g * centre(s.eta) * dhdx + (centre(s.hv).colwise() * f_row));
  out.hv.block(1, 1, ny, nx) =
      centre(s.hv) - (tau / grid.dx) * flux_diff_x(a3, s.hv) -
      (tau / grid.dy) * flux_diff_y(b3, s.hv) +
      tau * (g * centre(s.eta) * dhdy - (centre(s.hu).colwise() * f_row));
  return out;
}

}  // namespace

SwState sw_step(const SwState& state, const SwParams& params, const SwGrid& grid,
                const BoundaryForcing& bc, double t, double tau, Integrator integrator) {
  grid.validate();
  if (!(tau > 0)) throw std::invalid_argument("sw_step: tau must be positive");
  if (params.bathymetry.rows() != grid.full_y() || params.bathymetry.cols() != grid.full_x())
    throw std::invalid_argument("sw_step: bathymetry has wrong shape");

  if (integrator == Integrator::Euler) return euler_stage(state, params, grid, bc, t, tau);

  // Heun: step, re-evaluate, average the interior.
  SwState s1 = euler_stage(state, params, grid, bc, t, tau);
  SwState s2 = euler_stage(s1, params, grid, bc, t + tau, tau);
  const int nx = grid.nx, ny = grid.ny;
  SwState out = s2;
  out.eta.block(1, 1, ny, nx) =
      0.5 * (state.eta.block(1, 1, ny, nx) + s2.eta.block(1, 1, ny, nx));
  out.hu.block(1, 1, ny, nx) = 0.5 * (state.hu.block(1, 1, ny, nx) + s2.hu.block(1, 1, ny, nx));
  out.hv.block(1, 1, ny, nx) = 0.5 * (state.hv.block(1, 1, ny, nx) + s2.hv.block(1, 1, ny, nx));
  return out;
}

SwState sw_flow(const SwState& state, const SwParams& params, const SwGrid& grid,
                const BoundaryForcing& bc, double t_start, double t_end, int inner_steps,
                Integrator integrator) {
  if (inner_steps < 1) throw std::invalid_argument("sw_flow: L must be >= 1");
  const double tau = (t_end - t_start) / inner_steps;
  SwState s = state;
  for (int l = 0; l < inner_steps; ++l)
    s = sw_step(s, params, grid, bc, t_start + l * tau, tau, integrator);
  return s;
}

Eigen::VectorXd pack_state(const SwState& state, const SwGrid& grid) {
  const int nx = grid.nx, ny = grid.ny, fs = grid.field_size();
  Eigen::VectorXd z(grid.state_dim());
  const Arr eta = state.eta.block(1, 1, ny, nx);
  if (!(eta > 0.0).all()) throw std::runtime_error("pack_state: non-positive depth");
  const Arr u = state.hu.block(1, 1, ny, nx) / eta;
  const Arr v = state.hv.block(1, 1, ny, nx) / eta;
  z.segment(0, fs) = Eigen::Map<const Eigen::VectorXd>(eta.data(), fs);
  z.segment(fs, fs) = Eigen::Map<const Eigen::VectorXd>(u.data(), fs);
  z.segment(2 * fs, fs) = Eigen::Map<const Eigen::VectorXd>(v.data(), fs);
  return z;
}

SwState unpack_state(const Eigen::VectorXd& z, const SwGrid& grid) {
  const int nx = grid.nx, ny = grid.ny, fs = grid.field_size();
  if (z.size() != grid.state_dim()) throw std::invalid_argument("unpack_state: wrong length");
  SwState s = SwState::zero(grid);
  const Eigen::Map<const Arr> eta(z.data(), ny, nx);
  const Eigen::Map<const Arr> u(z.data() + fs, ny, nx);
  const Eigen::Map<const Arr> v(z.data() + 2 * fs, ny, nx);
  s.eta.block(1, 1, ny, nx) = eta;
  s.hu.block(1, 1, ny, nx) = eta * u;
  s.hv.block(1, 1, ny, nx) = eta * v;
  return s;
}

double total_interior_mass(const SwState& state, const SwGrid& grid) {
  return state.eta.block(1, 1, grid.ny, grid.nx).sum();
}

}  // namespace smcda::sw
