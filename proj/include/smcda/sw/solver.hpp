#pragma once

#include <vector>

#include <Eigen/Core>

#include "smcda/sw/grid.hpp"

namespace smcda::sw {

/// Conserved variables U = [eta, eta*u, eta*v] on the full (ny+2) x (nx+2)
/// array, row = y index, column = x index.
struct SwState {
  Eigen::ArrayXXd eta, hu, hv;

  static SwState zero(const SwGrid& grid);
};

struct SwParams {
  double gravity = 9.81;
  Eigen::ArrayXXd bathymetry;  // H on the full array, positive downward
  double f0 = 0.0;             // Coriolis at the reference latitude
  double beta = 0.0;           // meridional gradient
  double y0 = 0.0;             // y at the reference latitude

  /// f_1(y) = f0 + beta * (y - y0), evaluated per interior row.
  double coriolis_at(double y) const { return f0 + beta * (y - y0); }
  /// f0 = 2 * Omega * sin(psi0) for a central latitude psi0 (radians).
  static double coriolis_from_latitude(double psi0_radians);
};

/// Time-varying Dirichlet edge values (or the test-only periodic wrap).
class BoundaryForcing {
 public:
  enum class Kind { Dirichlet, Periodic };

  struct Frame {
    double t = 0.0;
    // Edge values of (eta, u, v); west/east have length ny+2 (per row),
    // south/north have length nx+2 (per column, written after the columns so
    // corners take the row values).
    Eigen::ArrayXd west_eta, west_u, west_v;
    Eigen::ArrayXd east_eta, east_u, east_v;
    Eigen::ArrayXd south_eta, south_u, south_v;
    Eigen::ArrayXd north_eta, north_u, north_v;
  };

  static BoundaryForcing periodic();
  static BoundaryForcing dirichlet(std::vector<Frame> frames);
  /// Freezes the edge values of `state` as a constant-in-time Dirichlet
  /// condition.
  static BoundaryForcing constant_from_state(const SwState& state, const SwGrid& grid);

  Kind kind() const { return kind_; }
  const std::vector<Frame>& frames() const { return frames_; }

  /// Refills the ghost layer of `state` at time t (linear interpolation in
  /// time between frames, clamped at the ends).
  void fill_ghosts(SwState& state, const SwGrid& grid, double t) const;

 private:
  Kind kind_ = Kind::Periodic;
  std::vector<Frame> frames_;
};

enum class Integrator { Euler, Heun };

/// One explicit step of the local Lax-Friedrichs finite-volume scheme;
/// `Heun` (default elsewhere) wraps the same flux formulas in a two-stage
/// average.  Ghost cells are refilled from the forcing before each stage.
/// Throws when the CFL condition fails or the depth loses positivity,
/// naming the offending cell.
SwState sw_step(const SwState& state, const SwParams& params, const SwGrid& grid,
                const BoundaryForcing& bc, double t, double tau,
                Integrator integrator = Integrator::Heun);

/// Composes L steps: the deterministic flow Phi(., t_start, t_end).
SwState sw_flow(const SwState& state, const SwParams& params, const SwGrid& grid,
                const BoundaryForcing& bc, double t_start, double t_end, int inner_steps,
                Integrator integrator = Integrator::Heun);

/// Interior <-> state-vector packing ([eta | u | v], y-fastest per block).
Eigen::VectorXd pack_state(const SwState& state, const SwGrid& grid);
SwState unpack_state(const Eigen::VectorXd& z, const SwGrid& grid);

double total_interior_mass(const SwState& state, const SwGrid& grid);

}  // namespace smcda::sw
