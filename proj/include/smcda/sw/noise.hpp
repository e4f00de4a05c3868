#pragma once

#include <limits>

#include <Eigen/Core>

#include "smcda/noise.hpp"
#include "smcda/sw/grid.hpp"

namespace smcda::sw {

/// Boundary-zero stochastic forcing built from J x J sine modes per field:
/// Xi = S1 eps S2^T with independent eps_{ij} ~ N(0, sigma^2 / (max(i,j)+1)).
/// One draw stacks independent fields for eta, u and v, so dim() = 3*nx*ny.
/// The sine matrices vanish on the first and last physical rows/columns,
/// which keeps every sample exactly zero on the domain boundary.
///
/// The covariance has rank at most 3*(J-1)^2 < d, so the log-density is
/// defined in mode space: the draw is projected onto the modes through the
/// precomputed pseudo-inverses and the mode-wise scalar Gaussians are
/// summed.  A projection residual above `support_tol` (relative Frobenius)
/// flags the argument as out of support (-inf); an infinite tolerance keeps
/// the pure projection convention used inside the filters, where flows of
/// different ancestors differ slightly off-span.
class SineModeNoise final : public NoiseModel {
 public:
  SineModeNoise(const SwGrid& grid, int n_modes, double sigma,
                double support_tol = std::numeric_limits<double>::infinity());

  Eigen::Index dim() const override { return 3 * grid_.field_size(); }
  Eigen::VectorXd sample(Rng& rng) const override;
  double log_density(const Eigen::VectorXd& w) const override;
  double log_density_flagged(const Eigen::VectorXd& w, bool* in_support) const;

  /// One ny x nx field draw (test access).
  Eigen::ArrayXXd sample_field(Rng& rng) const;
  /// Field built from explicit mode coefficients (J x J).
  Eigen::ArrayXXd field_from_modes(const Eigen::MatrixXd& eps) const;

  const Eigen::MatrixXd& s1() const { return s1_; }
  const Eigen::MatrixXd& s2() const { return s2_; }
  int n_modes() const { return static_cast<int>(mode_sd_.rows()); }
  double sigma() const { return sigma_; }
  const SwGrid& grid() const { return grid_; }

  /// scale / (max(i,j) + 1) is the variance of mode (i, j).
  static double mode_variance(double sigma, int i, int j) {
    return sigma * sigma / (std::max(i, j) + 1);
  }

 private:
  double field_log_density(const Eigen::Ref<const Eigen::MatrixXd>& xi, bool* in_support) const;

  SwGrid grid_;
  double sigma_;
  double support_tol_;
  Eigen::MatrixXd s1_;   // ny x J
  Eigen::MatrixXd s2_;   // nx x J
  Eigen::MatrixXd p1_;   // J x ny, pseudo-inverse of s1
  Eigen::MatrixXd p2_;   // J x nx
  Eigen::MatrixXd mode_sd_;  // J x J
};

}  // namespace smcda::sw
