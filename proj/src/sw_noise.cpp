#include "smcda/sw/noise.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace smcda::sw {

namespace {

Eigen::MatrixXd sine_matrix(int n_points, int n_modes) {
  // Row l (0-based over physical nodes), column m: sin(pi * m * l / (n-1)).
  // The first and last rows are written as exact zeros (sin(pi*m) would
  // otherwise pick up rounding from the inexact pi).
  Eigen::MatrixXd s(n_points, n_modes);
  for (int l = 0; l < n_points; ++l)
    for (int m = 0; m < n_modes; ++m) {
      const bool boundary = l == 0 || l == n_points - 1;
      s(l, m) = boundary ? 0.0 : std::sin(M_PI * m * static_cast<double>(l) / (n_points - 1));
    }
  return s;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double tol = 1e-12 * svd.singularValues().maxCoeff() * std::max(m.rows(), m.cols());
  Eigen::VectorXd inv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = inv[i] > tol ? 1.0 / inv[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

SineModeNoise::SineModeNoise(const SwGrid& grid, int n_modes, double sigma, double support_tol)
    : grid_(grid), sigma_(sigma), support_tol_(support_tol) {
  grid_.validate();
  if (grid_.nx < 2 || grid_.ny < 2)
    throw std::invalid_argument("SineModeNoise: grid must be at least 2x2");
  if (n_modes < 1) throw std::invalid_argument("SineModeNoise: J must be >= 1");
  if (!(sigma > 0)) throw std::invalid_argument("SineModeNoise: sigma must be positive");
  s1_ = sine_matrix(grid_.ny, n_modes);
  s2_ = sine_matrix(grid_.nx, n_modes);
  p1_ = pseudo_inverse(s1_);
  p2_ = pseudo_inverse(s2_);
  mode_sd_.resize(n_modes, n_modes);
  for (int i = 0; i < n_modes; ++i)
    for (int j = 0; j < n_modes; ++j) mode_sd_(i, j) = std::sqrt(mode_variance(sigma, i, j));
}

Eigen::ArrayXXd SineModeNoise::sample_field(Rng& rng) const {
  const int j = n_modes();
  Eigen::MatrixXd eps(j, j);
  for (int c = 0; c < j; ++c)
    for (int r = 0; r < j; ++r) eps(r, c) = mode_sd_(r, c) * rng.normal();
  return field_from_modes(eps);
}

Eigen::ArrayXXd SineModeNoise::field_from_modes(const Eigen::MatrixXd& eps) const {
  if (eps.rows() != n_modes() || eps.cols() != n_modes())
    throw std::invalid_argument("SineModeNoise: eps has wrong shape");
  return (s1_ * eps * s2_.transpose()).array();
}

Eigen::VectorXd SineModeNoise::sample(Rng& rng) const {
  const int fs = grid_.field_size();
  Eigen::VectorXd w(dim());
  for (int f = 0; f < 3; ++f) {
    const Eigen::ArrayXXd xi = sample_field(rng);
    w.segment(f * fs, fs) = Eigen::Map<const Eigen::VectorXd>(xi.data(), fs);
  }
  return w;
}

double SineModeNoise::field_log_density(const Eigen::Ref<const Eigen::MatrixXd>& xi,
                                        bool* in_support) const {
  const Eigen::MatrixXd eps_hat = p1_ * xi * p2_.transpose();
  if (std::isfinite(support_tol_)) {
    const double residual = (s1_ * eps_hat * s2_.transpose() - xi).norm();
    if (residual > support_tol_ * std::max(1.0, xi.norm())) {
      if (in_support) *in_support = false;
      return -std::numeric_limits<double>::infinity();
    }
  }
  double quad = 0.0;
  const int j = n_modes();
  for (int c = 0; c < j; ++c)
    for (int r = 0; r < j; ++r) {
      const double e = eps_hat(r, c) / mode_sd_(r, c);
      quad += e * e;
    }
  return -0.5 * quad;
}

double SineModeNoise::log_density(const Eigen::VectorXd& w) const {
  return log_density_flagged(w, nullptr);
}

double SineModeNoise::log_density_flagged(const Eigen::VectorXd& w, bool* in_support) const {
  if (w.size() != dim()) throw std::invalid_argument("SineModeNoise: dimension mismatch");
  if (in_support) *in_support = true;
  const int fs = grid_.field_size();
  double total = 0.0;
  for (int f = 0; f < 3; ++f) {
    const Eigen::Map<const Eigen::MatrixXd> xi(w.data() + f * fs, grid_.ny, grid_.nx);
    total += field_log_density(xi, in_support);
  }
  return total;
}

}  // namespace smcda::sw
