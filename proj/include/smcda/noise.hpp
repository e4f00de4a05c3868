#pragma once

#include <memory>

#include <Eigen/Core>

#include "smcda/rng.hpp"

namespace smcda {

/// Zero-mean Gaussian noise descriptor.  Log-densities follow the
/// dropped-constant convention: additive terms that do not depend on the
/// argument are omitted, so the value at w = 0 is exactly 0.  Filters only
/// ever compare ratios, which the convention leaves untouched.
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::VectorXd sample(Rng& rng) const = 0;
  /// -0.5 * w^T Q^{-1} w; -inf for w outside a degenerate support.
  virtual double log_density(const Eigen::VectorXd& w) const = 0;
};

/// N(0, diag(sd^2)).
class DiagonalNoise final : public NoiseModel {
 public:
  explicit DiagonalNoise(Eigen::VectorXd stddev);
  DiagonalNoise(Eigen::Index dim, double stddev);

  Eigen::Index dim() const override { return stddev_.size(); }
  Eigen::VectorXd sample(Rng& rng) const override;
  double log_density(const Eigen::VectorXd& w) const override;

 private:
  Eigen::VectorXd stddev_;
};

/// N(0, Q) with a dense SPD covariance; the Cholesky factor is computed once
/// at construction and a singular Q fails there, not at call time.
class DenseNoise final : public NoiseModel {
 public:
  explicit DenseNoise(const Eigen::MatrixXd& covariance);

  Eigen::Index dim() const override { return chol_.rows(); }
  Eigen::VectorXd sample(Rng& rng) const override;
  double log_density(const Eigen::VectorXd& w) const override;

 private:
  Eigen::MatrixXd chol_;  // lower-triangular L with Q = L L^T
};

}  // namespace smcda
