#include "smcda/noise.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace smcda {

DiagonalNoise::DiagonalNoise(Eigen::VectorXd stddev) : stddev_(std::move(stddev)) {
  if (stddev_.size() == 0) throw std::invalid_argument("DiagonalNoise: empty stddev");
  if (!(stddev_.array() > 0.0).all() || !stddev_.allFinite())
    throw std::invalid_argument("DiagonalNoise: stddevs must be positive and finite");
}

DiagonalNoise::DiagonalNoise(Eigen::Index dim, double stddev)
    : DiagonalNoise(Eigen::VectorXd::Constant(dim, stddev)) {}

Eigen::VectorXd DiagonalNoise::sample(Rng& rng) const {
  return stddev_.array() * rng.normal_vector(stddev_.size()).array();
}

double DiagonalNoise::log_density(const Eigen::VectorXd& w) const {
  if (w.size() != stddev_.size()) throw std::invalid_argument("DiagonalNoise: dimension mismatch");
  return -0.5 * (w.array() / stddev_.array()).square().sum();
}

DenseNoise::DenseNoise(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw std::invalid_argument("DenseNoise: covariance must be square and non-empty");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("DenseNoise: covariance is not positive definite");
  chol_ = llt.matrixL();
}

Eigen::VectorXd DenseNoise::sample(Rng& rng) const {
  return chol_ * rng.normal_vector(chol_.rows());
}

double DenseNoise::log_density(const Eigen::VectorXd& w) const {
  if (w.size() != chol_.rows()) throw std::invalid_argument("DenseNoise: dimension mismatch");
  // Solve L x = w; the quadratic form is |x|^2.
  Eigen::VectorXd x = chol_.triangularView<Eigen::Lower>().solve(w);
  return -0.5 * x.squaredNorm();
}

}  // namespace smcda
