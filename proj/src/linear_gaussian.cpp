#include "smcda/linear_gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace smcda {

std::vector<int> LinearModel::observed_indices() const {
  std::vector<int> idx;
  idx.reserve(obs_dim());
  for (int i = 1; i <= obs_dim(); ++i) idx.push_back(i * r_hat - 1);
  return idx;
}

Eigen::MatrixXd LinearModel::dense_C() const {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(obs_dim(), dim());
  const auto idx = observed_indices();
  for (std::size_t r = 0; r < idx.size(); ++r) C(static_cast<int>(r), idx[r]) = 1.0;
  return C;
}

std::optional<double> LinearModel::scalar_coefficient() const {
  const double a = A(0, 0);
  if (A.isApprox(a * Eigen::MatrixXd::Identity(A.rows(), A.cols()), 0.0)) return a;
  return std::nullopt;
}

void LinearModel::validate() const {
  if (A.rows() != A.cols() || A.rows() == 0)
    throw std::invalid_argument("LinearModel: A must be square");
  if (r_hat < 1 || r_hat > dim()) throw std::invalid_argument("LinearModel: bad r_hat");
  if (obs_interval < 1) throw std::invalid_argument("LinearModel: L must be >= 1");
  if (sigma_z <= 0 || sigma_y < 0) throw std::invalid_argument("LinearModel: bad noise scales");
  if (z0.size() != dim()) throw std::invalid_argument("LinearModel: z0 has wrong length");
  double rho;
  if (auto a = scalar_coefficient()) {
    rho = std::abs(*a);
  } else {
    rho = A.eigenvalues().cwiseAbs().maxCoeff();
  }
  if (rho > 1.0 + 1e-9)
    throw std::invalid_argument("LinearModel: spectral radius " + std::to_string(rho) + " > 1");
}

LinearModel make_scaled_identity_model(int d, double a, int r_hat, int obs_interval,
                                       double sigma_z, double sigma_y) {
  LinearModel m;
  m.A = a * Eigen::MatrixXd::Identity(d, d);
  m.r_hat = r_hat;
  m.obs_interval = obs_interval;
  m.sigma_z = sigma_z;
  m.sigma_y = sigma_y;
  m.z0 = Eigen::VectorXd::Zero(d);
  return m;
}

namespace {

class LinearTransition final : public TransitionModel {
 public:
  explicit LinearTransition(const LinearModel& model) : model_(model) {
    const int d = model.dim();
    const int L = model.obs_interval;
    if (auto a = model.scalar_coefficient()) {
      scalar_a_ = std::pow(*a, L);
      double var = 0.0;
      for (int l = 0; l < L; ++l) var += std::pow(*a, 2 * l);
      var *= model.sigma_z * model.sigma_z;
      noise_ = std::make_shared<DiagonalNoise>(d, std::sqrt(var));
    } else {
      flow_matrix_ = Eigen::MatrixXd::Identity(d, d);
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, d);
      for (int l = 0; l < L; ++l) {
        q += flow_matrix_ * flow_matrix_.transpose();
        flow_matrix_ = model.A * flow_matrix_;
      }
      q *= model.sigma_z * model.sigma_z;
      noise_ = std::make_shared<DenseNoise>(q);
    }
  }

  Eigen::Index dim() const override { return model_.dim(); }
  const NoiseModel& process_noise(int) const override { return *noise_; }
  Eigen::VectorXd flow(const Eigen::VectorXd& prev, int) const override {
    if (flow_matrix_.size() == 0) return scalar_a_ * prev;
    return flow_matrix_ * prev;
  }

 private:
  LinearModel model_;
  double scalar_a_ = 0.0;
  Eigen::MatrixXd flow_matrix_;
  std::shared_ptr<const NoiseModel> noise_;
};

class LinearObservation final : public ObservationModel {
 public:
  explicit LinearObservation(const LinearModel& model)
      : indices_(model.observed_indices()), sigma_y_(model.sigma_y) {}

  Eigen::Index obs_dim() const override { return static_cast<Eigen::Index>(indices_.size()); }
  double noise_scale() const override { return sigma_y_; }
  Eigen::VectorXd observe_mean(const Eigen::VectorXd& z, int) const override {
    Eigen::VectorXd y(indices_.size());
    for (std::size_t r = 0; r < indices_.size(); ++r) y[static_cast<Eigen::Index>(r)] = z[indices_[r]];
    return y;
  }

 private:
  std::vector<int> indices_;
  double sigma_y_;
};

}  // namespace

std::shared_ptr<TransitionModel> make_linear_transition(const LinearModel& model) {
  return std::make_shared<LinearTransition>(model);
}

std::shared_ptr<ObservationModel> make_linear_observation(const LinearModel& model) {
  return std::make_shared<LinearObservation>(model);
}

std::vector<GaussianBelief> kalman_filter(const LinearModel& model,
                                          const std::vector<Eigen::VectorXd>& observations,
                                          const KalmanOptions& options) {
  const int d = model.dim();
  const auto idx = model.observed_indices();
  const int p = static_cast<int>(idx.size());
  const double r = model.sigma_y * model.sigma_y;
  const double qv = model.sigma_z * model.sigma_z;
  const auto scalar_a = model.scalar_coefficient();

  Eigen::VectorXd mean = model.z0;
  Eigen::MatrixXd cov = options.P0.size() ? options.P0 : Eigen::MatrixXd::Zero(d, d);
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("kalman_filter: P0 has wrong shape");

  std::vector<GaussianBelief> out;
  out.reserve(observations.size());

  for (std::size_t m = 0; m < observations.size(); ++m) {
    const Eigen::VectorXd& y = observations[m];
    if (y.size() != p) throw std::invalid_argument("kalman_filter: observation length mismatch");

    for (int l = 0; l < model.obs_interval; ++l) {
      if (scalar_a) {
        mean *= *scalar_a;
        cov *= (*scalar_a) * (*scalar_a);
      } else {
        mean = model.A * mean;
        cov = model.A * cov * model.A.transpose();
      }
      cov.diagonal().array() += qv;
    }

    if (p > 0) {
      // Gather the observed rows/columns of the covariance.
      Eigen::MatrixXd P_xo(d, p);
      for (int c = 0; c < p; ++c) P_xo.col(c) = cov.col(idx[c]);
      Eigen::MatrixXd S(p, p);
      for (int rr = 0; rr < p; ++rr)
        for (int c = 0; c < p; ++c) S(rr, c) = cov(idx[rr], idx[c]);
      S.diagonal().array() += r;

      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("kalman_filter: innovation covariance not SPD at step " +
                                 std::to_string(m + 1));

      Eigen::VectorXd innovation(p);
      for (int c = 0; c < p; ++c) innovation[c] = y[c] - mean[idx[c]];

      // K = P_xo S^{-1}, obtained by solving S K^T = P_xo^T.
      Eigen::MatrixXd K_t = llt.solve(P_xo.transpose());
      mean.noalias() += K_t.transpose() * innovation;
      cov.noalias() -= K_t.transpose() * P_xo.transpose();
      cov = 0.5 * (cov + cov.transpose()).eval();
    }

    out.push_back({mean, cov});
  }
  return out;
}

Trajectory simulate_linear(const LinearModel& model, int n_obs, Rng& rng) {
  const auto scalar_a = model.scalar_coefficient();
  const auto idx = model.observed_indices();
  Trajectory out;
  out.states.reserve(n_obs);
  out.observations.reserve(n_obs);
  Eigen::VectorXd z = model.z0;
  for (int m = 1; m <= n_obs; ++m) {
    for (int l = 0; l < model.obs_interval; ++l) {
      if (scalar_a)
        z = (*scalar_a) * z + model.sigma_z * rng.normal_vector(z.size());
      else
        z = model.A * z + model.sigma_z * rng.normal_vector(z.size());
    }
    Eigen::VectorXd y(idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c)
      y[static_cast<Eigen::Index>(c)] = z[idx[c]] + model.sigma_y * rng.normal();
    out.states.push_back(z);
    out.observations.push_back(y);
  }
  return out;
}

double accuracy_metric(const std::vector<Eigen::VectorXd>& filter_means,
                       const std::vector<Eigen::VectorXd>& reference_means, double sigma_y) {
  if (filter_means.size() != reference_means.size())
    throw std::invalid_argument("accuracy_metric: series lengths differ");
  long total = 0, below = 0;
  const double threshold = 0.5 * sigma_y;
  for (std::size_t k = 0; k < filter_means.size(); ++k) {
    if (filter_means[k].size() != reference_means[k].size())
      throw std::invalid_argument("accuracy_metric: coordinate counts differ");
    total += filter_means[k].size();
    below += ((filter_means[k] - reference_means[k]).cwiseAbs().array() <= threshold).count();
  }
  if (total == 0) throw std::invalid_argument("accuracy_metric: empty series");
  return static_cast<double>(below) / static_cast<double>(total);
}

}  // namespace smcda
