#include "smcda/ensemble.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace smcda {

Ensemble initial_ensemble(const LinearModel& model, int n_e, Rng& rng) {
  if (n_e < 2) throw std::invalid_argument("initial_ensemble: N_e must be >= 2");
  Ensemble ens;
  ens.members.resize(model.dim(), n_e);
  for (int i = 0; i < n_e; ++i)
    ens.members.col(i) = model.z0 + model.sigma_z * rng.normal_vector(model.dim());
  return ens;
}

void ensemble_forecast(Ensemble& ens, const LinearModel& model, Rng& rng) {
  const auto scalar_a = model.scalar_coefficient();
  for (int i = 0; i < ens.size(); ++i) {
    Eigen::VectorXd z = ens.members.col(i);
    for (int l = 0; l < model.obs_interval; ++l) {
      if (scalar_a)
        z = (*scalar_a) * z + model.sigma_z * rng.normal_vector(z.size());
      else
        z = model.A * z + model.sigma_z * rng.normal_vector(z.size());
    }
    ens.members.col(i) = z;
  }
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

void enkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                   const Eigen::VectorXd& y, double sigma_y, Rng* obs_rng, int force_woodbury) {
  const int n = static_cast<int>(members.cols());
  const int p = static_cast<int>(obs_indices.size());
  if (n < 2) throw std::invalid_argument("enkf_analysis: N_e must be >= 2");
  if (y.size() != p) throw std::invalid_argument("enkf_analysis: observation length mismatch");
  if (p == 0) return;

  const Eigen::VectorXd xbar = members.rowwise().mean();
  Eigen::MatrixXd anomalies = members.colwise() - xbar;
  Eigen::MatrixXd s = gather_rows(anomalies, obs_indices);  // p x n

  // Per-member innovations against perturbed observations.
  Eigen::MatrixXd innov(p, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd yi = y;
    if (obs_rng && sigma_y > 0) yi += sigma_y * obs_rng->normal_vector(p);
    for (int r = 0; r < p; ++r) innov(r, i) = yi[r] - members(obs_indices[r], i);
  }

  const bool woodbury = force_woodbury >= 0 ? force_woodbury != 0 : p > n;
  const double rv = sigma_y * sigma_y;
  if (!woodbury) {
    Eigen::MatrixXd m = s * s.transpose();
    m.diagonal().array() += (n - 1) * rv;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("enkf_analysis: innovation system not SPD (degenerate anomalies with sigma_y = 0)");
    members.noalias() += (anomalies * s.transpose()) * llt.solve(innov);
  } else {
    if (rv <= 0) throw std::runtime_error("enkf_analysis: Woodbury path requires sigma_y > 0");
    Eigen::MatrixXd g = s.transpose() * s / rv;
    g.diagonal().array() += n - 1;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("enkf_analysis: Woodbury system not SPD");
    members.noalias() += anomalies * llt.solve(s.transpose() * innov) / rv;
  }
}

namespace {

/// Shared core of the deterministic transforms: given scaled obs-space
/// anomalies ytil (p x m) and scaled innovation dtil (p), returns the mean
/// weight vector and the symmetric square root W = sqrt(m_eff) G^{-1/2}
/// with G = m_eff I + ytil^T ytil, represented as W = I + V (Dw - I) V^T.
struct TransformCore {
  Eigen::VectorXd wbar;      // m
  Eigen::MatrixXd v;         // m x r
  Eigen::VectorXd dw_minus;  // r: diagonal of (Dw - I_r)
};

TransformCore square_root_transform(const Eigen::MatrixXd& ytil, const Eigen::VectorXd& dtil,
                                    double m_eff) {
  const Eigen::Index m = ytil.cols();
  TransformCore core;
  if (ytil.rows() < m) {
    // Obs-space path: SVD of the p x m matrix, rank r <= p.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ytil, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::Index r = sv.size();
    core.v = svd.matrixV();
    core.dw_minus.resize(r);
    Eigen::VectorXd gain(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      const double lam = m_eff + sv[i] * sv[i];
      if (!(lam > 0)) throw std::runtime_error("ensemble transform: non-SPD transform matrix");
      core.dw_minus[i] = std::sqrt(m_eff / lam) - 1.0;
      gain[i] = sv[i] / lam;
    }
    core.wbar = core.v * (gain.asDiagonal() * (svd.matrixU().transpose() * dtil));
  } else {
    Eigen::MatrixXd g = ytil.transpose() * ytil;
    g.diagonal().array() += m_eff;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0)
      throw std::runtime_error("ensemble transform: non-SPD transform matrix");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    core.v = eig.eigenvectors();
    core.dw_minus = (m_eff * lam.cwiseInverse()).cwiseSqrt().array() - 1.0;
    core.wbar = core.v * (lam.cwiseInverse().asDiagonal() * (core.v.transpose() * (ytil.transpose() * dtil)));
  }
  return core;
}

void scale_obs_rows(Eigen::MatrixXd& ytil, Eigen::VectorXd& dtil, double sigma_y,
                    const Eigen::VectorXd& r_weights) {
  for (Eigen::Index r = 0; r < ytil.rows(); ++r) {
    const double w = r_weights.size() ? r_weights[r] : 1.0;
    const double scale = std::sqrt(w) / sigma_y;
    ytil.row(r) *= scale;
    dtil[r] *= scale;
  }
}

}  // namespace

void etkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                   const Eigen::VectorXd& y, double sigma_y, const Eigen::VectorXd& r_weights) {
  const int n = static_cast<int>(members.cols());
  const int p = static_cast<int>(obs_indices.size());
  if (n < 2) throw std::invalid_argument("etkf_analysis: N_e must be >= 2");
  if (p == 0) return;
  if (sigma_y <= 0) throw std::invalid_argument("etkf_analysis: sigma_y must be positive");

  const Eigen::VectorXd xbar = members.rowwise().mean();
  Eigen::MatrixXd anomalies = members.colwise() - xbar;
  Eigen::MatrixXd ytil = gather_rows(anomalies, obs_indices);
  Eigen::VectorXd dtil(p);
  for (int r = 0; r < p; ++r) dtil[r] = y[r] - xbar[obs_indices[r]];
  scale_obs_rows(ytil, dtil, sigma_y, r_weights);

  const TransformCore core = square_root_transform(ytil, dtil, n - 1.0);

  // X_a = xbar 1^T + A wbar 1^T + A W with W = I + V (Dw - I) V^T.
  const Eigen::VectorXd mean_shift = anomalies * core.wbar;
  Eigen::MatrixXd av = anomalies * core.v;
  members = anomalies;
  members.noalias() += av * (core.dw_minus.asDiagonal() * core.v.transpose());
  members.colwise() += xbar + mean_shift;
}

void estkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                    const Eigen::VectorXd& y, double sigma_y, const Eigen::VectorXd& r_weights) {
  const int n = static_cast<int>(members.cols());
  const int p = static_cast<int>(obs_indices.size());
  if (n < 2) throw std::invalid_argument("estkf_analysis: N_e must be >= 2");
  if (p == 0) return;
  if (sigma_y <= 0) throw std::invalid_argument("estkf_analysis: sigma_y must be positive");

  const Eigen::VectorXd xbar = members.rowwise().mean();
  Eigen::MatrixXd anomalies = members.colwise() - xbar;

  // L = A Omega via the projection structure (columns of Omega are an
  // orthonormal basis of the zero-sum subspace).
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double c = 1.0 / (n + std::sqrt(static_cast<double>(n)));
  const Eigen::VectorXd head_sum =
      anomalies.leftCols(n - 1).rowwise().sum();
  Eigen::MatrixXd l(members.rows(), n - 1);
  for (int j = 0; j < n - 1; ++j)
    l.col(j) = anomalies.col(j) - c * head_sum - inv_sqrt_n * anomalies.col(n - 1);

  Eigen::MatrixXd ytil = gather_rows(l, obs_indices);
  Eigen::VectorXd dtil(p);
  for (int r = 0; r < p; ++r) dtil[r] = y[r] - xbar[obs_indices[r]];
  scale_obs_rows(ytil, dtil, sigma_y, r_weights);

  const TransformCore core = square_root_transform(ytil, dtil, n - 1.0);

  const Eigen::VectorXd mean_shift = l * core.wbar;
  // M = L W = L + (L V)(Dw - I)V^T, then anomalies_a = M Omega^T.
  Eigen::MatrixXd m = l;
  m.noalias() += (l * core.v) * (core.dw_minus.asDiagonal() * core.v.transpose());
  const Eigen::VectorXd msum = m.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (i < n - 1)
      members.col(i) = m.col(i) - c * msum;
    else
      members.col(i) = -inv_sqrt_n * msum;
  }
  members.colwise() += xbar + mean_shift;
}

LocalizationSpec LocalizationSpec::blocks(int d, int gamma, double radius, Taper taper,
                                          int grid_side) {
  if (gamma < 1 || d % gamma != 0)
    throw std::invalid_argument("LocalizationSpec: Gamma must divide d");
  LocalizationSpec loc;
  loc.n_subdomains = gamma;
  loc.radius = radius;
  loc.taper = taper;
  loc.grid_side = grid_side;
  const int block = d / gamma;
  loc.subdomains.resize(gamma);
  for (int g = 0; g < gamma; ++g) {
    loc.subdomains[g].resize(block);
    for (int i = 0; i < block; ++i) loc.subdomains[g][i] = g * block + i;
  }
  return loc;
}

void LocalizationSpec::validate(int d) const {
  if (n_subdomains < 1 || d % n_subdomains != 0)
    throw std::invalid_argument("LocalizationSpec: Gamma must divide d");
  std::vector<char> seen(d, 0);
  long count = 0;
  for (const auto& dom : subdomains)
    for (int i : dom) {
      if (i < 0 || i >= d || seen[i]) throw std::invalid_argument("LocalizationSpec: not a partition");
      seen[i] = 1;
      ++count;
    }
  if (count != d) throw std::invalid_argument("LocalizationSpec: partition does not cover the grid");
  if (grid_side <= 0 || grid_side * grid_side != d)
    throw std::invalid_argument("LocalizationSpec: grid_side^2 must equal d");
}

double gaspari_cohn(double dist, double c) {
  if (!(c > 0)) return dist == 0.0 ? 1.0 : 0.0;
  const double r = dist / c;
  if (r >= 2.0) return 0.0;
  const double r2 = r * r, r3 = r2 * r, r4 = r3 * r, r5 = r4 * r;
  if (r < 1.0) return 1.0 - 5.0 / 3.0 * r2 + 5.0 / 8.0 * r3 + 0.5 * r4 - 0.25 * r5;
  return 4.0 - 5.0 * r + 5.0 / 3.0 * r2 + 5.0 / 8.0 * r3 - 0.5 * r4 + r5 / 12.0 -
         2.0 / (3.0 * r);
}

void lenkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                    const Eigen::VectorXd& y, double sigma_y, const LocalizationSpec& loc) {
  const int d = static_cast<int>(members.rows());
  const int n = static_cast<int>(members.cols());
  const int p = static_cast<int>(obs_indices.size());
  loc.validate(d);
  if (n < 2) throw std::invalid_argument("lenkf_analysis: N_e must be >= 2");
  if (p == 0) return;

  const int side = loc.grid_side;
  const bool unbounded = !(loc.radius > 0) || std::isinf(loc.radius);
  const double half_width = 0.5 * loc.radius;

  const Eigen::VectorXd xbar = members.rowwise().mean();
  const Eigen::MatrixXd anomalies = members.colwise() - xbar;

  auto coord = [side](int idx) {
    return Eigen::Vector2d(static_cast<double>(idx / side), static_cast<double>(idx % side));
  };

  Eigen::MatrixXd analysis = members;
  for (const auto& dom : loc.subdomains) {
    // Distance of each observation from the subdomain (closest grid point).
    std::vector<int> local_rows;
    std::vector<double> weights;
    for (int r = 0; r < p; ++r) {
      const Eigen::Vector2d oc = coord(obs_indices[r]);
      double dist = std::numeric_limits<double>::infinity();
      for (int i : dom) dist = std::min(dist, (coord(i) - oc).norm());
      double w = 1.0;
      if (!unbounded) {
        if (dist > loc.radius) continue;
        w = loc.taper == LocalizationSpec::Taper::GaspariCohn
                ? gaspari_cohn(dist, half_width)
                : std::exp(-dist / half_width);
        if (w <= 1e-12) continue;
      }
      local_rows.push_back(r);
      weights.push_back(w);
    }
    if (local_rows.empty()) continue;  // keep forecast on this subdomain

    const int lp = static_cast<int>(local_rows.size());
    Eigen::MatrixXd ytil(lp, n);
    Eigen::VectorXd dtil(lp);
    for (int r = 0; r < lp; ++r) {
      const int gr = local_rows[r];
      const double scale = std::sqrt(weights[r]) / sigma_y;
      ytil.row(r) = anomalies.row(obs_indices[gr]) * scale;
      dtil[r] = (y[gr] - xbar[obs_indices[gr]]) * scale;
    }

    const TransformCore core = square_root_transform(ytil, dtil, n - 1.0);

    // Update only the subdomain rows.
    Eigen::MatrixXd a_dom(static_cast<Eigen::Index>(dom.size()), n);
    for (std::size_t r = 0; r < dom.size(); ++r) a_dom.row(static_cast<Eigen::Index>(r)) = anomalies.row(dom[r]);
    const Eigen::VectorXd mean_shift = a_dom * core.wbar;
    Eigen::MatrixXd updated = a_dom;
    updated.noalias() += (a_dom * core.v) * (core.dw_minus.asDiagonal() * core.v.transpose());
    for (std::size_t r = 0; r < dom.size(); ++r) {
      const int row = dom[r];
      analysis.row(row) = updated.row(static_cast<Eigen::Index>(r)).array() + xbar[row] + mean_shift[static_cast<Eigen::Index>(r)];
    }
  }
  members = std::move(analysis);
}

Ensemble enkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                   Rng& rng) {
  Ensemble out = ens;
  ensemble_forecast(out, model, rng);
  enkf_analysis(out.members, model.observed_indices(), y, model.sigma_y, &rng);
  return out;
}

Ensemble etkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                   Rng& rng) {
  Ensemble out = ens;
  ensemble_forecast(out, model, rng);
  etkf_analysis(out.members, model.observed_indices(), y, model.sigma_y);
  return out;
}

Ensemble estkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                    Rng& rng) {
  Ensemble out = ens;
  ensemble_forecast(out, model, rng);
  estkf_analysis(out.members, model.observed_indices(), y, model.sigma_y);
  return out;
}

Ensemble lenkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                    const LocalizationSpec& loc, Rng& rng) {
  Ensemble out = ens;
  ensemble_forecast(out, model, rng);
  lenkf_analysis(out.members, model.observed_indices(), y, model.sigma_y, loc);
  return out;
}

}  // namespace smcda
