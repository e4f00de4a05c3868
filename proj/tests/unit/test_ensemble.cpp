#include <doctest.h>

#include <cmath>

#include <Eigen/Cholesky>

#include "smcda/ensemble.hpp"

using namespace smcda;

namespace {

LinearModel small_model(int d, double a, int r_hat, double sz, double sy) {
  LinearModel m = make_scaled_identity_model(d, a, r_hat, 1, sz, sy);
  m.z0 = Eigen::VectorXd::Zero(d);
  return m;
}

}  // namespace

TEST_CASE("enkf analysis: collapsed ensemble has zero gain") {
  // Rank-0 anomalies: with zero observation perturbations the analysis mean
  // equals the forecast mean.
  const int d = 3, n_e = 5;
  Eigen::MatrixXd members = Eigen::MatrixXd::Zero(d, n_e);
  Eigen::VectorXd point(3);
  point << 0.4, -0.2, 1.0;
  members.colwise() = point;
  Eigen::VectorXd y(3);
  y << 1.0, 1.0, 1.0;
  enkf_analysis(members, {0, 1, 2}, y, 0.3, nullptr);
  for (int i = 0; i < n_e; ++i) CHECK((members.col(i) - point).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("enkf direct and Woodbury paths agree to 1e-10") {
  const int d = 5, n_e = 3;
  Rng rng(4);
  Eigen::MatrixXd base(d, n_e);
  for (int i = 0; i < n_e; ++i) base.col(i) = rng.normal_vector(d);
  Eigen::VectorXd y = rng.normal_vector(d);
  Eigen::MatrixXd direct = base, woodbury = base;
  // Same perturbation draws on both paths.
  Rng ra(9), rb(9);
  enkf_analysis(direct, {0, 1, 2, 3, 4}, y, 0.4, &ra, /*force_woodbury=*/0);
  enkf_analysis(woodbury, {0, 1, 2, 3, 4}, y, 0.4, &rb, /*force_woodbury=*/1);
  CHECK((direct - woodbury).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("enkf d=2 large-ensemble mean matches the Kalman filter within 3 SE") {
  LinearModel m = small_model(2, 0.8, 1, 0.2, 0.15);
  Rng data_rng(13);
  const Trajectory truth = simulate_linear(m, 10, data_rng);
  const auto kf = kalman_filter(m, truth.observations);

  const int seeds = 8;
  Eigen::MatrixXd final_means(2, seeds);
  for (int s = 0; s < seeds; ++s) {
    Rng rng(200 + s);
    Ensemble ens = initial_ensemble(m, 100000, rng);
    for (const auto& y : truth.observations) ens = enkf_step(ens, m, y, rng);
    final_means.col(s) = ens.mean();
  }
  for (int c = 0; c < 2; ++c) {
    const double mean = final_means.row(c).mean();
    const double sd = std::sqrt((final_means.row(c).array() - mean).square().sum() / (seeds - 1));
    const double se = sd / std::sqrt(static_cast<double>(seeds));
    CHECK(std::abs(mean - kf.back().mean[c]) < 3.0 * std::max(se, 1e-6));
  }
}

TEST_CASE("etkf/estkf: identical members leave the forecast mean unchanged") {
  const int d = 4, n_e = 6;
  Eigen::VectorXd point(4);
  point << 0.2, -0.5, 0.1, 0.9;
  Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  for (int variant = 0; variant < 2; ++variant) {
    Eigen::MatrixXd members(d, n_e);
    members.colwise() = point;
    if (variant == 0)
      etkf_analysis(members, {0, 1, 2, 3}, y, 0.3);
    else
      estkf_analysis(members, {0, 1, 2, 3}, y, 0.3);
    CHECK((members.rowwise().mean() - point).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("etkf and estkf analysis means agree to 1e-8") {
  const int d = 6, n_e = 9;
  Rng rng(77);
  Eigen::MatrixXd base(d, n_e);
  for (int i = 0; i < n_e; ++i) base.col(i) = rng.normal_vector(d);
  Eigen::VectorXd y = rng.normal_vector(3);
  Eigen::MatrixXd a = base, b = base;
  etkf_analysis(a, {1, 3, 5}, y, 0.25);
  estkf_analysis(b, {1, 3, 5}, y, 0.25);
  CHECK((a.rowwise().mean() - b.rowwise().mean()).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("etkf obs-space and ensemble-space paths coincide") {
  // The SVD path engages when p < N_e, the eigen path otherwise; on a case
  // sitting right at the switch both must give the same transform.
  const int d = 4;
  Rng rng(31);
  Eigen::VectorXd y = rng.normal_vector(4);
  Eigen::MatrixXd few(d, 3), many(d, 6);
  for (int i = 0; i < 3; ++i) few.col(i) = rng.normal_vector(d);
  // Duplicate the 3-member ensemble into 6 by jittering; run both and check
  // mean consistency against a dense reference computed directly.
  for (int i = 0; i < 6; ++i) many.col(i) = few.col(i % 3) + 0.01 * rng.normal_vector(d);

  auto dense_reference_mean = [&](const Eigen::MatrixXd& members,
                                  const std::vector<int>& idx) {
    const int n = static_cast<int>(members.cols());
    const Eigen::VectorXd xbar = members.rowwise().mean();
    Eigen::MatrixXd anom = members.colwise() - xbar;
    Eigen::MatrixXd yt(idx.size(), n);
    Eigen::VectorXd dt(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      yt.row(r) = anom.row(idx[r]) / 0.25;
      dt[r] = (y[r] - xbar[idx[r]]) / 0.25;
    }
    Eigen::MatrixXd g = yt.transpose() * yt;
    g.diagonal().array() += n - 1.0;
    return (xbar + anom * g.ldlt().solve(yt.transpose() * dt)).eval();
  };

  for (const Eigen::MatrixXd& base : {few, many}) {
    Eigen::MatrixXd members = base;
    etkf_analysis(members, {0, 1, 2, 3}, y, 0.25);
    const Eigen::VectorXd expected = dense_reference_mean(base, {0, 1, 2, 3});
    CHECK((members.rowwise().mean() - expected).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("square-root filters converge to the KF mean as the ensemble grows") {
  LinearModel m = small_model(2, 0.6, 1, 0.15, 0.1);
  Rng data_rng(17);
  const Trajectory truth = simulate_linear(m, 6, data_rng);
  const auto kf = kalman_filter(m, truth.observations);

  for (int method = 0; method < 3; ++method) {
    const int seeds = 50;
    Eigen::VectorXd err_small(seeds), err_large(seeds);
    for (int s = 0; s < seeds; ++s) {
      for (int size_case = 0; size_case < 2; ++size_case) {
        const int n_e = size_case == 0 ? 1000 : 4000;
        Rng rng(1000 + s);
        Ensemble ens = initial_ensemble(m, n_e, rng);
        for (const auto& y : truth.observations) {
          if (method == 0)
            ens = enkf_step(ens, m, y, rng);
          else if (method == 1)
            ens = etkf_step(ens, m, y, rng);
          else
            ens = estkf_step(ens, m, y, rng);
        }
        const double err = (ens.mean() - kf.back().mean).norm();
        (size_case == 0 ? err_small : err_large)[s] = err;
      }
    }
    // Quadrupling the ensemble should halve the error, within one SE.
    const double d_mean = (0.5 * err_small - err_large).mean();
    const double d_sd = std::sqrt(
        ((0.5 * err_small - err_large).array() - d_mean).square().sum() / (seeds - 1));
    const double se = d_sd / std::sqrt(static_cast<double>(seeds));
    CHECK(d_mean > -se);
  }
}

TEST_CASE("gaspari-cohn taper endpoints") {
  CHECK(gaspari_cohn(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(gaspari_cohn(2.0, 1.0) == doctest::Approx(0.0));
  CHECK(gaspari_cohn(3.0, 1.0) == 0.0);
  // Continuity at the knot r = 1.
  CHECK(gaspari_cohn(1.0 - 1e-9, 1.0) == doctest::Approx(gaspari_cohn(1.0 + 1e-9, 1.0)));
}

TEST_CASE("lenkf with trivial localization equals the global transform analysis") {
  const int d = 16, n_e = 7;  // 4x4 grid
  Rng rng(3);
  Eigen::MatrixXd base(d, n_e);
  for (int i = 0; i < n_e; ++i) base.col(i) = rng.normal_vector(d);
  std::vector<int> obs_idx{0, 5, 10, 15};
  Eigen::VectorXd y = rng.normal_vector(4);

  Eigen::MatrixXd global = base, local = base;
  etkf_analysis(global, obs_idx, y, 0.2);
  const LocalizationSpec loc =
      LocalizationSpec::blocks(d, 1, 0.0, LocalizationSpec::Taper::GaspariCohn, 4);
  lenkf_analysis(local, obs_idx, y, 0.2, loc);
  CHECK((global - local).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("lenkf ignores observations beyond the radius (zero taper weight)") {
  const int d = 16, n_e = 5;
  Rng rng(8);
  Eigen::MatrixXd base(d, n_e);
  for (int i = 0; i < n_e; ++i) base.col(i) = rng.normal_vector(d);
  // One close observation (index 0) and one far corner observation (15):
  // with radius 2 the corner has zero weight for the first subdomain.
  Eigen::VectorXd y = rng.normal_vector(2);
  const LocalizationSpec loc =
      LocalizationSpec::blocks(d, 4, 2.0, LocalizationSpec::Taper::GaspariCohn, 4);

  Eigen::MatrixXd with_far = base;
  lenkf_analysis(with_far, {0, 15}, y, 0.2, loc);
  Eigen::MatrixXd without_far = base;
  lenkf_analysis(without_far, {0}, y.head(1), 0.2, loc);
  // First subdomain (rows 0..3) must match exactly.
  CHECK((with_far.topRows(4) - without_far.topRows(4)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("lenkf subdomain without observations keeps the forecast") {
  const int d = 16, n_e = 5;
  Rng rng(12);
  Eigen::MatrixXd base(d, n_e);
  for (int i = 0; i < n_e; ++i) base.col(i) = rng.normal_vector(d);
  const LocalizationSpec loc =
      LocalizationSpec::blocks(d, 4, 1.0, LocalizationSpec::Taper::GaspariCohn, 4);
  Eigen::MatrixXd members = base;
  Eigen::VectorXd y(1);
  y << 0.3;
  lenkf_analysis(members, {0}, y, 0.2, loc);  // observation in the first block only
  CHECK((members.bottomRows(4) - base.bottomRows(4)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("localization spec validates the partition") {
  CHECK_THROWS(LocalizationSpec::blocks(10, 3, 1.0, LocalizationSpec::Taper::GaspariCohn, 3));
  LocalizationSpec loc = LocalizationSpec::blocks(16, 4, 1.0,
                                                  LocalizationSpec::Taper::GaspariCohn, 4);
  loc.subdomains[0][0] = 1;  // duplicate index
  CHECK_THROWS(loc.validate(16));
}

TEST_CASE("solved linear systems leave relative residuals below 1e-10") {
  // The analysis-path solves used throughout (Cholesky against SPD systems)
  // on a representative badly-scaled case.
  Rng rng(91);
  const int p = 40;
  Eigen::MatrixXd s(p, 3 * p);
  for (int i = 0; i < s.cols(); ++i) s.col(i) = rng.normal_vector(p);
  Eigen::MatrixXd m = s * s.transpose();
  m.diagonal().array() += 1e-4;
  Eigen::VectorXd b = rng.normal_vector(p);
  const Eigen::VectorXd x = Eigen::LLT<Eigen::MatrixXd>(m).solve(b);
  CHECK((m * x - b).norm() / b.norm() < 1e-10);
}
