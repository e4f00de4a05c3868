#pragma once

#include <vector>

#include <Eigen/Core>

#include "smcda/linear_gaussian.hpp"
#include "smcda/rng.hpp"

namespace smcda {

struct Ensemble {
  Eigen::MatrixXd members;  // d x N_e

  int size() const { return static_cast<int>(members.cols()); }
  Eigen::VectorXd mean() const { return members.rowwise().mean(); }
};

/// Members drawn as z0 + N(0, sigma_z^2 I).
Ensemble initial_ensemble(const LinearModel& model, int n_e, Rng& rng);

/// Propagates every member through the stochastic model over one observation
/// interval (L steps with fresh process noise).
void ensemble_forecast(Ensemble& ens, const LinearModel& model, Rng& rng);

/// Stochastic (perturbed-observation) analysis.  When obs_rng is null the
/// observation perturbations are zero (used by equivalence tests).  The
/// Sherman-Morrison-Woodbury form is used when d_y exceeds the ensemble
/// size; `force_woodbury` pins the path for algebraic-identity tests.
void enkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                   const Eigen::VectorXd& y, double sigma_y, Rng* obs_rng,
                   int force_woodbury = -1);

/// Deterministic square-root analyses (symmetric square-root convention).
/// r_weights are per-observation inverse-variance multipliers (R-localization
/// divides R by them); empty means all ones.
void etkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                   const Eigen::VectorXd& y, double sigma_y,
                   const Eigen::VectorXd& r_weights = Eigen::VectorXd());
void estkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                    const Eigen::VectorXd& y, double sigma_y,
                    const Eigen::VectorXd& r_weights = Eigen::VectorXd());

struct LocalizationSpec {
  enum class Taper { GaspariCohn, Exponential };

  int n_subdomains = 1;                       // Gamma
  std::vector<std::vector<int>> subdomains;   // partition of {0..d-1}
  double radius = 0.0;                        // grid units; <= 0 or inf means no cutoff
  Taper taper = Taper::GaspariCohn;
  int grid_side = 0;                          // N_s; state index -> (row, col) row-major

  /// Contiguous equal-size index blocks; gamma must divide d.
  static LocalizationSpec blocks(int d, int gamma, double radius, Taper taper, int grid_side);
  void validate(int d) const;
};

/// Gaspari-Cohn fifth-order taper with half-width c (support [0, 2c]).
double gaspari_cohn(double dist, double c);

/// Domain-localized deterministic analysis: each subdomain is updated with
/// the observations within the localization radius, R divided by the taper
/// weights.  Subdomains with no observations in range keep the forecast.
void lenkf_analysis(Eigen::MatrixXd& members, const std::vector<int>& obs_indices,
                    const Eigen::VectorXd& y, double sigma_y, const LocalizationSpec& loc);

/// One filter cycle (forecast + analysis) per method.
Ensemble enkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                   Rng& rng);
Ensemble etkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                   Rng& rng);
Ensemble estkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                    Rng& rng);
Ensemble lenkf_step(const Ensemble& ens, const LinearModel& model, const Eigen::VectorXd& y,
                    const LocalizationSpec& loc, Rng& rng);

}  // namespace smcda
