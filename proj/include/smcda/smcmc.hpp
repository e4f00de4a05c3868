#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "smcda/rng.hpp"
#include "smcda/state_space.hpp"

namespace smcda {

/// Random-walk Metropolis configuration for one filtering chain.
struct RwmConfig {
  int n_retain = 0;                              // N: retained samples
  int n_burn = 0;                                // discarded burn-in steps
  double q = 0.33;                               // index random-walk probability, (0, 1/2]
  std::shared_ptr<const NoiseModel> proposal;    // Q'

  void validate() const;
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  double mean_lag1_autocorr = 0.0;
  int unique_ancestors = 0;          // distinct indices visited by the chain
  long flow_evaluations = 0;         // deterministic-flow computations this step
  long accepted_index_changes = 0;   // accepted proposals that moved the index
  long distinct_proposed_indices = 0;
};

/// Retained MCMC samples approximating the filter at one observation time.
struct SampleSet {
  Eigen::MatrixXd samples;  // d x N, one column per retained sample
  int k = 0;

  int size() const { return static_cast<int>(samples.cols()); }
  Eigen::VectorXd mean() const { return samples.rowwise().mean(); }
  Eigen::VectorXd marginal_std() const;

  static SampleSet from_point(const Eigen::VectorXd& z, int k = 0);
};

/// Plain average of a test function over retained samples.
double estimate(const SampleSet& samples,
                const std::function<double(const Eigen::VectorXd&)>& phi);

/// Predicted observer locations (one per drifter) entering the unknown-
/// location likelihood.
struct PredictedLocations {
  std::vector<Eigen::Vector2d> xbar;
  int k = 0;
};

using LogLik = std::function<double(const Eigen::VectorXd&)>;

/// Lazily evaluated deterministic flows of the ancestor pool, keyed by
/// ancestor index.  Only indices actually touched by the chain are flowed.
class FlowCache {
 public:
  FlowCache(const TransitionModel& transition, const Eigen::MatrixXd& ancestors, int k);

  /// Eagerly seed all flows (used when they were already computed elsewhere).
  void preset(Eigen::MatrixXd flows);

  const Eigen::VectorXd& flow(int j);
  long evaluations() const { return evaluations_; }
  int size() const { return static_cast<int>(ancestors_.cols()); }
  const Eigen::MatrixXd& ancestors() const { return ancestors_; }

 private:
  const TransitionModel& transition_;
  const Eigen::MatrixXd& ancestors_;
  int k_;
  std::vector<std::optional<Eigen::VectorXd>> cache_;
  Eigen::MatrixXd preset_flows_;
  bool preset_ = false;
  long evaluations_ = 0;
};

/// State of the auxiliary-variable random-walk chain on (z, j).
struct AuxRwmState {
  Eigen::VectorXd z;
  int j = 0;          // 0-based ancestor index
  double log_pi = 0;  // stored target value, including any boundary factor
};

struct KernelCounters {
  long proposals = 0;
  long accepted = 0;
  long accepted_index_changes = 0;
  long distinct_proposed = 0;
  long distinct_visited = 0;
  std::vector<char> proposed_index_seen;  // size N
  std::vector<char> visited_index_seen;
};

/// One Metropolis-Hastings step of the auxiliary kernel: jointly propose
/// z' = z + W' (W' ~ Q') and an index move j' by the +/-1 random walk with
/// forced inward moves at the boundary; the asymmetric-proposal factor q
/// multiplies the target exactly as the pseudocode prescribes.  With a
/// single-ancestor pool the index stays fixed and no factor applies.
void aux_rwm_step(AuxRwmState& state, FlowCache& flows, const LogLik& log_g,
                  const TransitionModel& transition, int k, const RwmConfig& cfg, Rng& rng,
                  KernelCounters* counters = nullptr);

struct ChainResult {
  SampleSet samples;
  ChainDiagnostics diag;
};

/// Runs the full chain for one observation time: initialization from a
/// uniformly drawn ancestor (flow + one process-noise draw), N + N_burn
/// kernel steps, retaining the last N states.
ChainResult run_aux_rwm_chain(const TransitionModel& transition, const LogLik& log_g,
                              const Eigen::MatrixXd& ancestors, int k, const RwmConfig& cfg,
                              Rng& rng, FlowCache* shared_flows = nullptr);

/// One filter update with known observation locations (likelihood g_k comes
/// from the observation model).  `prev` is the time-(k-1) sample set; for
/// k = 1 pass a single-column set holding the known z_0.
ChainResult smcmc_filter_step_known(const SampleSet& prev, const TransitionModel& transition,
                                    const ObservationModel& observation, const Eigen::VectorXd& y,
                                    int k, const RwmConfig& cfg, Rng& rng);

/// Builds the location-dependent likelihood G((z, xbar), y) for a step.
class LocationLikelihoodFactory {
 public:
  virtual ~LocationLikelihoodFactory() = default;
  virtual LogLik make(const std::vector<Eigen::Vector2d>& xbar, const Eigen::VectorXd& y,
                      int k) const = 0;
};

struct UnknownStepResult {
  SampleSet samples;
  PredictedLocations xbar;
  ChainDiagnostics diag;
  long clamp_warnings = 0;
};

/// One filter update with unknown observation locations: first predicts
/// xbar_{t_k} by propagating every ancestor's deterministic flow while
/// Euler-advecting positions from xbar_{t_{k-1}}, averaging the N end
/// points; then runs the auxiliary chain against G((z, xbar_{t_k}), y).
/// The flows computed during prediction seed the chain's flow cache.
UnknownStepResult smcmc_filter_step_unknown(const SampleSet& prev,
                                            const PredictedLocations& xbar_prev,
                                            const LagrangianTransitionModel& transition,
                                            const LocationLikelihoodFactory& likelihood,
                                            const Eigen::VectorXd& y, int k, const RwmConfig& cfg,
                                            Rng& rng);

struct FilterStepRecord {
  int k = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd marginal_std;
  ChainDiagnostics diag;
  double wall_ms = 0.0;
};

struct FilterSeries {
  std::vector<FilterStepRecord> steps;
  std::vector<PredictedLocations> xbars;  // unknown mode only
  long clamp_warnings = 0;
};

FilterSeries run_filter_known(const TransitionModel& transition,
                              const ObservationModel& observation,
                              const std::vector<Eigen::VectorXd>& observations,
                              const Eigen::VectorXd& z0, const RwmConfig& cfg, Rng& rng);

FilterSeries run_filter_unknown(const LagrangianTransitionModel& transition,
                                const LocationLikelihoodFactory& likelihood,
                                const std::vector<Eigen::VectorXd>& observations,
                                const Eigen::VectorXd& z0,
                                const std::vector<Eigen::Vector2d>& x0, const RwmConfig& cfg,
                                Rng& rng);

/// Pre-run tuning of the proposal scale targeting an acceptance rate in
/// [lo, hi].  `make_proposal` maps a scale to a proposal descriptor; the
/// returned scale is the last one tried (kept once inside the band).
double tune_proposal_scale(const TransitionModel& transition, const LogLik& log_g,
                           const Eigen::MatrixXd& ancestors, int k, const RwmConfig& base,
                           const std::function<std::shared_ptr<const NoiseModel>(double)>& make_proposal,
                           double initial_scale, Rng& rng, double lo = 0.2, double hi = 0.3,
                           int rounds = 24, int steps_per_round = 200);

}  // namespace smcda
