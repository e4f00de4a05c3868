#include "smcda/smcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smcda {

void RwmConfig::validate() const {
  if (n_retain < 1) throw std::invalid_argument("RwmConfig: N must be >= 1");
  if (n_burn < 0) throw std::invalid_argument("RwmConfig: N_burn must be >= 0");
  if (!(q > 0.0 && q <= 0.5)) throw std::invalid_argument("RwmConfig: q must be in (0, 1/2]");
  if (!proposal) throw std::invalid_argument("RwmConfig: proposal descriptor missing");
}

Eigen::VectorXd SampleSet::marginal_std() const {
  const Eigen::VectorXd m = mean();
  const int n = size();
  if (n < 2) return Eigen::VectorXd::Zero(samples.rows());
  Eigen::VectorXd var = (samples.colwise() - m).array().square().rowwise().sum() / (n - 1);
  return var.cwiseSqrt();
}

SampleSet SampleSet::from_point(const Eigen::VectorXd& z, int k) {
  SampleSet s;
  s.samples = z;
  s.k = k;
  return s;
}

double estimate(const SampleSet& samples,
                const std::function<double(const Eigen::VectorXd&)>& phi) {
  double acc = 0.0;
  for (int i = 0; i < samples.size(); ++i) {
    const double v = phi(samples.samples.col(i));
    if (!std::isfinite(v)) throw std::invalid_argument("estimate: phi not finite on a sample");
    acc += v;
  }
  return acc / samples.size();
}

FlowCache::FlowCache(const TransitionModel& transition, const Eigen::MatrixXd& ancestors, int k)
    : transition_(transition), ancestors_(ancestors), k_(k), cache_(ancestors.cols()) {}

void FlowCache::preset(Eigen::MatrixXd flows) {
  if (flows.cols() != ancestors_.cols())
    throw std::invalid_argument("FlowCache::preset: column count mismatch");
  preset_flows_ = std::move(flows);
  preset_ = true;
}

const Eigen::VectorXd& FlowCache::flow(int j) {
  if (!cache_[j]) {
    if (preset_) {
      cache_[j] = preset_flows_.col(j);
    } else {
      cache_[j] = transition_.flow(ancestors_.col(j), k_);
      ++evaluations_;
    }
  }
  return *cache_[j];
}

namespace {

double require_not_nan(double log_value, const char* what) {
  if (std::isnan(log_value)) throw std::runtime_error(std::string(what) + " evaluated to NaN");
  return log_value;
}

void mark(std::vector<char>& seen, int j, long& distinct) {
  if (!seen[j]) {
    seen[j] = 1;
    ++distinct;
  }
}

}  // namespace

void aux_rwm_step(AuxRwmState& state, FlowCache& flows, const LogLik& log_g,
                  const TransitionModel& transition, int k, const RwmConfig& cfg, Rng& rng,
                  KernelCounters* counters) {
  const int n_anc = flows.size();

  // Joint proposal: state random walk plus the +/-1 index walk.
  Eigen::VectorXd z_prop = state.z + cfg.proposal->sample(rng);
  int j_prop = state.j;
  const bool at_boundary = n_anc > 1 && (state.j == 0 || state.j == n_anc - 1);
  if (n_anc > 1) {
    if (state.j == 0) {
      j_prop = 1;
    } else if (state.j == n_anc - 1) {
      j_prop = state.j - 1;
    } else {
      const double u = rng.uniform();
      if (u < cfg.q)
        j_prop = state.j - 1;
      else if (u < 2.0 * cfg.q)
        j_prop = state.j + 1;
    }
  }

  const double log_f = transition.process_noise(k).log_density(z_prop - flows.flow(j_prop));
  double log_pi_new = require_not_nan(log_g(z_prop), "likelihood") +
                      require_not_nan(log_f, "transition density");
  if (at_boundary) log_pi_new += std::log(cfg.q);

  if (counters) {
    ++counters->proposals;
    mark(counters->proposed_index_seen, j_prop, counters->distinct_proposed);
  }

  bool accept;
  if (!(log_pi_new > -std::numeric_limits<double>::infinity())) {
    accept = false;
  } else if (!(state.log_pi > -std::numeric_limits<double>::infinity())) {
    accept = true;
  } else {
    const double alpha = std::exp(std::min(0.0, log_pi_new - state.log_pi));
    accept = rng.uniform() < alpha;
  }

  if (accept) {
    state.z = std::move(z_prop);
    if (counters) {
      ++counters->accepted;
      if (j_prop != state.j) ++counters->accepted_index_changes;
      mark(counters->visited_index_seen, j_prop, counters->distinct_visited);
    }
    state.j = j_prop;
    state.log_pi = log_pi_new;
  }
}

ChainResult run_aux_rwm_chain(const TransitionModel& transition, const LogLik& log_g,
                              const Eigen::MatrixXd& ancestors, int k, const RwmConfig& cfg,
                              Rng& rng, FlowCache* shared_flows) {
  cfg.validate();
  const int n_anc = static_cast<int>(ancestors.cols());
  if (n_anc < 1) throw std::invalid_argument("run_aux_rwm_chain: empty ancestor pool");
  const Eigen::Index d = ancestors.rows();

  FlowCache local_flows(transition, ancestors, k);
  FlowCache& flows = shared_flows ? *shared_flows : local_flows;

  KernelCounters counters;
  counters.proposed_index_seen.assign(n_anc, 0);
  counters.visited_index_seen.assign(n_anc, 0);

  // Initialization: uniform ancestor, deterministic flow, one noise draw.
  AuxRwmState state;
  state.j = rng.uniform_int(n_anc);
  state.z = flows.flow(state.j) + transition.process_noise(k).sample(rng);
  state.log_pi = require_not_nan(log_g(state.z), "likelihood") +
                 require_not_nan(
                     transition.process_noise(k).log_density(state.z - flows.flow(state.j)),
                     "transition density");
  mark(counters.visited_index_seen, state.j, counters.distinct_visited);
  mark(counters.proposed_index_seen, state.j, counters.distinct_proposed);

  const int total = cfg.n_retain + cfg.n_burn;
  Eigen::MatrixXd retained(d, cfg.n_retain);
  for (int i = 1; i <= total; ++i) {
    aux_rwm_step(state, flows, log_g, transition, k, cfg, rng, &counters);
    if (i > cfg.n_burn) retained.col(i - cfg.n_burn - 1) = state.z;
  }

  ChainResult out;
  out.samples.samples = std::move(retained);
  out.samples.k = k;
  out.diag.acceptance_rate =
      counters.proposals ? static_cast<double>(counters.accepted) / counters.proposals : 0.0;
  out.diag.unique_ancestors = static_cast<int>(counters.distinct_visited);
  out.diag.flow_evaluations = flows.evaluations();
  out.diag.accepted_index_changes = counters.accepted_index_changes;
  out.diag.distinct_proposed_indices = counters.distinct_proposed;

  // Mean over coordinates of the lag-1 autocorrelation of retained samples.
  {
    const Eigen::MatrixXd& s = out.samples.samples;
    const int n = cfg.n_retain;
    if (n >= 3) {
      const Eigen::VectorXd m = s.rowwise().mean();
      Eigen::MatrixXd c = s.colwise() - m;
      Eigen::VectorXd denom = c.array().square().rowwise().sum();
      Eigen::VectorXd numer =
          (c.leftCols(n - 1).array() * c.rightCols(n - 1).array()).rowwise().sum();
      double acc = 0.0;
      int used = 0;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        if (denom[r] > 0) {
          acc += numer[r] / denom[r];
          ++used;
        }
      }
      out.diag.mean_lag1_autocorr = used ? acc / used : 1.0;
    } else {
      out.diag.mean_lag1_autocorr = 1.0;
    }
  }
  return out;
}

ChainResult smcmc_filter_step_known(const SampleSet& prev, const TransitionModel& transition,
                                    const ObservationModel& observation, const Eigen::VectorXd& y,
                                    int k, const RwmConfig& cfg, Rng& rng) {
  const LogLik g = [&](const Eigen::VectorXd& z) { return observation.log_likelihood(z, y, k); };
  ChainResult result = run_aux_rwm_chain(transition, g, prev.samples, k, cfg, rng);
  return result;
}

UnknownStepResult smcmc_filter_step_unknown(const SampleSet& prev,
                                            const PredictedLocations& xbar_prev,
                                            const LagrangianTransitionModel& transition,
                                            const LocationLikelihoodFactory& likelihood,
                                            const Eigen::VectorXd& y, int k, const RwmConfig& cfg,
                                            Rng& rng) {
  const int n_anc = prev.size();
  const std::size_t n_drifters = xbar_prev.xbar.size();

  UnknownStepResult out;

  // Monte Carlo location prediction: every ancestor's deterministic flow is
  // propagated while positions are advected from xbar_{t_{k-1}}; the N end
  // points are averaged.  The flows double as the chain's cache.
  Eigen::MatrixXd flows(prev.samples.rows(), n_anc);
  std::vector<Eigen::Vector2d> xbar_sum(n_drifters, Eigen::Vector2d::Zero());
  long clamp_count = 0;
  for (int r = 0; r < n_anc; ++r) {
    std::vector<Eigen::Vector2d> positions = xbar_prev.xbar;
    flows.col(r) = transition.flow_advect(prev.samples.col(r), k, positions, &clamp_count);
    for (std::size_t j = 0; j < n_drifters; ++j) xbar_sum[j] += positions[j];
  }
  out.xbar.k = k;
  out.xbar.xbar.resize(n_drifters);
  for (std::size_t j = 0; j < n_drifters; ++j) out.xbar.xbar[j] = xbar_sum[j] / n_anc;
  out.clamp_warnings = clamp_count;

  FlowCache cache(transition, prev.samples, k);
  cache.preset(std::move(flows));

  const LogLik g = likelihood.make(out.xbar.xbar, y, k);
  ChainResult chain = run_aux_rwm_chain(transition, g, prev.samples, k, cfg, rng, &cache);
  out.samples = std::move(chain.samples);
  out.diag = chain.diag;
  return out;
}

namespace {

FilterStepRecord make_record(int k, const SampleSet& samples, const ChainDiagnostics& diag,
                             double wall_ms) {
  FilterStepRecord rec;
  rec.k = k;
  rec.mean = samples.mean();
  rec.marginal_std = samples.marginal_std();
  rec.diag = diag;
  rec.wall_ms = wall_ms;
  return rec;
}

}  // namespace

FilterSeries run_filter_known(const TransitionModel& transition,
                              const ObservationModel& observation,
                              const std::vector<Eigen::VectorXd>& observations,
                              const Eigen::VectorXd& z0, const RwmConfig& cfg, Rng& rng) {
  FilterSeries series;
  SampleSet current = SampleSet::from_point(z0, 0);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const auto start = std::chrono::steady_clock::now();
    ChainResult step =
        smcmc_filter_step_known(current, transition, observation, observations[i], k, cfg, rng);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    series.steps.push_back(make_record(k, step.samples, step.diag, ms));
    current = std::move(step.samples);
  }
  return series;
}

FilterSeries run_filter_unknown(const LagrangianTransitionModel& transition,
                                const LocationLikelihoodFactory& likelihood,
                                const std::vector<Eigen::VectorXd>& observations,
                                const Eigen::VectorXd& z0,
                                const std::vector<Eigen::Vector2d>& x0, const RwmConfig& cfg,
                                Rng& rng) {
  FilterSeries series;
  SampleSet current = SampleSet::from_point(z0, 0);
  PredictedLocations xbar{x0, 0};
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const auto start = std::chrono::steady_clock::now();
    UnknownStepResult step = smcmc_filter_step_unknown(current, xbar, transition, likelihood,
                                                       observations[i], k, cfg, rng);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    series.steps.push_back(make_record(k, step.samples, step.diag, ms));
    series.xbars.push_back(step.xbar);
    series.clamp_warnings += step.clamp_warnings;
    current = std::move(step.samples);
    xbar = series.xbars.back();
  }
  return series;
}

double tune_proposal_scale(
    const TransitionModel& transition, const LogLik& log_g, const Eigen::MatrixXd& ancestors,
    int k, const RwmConfig& base,
    const std::function<std::shared_ptr<const NoiseModel>(double)>& make_proposal,
    double initial_scale, Rng& rng, double lo, double hi, int rounds, int steps_per_round) {
  double scale = initial_scale;
  RwmConfig cfg = base;
  cfg.n_retain = steps_per_round;
  cfg.n_burn = 0;
  for (int round = 0; round < rounds; ++round) {
    cfg.proposal = make_proposal(scale);
    ChainResult result = run_aux_rwm_chain(transition, log_g, ancestors, k, cfg, rng);
    const double acc = result.diag.acceptance_rate;
    if (acc >= lo && acc <= hi) return scale;
    // Multiplicative correction toward the middle of the band, clipped so a
    // fully stuck or fully mobile chain moves the scale by at most 4x.
    const double target = 0.5 * (lo + hi);
    double factor = std::pow(std::max(acc, 1e-3) / target, 0.9);
    factor = std::clamp(factor, 0.25, 4.0);
    scale *= factor;
  }
  return scale;
}

}  // namespace smcda
