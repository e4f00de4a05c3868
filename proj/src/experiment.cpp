#include "smcda/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace smcda {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int env_thread_count() {
  if (const char* env = std::getenv("SMCDA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Runs fn(0..m_total-1), possibly on worker threads; results land in
/// per-index slots so the merge order never depends on scheduling.
void for_each_repeat(int m_total, const std::function<void(int)>& fn) {
  const int threads = std::min(env_thread_count(), m_total);
  if (threads <= 1) {
    for (int m = 0; m < m_total; ++m) fn(m);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int m = next++; m < m_total; m = next++) fn(m);
    });
  for (auto& th : pool) th.join();
}

std::vector<int> effective_coords(const std::vector<int>& requested, int d) {
  if (requested.empty()) {
    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;
    return all;
  }
  for (int c : requested)
    if (c < 0 || c >= d) throw std::invalid_argument("mean_coords entry out of range");
  return requested;
}

void write_means_csv(const std::string& path, const std::vector<Eigen::VectorXd>& means,
                     const std::vector<int>& coords) {
  CsvTable table;
  table.header = {"k"};
  for (int c : coords) table.header.push_back("m" + std::to_string(c));
  for (std::size_t k = 0; k < means.size(); ++k) {
    std::vector<std::string> row{std::to_string(k + 1)};
    for (int c : coords) row.push_back(format_double(means[k][c]));
    table.rows.push_back(std::move(row));
  }
  table.write(path);
}

void write_steps_csv(const std::string& path, const FilterSeries& series,
                     const std::vector<int>& coords) {
  CsvTable table;
  table.header = {"k"};
  for (int c : coords) table.header.push_back("m" + std::to_string(c));
  table.header.insert(table.header.end(), {"acceptance", "unique_ancestors", "wall_ms"});
  for (const auto& step : series.steps) {
    std::vector<std::string> row{std::to_string(step.k)};
    for (int c : coords) row.push_back(format_double(step.mean[c]));
    row.push_back(format_double(step.diag.acceptance_rate));
    row.push_back(std::to_string(step.diag.unique_ancestors));
    row.push_back(format_double(step.wall_ms));
    table.rows.push_back(std::move(row));
  }
  table.write(path);
}

void write_tracks_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<std::vector<Eigen::Vector2d>>>>& groups) {
  // groups: (kind, positions-per-time [t][drifter])
  CsvTable table;
  table.header = {"kind", "drifter", "k", "x", "y"};
  for (const auto& [kind, per_time] : groups)
    for (std::size_t k = 0; k < per_time.size(); ++k)
      for (std::size_t m = 0; m < per_time[k].size(); ++m)
        table.rows.push_back({kind, std::to_string(m), std::to_string(k),
                              format_double(per_time[k][m].x()),
                              format_double(per_time[k][m].y())});
  table.write(path);
}

json diag_summary(const std::vector<FilterSeries>& runs) {
  double acc = 0, lag1 = 0, unique = 0;
  long flow_evals = 0, steps = 0, clamps = 0;
  for (const auto& run : runs) {
    for (const auto& s : run.steps) {
      acc += s.diag.acceptance_rate;
      lag1 += s.diag.mean_lag1_autocorr;
      unique += s.diag.unique_ancestors;
      flow_evals += s.diag.flow_evaluations;
      ++steps;
    }
    clamps += run.clamp_warnings;
  }
  json j;
  if (steps) {
    j["mean_acceptance"] = acc / steps;
    j["mean_lag1_autocorr"] = lag1 / steps;
    j["mean_unique_ancestors"] = unique / steps;
    j["total_flow_evaluations"] = flow_evals;
  }
  j["clamp_warnings"] = clamps;
  return j;
}

std::vector<Eigen::VectorXd> average_means(const std::vector<FilterSeries>& runs) {
  std::vector<Eigen::VectorXd> avg;
  if (runs.empty()) return avg;
  const std::size_t n = runs.front().steps.size();
  avg.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    avg[k] = Eigen::VectorXd::Zero(runs.front().steps[k].mean.size());
    for (const auto& run : runs) avg[k] += run.steps[k].mean;
    avg[k] /= static_cast<double>(runs.size());
  }
  return avg;
}

std::vector<double> collect_errors(const std::vector<Eigen::VectorXd>& a,
                                   const std::vector<Eigen::VectorXd>& b, bool include_zero_row) {
  std::vector<double> errors;
  if (a.empty()) return errors;
  errors.reserve((a.size() + 1) * a.front().size());
  if (include_zero_row)
    for (Eigen::Index i = 0; i < a.front().size(); ++i) errors.push_back(0.0);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (Eigen::Index i = 0; i < a[k].size(); ++i) errors.push_back(std::abs(a[k][i] - b[k][i]));
  return errors;
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("RunConfig: cannot open " + path);
  const json j = json::parse(in, nullptr, true, /*ignore_comments=*/true);

  RunConfig cfg;
  cfg.experiment = j.at("experiment").get<std::string>();
  cfg.seed = j.value("seed", 1ULL);
  cfg.repeat_seed_base = j.value("repeat_seed_base", 0ULL);
  cfg.repeats = j.value("repeats", 1);
  cfg.out_dir = j.value("out", std::string("out"));
  cfg.mean_coords = j.value("mean_coords", std::vector<int>{});

  if (j.contains("linear")) {
    const json& l = j.at("linear");
    LinearSection& s = cfg.linear;
    s.d = l.value("d", s.d);
    s.a = l.value("a", s.a);
    s.r_hat = l.value("r_hat", s.r_hat);
    s.L = l.value("L", s.L);
    s.n_obs = l.value("n_obs", s.n_obs);
    s.sigma_z = l.value("sigma_z", s.sigma_z);
    s.sigma_y = l.value("sigma_y", s.sigma_y);
    s.z0_scale = l.value("z0_scale", s.z0_scale);
    s.z0_active = l.value("z0_active", s.z0_active);
    s.methods = l.value("methods", s.methods);
    s.ensemble_size = l.value("ensemble_size", s.ensemble_size);
    s.n_retain = l.value("n_retain", s.n_retain);
    s.n_burn = l.value("n_burn", s.n_burn);
    s.q = l.value("q", s.q);
    s.sigma_prime = l.value("sigma_prime", s.sigma_prime);
    s.gamma = l.value("gamma", s.gamma);
    s.radius = l.value("radius", s.radius);
    s.taper = l.value("taper", s.taper);
  }
  if (j.contains("sw")) {
    const json& w = j.at("sw");
    SwSection& s = cfg.sw;
    s.fixtures_dir = w.value("fixtures_dir", s.fixtures_dir);
    s.n_obs = w.value("n_obs", s.n_obs);
    s.L = w.value("L", s.L);
    s.tau = w.value("tau", s.tau);
    s.n_modes = w.value("n_modes", s.n_modes);
    s.sigma = w.value("sigma", s.sigma);
    s.sigma_y = w.value("sigma_y", s.sigma_y);
    s.n_drifters = w.value("n_drifters", s.n_drifters);
    s.n_retain = w.value("n_retain", s.n_retain);
    s.n_burn = w.value("n_burn", s.n_burn);
    s.q = w.value("q", s.q);
    s.sigma_prime = w.value("sigma_prime", s.sigma_prime);
    s.integrator = w.value("integrator", s.integrator);
    s.advection = w.value("advection", s.advection);
    s.reference_runs = w.value("reference_runs", s.reference_runs);
    s.snapshot_steps = w.value("snapshot_steps", s.snapshot_steps);
  }
  return cfg;
}

CsvTable emit_histogram(const std::vector<double>& errors, int bins) {
  if (errors.empty()) throw std::invalid_argument("emit_histogram: no errors");
  if (bins < 1) throw std::invalid_argument("emit_histogram: bins must be >= 1");
  const double max_err = *std::max_element(errors.begin(), errors.end());
  CsvTable table;
  table.header = {"bin_lo", "bin_hi", "fraction"};
  if (max_err == 0.0) {
    table.rows.push_back({format_double(0.0), format_double(0.0), format_double(1.0)});
    return table;
  }
  std::vector<long> counts(bins, 0);
  for (double e : errors) {
    int idx = static_cast<int>(std::floor(e / max_err * bins));
    if (idx >= bins) idx = bins - 1;  // the last bin is closed on the right
    ++counts[idx];
  }
  for (int b = 0; b < bins; ++b) {
    const double lo = max_err * b / bins;
    const double hi = max_err * (b + 1) / bins;
    table.rows.push_back({format_double(lo), format_double(hi),
                          format_double(static_cast<double>(counts[b]) / errors.size())});
  }
  return table;
}

void emit_snapshot(const std::string& dir, const std::string& stem, const Eigen::VectorXd& state,
                   const sw::SwGrid& grid, const std::vector<LabelledTrack>& tracks, double t) {
  fs::create_directories(dir);
  const int fs_ = grid.field_size();
  auto write_field = [&](const char* name, int block) {
    CsvTable table;
    for (int j = 1; j <= grid.ny; ++j) {
      std::vector<std::string> row;
      row.reserve(grid.nx);
      for (int i = 1; i <= grid.nx; ++i)
        row.push_back(format_double(state[block * fs_ + grid.flat(i, j)]));
      table.rows.push_back(std::move(row));
    }
    table.write(dir + "/" + stem + "_" + name + ".csv");
  };
  write_field("eta", 0);
  write_field("u", 1);
  write_field("v", 2);

  CsvTable track_table;
  track_table.header = {"label", "t", "idx", "x", "y"};
  for (const auto& [label, polyline] : tracks)
    for (std::size_t i = 0; i < polyline.size(); ++i)
      track_table.rows.push_back({label, format_double(t), std::to_string(i),
                                  format_double(polyline[i].x()),
                                  format_double(polyline[i].y())});
  track_table.write(dir + "/" + stem + "_tracks.csv");
}

std::vector<Eigen::VectorXd> prior_reference_mean(const TransitionModel& transition, int n_obs,
                                                  const Eigen::VectorXd& z0, int k_runs,
                                                  std::uint64_t seed, bool antithetic) {
  if (k_runs < 1) throw std::invalid_argument("prior_reference_mean: need K >= 1 runs");
  if (antithetic && k_runs % 2 != 0)
    throw std::invalid_argument("prior_reference_mean: antithetic needs an even K");
  std::vector<Eigen::VectorXd> acc(n_obs, Eigen::VectorXd::Zero(z0.size()));
  for (int r = 0; r < k_runs; ++r) {
    Rng rng(seed, antithetic ? r / 2 : r);
    const double sign = antithetic && (r % 2 == 1) ? -1.0 : 1.0;
    Eigen::VectorXd z = z0;
    for (int k = 1; k <= n_obs; ++k) {
      z = transition.flow(z, k) + sign * transition.process_noise(k).sample(rng);
      acc[k - 1] += z;
    }
  }
  for (auto& v : acc) v /= static_cast<double>(k_runs);
  return acc;
}

SwTwinData generate_sw_twin(const sw::SwTransitionModel& model, const Eigen::VectorXd& z0,
                            const std::vector<Eigen::Vector2d>& x0, double sigma_y, int n_obs,
                            Rng& rng) {
  SwTwinData data;
  data.tracks.push_back(x0);
  Eigen::VectorXd z = z0;
  std::vector<Eigen::Vector2d> positions = x0;
  for (int k = 1; k <= n_obs; ++k) {
    long clamps = 0;
    z = model.flow_advect(z, k, positions, &clamps) + model.noise().sample(rng);
    if (!z.allFinite())
      throw std::runtime_error("generate_sw_twin: non-finite state at k=" + std::to_string(k));
    data.tracks.push_back(positions);
    ObsSelection sel = select_observed_indices(positions, model.grid());
    data.observations.push_back(observe(z, sel, sigma_y, &rng));
    data.selections.push_back(std::move(sel));
    data.states.push_back(z);
  }
  return data;
}

sw::SwTransitionModel make_sw_model(const sw::SwFixture& fixture, const SwSection& sw_cfg) {
  TimeGrid tg = TimeGrid::uniform(sw_cfg.n_obs, sw_cfg.tau * sw_cfg.L, sw_cfg.L);
  auto noise = std::make_shared<sw::SineModeNoise>(fixture.grid, sw_cfg.n_modes, sw_cfg.sigma);
  const sw::Integrator integ =
      sw_cfg.integrator == "euler" ? sw::Integrator::Euler : sw::Integrator::Heun;
  const AdvectionMode adv = sw_cfg.advection == "nearest-node" ? AdvectionMode::NearestNode
                                                               : AdvectionMode::Bilinear;
  return sw::SwTransitionModel(fixture.grid, fixture.params, fixture.boundary, std::move(tg),
                               std::move(noise), integ, adv);
}

namespace {

struct RepeatOutcome {
  FilterSeries series;
  std::string status = "ok";
  bool failed = false;
};

ExperimentResult run_linear(const RunConfig& cfg, bool partial) {
  const LinearSection& lc = cfg.linear;
  ExperimentResult result;
  fs::create_directories(cfg.out_dir);

  LinearModel model = make_scaled_identity_model(lc.d, lc.a, lc.r_hat, lc.L, lc.sigma_z, lc.sigma_y);
  Rng rng_data(cfg.seed, 0);
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(lc.d);
  const int active = lc.z0_active == "first_third" ? lc.d / 3 : lc.d;
  for (int i = 0; i < active; ++i) z0[i] = lc.z0_scale * rng_data.uniform();
  model.z0 = z0;
  model.validate();

  const Trajectory truth = simulate_linear(model, lc.n_obs, rng_data);
  const std::vector<int> coords = effective_coords(cfg.mean_coords, lc.d);

  // Exact filter.  The partial-observation benchmark starts the KF from z0
  // with a small diagonal covariance; the fully observed one uses P0 = 0
  // (z0 fixed and known).
  KalmanOptions kopt;
  if (partial)
    kopt.P0 = lc.sigma_z * lc.sigma_z * Eigen::MatrixXd::Identity(lc.d, lc.d);
  const auto kf_start = Clock::now();
  const std::vector<GaussianBelief> kf = kalman_filter(model, truth.observations, kopt);
  const double kf_seconds = seconds_since(kf_start);
  std::vector<Eigen::VectorXd> kf_means;
  kf_means.reserve(kf.size());
  for (const auto& belief : kf) kf_means.push_back(belief.mean);
  write_means_csv(cfg.out_dir + "/means_kf.csv", kf_means, coords);

  json report;
  report["experiment"] = cfg.experiment;
  report["seed"] = cfg.seed;
  report["d"] = lc.d;

  for (const std::string& method : lc.methods) {
    if (method == "kf") {
      result.rows.push_back({"kf", lc.d, "-", 1, 1.0, kf_seconds});
      continue;
    }
    const auto start = Clock::now();
    std::vector<Eigen::VectorXd> means;
    std::string ensemble_label = std::to_string(lc.ensemble_size);
    int repeats_used = 1;

    if (method == "enkf" || method == "etkf" || method == "estkf" || method == "lenkf") {
      const std::uint64_t stream = method == "enkf" ? 10 : method == "etkf" ? 11
                                   : method == "estkf" ? 12 : 13;
      Rng rng(cfg.seed, stream);
      Ensemble ens = initial_ensemble(model, lc.ensemble_size, rng);
      LocalizationSpec loc;
      if (method == "lenkf") {
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(lc.d))));
        loc = LocalizationSpec::blocks(
            lc.d, lc.gamma, lc.radius,
            lc.taper == "exponential" ? LocalizationSpec::Taper::Exponential
                                      : LocalizationSpec::Taper::GaspariCohn,
            side);
      }
      means.reserve(truth.observations.size());
      for (const auto& y : truth.observations) {
        if (method == "enkf")
          ens = enkf_step(ens, model, y, rng);
        else if (method == "etkf")
          ens = etkf_step(ens, model, y, rng);
        else if (method == "estkf")
          ens = estkf_step(ens, model, y, rng);
        else
          ens = lenkf_step(ens, model, y, loc, rng);
        means.push_back(ens.mean());
      }
    } else if (method == "smcmc") {
      repeats_used = cfg.repeats;
      ensemble_label = std::to_string(lc.n_retain) + "+" + std::to_string(lc.n_burn);
      const auto transition = make_linear_transition(model);
      const auto observation = make_linear_observation(model);

      double sigma_prime = lc.sigma_prime;
      RwmConfig rcfg;
      rcfg.n_retain = lc.n_retain;
      rcfg.n_burn = lc.n_burn;
      rcfg.q = lc.q;
      if (sigma_prime <= 0) {
        Rng tune_rng(cfg.seed, 2);
        const Eigen::MatrixXd pool = z0;
        const Eigen::VectorXd& y1 = truth.observations.front();
        const LogLik g1 = [&](const Eigen::VectorXd& z) {
          return observation->log_likelihood(z, y1, 1);
        };
        rcfg.proposal = std::make_shared<DiagonalNoise>(lc.d, 1.0);
        sigma_prime = tune_proposal_scale(
            *transition, g1, pool, 1, rcfg,
            [&](double s) { return std::make_shared<DiagonalNoise>(lc.d, s); },
            2.4 * lc.sigma_z / std::sqrt(static_cast<double>(lc.d)), tune_rng);
      }
      rcfg.proposal = std::make_shared<DiagonalNoise>(lc.d, sigma_prime);
      report["sigma_prime"] = sigma_prime;

      std::vector<RepeatOutcome> outcomes(cfg.repeats);
      for_each_repeat(cfg.repeats, [&](int m) {
        try {
          Rng rng(cfg.repeat_base() + m, 1);
          outcomes[m].series = run_filter_known(*transition, *observation, truth.observations,
                                                z0, rcfg, rng);
        } catch (const std::exception& e) {
          outcomes[m].failed = true;
          outcomes[m].status = e.what();
        }
      });
      std::vector<FilterSeries> ok_runs;
      for (int m = 0; m < cfg.repeats; ++m) {
        result.repeat_status.push_back(outcomes[m].status);
        if (outcomes[m].failed) {
          result.exit_code = 1;
        } else {
          write_steps_csv(cfg.out_dir + "/steps_smcmc_r" + std::to_string(m) + ".csv",
                          outcomes[m].series, coords);
          ok_runs.push_back(std::move(outcomes[m].series));
        }
      }
      if (ok_runs.empty()) {
        result.rows.push_back({"smcmc", lc.d, ensemble_label, repeats_used, 0.0,
                               seconds_since(start)});
        continue;
      }
      means = average_means(ok_runs);
      report["smcmc_diagnostics"] = diag_summary(ok_runs);
    } else {
      throw std::invalid_argument("run_experiment: unknown method " + method);
    }

    const double fraction = accuracy_metric(means, kf_means, lc.sigma_y);
    result.rows.push_back(
        {method, lc.d, ensemble_label, repeats_used, fraction, seconds_since(start)});
    result.metrics["fraction_" + method] = fraction;
    write_means_csv(cfg.out_dir + "/means_" + method + ".csv", means, coords);
    emit_histogram(collect_errors(means, kf_means, /*include_zero_row=*/true), 40)
        .write(cfg.out_dir + "/histogram_" + method + ".csv");
  }

  CsvTable bench;
  bench.header = {"method", "d", "ensemble", "repeats", "fraction", "seconds"};
  for (const auto& row : result.rows)
    bench.rows.push_back({row.method, std::to_string(row.d), row.ensemble,
                          std::to_string(row.repeats), format_double(row.fraction),
                          format_double(row.seconds)});
  bench.write(cfg.out_dir + "/benchmark.csv");

  report["rows"] = json::array();
  for (const auto& row : result.rows)
    report["rows"].push_back({{"method", row.method},
                              {"d", row.d},
                              {"ensemble", row.ensemble},
                              {"repeats", row.repeats},
                              {"fraction", row.fraction},
                              {"seconds", row.seconds}});
  report["repeat_status"] = result.repeat_status;
  std::ofstream(cfg.out_dir + "/report.json") << report.dump(2) << "\n";
  return result;
}

ExperimentResult run_sw(const RunConfig& cfg, bool unknown) {
  const SwSection& sc = cfg.sw;
  ExperimentResult result;
  fs::create_directories(cfg.out_dir);

  sw::SwFixture fixture = sw::load_fixture(sc.fixtures_dir);
  if (sc.n_drifters > static_cast<int>(fixture.drifters0.size()))
    throw std::invalid_argument("run_experiment: fixture has fewer drifters than requested");
  fixture.drifters0.resize(sc.n_drifters);

  const sw::SwTransitionModel model = make_sw_model(fixture, sc);
  const sw::SwGrid& grid = model.grid();
  const Eigen::VectorXd z0 = sw::pack_state(fixture.initial, grid);
  const std::vector<int> coords = effective_coords(
      cfg.mean_coords.empty() ? std::vector<int>{0, grid.field_size(), 2 * grid.field_size()}
                              : cfg.mean_coords,
      grid.state_dim());

  Rng rng_data(cfg.seed, 0);
  const SwTwinData twin =
      generate_sw_twin(model, z0, fixture.drifters0, sc.sigma_y, sc.n_obs, rng_data);

  json report;
  report["experiment"] = cfg.experiment;
  report["seed"] = cfg.seed;
  report["d"] = grid.state_dim();
  report["n_drifters"] = sc.n_drifters;

  // Proposal: sine-mode noise scaled to sigma'.
  double sigma_prime = sc.sigma_prime;
  RwmConfig rcfg;
  rcfg.n_retain = sc.n_retain;
  rcfg.n_burn = sc.n_burn;
  rcfg.q = sc.q;
  const DrifterLikelihoodFactory factory(grid, sc.sigma_y);
  if (sigma_prime <= 0) {
    Rng tune_rng(cfg.seed, 2);
    const Eigen::MatrixXd pool = z0;
    LogLik g1;
    if (unknown) {
      std::vector<Eigen::Vector2d> positions = fixture.drifters0;
      long clamps = 0;
      model.flow_advect(z0, 1, positions, &clamps);
      g1 = factory.make(positions, twin.observations.front(), 1);
    } else {
      const ObsSelection& sel = twin.selections.front();
      const Eigen::VectorXd& y1 = twin.observations.front();
      const double sy = sc.sigma_y;
      g1 = [&sel, &y1, sy](const Eigen::VectorXd& z) { return likelihood_known(z, y1, sel, sy); };
    }
    rcfg.proposal = std::make_shared<sw::SineModeNoise>(grid, sc.n_modes, sc.sigma);
    sigma_prime = tune_proposal_scale(
        model, g1, pool, 1, rcfg,
        [&](double s) { return std::make_shared<sw::SineModeNoise>(grid, sc.n_modes, s); },
        sc.sigma, tune_rng);
  }
  rcfg.proposal = std::make_shared<sw::SineModeNoise>(grid, sc.n_modes, sigma_prime);
  report["sigma_prime"] = sigma_prime;

  const DrifterObservationModel obs_model(twin.selections, sc.sigma_y);

  std::vector<RepeatOutcome> outcomes(cfg.repeats);
  for_each_repeat(cfg.repeats, [&](int m) {
    try {
      Rng rng(cfg.repeat_base() + m, 1);
      outcomes[m].series =
          unknown ? run_filter_unknown(model, factory, twin.observations, z0, fixture.drifters0,
                                       rcfg, rng)
                  : run_filter_known(model, obs_model, twin.observations, z0, rcfg, rng);
    } catch (const std::exception& e) {
      outcomes[m].failed = true;
      outcomes[m].status = e.what();
    }
  });

  std::vector<FilterSeries> ok_runs;
  for (int m = 0; m < cfg.repeats; ++m) {
    result.repeat_status.push_back(outcomes[m].status);
    if (outcomes[m].failed) {
      result.exit_code = 1;
    } else {
      write_steps_csv(cfg.out_dir + "/steps_r" + std::to_string(m) + ".csv", outcomes[m].series,
                      coords);
      ok_runs.push_back(std::move(outcomes[m].series));
    }
  }
  if (ok_runs.empty()) {
    report["repeat_status"] = result.repeat_status;
    std::ofstream(cfg.out_dir + "/report.json") << report.dump(2) << "\n";
    result.exit_code = 1;
    return result;
  }

  const std::vector<Eigen::VectorXd> means = average_means(ok_runs);
  write_means_csv(cfg.out_dir + "/filter_means.csv", means, coords);

  // Accuracy against the hidden signal.
  const double fraction =
      accuracy_metric(means, twin.states, sc.sigma_y);
  result.metrics["fraction_vs_truth"] = fraction;

  // Field RMSE per block, filter vs truth and free-run reference vs truth.
  const int fs_ = grid.field_size();
  auto block_rmse = [&](const std::vector<Eigen::VectorXd>& series, int block) {
    double acc = 0;
    long count = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      acc += (series[k].segment(block * fs_, fs_) - twin.states[k].segment(block * fs_, fs_))
                 .squaredNorm();
      count += fs_;
    }
    return std::sqrt(acc / count);
  };
  const std::vector<Eigen::VectorXd> reference =
      prior_reference_mean(model, sc.n_obs, z0, sc.reference_runs, cfg.seed + 7);
  for (int block = 0; block < 3; ++block) {
    const char* name = block == 0 ? "eta" : block == 1 ? "u" : "v";
    result.metrics[std::string("rmse_filter_") + name] = block_rmse(means, block);
    result.metrics[std::string("rmse_reference_") + name] = block_rmse(reference, block);
  }

  // Histogram: known mode against the hidden signal, unknown mode against
  // the free-run reference (the prior-mean convention of the real-data run).
  const auto& hist_ref = unknown ? reference : twin.states;
  emit_histogram(collect_errors(means, hist_ref, /*include_zero_row=*/true), 40)
      .write(cfg.out_dir + "/histogram.csv");
  result.metrics["fraction_vs_reference"] = accuracy_metric(means, hist_ref, sc.sigma_y);

  // Tracks: true drifters, and in unknown mode the predicted ones.
  std::vector<std::pair<std::string, std::vector<std::vector<Eigen::Vector2d>>>> groups;
  groups.emplace_back("true", twin.tracks);
  if (unknown) {
    std::vector<std::vector<Eigen::Vector2d>> predicted;
    predicted.push_back(fixture.drifters0);
    for (const auto& x : ok_runs.front().xbars) predicted.push_back(x.xbar);
    groups.emplace_back("predicted", predicted);

    // Track error in grid cells, RMS over drifters and times.
    double acc = 0;
    long count = 0;
    for (std::size_t k = 0; k < ok_runs.front().xbars.size(); ++k) {
      const auto& xb = ok_runs.front().xbars[k].xbar;
      for (std::size_t m = 0; m < xb.size(); ++m) {
        const Eigen::Vector2d err = xb[m] - twin.tracks[k + 1][m];
        const double cells = std::hypot(err.x() / grid.dx, err.y() / grid.dy);
        acc += cells * cells;
        ++count;
      }
    }
    result.metrics["track_rms_cells"] = std::sqrt(acc / count);
  }
  write_tracks_csv(cfg.out_dir + "/tracks.csv", groups);

  for (int step : sc.snapshot_steps) {
    if (step < 1 || step > sc.n_obs) continue;
    std::vector<LabelledTrack> snapshot_tracks;
    for (std::size_t m = 0; m < twin.tracks.front().size(); ++m) {
      std::vector<Eigen::Vector2d> polyline;
      for (int k = 0; k <= step; ++k) polyline.push_back(twin.tracks[k][m]);
      snapshot_tracks.emplace_back("true_" + std::to_string(m), std::move(polyline));
    }
    if (unknown) {
      for (std::size_t m = 0; m < twin.tracks.front().size(); ++m) {
        std::vector<Eigen::Vector2d> polyline{fixture.drifters0[m]};
        for (int k = 0; k < step; ++k) polyline.push_back(ok_runs.front().xbars[k].xbar[m]);
        snapshot_tracks.emplace_back("predicted_" + std::to_string(m), std::move(polyline));
      }
    }
    const double t = model.time_grid().times[step];
    emit_snapshot(cfg.out_dir, "snapshot_truth_k" + std::to_string(step), twin.states[step - 1],
                  grid, snapshot_tracks, t);
    emit_snapshot(cfg.out_dir, "snapshot_filter_k" + std::to_string(step), means[step - 1], grid,
                  snapshot_tracks, t);
  }

  report["sigma_prime"] = sigma_prime;
  report["metrics"] = result.metrics;
  report["diagnostics"] = diag_summary(ok_runs);
  report["repeat_status"] = result.repeat_status;
  std::ofstream(cfg.out_dir + "/report.json") << report.dump(2) << "\n";
  return result;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg) {
  if (cfg.repeats < 1) throw std::invalid_argument("run_experiment: M must be >= 1");
  if (cfg.experiment == "linear") return run_linear(cfg, false);
  if (cfg.experiment == "linear-partial") return run_linear(cfg, true);
  if (cfg.experiment == "sw-known") return run_sw(cfg, false);
  if (cfg.experiment == "sw-unknown") return run_sw(cfg, true);
  throw std::invalid_argument("run_experiment: unknown experiment " + cfg.experiment);
}

}  // namespace smcda
