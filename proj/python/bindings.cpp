#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smcda/drifters.hpp"
#include "smcda/ensemble.hpp"
#include "smcda/experiment.hpp"
#include "smcda/linear_gaussian.hpp"
#include "smcda/smcmc.hpp"
#include "smcda/sw/fixtures.hpp"
#include "smcda/sw/model.hpp"
#include "smcda/sw/noise.hpp"
#include "smcda/sw/solver.hpp"

namespace py = pybind11;
using namespace smcda;

namespace {

/// Filter means as an (n_obs x d) array for convenient numpy use.
Eigen::MatrixXd stack_means(const FilterSeries& series) {
  if (series.steps.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd out(series.steps.size(), series.steps.front().mean.size());
  for (std::size_t k = 0; k < series.steps.size(); ++k) out.row(k) = series.steps[k].mean;
  return out;
}

Eigen::MatrixXd stack_vectors(const std::vector<Eigen::VectorXd>& vs) {
  if (vs.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd out(vs.size(), vs.front().size());
  for (std::size_t k = 0; k < vs.size(); ++k) out.row(k) = vs[k];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sequential MCMC data assimilation toolkit (C++ core)";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("uniform_int", &Rng::uniform_int);

  py::class_<LinearModel>(m, "LinearModel")
      .def(py::init([](int d, double a, int r_hat, int obs_interval, double sigma_z,
                       double sigma_y) {
             return make_scaled_identity_model(d, a, r_hat, obs_interval, sigma_z, sigma_y);
           }),
           py::arg("d"), py::arg("a"), py::arg("r_hat") = 1, py::arg("L") = 1,
           py::arg("sigma_z") = 0.05, py::arg("sigma_y") = 0.05)
      .def_readwrite("A", &LinearModel::A)
      .def_readwrite("z0", &LinearModel::z0)
      .def_readwrite("sigma_z", &LinearModel::sigma_z)
      .def_readwrite("sigma_y", &LinearModel::sigma_y)
      .def_property_readonly("d", &LinearModel::dim)
      .def_property_readonly("d_y", &LinearModel::obs_dim)
      .def("dense_C", &LinearModel::dense_C)
      .def("validate", &LinearModel::validate);

  m.def(
      "simulate_linear",
      [](const LinearModel& model, int n_obs, std::uint64_t seed) {
        Rng rng(seed, 0);
        const Trajectory t = simulate_linear(model, n_obs, rng);
        return py::make_tuple(stack_vectors(t.states), stack_vectors(t.observations));
      },
      py::arg("model"), py::arg("n_obs"), py::arg("seed"),
      "Simulate the hidden states and observations of a linear-Gaussian model.");

  m.def(
      "kalman_filter",
      [](const LinearModel& model, const Eigen::MatrixXd& observations,
         const Eigen::MatrixXd& p0) {
        std::vector<Eigen::VectorXd> ys;
        for (Eigen::Index k = 0; k < observations.rows(); ++k)
          ys.push_back(observations.row(k));
        KalmanOptions opt;
        opt.P0 = p0;
        const auto beliefs = kalman_filter(model, ys, opt);
        std::vector<Eigen::VectorXd> means;
        for (const auto& b : beliefs) means.push_back(b.mean);
        return stack_vectors(means);
      },
      py::arg("model"), py::arg("observations"), py::arg("P0") = Eigen::MatrixXd(),
      "Exact filter means, one row per observation time.");

  m.def(
      "run_smcmc_linear",
      [](const LinearModel& model, const Eigen::MatrixXd& observations, int n_retain, int n_burn,
         double sigma_prime, double q, std::uint64_t seed) {
        const auto transition = make_linear_transition(model);
        const auto observation = make_linear_observation(model);
        std::vector<Eigen::VectorXd> ys;
        for (Eigen::Index k = 0; k < observations.rows(); ++k)
          ys.push_back(observations.row(k));
        RwmConfig cfg;
        cfg.n_retain = n_retain;
        cfg.n_burn = n_burn;
        cfg.q = q;
        cfg.proposal = std::make_shared<DiagonalNoise>(model.dim(), sigma_prime);
        Rng rng(seed, 1);
        const FilterSeries series =
            run_filter_known(*transition, *observation, ys, model.z0, cfg, rng);
        py::dict diag;
        double acc = 0;
        for (const auto& s : series.steps) acc += s.diag.acceptance_rate;
        diag["mean_acceptance"] = series.steps.empty() ? 0.0 : acc / series.steps.size();
        return py::make_tuple(stack_means(series), diag);
      },
      py::arg("model"), py::arg("observations"), py::arg("n_retain"), py::arg("n_burn"),
      py::arg("sigma_prime"), py::arg("q") = 0.33, py::arg("seed") = 1,
      "Sequential-MCMC filter means for a linear-Gaussian model.");

  m.def("accuracy_metric",
        [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma_y) {
          std::vector<Eigen::VectorXd> va, vb;
          for (Eigen::Index k = 0; k < a.rows(); ++k) va.push_back(a.row(k));
          for (Eigen::Index k = 0; k < b.rows(); ++k) vb.push_back(b.row(k));
          return accuracy_metric(va, vb, sigma_y);
        },
        py::arg("filter_means"), py::arg("reference_means"), py::arg("sigma_y"),
        "Fraction of absolute errors at or below sigma_y / 2.");

  // Ensemble analyses on (d x N_e) member matrices; the matrix is modified
  // and returned.
  m.def(
      "enkf_analysis",
      [](Eigen::MatrixXd members, const std::vector<int>& obs_indices, const Eigen::VectorXd& y,
         double sigma_y, std::uint64_t seed) {
        Rng rng(seed, 0);
        enkf_analysis(members, obs_indices, y, sigma_y, &rng);
        return members;
      },
      py::arg("members"), py::arg("obs_indices"), py::arg("y"), py::arg("sigma_y"),
      py::arg("seed"));
  m.def(
      "etkf_analysis",
      [](Eigen::MatrixXd members, const std::vector<int>& obs_indices, const Eigen::VectorXd& y,
         double sigma_y) {
        etkf_analysis(members, obs_indices, y, sigma_y);
        return members;
      },
      py::arg("members"), py::arg("obs_indices"), py::arg("y"), py::arg("sigma_y"));
  m.def(
      "estkf_analysis",
      [](Eigen::MatrixXd members, const std::vector<int>& obs_indices, const Eigen::VectorXd& y,
         double sigma_y) {
        estkf_analysis(members, obs_indices, y, sigma_y);
        return members;
      },
      py::arg("members"), py::arg("obs_indices"), py::arg("y"), py::arg("sigma_y"));

  py::class_<sw::SwGrid>(m, "SwGrid")
      .def(py::init([](int nx, int ny, double dx, double dy) {
             sw::SwGrid g{nx, ny, dx, dy};
             g.validate();
             return g;
           }),
           py::arg("nx"), py::arg("ny"), py::arg("dx"), py::arg("dy"))
      .def_readonly("nx", &sw::SwGrid::nx)
      .def_readonly("ny", &sw::SwGrid::ny)
      .def_readonly("dx", &sw::SwGrid::dx)
      .def_readonly("dy", &sw::SwGrid::dy)
      .def_property_readonly("state_dim", &sw::SwGrid::state_dim);

  py::class_<sw::SineModeNoise>(m, "SineModeNoise")
      .def(py::init<const sw::SwGrid&, int, double, double>(), py::arg("grid"),
           py::arg("n_modes"), py::arg("sigma"),
           py::arg("support_tol") = std::numeric_limits<double>::infinity())
      .def("sample",
           [](const sw::SineModeNoise& n, std::uint64_t seed) {
             Rng rng(seed, 0);
             return n.sample(rng);
           },
           py::arg("seed"))
      .def("sample_field",
           [](const sw::SineModeNoise& n, std::uint64_t seed) {
             Rng rng(seed, 0);
             return Eigen::MatrixXd(n.sample_field(rng));
           },
           py::arg("seed"))
      .def("log_density", &sw::SineModeNoise::log_density);

  py::class_<sw::SwFixture>(m, "SwFixture")
      .def_property_readonly("grid", [](const sw::SwFixture& f) { return f.grid; })
      .def_property_readonly("drifters",
                             [](const sw::SwFixture& f) {
                               Eigen::MatrixXd out(f.drifters0.size(), 2);
                               for (std::size_t i = 0; i < f.drifters0.size(); ++i)
                                 out.row(i) = f.drifters0[i];
                               return out;
                             })
      .def_property_readonly("initial_state", [](const sw::SwFixture& f) {
        return sw::pack_state(f.initial, f.grid);
      });

  m.def("make_preset_fixture", &sw::make_preset_fixture, py::arg("name"),
        "Synthetic fixture presets: 'sw32' or 'sw121'.");
  m.def("save_fixture", &sw::save_fixture, py::arg("fixture"), py::arg("dir"));
  m.def("load_fixture", &sw::load_fixture, py::arg("dir"));

  m.def(
      "sw_flow",
      [](const sw::SwFixture& fixture, const Eigen::VectorXd& z, double t_start, double t_end,
         int inner_steps, const std::string& integrator) {
        const sw::Integrator integ =
            integrator == "euler" ? sw::Integrator::Euler : sw::Integrator::Heun;
        sw::SwState s = sw::unpack_state(z, fixture.grid);
        s = sw::sw_flow(s, fixture.params, fixture.grid, fixture.boundary, t_start, t_end,
                        inner_steps, integ);
        return sw::pack_state(s, fixture.grid);
      },
      py::arg("fixture"), py::arg("state"), py::arg("t_start"), py::arg("t_end"),
      py::arg("inner_steps"), py::arg("integrator") = "heun",
      "Deterministic shallow-water flow of a packed state vector.");

  m.def(
      "advect_drifters",
      [](const Eigen::MatrixXd& positions, const std::vector<Eigen::VectorXd>& states,
         const sw::SwGrid& grid, double tau) {
        std::vector<Eigen::Vector2d> pos;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) pos.emplace_back(positions.row(i));
        const DrifterSet out =
            advect_drifters(DrifterSet::at(pos), states, grid, tau);
        Eigen::MatrixXd res(out.size(), 2);
        for (int i = 0; i < out.size(); ++i) res.row(i) = out.positions[i];
        return res;
      },
      py::arg("positions"), py::arg("states_per_inner_step"), py::arg("grid"), py::arg("tau"));

  m.def(
      "select_observed_indices",
      [](const Eigen::MatrixXd& positions, const sw::SwGrid& grid) {
        std::vector<Eigen::Vector2d> pos;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) pos.emplace_back(positions.row(i));
        const ObsSelection sel = select_observed_indices(pos, grid);
        std::vector<std::tuple<int, int, int, int>> out;
        for (const auto& n : sel.nodes) out.emplace_back(n.i, n.j, n.u_flat, n.v_flat);
        return out;
      },
      py::arg("positions"), py::arg("grid"),
      "Per drifter: (i, j, u_flat, v_flat) of the nearest grid node.");

  m.def(
      "observe",
      [](const Eigen::VectorXd& state, const Eigen::MatrixXd& positions, const sw::SwGrid& grid,
         double sigma_y, std::uint64_t seed) {
        std::vector<Eigen::Vector2d> pos;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) pos.emplace_back(positions.row(i));
        const ObsSelection sel = select_observed_indices(pos, grid);
        if (sigma_y > 0) {
          Rng rng(seed, 0);
          return observe(state, sel, sigma_y, &rng);
        }
        return observe(state, sel, 0.0, nullptr);
      },
      py::arg("state"), py::arg("positions"), py::arg("grid"), py::arg("sigma_y") = 0.0,
      py::arg("seed") = 0);

  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
         int repeats) {
        RunConfig cfg = RunConfig::from_json_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.seed = seed;
        if (repeats) cfg.repeats = repeats;
        const ExperimentResult result = run_experiment(cfg);
        py::dict out;
        out["exit_code"] = result.exit_code;
        py::dict metrics;
        for (const auto& [k, v] : result.metrics) metrics[py::str(k)] = v;
        out["metrics"] = metrics;
        return out;
      },
      py::arg("config_path"), py::arg("out_dir") = "", py::arg("seed") = 0,
      py::arg("repeats") = 0,
      "Run a configured experiment, writing artifacts under out_dir.");
}
