#include "smcda/sw/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "smcda/csv.hpp"

namespace smcda::sw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_grid_csv(const std::string& path, const Eigen::ArrayXXd& interior) {
  CsvTable table;
  table.rows.reserve(interior.rows());
  for (Eigen::Index j = 0; j < interior.rows(); ++j) {
    std::vector<std::string> row;
    row.reserve(interior.cols());
    for (Eigen::Index i = 0; i < interior.cols(); ++i) row.push_back(format_double(interior(j, i)));
    table.rows.push_back(std::move(row));
  }
  table.write(path);
}

Eigen::ArrayXXd read_grid_csv(const std::string& path, int ny, int nx) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("fixture: cannot open " + path);
  Eigen::ArrayXXd out(ny, nx);
  std::string line;
  for (int j = 0; j < ny; ++j) {
    if (!std::getline(in, line)) throw std::runtime_error("fixture: short file " + path);
    std::stringstream ss(line);
    std::string field;
    for (int i = 0; i < nx; ++i) {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("fixture: short row in " + path);
      out(j, i) = parse_double(field);
    }
  }
  return out;
}

Eigen::ArrayXXd embed_with_replicated_ghosts(const Eigen::ArrayXXd& interior) {
  const Eigen::Index ny = interior.rows(), nx = interior.cols();
  Eigen::ArrayXXd full(ny + 2, nx + 2);
  full.block(1, 1, ny, nx) = interior;
  full.col(0) = full.col(1);
  full.col(nx + 1) = full.col(nx);
  full.row(0) = full.row(1);
  full.row(ny + 1) = full.row(ny);
  return full;
}

}  // namespace

SwFixture load_fixture(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw std::runtime_error("fixture: cannot open manifest in " + dir);
  const json manifest = json::parse(in, nullptr, true, /*ignore_comments=*/true);

  SwFixture f;
  f.grid.nx = manifest.at("nx").get<int>();
  f.grid.ny = manifest.at("ny").get<int>();
  f.grid.dx = manifest.at("dx").get<double>();
  f.grid.dy = manifest.at("dy").get<double>();
  f.grid.validate();

  f.params.gravity = manifest.value("gravity", 9.81);
  const auto& cor = manifest.at("coriolis");
  f.params.f0 = cor.at("f0").get<double>();
  f.params.beta = cor.at("beta").get<double>();
  f.params.y0 = cor.at("y0").get<double>();

  const auto grid_file = [&](const std::string& name) {
    return read_grid_csv((root / name).string(), f.grid.ny, f.grid.nx);
  };
  f.params.bathymetry =
      embed_with_replicated_ghosts(grid_file(manifest.at("bathymetry").get<std::string>()));

  const auto& init = manifest.at("initial");
  const Eigen::ArrayXXd eta0 = grid_file(init.at("eta").get<std::string>());
  const Eigen::ArrayXXd u0 = grid_file(init.at("u").get<std::string>());
  const Eigen::ArrayXXd v0 = grid_file(init.at("v").get<std::string>());
  f.initial = SwState::zero(f.grid);
  f.initial.eta.block(1, 1, f.grid.ny, f.grid.nx) = eta0;
  f.initial.hu.block(1, 1, f.grid.ny, f.grid.nx) = eta0 * u0;
  f.initial.hv.block(1, 1, f.grid.ny, f.grid.nx) = eta0 * v0;

  const auto& bc = manifest.at("boundary");
  const std::string kind = bc.at("kind").get<std::string>();
  if (kind == "constant_from_initial") {
    f.boundary = BoundaryForcing::constant_from_state(f.initial, f.grid);
  } else if (kind == "periodic") {
    f.boundary = BoundaryForcing::periodic();
  } else if (kind == "frames") {
    const CsvTable table = CsvTable::read((root / bc.at("file").get<std::string>()).string());
    std::map<double, BoundaryForcing::Frame> frames;
    const int ct = table.column("t"), ce = table.column("edge"), cf = table.column("field"),
              ci = table.column("index"), cv = table.column("value");
    if (ct < 0 || ce < 0 || cf < 0 || ci < 0 || cv < 0)
      throw std::runtime_error("fixture: boundary.csv must have t,edge,field,index,value");
    for (const auto& row : table.rows) {
      const double t = parse_double(row[ct]);
      auto& frame = frames[t];
      if (frame.west_eta.size() == 0) {
        frame.t = t;
        const int fy = f.grid.full_y(), fx = f.grid.full_x();
        for (Eigen::ArrayXd* a : {&frame.west_eta, &frame.west_u, &frame.west_v, &frame.east_eta,
                                  &frame.east_u, &frame.east_v})
          *a = Eigen::ArrayXd::Zero(fy);
        for (Eigen::ArrayXd* a : {&frame.south_eta, &frame.south_u, &frame.south_v,
                                  &frame.north_eta, &frame.north_u, &frame.north_v})
          *a = Eigen::ArrayXd::Zero(fx);
      }
      const int idx = static_cast<int>(parse_double(row[ci]));
      const std::string& edge = row[ce];
      const std::string& field = row[cf];
      Eigen::ArrayXd* target = nullptr;
      if (edge == "W") target = field == "eta" ? &frame.west_eta : field == "u" ? &frame.west_u : &frame.west_v;
      else if (edge == "E") target = field == "eta" ? &frame.east_eta : field == "u" ? &frame.east_u : &frame.east_v;
      else if (edge == "S") target = field == "eta" ? &frame.south_eta : field == "u" ? &frame.south_u : &frame.south_v;
      else if (edge == "N") target = field == "eta" ? &frame.north_eta : field == "u" ? &frame.north_u : &frame.north_v;
      if (!target) throw std::runtime_error("fixture: bad edge tag " + edge);
      (*target)[idx] = parse_double(row[cv]);
    }
    std::vector<BoundaryForcing::Frame> ordered;
    ordered.reserve(frames.size());
    for (auto& [t, frame] : frames) ordered.push_back(std::move(frame));
    f.boundary = BoundaryForcing::dirichlet(std::move(ordered));
  } else {
    throw std::runtime_error("fixture: unknown boundary kind " + kind);
  }

  const CsvTable drifters = CsvTable::read((root / manifest.at("drifters").get<std::string>()).string());
  const int cx = drifters.column("x"), cy = drifters.column("y");
  if (cx < 0 || cy < 0) throw std::runtime_error("fixture: drifters.csv must have x,y");
  for (const auto& row : drifters.rows)
    f.drifters0.emplace_back(parse_double(row[cx]), parse_double(row[cy]));
  return f;
}

void save_fixture(const SwFixture& fixture, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  const SwGrid& g = fixture.grid;

  json manifest;
  manifest["nx"] = g.nx;
  manifest["ny"] = g.ny;
  manifest["dx"] = g.dx;
  manifest["dy"] = g.dy;
  manifest["units"] = {{"length", "m"}, {"time", "s"}, {"velocity", "m/s"}};
  manifest["gravity"] = fixture.params.gravity;
  manifest["coriolis"] = {{"f0", fixture.params.f0},
                          {"beta", fixture.params.beta},
                          {"y0", fixture.params.y0}};
  manifest["bathymetry"] = "H.csv";
  manifest["initial"] = {{"eta", "eta0.csv"}, {"u", "u0.csv"}, {"v", "v0.csv"}};
  manifest["boundary"] = {{"kind", "constant_from_initial"}};
  manifest["drifters"] = "drifters.csv";
  std::ofstream(root / "manifest.json") << manifest.dump(2) << "\n";

  write_grid_csv((root / "H.csv").string(),
                 fixture.params.bathymetry.block(1, 1, g.ny, g.nx));
  const Eigen::ArrayXXd eta0 = fixture.initial.eta.block(1, 1, g.ny, g.nx);
  write_grid_csv((root / "eta0.csv").string(), eta0);
  write_grid_csv((root / "u0.csv").string(),
                 fixture.initial.hu.block(1, 1, g.ny, g.nx) / eta0);
  write_grid_csv((root / "v0.csv").string(),
                 fixture.initial.hv.block(1, 1, g.ny, g.nx) / eta0);

  CsvTable drifters;
  drifters.header = {"id", "x", "y"};
  for (std::size_t i = 0; i < fixture.drifters0.size(); ++i)
    drifters.rows.push_back({std::to_string(i), format_double(fixture.drifters0[i].x()),
                             format_double(fixture.drifters0[i].y())});
  drifters.write((root / "drifters.csv").string());
}

SwFixture make_synthetic_fixture(int nx, int ny, double dx, double dy, double mean_depth,
                                 double surface_amplitude, double max_speed, int n_drifters,
                                 double latitude_deg) {
  SwFixture f;
  f.grid = SwGrid{nx, ny, dx, dy};
  f.grid.validate();

  const double lx = f.grid.max_x();
  const double ly = f.grid.max_y();
  const double psi0 = latitude_deg * M_PI / 180.0;
  f.params.gravity = 9.81;
  f.params.f0 = SwParams::coriolis_from_latitude(psi0);
  f.params.beta = 2.0 * 7.29e-5 * std::cos(psi0) / 6.371e6;
  f.params.y0 = 0.5 * ly;

  Eigen::ArrayXXd h(ny, nx), eta0(ny, nx), u0(ny, nx), v0(ny, nx);
  const double bump_w = 0.25 * std::min(lx, ly);
  // Streamfunction gyre: psi = Psi0 sin(pi x/lx) sin(pi y/ly); u = -dpsi/dy,
  // v = dpsi/dx, so the normal flow vanishes on the rim.
  const double psi_amp = max_speed / (M_PI / std::min(lx, ly));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * dx, y = j * dy;
      const double r2 = (x - 0.5 * lx) * (x - 0.5 * lx) + (y - 0.5 * ly) * (y - 0.5 * ly);
      h(j, i) = mean_depth - 0.04 * mean_depth * std::exp(-r2 / (2 * bump_w * bump_w));
      eta0(j, i) = h(j, i) + surface_amplitude * std::exp(-r2 / (2 * bump_w * bump_w));
      u0(j, i) = -psi_amp * (M_PI / ly) * std::sin(M_PI * x / lx) * std::cos(M_PI * y / ly);
      v0(j, i) = psi_amp * (M_PI / lx) * std::cos(M_PI * x / lx) * std::sin(M_PI * y / ly);
    }
  }
  f.params.bathymetry = embed_with_replicated_ghosts(h);
  f.initial = SwState::zero(f.grid);
  f.initial.eta.block(1, 1, ny, nx) = eta0;
  f.initial.hu.block(1, 1, ny, nx) = eta0 * u0;
  f.initial.hv.block(1, 1, ny, nx) = eta0 * v0;
  f.boundary = BoundaryForcing::constant_from_state(f.initial, f.grid);

  // Drifters on a ring around the centre.
  f.drifters0.reserve(n_drifters);
  for (int m = 0; m < n_drifters; ++m) {
    const double angle = 2.0 * M_PI * m / n_drifters;
    f.drifters0.emplace_back(0.5 * lx + 0.22 * lx * std::cos(angle),
                             0.5 * ly + 0.22 * ly * std::sin(angle));
  }
  return f;
}

SwFixture make_preset_fixture(const std::string& name) {
  if (name == "sw32")
    return make_synthetic_fixture(32, 32, 8000.0, 8000.0, 50.0, 0.3, 1.0, 6);
  if (name == "sw121")
    return make_synthetic_fixture(121, 121, 8602.0, 9258.0, 100.0, 0.4, 1.0, 12);
  throw std::invalid_argument("make_preset_fixture: unknown preset " + name);
}

}  // namespace smcda::sw
