#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "smcda/sw/solver.hpp"

namespace smcda::sw {

/// On-disk twin-experiment inputs: plain CSV grids plus a JSON manifest.
///
/// Layout of a fixture directory:
///   manifest.json   grid sizes/spacing, gravity, Coriolis, file names
///   H.csv           bathymetry, ny rows x nx cols (interior cells)
///   eta0.csv u0.csv v0.csv   initial fields, same shape
///   boundary.csv    optional frames: t,edge,field,index,value
///   drifters.csv    id,x,y initial drifter positions (meters)
///
/// Real Copernicus/NOAA extracts map onto the same manifest: regrid the
/// product onto the uniform nx x ny node set, write the regridded H and the
/// initial eta/u/v snapshots as the CSV grids, emit one boundary frame per
/// provider timestamp (edge values of eta/u/v), and list drifter launch
/// positions in drifters.csv.  Nothing else in the pipeline distinguishes
/// synthetic from real inputs.
struct SwFixture {
  SwGrid grid;
  SwParams params;
  SwState initial;  // ghosts zero; the boundary forcing fills them
  BoundaryForcing boundary;
  std::vector<Eigen::Vector2d> drifters0;
};

SwFixture load_fixture(const std::string& dir);
void save_fixture(const SwFixture& fixture, const std::string& dir);

/// Deterministic synthetic fixtures used by the shipped configs:
/// a closed-basin gyre (streamfunction velocities vanishing at the rim),
/// a gentle bathymetry bump and a free-surface hill, with drifters placed
/// on a ring around the basin centre.
SwFixture make_synthetic_fixture(int nx, int ny, double dx, double dy, double mean_depth,
                                 double surface_amplitude, double max_speed, int n_drifters,
                                 double latitude_deg = 22.0);

/// Named presets: "sw32" (CI scale) and "sw121" (full-scale smoke).
SwFixture make_preset_fixture(const std::string& name);

}  // namespace smcda::sw
