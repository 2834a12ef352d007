#pragma once

#include <vector>

#include "tsm/grid.hpp"

namespace tsm {

struct SimConfig {
    GridGeom geom = GridGeom::make2d(128, 128);
    int n_frames = 7;
    double shape_amp = 3.0;     // max voxels of the anatomy-difference field
    double path_amp = 3.0;      // max voxels of the process field
    double sigma = 8.0;         // smoothness of the synthetic fields, voxels
    unsigned seed = 0;

    void validate() const;
};

// Standard head phantom (10 ellipses, the [0,1]-intensity variant), or its
// stacked-ellipsoid analogue for 3D grids.
ScalarImage shepp_logan(const GridGeom& geom);

// Smoothed white noise, zeroed within 3 voxels of the border (with a soft
// ramp further in) and rescaled so the maximum magnitude equals amp.
// Deterministic for a given seed.
VectorField synth_svf(const GridGeom& geom, double amp, double sigma, unsigned seed);

// One of the three synthetic series pairs:
//   1 - same process, bases differ by a shape field;
//   2 - same base, mutually inverse processes;
//   3 - both differ.
// Generators are returned so tests can check recovered quantities.
struct SimSet {
    std::vector<ScalarImage> frames_i, frames_j;
    std::vector<double> times_i, times_j;
    VectorField v_shape;
    VectorField v_path;
    std::vector<double> gamma;   // profile of series i; series j uses -gamma in sets 2 and 3
};

SimSet build_sim_set(int set_id, const SimConfig& config);

}  // namespace tsm
