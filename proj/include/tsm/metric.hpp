#pragma once

#include <optional>
#include <string>

#include "tsm/alignment.hpp"
#include "tsm/grid.hpp"
#include "tsm/registration.hpp"
#include "tsm/svf.hpp"

namespace tsm {

// Everything the comparison produces. The maps live in the reference
// (second) model's shape frame; total is always ds + dp.
struct DistanceReport {
    ScalarImage ds_map;
    ScalarImage dp_map;
    double ds = 0.0;
    double dp = 0.0;
    double total = 0.0;
    double ds_max = 0.0, ds_p95 = 0.0;    // extra reductions, for analysis only
    double dp_max = 0.0, dp_p95 = 0.0;
    double t_a = 0.0, t_b = 0.0;
    int n_time_samples = 0;
    Mask mask;
    std::string reference;                // which input served as the reference frame
    long transport_fallbacks = 0;
    int nonmonotone_rates = 0;
};

struct ShapeDistanceResult {
    VectorField velocity;    // V such that exp(V) carries reference coordinates into the other anatomy
    ScalarImage ds_map;
    double ds = 0.0;
    Mask mask;
};

// Registers the two aligned shapes (fixed = reference = model_j's shape) and
// reduces the velocity magnitude over the joint foreground.
ShapeDistanceResult shape_distance(const AlignedPair& pair, const RegParams& reg);

struct PathDistanceResult {
    ScalarImage dp_map;
    double dp = 0.0;
    long transport_fallbacks = 0;
};

// Transports model_i's path directions into the reference frame through the
// shape velocity, then takes the per-voxel maximum over uniformly sampled
// times of the velocity-difference magnitude.
PathDistanceResult path_distance(const AlignedPair& pair, const VectorField& shape_velocity,
                                 const Mask& mask, int n_samples = 101);

// align -> shape_distance -> path_distance -> report. The second model is
// the reference.
DistanceReport total_distance(const TsModel& model_i, const TsModel& model_j,
                              std::optional<std::pair<double, double>> requested_interval,
                              const RegParams& reg, int n_samples = 101);

}  // namespace tsm
