#pragma once

#include <utility>
#include <vector>

#include "tsm/grid.hpp"
#include "tsm/registration.hpp"

namespace tsm {

// Scalar rate curve gamma(t): piecewise-linear through its knots, linearly
// extrapolated from the outermost pair on each side, and pinned to zero at
// the anchor time.
struct GammaCurve {
    std::vector<std::pair<double, double>> knots;   // (t, gamma), t strictly increasing
    double anchor = 0.0;                            // gamma(anchor) == 0

    double operator()(double t) const;
    bool monotone() const;
    void validate() const;

    static GammaCurve anchored(double m);           // single knot (m, 0)
};

// One side of a series model: the anatomy moves along direction v at rate
// gamma(t), i.e. the deformation at time t is exp(v * gamma(t)).
struct PathModel {
    VectorField direction;          // stationary velocity v
    GammaCurve rate;
    double t_lo = 0.0, t_hi = 0.0;  // covered interval; the anchor is one end
    bool degenerate = false;        // all fitted deformations were ~zero
};

enum class ShapeMode { longitudinal, template_mean };

// Continuous model of one image time series: an anchor anatomy at time m
// and two paths covering [t0, m] and [m, tn].
struct TsModel {
    ScalarImage shape;
    double m = 0.0;
    PathModel future;               // [m, tn]
    PathModel past;                 // [t0, m]
    double t0 = 0.0, tn = 0.0;
    ShapeMode provenance = ShapeMode::longitudinal;
    std::vector<double> fit_times;  // frame times the model was fitted to
    RegParams reg;                  // registration parameters used for the fit
};

// Picks the anchor anatomy: the middle frame (longitudinal) or the voxelwise
// mean assigned the median time snapped to a frame time (template_mean).
std::pair<ScalarImage, double> select_shape(const std::vector<ScalarImage>& frames,
                                            const std::vector<double>& times,
                                            ShapeMode mode);

// Alternating least-squares fit of samples[k] ~ direction * gamma[k].
// gamma is rescaled so gamma[norm_index] == 1 (the direction absorbs the
// magnitude). Degenerate when every sample is essentially zero.
struct Rank1Fit {
    VectorField direction;
    std::vector<double> gamma;
    bool degenerate = false;
};

Rank1Fit fit_rank1(const std::vector<VectorField>& samples, std::vector<double> gamma_init,
                   std::size_t norm_index, int max_iters = 10, double tol = 1e-6);

// Registers every frame to the anchor anatomy and fits the rank-1 model.
// All frame times must lie strictly on the requested side of m.
PathModel fit_path(const ScalarImage& shape, const std::vector<ScalarImage>& frames,
                   const std::vector<double>& times, double m, bool future_side,
                   const RegParams& reg);

TsModel fit_ts_model(const std::vector<ScalarImage>& frames, const std::vector<double>& times,
                     ShapeMode mode, const RegParams& reg);

// Image at time t: warp of the shape by exp(v_side * gamma_side(t)); t may
// lie outside [t0, tn], in which case gamma extrapolates linearly.
ScalarImage evaluate(const TsModel& model, double t);

}  // namespace tsm
