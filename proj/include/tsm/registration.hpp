#pragma once

#include "tsm/grid.hpp"

namespace tsm {

struct RegParams {
    int levels = 3;                 // multi-resolution levels, x2 downsample each
    int iters_per_level = 50;
    double sigma_fluid = 2.0;       // update-field smoothing, voxels
    double sigma_diffusion = 1.0;   // velocity-field smoothing, voxels
    double step_cap = 0.5;          // max update magnitude per iteration, voxels
    double stop_tol = 1e-4;         // relative MSE improvement threshold

    void validate() const;
};

// Log-domain demons registration. Returns a stationary velocity V such that
// warp_image(moving, exp_svf(V, 1)) approximates fixed; the result is never
// worse (in MSE) than the identity alignment.
VectorField register_svf(const ScalarImage& fixed, const ScalarImage& moving,
                         const RegParams& params = {});

// Mean squared intensity difference, over the whole grid or a mask.
double mse(const ScalarImage& a, const ScalarImage& b);
double mse(const ScalarImage& a, const ScalarImage& b, const Mask& mask);

}  // namespace tsm
