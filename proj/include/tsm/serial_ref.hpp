#pragma once

#include "tsm/grid.hpp"

// Plain single-threaded reference versions of the hot per-voxel kernels.
// They are written independently of the OpenMP implementations (nested
// loops instead of flattened indices, naive convolution) and exist so that
// tests can assert bit-exact agreement and the benchmark has a baseline.
namespace tsm::serial {

double interp_scalar(const ScalarImage& img, const double* p);
void interp_vector(const VectorField& field, const double* p, double* out);
ScalarImage warp_image(const ScalarImage& img, const VectorField& disp);
VectorField compose_disp(const VectorField& outer, const VectorField& inner);
ScalarImage magnitude_map(const VectorField& field);
double mean_over_mask(const ScalarImage& map, const Mask& mask);
ScalarImage gaussian_smooth(const ScalarImage& img, double sigma);
VectorField gaussian_smooth(const VectorField& field, double sigma);

}  // namespace tsm::serial
