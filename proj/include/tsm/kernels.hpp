#pragma once

#include "tsm/grid.hpp"

namespace tsm {

// Per-voxel grid kernels. These are the OpenMP-parallel production
// implementations; tsm::serial (serial_ref.hpp) keeps plain-loop reference
// versions for equivalence testing and benchmarking.

// Multilinear interpolation at a continuous voxel coordinate p (p has
// geom.ndim entries). Coordinates outside the grid clamp to the boundary.
double interp_scalar(const ScalarImage& img, const double* p);
double interp_scalar(const ScalarImage& img, double x, double y);
double interp_scalar(const ScalarImage& img, double x, double y, double z);

// Componentwise multilinear interpolation; writes geom.ndim values to out.
void interp_vector(const VectorField& field, const double* p, double* out);

// out(x) = img(x + disp(x)). disp must be a displacement on the same grid.
ScalarImage warp_image(const ScalarImage& img, const VectorField& disp);

// Displacement of phi_outer o phi_inner:
// result(x) = inner(x) + outer interpolated at x + inner(x).
VectorField compose_disp(const VectorField& outer, const VectorField& inner);

// Voxelwise Euclidean norm.
ScalarImage magnitude_map(const VectorField& field);

// Arithmetic mean of map over the true voxels of mask (>=1 required).
double mean_over_mask(const ScalarImage& map, const Mask& mask);

// Voxel is kept iff a > frac*max(a) or b > frac*max(b). An all-false result
// is rejected (degenerate images).
Mask foreground_mask(const ScalarImage& a, const ScalarImage& b, double frac = 0.01);

// Separable Gaussian convolution with a sampled, normalized kernel of
// radius ceil(3*sigma); boundary handling clamps to the edge sample.
// sigma == 0 returns the input unchanged.
ScalarImage gaussian_smooth(const ScalarImage& img, double sigma);
VectorField gaussian_smooth(const VectorField& field, double sigma);

// Assorted small helpers shared by the higher-level modules.
double max_magnitude(const VectorField& field);
VectorField scale_field(const VectorField& field, double s, FieldRole out_role);
double max_value(const ScalarImage& img);

}  // namespace tsm
