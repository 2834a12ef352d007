#pragma once

#include "tsm/grid.hpp"

namespace tsm {

// Group operations on stationary velocity fields. The flow of a velocity v
// is the deformation phi = exp(v) = id + displacement; exp is computed by
// scaling and squaring.

// Displacement of exp(scale * v).
VectorField exp_svf(const VectorField& v, double scale);

// Displacement of exp(-v), the inverse deformation.
VectorField invert_svf(const VectorField& v);

// Per-voxel ndim x ndim Jacobian of phi = id + disp. Central differences in
// the interior, one-sided at the boundary, row-major per voxel:
// m[r*ndim + c] = d(phi_r)/d(x_c).
struct JacobianField {
    GridGeom geom;
    std::vector<double> m;

    const double* at(std::size_t voxel) const {
        return m.data() + voxel * geom.ndim * geom.ndim;
    }
};

JacobianField jacobian(const VectorField& disp);
ScalarImage jacobian_det(const JacobianField& jac);

// First-order combination of two velocities into one (voxelwise sum).
VectorField bch_combine(const VectorField& a, const VectorField& b);

enum class TransportMethod { conjugate_pushforward };

struct TransportResult {
    VectorField field;
    long fallback_count = 0;   // voxels where the Jacobian solve was skipped
};

// Re-expresses the velocity u in the coordinate frame reached by exp(vs):
// with phi = exp(vs) and A = jacobian(phi),
//   out(x) = A(x)^-1 * u(x + disp_phi(x)).
// Voxels with |det A| < 1e-8 fall back to the plain resample and are counted.
TransportResult parallel_transport(const VectorField& u, const VectorField& vs,
                                   TransportMethod method = TransportMethod::conjugate_pushforward);

}  // namespace tsm
