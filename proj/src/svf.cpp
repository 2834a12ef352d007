#include "tsm/svf.hpp"

#include <cmath>
#include <cstdint>

#include "tsm/kernels.hpp"

namespace tsm {

VectorField exp_svf(const VectorField& v, double scale) {
    require_role(v, FieldRole::velocity, "exp_svf");
    require_finite(v, "exp_svf");
    if (!std::isfinite(scale)) throw std::invalid_argument("exp_svf: scale is not finite");

    // Seed threshold 0.125 voxels: with multilinear composition, a 0.5-voxel
    // seed leaves forward/inverse round-trip residuals above 0.1 voxel on
    // smooth fields of magnitude 3.
    constexpr double kSeedMax = 0.125;
    VectorField scaled = scale_field(v, scale, FieldRole::displacement);
    const double mm = max_magnitude(scaled);
    int squarings = 0;
    if (mm > kSeedMax) squarings = static_cast<int>(std::ceil(std::log2(mm / kSeedMax)));

    VectorField disp = scale_field(scaled, std::ldexp(1.0, -squarings), FieldRole::displacement);
    for (int i = 0; i < squarings; ++i) disp = compose_disp(disp, disp);
    return disp;
}

VectorField invert_svf(const VectorField& v) { return exp_svf(v, -1.0); }

JacobianField jacobian(const VectorField& disp) {
    const GridGeom& g = disp.geom;
    const int nd = g.ndim;
    const int nx = g.dim[0], ny = g.dim[1];
    JacobianField jac;
    jac.geom = g;
    jac.m.assign(g.voxels() * nd * nd, 0.0);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        int coord[3];
        coord[0] = static_cast<int>(i % nx);
        coord[1] = static_cast<int>((i / nx) % ny);
        coord[2] = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        double* J = jac.m.data() + static_cast<std::size_t>(i) * nd * nd;
        std::size_t stride = 1;
        for (int c = 0; c < nd; ++c) {
            const int xc = coord[c];
            const int lo = xc > 0 ? xc - 1 : xc;
            const int hi = xc < g.dim[c] - 1 ? xc + 1 : xc;
            const double inv_h = 1.0 / static_cast<double>(hi - lo);
            const std::size_t i_lo = static_cast<std::size_t>(i) - (xc - lo) * stride;
            const std::size_t i_hi = static_cast<std::size_t>(i) + (hi - xc) * stride;
            for (int r = 0; r < nd; ++r) {
                double d = (disp.comp(i_hi, r) - disp.comp(i_lo, r)) * inv_h;
                J[r * nd + c] = (r == c ? 1.0 : 0.0) + d;
            }
            stride *= static_cast<std::size_t>(g.dim[c]);
        }
    }
    return jac;
}

namespace {

inline double det2(const double* J) { return J[0] * J[3] - J[1] * J[2]; }

inline double det3(const double* J) {
    return J[0] * (J[4] * J[8] - J[5] * J[7]) -
           J[1] * (J[3] * J[8] - J[5] * J[6]) +
           J[2] * (J[3] * J[7] - J[4] * J[6]);
}

// Solves A x = b for the 2x2 / 3x3 voxel Jacobian; det must be nonzero.
inline void solve2(const double* A, const double* b, double det, double* x) {
    const double inv = 1.0 / det;
    x[0] = (A[3] * b[0] - A[1] * b[1]) * inv;
    x[1] = (-A[2] * b[0] + A[0] * b[1]) * inv;
}

inline void solve3(const double* A, const double* b, double det, double* x) {
    const double inv = 1.0 / det;
    x[0] = ((A[4] * A[8] - A[5] * A[7]) * b[0] - (A[1] * A[8] - A[2] * A[7]) * b[1] +
            (A[1] * A[5] - A[2] * A[4]) * b[2]) * inv;
    x[1] = (-(A[3] * A[8] - A[5] * A[6]) * b[0] + (A[0] * A[8] - A[2] * A[6]) * b[1] -
            (A[0] * A[5] - A[2] * A[3]) * b[2]) * inv;
    x[2] = ((A[3] * A[7] - A[4] * A[6]) * b[0] - (A[0] * A[7] - A[1] * A[6]) * b[1] +
            (A[0] * A[4] - A[1] * A[3]) * b[2]) * inv;
}

}  // namespace

ScalarImage jacobian_det(const JacobianField& jac) {
    const int nd = jac.geom.ndim;
    ScalarImage out(jac.geom);
    const std::int64_t n = static_cast<std::int64_t>(jac.geom.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double* J = jac.at(static_cast<std::size_t>(i));
        out.data[static_cast<std::size_t>(i)] = nd == 2 ? det2(J) : det3(J);
    }
    return out;
}

VectorField bch_combine(const VectorField& a, const VectorField& b) {
    require_same_geom(a.geom, b.geom, "bch_combine");
    require_role(a, FieldRole::velocity, "bch_combine");
    require_role(b, FieldRole::velocity, "bch_combine");
    VectorField out(a.geom, FieldRole::velocity);
    const std::int64_t n = static_cast<std::int64_t>(a.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        out.data[u] = a.data[u] + b.data[u];
    }
    return out;
}

TransportResult parallel_transport(const VectorField& u, const VectorField& vs,
                                   TransportMethod method) {
    require_same_geom(u.geom, vs.geom, "parallel_transport");
    require_role(u, FieldRole::velocity, "parallel_transport");
    require_role(vs, FieldRole::velocity, "parallel_transport");
    if (method != TransportMethod::conjugate_pushforward)
        throw std::invalid_argument("parallel_transport: unknown method");

    const GridGeom& g = u.geom;
    const int nd = g.ndim;
    const int nx = g.dim[0], ny = g.dim[1];
    const VectorField disp = exp_svf(vs, 1.0);
    const JacobianField jac = jacobian(disp);

    TransportResult result;
    result.field = VectorField(g, FieldRole::velocity);
    long fallbacks = 0;
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static) reduction(+ : fallbacks)
    for (std::int64_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        const double* d = disp.vec(static_cast<std::size_t>(i));
        double p[3] = {x + d[0], y + d[1], 0.0};
        if (nd == 3) p[2] = z + d[2];
        double sampled[3];
        interp_vector(u, p, sampled);
        const double* A = jac.at(static_cast<std::size_t>(i));
        const double det = nd == 2 ? det2(A) : det3(A);
        double* o = result.field.vec(static_cast<std::size_t>(i));
        if (std::abs(det) < 1e-8) {
            for (int c = 0; c < nd; ++c) o[c] = sampled[c];
            ++fallbacks;
        } else if (nd == 2) {
            solve2(A, sampled, det, o);
        } else {
            solve3(A, sampled, det, o);
        }
    }
    result.fallback_count = fallbacks;
    return result;
}

}  // namespace tsm
