#include "tsm/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tsm/kernels.hpp"
#include "tsm/svf.hpp"

namespace tsm {

void RegParams::validate() const {
    if (levels < 1) throw std::invalid_argument("RegParams: levels must be >= 1");
    if (iters_per_level < 1) throw std::invalid_argument("RegParams: iters_per_level must be >= 1");
    if (sigma_fluid < 0.0 || sigma_diffusion < 0.0)
        throw std::invalid_argument("RegParams: sigmas must be >= 0");
    if (!(step_cap > 0.0 && step_cap <= 1.0))
        throw std::invalid_argument("RegParams: step_cap must be in (0,1]");
    if (!(stop_tol >= 0.0)) throw std::invalid_argument("RegParams: stop_tol must be >= 0");
}

double mse(const ScalarImage& a, const ScalarImage& b) {
    require_same_geom(a.geom, b.geom, "mse");
    double sum = 0.0;
    const std::size_t n = a.geom.voxels();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return sum / static_cast<double>(n);
}

double mse(const ScalarImage& a, const ScalarImage& b, const Mask& mask) {
    require_same_geom(a.geom, b.geom, "mse");
    require_same_geom(a.geom, mask.geom, "mse");
    double sum = 0.0;
    std::size_t count = 0;
    const std::size_t n = a.geom.voxels();
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.data[i]) continue;
        const double d = a.data[i] - b.data[i];
        sum += d * d;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("mse: mask has no true voxels");
    return sum / static_cast<double>(count);
}

namespace {

GridGeom halved(const GridGeom& g) {
    GridGeom out = g;
    for (int a = 0; a < g.ndim; ++a) {
        out.dim[a] = std::max(2, (g.dim[a] + 1) / 2);
        out.spacing[a] = g.spacing[a] * 2.0;
    }
    return out;
}

ScalarImage box_downsample(const ScalarImage& img) {
    const GridGeom& gf = img.geom;
    const GridGeom gc = halved(gf);
    ScalarImage out(gc);
    const int nd = gf.ndim;
    const std::int64_t n = static_cast<std::int64_t>(gc.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        int cc[3];
        cc[0] = static_cast<int>(i % gc.dim[0]);
        cc[1] = static_cast<int>((i / gc.dim[0]) % gc.dim[1]);
        cc[2] = static_cast<int>(i / (static_cast<std::int64_t>(gc.dim[0]) * gc.dim[1]));
        double sum = 0.0;
        int count = 0;
        const int span = nd == 2 ? 4 : 8;
        for (int corner = 0; corner < span; ++corner) {
            int fc[3] = {0, 0, 0};
            bool ok = true;
            for (int a = 0; a < nd; ++a) {
                fc[a] = 2 * cc[a] + ((corner >> a) & 1);
                if (fc[a] > gf.dim[a] - 1) ok = false;
            }
            if (!ok) continue;
            sum += img.at(fc[0], fc[1], fc[2]);
            ++count;
        }
        out.data[static_cast<std::size_t>(i)] = sum / static_cast<double>(count);
    }
    return out;
}

// Upsample a coarse velocity onto the fine grid and double the components
// (voxel units shrink by two). Coarse voxel c covers fine voxels 2c and
// 2c+1, so its center sits at fine coordinate 2c + 0.5.
VectorField upsample_velocity(const VectorField& coarse, const GridGeom& fine) {
    VectorField out(fine, FieldRole::velocity);
    const int nd = fine.ndim;
    const int nx = fine.dim[0], ny = fine.dim[1];
    const std::int64_t n = static_cast<std::int64_t>(fine.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        double p[3] = {0.5 * (x - 0.5), 0.5 * (y - 0.5), 0.5 * (z - 0.5)};
        double sampled[3];
        interp_vector(coarse, p, sampled);
        double* o = out.vec(static_cast<std::size_t>(i));
        for (int c = 0; c < nd; ++c) o[c] = 2.0 * sampled[c];
    }
    return out;
}

// Central-difference intensity gradient, one-sided at the boundary.
VectorField image_gradient(const ScalarImage& img) {
    const GridGeom& g = img.geom;
    const int nd = g.ndim;
    const int nx = g.dim[0], ny = g.dim[1];
    VectorField out(g, FieldRole::velocity);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        int coord[3];
        coord[0] = static_cast<int>(i % nx);
        coord[1] = static_cast<int>((i / nx) % ny);
        coord[2] = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        double* o = out.vec(static_cast<std::size_t>(i));
        std::size_t stride = 1;
        for (int c = 0; c < nd; ++c) {
            const int xc = coord[c];
            const int lo = xc > 0 ? xc - 1 : xc;
            const int hi = xc < g.dim[c] - 1 ? xc + 1 : xc;
            const std::size_t i_lo = static_cast<std::size_t>(i) - (xc - lo) * stride;
            const std::size_t i_hi = static_cast<std::size_t>(i) + (hi - xc) * stride;
            o[c] = (img.data[i_hi] - img.data[i_lo]) / static_cast<double>(hi - lo);
            stride *= static_cast<std::size_t>(g.dim[c]);
        }
    }
    return out;
}

// One demons pass at a fixed resolution. Accumulates the smoothed, capped
// symmetric force into the velocity and keeps the best iterate seen.
VectorField demons_level(const ScalarImage& fixed, const ScalarImage& moving,
                         VectorField v, const RegParams& p) {
    const GridGeom& g = fixed.geom;
    const int nd = g.ndim;
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
    const VectorField grad_fixed = image_gradient(fixed);

    ScalarImage warped = warp_image(moving, exp_svf(v, 1.0));
    double best_mse = mse(warped, fixed);
    VectorField best_v = v;

    // Never start worse than the identity alignment.
    const double identity_mse = mse(moving, fixed);
    if (identity_mse < best_mse) {
        v = VectorField(g, FieldRole::velocity);
        warped = moving;
        best_mse = identity_mse;
        best_v = v;
    }

    double prev_mse = best_mse;
    int stalled = 0;
    for (int iter = 0; iter < p.iters_per_level; ++iter) {
        const VectorField grad_warped = image_gradient(warped);
        VectorField update(g, FieldRole::velocity);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            const double diff = fixed.data[u] - warped.data[u];
            const double* gf = grad_fixed.vec(u);
            const double* gw = grad_warped.vec(u);
            double grad[3];
            double g2 = 0.0;
            for (int c = 0; c < nd; ++c) {
                grad[c] = 0.5 * (gf[c] + gw[c]);
                g2 += grad[c] * grad[c];
            }
            const double den = std::max(g2 + diff * diff, 1e-6);
            double* o = update.vec(u);
            for (int c = 0; c < nd; ++c) o[c] = diff * grad[c] / den;
        }
        update = gaussian_smooth(update, p.sigma_fluid);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            double* o = update.vec(static_cast<std::size_t>(i));
            double m2 = 0.0;
            for (int c = 0; c < nd; ++c) m2 += o[c] * o[c];
            if (m2 > p.step_cap * p.step_cap) {
                const double s = p.step_cap / std::sqrt(m2);
                for (int c = 0; c < nd; ++c) o[c] *= s;
            }
        }
        v = gaussian_smooth(bch_combine(v, update), p.sigma_diffusion);
        warped = warp_image(moving, exp_svf(v, 1.0));
        const double m = mse(warped, fixed);
        if (m < best_mse) {
            best_mse = m;
            best_v = v;
        }
        // stop once improvement stays below tol for a few iterations; a
        // single stalled step is often just an oscillation
        if (prev_mse - m <= p.stop_tol * prev_mse) {
            if (++stalled >= 3) break;
        } else {
            stalled = 0;
        }
        prev_mse = m;
    }
    return best_v;
}

}  // namespace

VectorField register_svf(const ScalarImage& fixed, const ScalarImage& moving,
                         const RegParams& params) {
    params.validate();
    require_same_geom(fixed.geom, moving.geom, "register_svf");
    require_finite(fixed, "register_svf");
    require_finite(moving, "register_svf");

    // Downsample pyramid, finest first. Levels that would shrink the grid
    // below 8 voxels per axis are dropped.
    std::vector<ScalarImage> pyr_fixed{fixed}, pyr_moving{moving};
    for (int l = 1; l < params.levels; ++l) {
        const GridGeom& g = pyr_fixed.back().geom;
        int min_dim = g.dim[0];
        for (int a = 1; a < g.ndim; ++a) min_dim = std::min(min_dim, g.dim[a]);
        if (min_dim < 16) break;
        pyr_fixed.push_back(box_downsample(pyr_fixed.back()));
        pyr_moving.push_back(box_downsample(pyr_moving.back()));
    }

    VectorField v(pyr_fixed.back().geom, FieldRole::velocity);
    for (int l = static_cast<int>(pyr_fixed.size()) - 1; l >= 0; --l) {
        v = demons_level(pyr_fixed[l], pyr_moving[l], std::move(v), params);
        if (l > 0) v = upsample_velocity(v, pyr_fixed[l - 1].geom);
    }
    return v;
}

}  // namespace tsm
