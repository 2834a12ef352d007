#include "tsm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace tsm {

namespace {

inline double clamp_coord(double c, int dim) {
    if (c < 0.0) return 0.0;
    const double hi = static_cast<double>(dim - 1);
    return c > hi ? hi : c;
}

// Corner indices and fractional weights for one axis. Exact at lattice
// points: f == 0 there, so the interpolation reproduces the stored value.
inline void axis_cell(double c, int dim, int& i0, int& i1, double& f) {
    i0 = static_cast<int>(std::floor(c));
    if (i0 > dim - 2) i0 = dim - 2;
    if (i0 < 0) i0 = 0;
    i1 = i0 + 1;
    f = c - static_cast<double>(i0);
}

struct CellWeights {
    int i0[3], i1[3];
    double f[3];
};

inline void make_cell(const GridGeom& g, const double* p, CellWeights& w) {
    for (int a = 0; a < g.ndim; ++a) {
        if (!std::isfinite(p[a]))
            throw std::domain_error("interpolation coordinate is not finite");
        axis_cell(clamp_coord(p[a], g.dim[a]), g.dim[a], w.i0[a], w.i1[a], w.f[a]);
    }
}

}  // namespace

double interp_scalar(const ScalarImage& img, const double* p) {
    const GridGeom& g = img.geom;
    CellWeights w;
    make_cell(g, p, w);
    const int nx = g.dim[0];
    if (g.ndim == 2) {
        const std::size_t r0 = static_cast<std::size_t>(w.i0[1]) * nx;
        const std::size_t r1 = static_cast<std::size_t>(w.i1[1]) * nx;
        const double fx = w.f[0], fy = w.f[1];
        const double v00 = img.data[r0 + w.i0[0]], v10 = img.data[r0 + w.i1[0]];
        const double v01 = img.data[r1 + w.i0[0]], v11 = img.data[r1 + w.i1[0]];
        return v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) +
               v01 * (1.0 - fx) * fy + v11 * fx * fy;
    }
    const std::size_t nxy = static_cast<std::size_t>(nx) * g.dim[1];
    double out = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const int z = dz ? w.i1[2] : w.i0[2];
        const double wz = dz ? w.f[2] : 1.0 - w.f[2];
        for (int dy = 0; dy < 2; ++dy) {
            const int y = dy ? w.i1[1] : w.i0[1];
            const double wy = dy ? w.f[1] : 1.0 - w.f[1];
            const std::size_t row = static_cast<std::size_t>(z) * nxy +
                                    static_cast<std::size_t>(y) * nx;
            const double wyz = wy * wz;
            out += img.data[row + w.i0[0]] * (1.0 - w.f[0]) * wyz;
            out += img.data[row + w.i1[0]] * w.f[0] * wyz;
        }
    }
    return out;
}

double interp_scalar(const ScalarImage& img, double x, double y) {
    const double p[2] = {x, y};
    return interp_scalar(img, p);
}

double interp_scalar(const ScalarImage& img, double x, double y, double z) {
    const double p[3] = {x, y, z};
    return interp_scalar(img, p);
}

void interp_vector(const VectorField& field, const double* p, double* out) {
    const GridGeom& g = field.geom;
    const int nd = g.ndim;
    CellWeights w;
    make_cell(g, p, w);
    const int nx = g.dim[0];
    if (nd == 2) {
        const std::size_t r0 = static_cast<std::size_t>(w.i0[1]) * nx;
        const std::size_t r1 = static_cast<std::size_t>(w.i1[1]) * nx;
        const double fx = w.f[0], fy = w.f[1];
        const double w00 = (1.0 - fx) * (1.0 - fy), w10 = fx * (1.0 - fy);
        const double w01 = (1.0 - fx) * fy, w11 = fx * fy;
        const double* v00 = field.vec(r0 + w.i0[0]);
        const double* v10 = field.vec(r0 + w.i1[0]);
        const double* v01 = field.vec(r1 + w.i0[0]);
        const double* v11 = field.vec(r1 + w.i1[0]);
        for (int c = 0; c < 2; ++c)
            out[c] = v00[c] * w00 + v10[c] * w10 + v01[c] * w01 + v11[c] * w11;
        return;
    }
    const std::size_t nxy = static_cast<std::size_t>(nx) * g.dim[1];
    out[0] = out[1] = out[2] = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const int z = dz ? w.i1[2] : w.i0[2];
        const double wz = dz ? w.f[2] : 1.0 - w.f[2];
        for (int dy = 0; dy < 2; ++dy) {
            const int y = dy ? w.i1[1] : w.i0[1];
            const double wy = dy ? w.f[1] : 1.0 - w.f[1];
            const std::size_t row = static_cast<std::size_t>(z) * nxy +
                                    static_cast<std::size_t>(y) * nx;
            const double wyz = wy * wz;
            const double* a = field.vec(row + w.i0[0]);
            const double* b = field.vec(row + w.i1[0]);
            const double wa = (1.0 - w.f[0]) * wyz, wb = w.f[0] * wyz;
            for (int c = 0; c < 3; ++c) out[c] += a[c] * wa + b[c] * wb;
        }
    }
}

ScalarImage warp_image(const ScalarImage& img, const VectorField& disp) {
    require_same_geom(img.geom, disp.geom, "warp_image");
    require_role(disp, FieldRole::displacement, "warp_image");
    require_finite(disp, "warp_image");
    const GridGeom& g = img.geom;
    const int nd = g.ndim;
    const int nx = g.dim[0], ny = g.dim[1];
    ScalarImage out(g);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        const double* d = disp.vec(static_cast<std::size_t>(i));
        double p[3] = {x + d[0], y + d[1], 0.0};
        if (nd == 3) p[2] = z + d[2];
        out.data[static_cast<std::size_t>(i)] = interp_scalar(img, p);
    }
    return out;
}

VectorField compose_disp(const VectorField& outer, const VectorField& inner) {
    require_same_geom(outer.geom, inner.geom, "compose_disp");
    require_role(outer, FieldRole::displacement, "compose_disp");
    require_role(inner, FieldRole::displacement, "compose_disp");
    const GridGeom& g = outer.geom;
    const int nd = g.ndim;
    const int nx = g.dim[0], ny = g.dim[1];
    VectorField out(g, FieldRole::displacement);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
        const double* di = inner.vec(static_cast<std::size_t>(i));
        double p[3] = {x + di[0], y + di[1], 0.0};
        if (nd == 3) p[2] = z + di[2];
        double sampled[3];
        interp_vector(outer, p, sampled);
        double* o = out.vec(static_cast<std::size_t>(i));
        for (int c = 0; c < nd; ++c) o[c] = di[c] + sampled[c];
    }
    return out;
}

ScalarImage magnitude_map(const VectorField& field) {
    const GridGeom& g = field.geom;
    const int nd = g.ndim;
    ScalarImage out(g);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double* v = field.vec(static_cast<std::size_t>(i));
        double s = 0.0;
        for (int c = 0; c < nd; ++c) s += v[c] * v[c];
        out.data[static_cast<std::size_t>(i)] = std::sqrt(s);
    }
    return out;
}

double mean_over_mask(const ScalarImage& map, const Mask& mask) {
    require_same_geom(map.geom, mask.geom, "mean_over_mask");
    // Serial left-to-right accumulation: the result must not depend on the
    // thread count.
    double sum = 0.0;
    std::size_t count = 0;
    const std::size_t n = map.geom.voxels();
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.data[i]) {
            sum += map.data[i];
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("mean_over_mask: mask has no true voxels");
    return sum / static_cast<double>(count);
}

double max_value(const ScalarImage& img) {
    double m = img.data.empty() ? 0.0 : img.data[0];
    for (double v : img.data) m = std::max(m, v);
    return m;
}

Mask foreground_mask(const ScalarImage& a, const ScalarImage& b, double frac) {
    require_same_geom(a.geom, b.geom, "foreground_mask");
    if (!(frac >= 0.0 && frac < 1.0))
        throw std::invalid_argument("foreground_mask: frac must be in [0,1)");
    const double ta = frac * max_value(a);
    const double tb = frac * max_value(b);
    Mask out(a.geom);
    const std::int64_t n = static_cast<std::int64_t>(a.geom.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        out.data[u] = (a.data[u] > ta || b.data[u] > tb) ? 1 : 0;
    }
    if (out.count_true() == 0)
        throw std::invalid_argument("foreground_mask: no voxel above threshold (degenerate images)");
    return out;
}

namespace {

std::vector<double> gaussian_weights(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double e = std::exp(-0.5 * (k * k) / (sigma * sigma));
        w[k + radius] = e;
        sum += e;
    }
    for (double& v : w) v /= sum;
    return w;
}

// One smoothing pass along `axis` for data with `channels` interleaved
// values per voxel. Out-of-range taps clamp to the edge voxel.
void smooth_axis(const std::vector<double>& in, std::vector<double>& out,
                 const GridGeom& g, int channels, int axis,
                 const std::vector<double>& w) {
    const int radius = (static_cast<int>(w.size()) - 1) / 2;
    const int dim_a = g.dim[axis];
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= static_cast<std::size_t>(g.dim[a]);
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        const int xa = static_cast<int>((u / stride) % static_cast<std::size_t>(dim_a));
        const std::size_t base = u - static_cast<std::size_t>(xa) * stride;
        for (int c = 0; c < channels; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int j = xa + k;
                if (j < 0) j = 0;
                if (j > dim_a - 1) j = dim_a - 1;
                acc += w[k + radius] * in[(base + static_cast<std::size_t>(j) * stride) * channels + c];
            }
            out[u * channels + c] = acc;
        }
    }
}

void smooth_buffer(std::vector<double>& data, const GridGeom& g, int channels, double sigma) {
    const auto w = gaussian_weights(sigma);
    std::vector<double> tmp(data.size());
    for (int a = 0; a < g.ndim; ++a) {
        smooth_axis(data, tmp, g, channels, a, w);
        data.swap(tmp);
    }
}

}  // namespace

ScalarImage gaussian_smooth(const ScalarImage& img, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
    if (sigma == 0.0) return img;
    ScalarImage out = img;
    smooth_buffer(out.data, out.geom, 1, sigma);
    return out;
}

VectorField gaussian_smooth(const VectorField& field, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
    if (sigma == 0.0) return field;
    VectorField out = field;
    smooth_buffer(out.data, out.geom, out.geom.ndim, sigma);
    return out;
}

double max_magnitude(const VectorField& field) {
    const int nd = field.geom.ndim;
    const std::size_t n = field.geom.voxels();
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* v = field.vec(i);
        double s = 0.0;
        for (int c = 0; c < nd; ++c) s += v[c] * v[c];
        m2 = std::max(m2, s);
    }
    return std::sqrt(m2);
}

VectorField scale_field(const VectorField& field, double s, FieldRole out_role) {
    VectorField out(field.geom, out_role);
    const std::int64_t n = static_cast<std::int64_t>(field.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out.data[static_cast<std::size_t>(i)] = field.data[static_cast<std::size_t>(i)] * s;
    return out;
}

}  // namespace tsm
