#include "tsm/serial_ref.hpp"

#include <algorithm>
#include <cmath>

// The arithmetic here deliberately mirrors the parallel kernels expression
// by expression so agreement is bit-exact; only the loop organization and
// threading differ.
namespace tsm::serial {

namespace {

inline double clampc(double c, int dim) {
    if (c < 0.0) return 0.0;
    const double hi = static_cast<double>(dim - 1);
    return c > hi ? hi : c;
}

inline void cell(double c, int dim, int& i0, int& i1, double& f) {
    i0 = static_cast<int>(std::floor(c));
    if (i0 > dim - 2) i0 = dim - 2;
    if (i0 < 0) i0 = 0;
    i1 = i0 + 1;
    f = c - static_cast<double>(i0);
}

}  // namespace

double interp_scalar(const ScalarImage& img, const double* p) {
    const GridGeom& g = img.geom;
    int i0[3], i1[3];
    double f[3];
    for (int a = 0; a < g.ndim; ++a) {
        if (!std::isfinite(p[a]))
            throw std::domain_error("interpolation coordinate is not finite");
        cell(clampc(p[a], g.dim[a]), g.dim[a], i0[a], i1[a], f[a]);
    }
    const int nx = g.dim[0];
    if (g.ndim == 2) {
        const std::size_t r0 = static_cast<std::size_t>(i0[1]) * nx;
        const std::size_t r1 = static_cast<std::size_t>(i1[1]) * nx;
        const double fx = f[0], fy = f[1];
        const double v00 = img.data[r0 + i0[0]], v10 = img.data[r0 + i1[0]];
        const double v01 = img.data[r1 + i0[0]], v11 = img.data[r1 + i1[0]];
        return v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) +
               v01 * (1.0 - fx) * fy + v11 * fx * fy;
    }
    const std::size_t nxy = static_cast<std::size_t>(nx) * g.dim[1];
    double out = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const int z = dz ? i1[2] : i0[2];
        const double wz = dz ? f[2] : 1.0 - f[2];
        for (int dy = 0; dy < 2; ++dy) {
            const int y = dy ? i1[1] : i0[1];
            const double wy = dy ? f[1] : 1.0 - f[1];
            const std::size_t row = static_cast<std::size_t>(z) * nxy +
                                    static_cast<std::size_t>(y) * nx;
            const double wyz = wy * wz;
            out += img.data[row + i0[0]] * (1.0 - f[0]) * wyz;
            out += img.data[row + i1[0]] * f[0] * wyz;
        }
    }
    return out;
}

void interp_vector(const VectorField& field, const double* p, double* out) {
    const GridGeom& g = field.geom;
    int i0[3], i1[3];
    double f[3];
    for (int a = 0; a < g.ndim; ++a) {
        if (!std::isfinite(p[a]))
            throw std::domain_error("interpolation coordinate is not finite");
        cell(clampc(p[a], g.dim[a]), g.dim[a], i0[a], i1[a], f[a]);
    }
    const int nx = g.dim[0];
    if (g.ndim == 2) {
        const std::size_t r0 = static_cast<std::size_t>(i0[1]) * nx;
        const std::size_t r1 = static_cast<std::size_t>(i1[1]) * nx;
        const double fx = f[0], fy = f[1];
        const double w00 = (1.0 - fx) * (1.0 - fy), w10 = fx * (1.0 - fy);
        const double w01 = (1.0 - fx) * fy, w11 = fx * fy;
        const double* v00 = field.vec(r0 + i0[0]);
        const double* v10 = field.vec(r0 + i1[0]);
        const double* v01 = field.vec(r1 + i0[0]);
        const double* v11 = field.vec(r1 + i1[0]);
        for (int c = 0; c < 2; ++c)
            out[c] = v00[c] * w00 + v10[c] * w10 + v01[c] * w01 + v11[c] * w11;
        return;
    }
    const std::size_t nxy = static_cast<std::size_t>(nx) * g.dim[1];
    out[0] = out[1] = out[2] = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const int z = dz ? i1[2] : i0[2];
        const double wz = dz ? f[2] : 1.0 - f[2];
        for (int dy = 0; dy < 2; ++dy) {
            const int y = dy ? i1[1] : i0[1];
            const double wy = dy ? f[1] : 1.0 - f[1];
            const std::size_t row = static_cast<std::size_t>(z) * nxy +
                                    static_cast<std::size_t>(y) * nx;
            const double wyz = wy * wz;
            const double* a = field.vec(row + i0[0]);
            const double* b = field.vec(row + i1[0]);
            const double wa = (1.0 - f[0]) * wyz, wb = f[0] * wyz;
            for (int c = 0; c < 3; ++c) out[c] += a[c] * wa + b[c] * wb;
        }
    }
}

ScalarImage warp_image(const ScalarImage& img, const VectorField& disp) {
    require_same_geom(img.geom, disp.geom, "warp_image");
    require_role(disp, FieldRole::displacement, "warp_image");
    const GridGeom& g = img.geom;
    ScalarImage out(g);
    std::size_t i = 0;
    for (int z = 0; z < g.dim[2]; ++z) {
        for (int y = 0; y < g.dim[1]; ++y) {
            for (int x = 0; x < g.dim[0]; ++x, ++i) {
                const double* d = disp.vec(i);
                double p[3] = {x + d[0], y + d[1], 0.0};
                if (g.ndim == 3) p[2] = z + d[2];
                out.data[i] = interp_scalar(img, p);
            }
        }
    }
    return out;
}

VectorField compose_disp(const VectorField& outer, const VectorField& inner) {
    require_same_geom(outer.geom, inner.geom, "compose_disp");
    require_role(outer, FieldRole::displacement, "compose_disp");
    require_role(inner, FieldRole::displacement, "compose_disp");
    const GridGeom& g = outer.geom;
    VectorField out(g, FieldRole::displacement);
    std::size_t i = 0;
    for (int z = 0; z < g.dim[2]; ++z) {
        for (int y = 0; y < g.dim[1]; ++y) {
            for (int x = 0; x < g.dim[0]; ++x, ++i) {
                const double* di = inner.vec(i);
                double p[3] = {x + di[0], y + di[1], 0.0};
                if (g.ndim == 3) p[2] = z + di[2];
                double sampled[3];
                interp_vector(outer, p, sampled);
                for (int c = 0; c < g.ndim; ++c) out.vec(i)[c] = di[c] + sampled[c];
            }
        }
    }
    return out;
}

ScalarImage magnitude_map(const VectorField& field) {
    ScalarImage out(field.geom);
    const std::size_t n = field.geom.voxels();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < field.geom.ndim; ++c) s += field.comp(i, c) * field.comp(i, c);
        out.data[i] = std::sqrt(s);
    }
    return out;
}

double mean_over_mask(const ScalarImage& map, const Mask& mask) {
    require_same_geom(map.geom, mask.geom, "mean_over_mask");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < map.geom.voxels(); ++i) {
        if (mask.data[i]) {
            sum += map.data[i];
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("mean_over_mask: mask has no true voxels");
    return sum / static_cast<double>(count);
}

namespace {

std::vector<double> weights(double sigma) {
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

void smooth_pass(std::vector<double>& data, const GridGeom& g, int channels, double sigma) {
    const auto w = weights(sigma);
    const int radius = (static_cast<int>(w.size()) - 1) / 2;
    std::vector<double> tmp(data.size());
    for (int axis = 0; axis < g.ndim; ++axis) {
        std::size_t stride = 1;
        for (int a = 0; a < axis; ++a) stride *= static_cast<std::size_t>(g.dim[a]);
        const int dim_a = g.dim[axis];
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            const int xa = static_cast<int>((i / stride) % static_cast<std::size_t>(dim_a));
            const std::size_t base = i - static_cast<std::size_t>(xa) * stride;
            for (int c = 0; c < channels; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    int j = xa + k;
                    if (j < 0) j = 0;
                    if (j > dim_a - 1) j = dim_a - 1;
                    acc += w[k + radius] *
                           data[(base + static_cast<std::size_t>(j) * stride) * channels + c];
                }
                tmp[i * channels + c] = acc;
            }
        }
        data.swap(tmp);
    }
}

}  // namespace

ScalarImage gaussian_smooth(const ScalarImage& img, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
    if (sigma == 0.0) return img;
    ScalarImage out = img;
    smooth_pass(out.data, out.geom, 1, sigma);
    return out;
}

VectorField gaussian_smooth(const VectorField& field, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
    if (sigma == 0.0) return field;
    VectorField out = field;
    smooth_pass(out.data, out.geom, out.geom.ndim, sigma);
    return out;
}

}  // namespace tsm::serial
