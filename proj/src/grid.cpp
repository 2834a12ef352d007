#include "tsm/grid.hpp"

#include <cmath>

namespace tsm {

GridGeom GridGeom::make2d(int nx, int ny) {
    GridGeom g;
    g.ndim = 2;
    g.dim = {nx, ny, 1};
    g.validate();
    return g;
}

GridGeom GridGeom::make3d(int nx, int ny, int nz) {
    GridGeom g;
    g.ndim = 3;
    g.dim = {nx, ny, nz};
    g.validate();
    return g;
}

void GridGeom::validate() const {
    if (ndim != 2 && ndim != 3)
        throw std::invalid_argument("grid must be 2D or 3D, got ndim=" + std::to_string(ndim));
    for (int a = 0; a < ndim; ++a) {
        if (dim[a] < 2)
            throw std::invalid_argument("grid dim[" + std::to_string(a) + "] must be >= 2");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw std::invalid_argument("grid spacing[" + std::to_string(a) + "] must be > 0");
        if (!std::isfinite(origin[a]))
            throw std::invalid_argument("grid origin must be finite");
    }
    if (ndim == 2 && dim[2] != 1)
        throw std::invalid_argument("2D grid must have dim[2] == 1");
}

ScalarImage::ScalarImage(const GridGeom& g, double fill) : geom(g), data(g.voxels(), fill) {
    geom.validate();
}

VectorField::VectorField(const GridGeom& g, FieldRole r, double fill)
    : geom(g), role(r), data(g.voxels() * g.ndim, fill) {
    geom.validate();
}

Mask::Mask(const GridGeom& g, bool fill) : geom(g), data(g.voxels(), fill ? 1 : 0) {
    geom.validate();
}

std::size_t Mask::count_true() const {
    std::size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
}

const char* role_name(FieldRole r) {
    return r == FieldRole::velocity ? "velocity" : "displacement";
}

void require_same_geom(const GridGeom& a, const GridGeom& b, const char* what) {
    if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid geometries differ");
}

void require_role(const VectorField& f, FieldRole expected, const char* what) {
    if (f.role != expected)
        throw std::invalid_argument(std::string(what) + ": expected a " +
                                    role_name(expected) + " field, got " + role_name(f.role));
}

void require_finite(const ScalarImage& img, const char* what) {
    for (double v : img.data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": image contains non-finite values");
}

void require_finite(const VectorField& f, const char* what) {
    for (double v : f.data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": field contains non-finite values");
}

}  // namespace tsm
