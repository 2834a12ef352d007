#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsm {

// Regular voxel grid in 2 or 3 dimensions. Axis 0 is the fastest-varying
// axis in memory. All vector quantities are stored in voxel units; physical
// spacing matters only when data enters or leaves the library.
struct GridGeom {
    int ndim = 2;
    std::array<int, 3> dim{2, 2, 1};          // dim[2] == 1 when ndim == 2
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};

    static GridGeom make2d(int nx, int ny);
    static GridGeom make3d(int nx, int ny, int nz);

    std::size_t voxels() const {
        return static_cast<std::size_t>(dim[0]) * dim[1] * dim[2];
    }

    // Every active dim >= 2, every spacing > 0, ndim in {2,3}.
    void validate() const;

    bool operator==(const GridGeom&) const = default;
};

struct ScalarImage {
    GridGeom geom;
    std::vector<double> data;   // geom.voxels() values, axis 0 fastest

    ScalarImage() = default;
    explicit ScalarImage(const GridGeom& g, double fill = 0.0);

    std::size_t idx(int x, int y, int z = 0) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(geom.dim[0]) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(geom.dim[1]) * static_cast<std::size_t>(z));
    }
    double at(int x, int y, int z = 0) const { return data[idx(x, y, z)]; }
    double& at(int x, int y, int z = 0) { return data[idx(x, y, z)]; }
};

// A vector field is either a stationary velocity (generator of a flow) or a
// displacement (u with phi = id + u). Operations never reinterpret one as
// the other silently; the tag travels with the data.
enum class FieldRole { velocity, displacement };

struct VectorField {
    GridGeom geom;
    FieldRole role = FieldRole::velocity;
    std::vector<double> data;   // geom.voxels() * ndim, components interleaved

    VectorField() = default;
    VectorField(const GridGeom& g, FieldRole r, double fill = 0.0);

    const double* vec(std::size_t voxel) const { return data.data() + voxel * geom.ndim; }
    double* vec(std::size_t voxel) { return data.data() + voxel * geom.ndim; }
    double comp(std::size_t voxel, int c) const { return data[voxel * geom.ndim + c]; }
    double& comp(std::size_t voxel, int c) { return data[voxel * geom.ndim + c]; }
};

struct Mask {
    GridGeom geom;
    std::vector<std::uint8_t> data;   // one flag per voxel

    Mask() = default;
    explicit Mask(const GridGeom& g, bool fill = false);

    bool at(std::size_t voxel) const { return data[voxel] != 0; }
    std::size_t count_true() const;
};

const char* role_name(FieldRole r);

void require_same_geom(const GridGeom& a, const GridGeom& b, const char* what);
void require_role(const VectorField& f, FieldRole expected, const char* what);
void require_finite(const ScalarImage& img, const char* what);
void require_finite(const VectorField& f, const char* what);

}  // namespace tsm
