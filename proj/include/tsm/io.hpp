#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "tsm/metric.hpp"
#include "tsm/ts_model.hpp"

namespace tsm {

// Failures of the storage layer (missing files, short payloads, bad magic).
// Contract violations inside otherwise readable files (schema mismatches,
// broken model invariants) throw std::invalid_argument instead.
class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Images travel in two formats:
//  * RAWJ: a JSON header `X.json` next to a payload `X.bin` of little-endian
//    32-bit floats, axis 0 fastest, vector components interleaved per voxel.
//    The header records dims/spacing/origin/dtype/order/endian/components
//    and the payload role ("scalar", "velocity" or "displacement").
//  * NIfTI-1: single-file `.nii`, float32, 3D scalar volumes only.
// The format is picked from the file extension: `.nii` means NIfTI,
// anything else is treated as a RAWJ stem (a trailing `.json`/`.bin` is
// stripped).
ScalarImage read_image(const std::filesystem::path& path);
void write_image(const ScalarImage& img, const std::filesystem::path& path);

// Vector fields use RAWJ only.
VectorField read_field(const std::filesystem::path& path);
void write_field(const VectorField& field, const std::filesystem::path& path);

// Model directory layout: manifest.json + shape.{json,bin} +
// v_future.{json,bin} + v_past.{json,bin}. Loading validates the manifest
// schema, payload consistency and the zero anchor of both rate curves.
void save_model(const TsModel& model, const std::filesystem::path& dir);
TsModel load_model(const std::filesystem::path& dir);

// report.json plus ds/dp maps (RAWJ) and their heatmaps, all in `dir`.
void write_report(const DistanceReport& report, const RegParams& reg,
                  const std::filesystem::path& dir);

// 8-bit binary PGM with values mapped linearly from [0, scale_max] to
// [0, 255] (half-up rounding); scale_max is the map maximum unless a fixed
// scale is given, and is recorded in a `<stem>.scale.json` sidecar. 3D maps
// emit the three central canonical slices as `<stem>_axial/coronal/sagittal`.
void export_heatmap(const ScalarImage& map, const std::filesystem::path& path,
                    std::optional<double> fixed_scale = {});

}  // namespace tsm
