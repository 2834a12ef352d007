#include "tsm/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "tsm/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tsm {

namespace {

// ---- low-level helpers ----------------------------------------------------

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!f) throw io_error("write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw io_error("cannot open: " + path.string());
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(size));
    f.read(buf.data(), size);
    if (!f) throw io_error("read failed: " + path.string());
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw io_error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw io_error("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

std::vector<float> to_f32(const std::vector<double>& in) {
    std::vector<float> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>(in[i]);
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : out) {
            auto u = std::bit_cast<std::uint32_t>(v);
            u = __builtin_bswap32(u);
            v = std::bit_cast<float>(u);
        }
    }
    return out;
}

std::vector<double> from_f32(const char* bytes, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u;
        std::memcpy(&u, bytes + i * 4, 4);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        out[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return out;
}

// ---- RAWJ header/payload pairs ---------------------------------------------

fs::path rawj_stem(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".json" || ext == ".bin") {
        fs::path p = path;
        p.replace_extension();
        return p;
    }
    return path;
}

json rawj_header(const GridGeom& g, int components, const std::string& role) {
    json dims = json::array(), spacing = json::array(), origin = json::array();
    for (int a = 0; a < g.ndim; ++a) {
        dims.push_back(g.dim[a]);
        spacing.push_back(g.spacing[a]);
        origin.push_back(g.origin[a]);
    }
    return json{{"dims", dims},         {"spacing", spacing}, {"origin", origin},
                {"dtype", "f32"},       {"order", "axis0-fastest"},
                {"endian", "little"},   {"components", components},
                {"role", role}};
}

void write_rawj(const fs::path& path, const GridGeom& g, int components,
                const std::string& role, const std::vector<double>& data) {
    const fs::path stem = rawj_stem(path);
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
    write_text(fs::path(stem).concat(".json"), rawj_header(g, components, role).dump(2) + "\n");
    const auto payload = to_f32(data);
    write_bytes(fs::path(stem).concat(".bin"), payload.data(), payload.size() * 4);
}

struct RawjData {
    GridGeom geom;
    int components = 1;
    std::string role;
    std::vector<double> data;
};

RawjData read_rawj(const fs::path& path) {
    const fs::path stem = rawj_stem(path);
    const fs::path jpath = fs::path(stem).concat(".json");
    const fs::path bpath = fs::path(stem).concat(".bin");
    const json h = read_json(jpath);

    for (const char* key : {"dims", "spacing", "origin", "dtype", "order", "endian",
                            "components", "role"})
        if (!h.contains(key)) throw io_error(jpath.string() + ": missing header field '" + key + "'");
    if (h["dtype"] != "f32") throw io_error(jpath.string() + ": unsupported dtype");
    if (h["order"] != "axis0-fastest") throw io_error(jpath.string() + ": unsupported order");
    if (h["endian"] != "little") throw io_error(jpath.string() + ": unsupported endianness");

    RawjData out;
    const auto& dims = h["dims"];
    if (!dims.is_array() || (dims.size() != 2 && dims.size() != 3))
        throw io_error(jpath.string() + ": dims must have 2 or 3 entries");
    if (h["spacing"].size() != dims.size() || h["origin"].size() != dims.size())
        throw io_error(jpath.string() + ": dims/spacing/origin lengths disagree");
    out.geom.ndim = static_cast<int>(dims.size());
    for (int a = 0; a < out.geom.ndim; ++a) {
        out.geom.dim[a] = dims[a].get<int>();
        out.geom.spacing[a] = h["spacing"][a].get<double>();
        out.geom.origin[a] = h["origin"][a].get<double>();
    }
    if (out.geom.ndim == 2) out.geom.dim[2] = 1;
    out.geom.validate();
    out.components = h["components"].get<int>();
    out.role = h["role"].get<std::string>();
    if (out.components != 1 && out.components != out.geom.ndim)
        throw io_error(jpath.string() + ": components must be 1 or ndim");

    const std::size_t expected = out.geom.voxels() * static_cast<std::size_t>(out.components) * 4;
    const auto bytes = read_bytes(bpath);
    if (bytes.size() != expected)
        throw io_error(bpath.string() + ": payload length mismatch, expected " +
                       std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
    out.data = from_f32(bytes.data(), expected / 4);
    return out;
}

// ---- NIfTI-1 ----------------------------------------------------------------

struct NiftiHeader {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must pack to 348 bytes");

constexpr std::int16_t kNiftiFloat32 = 16;

void write_nifti(const ScalarImage& img, const fs::path& path) {
    if (img.geom.ndim != 3)
        throw std::invalid_argument("NIfTI output supports 3D scalar volumes only; use RAWJ for " +
                                    std::to_string(img.geom.ndim) + "D data");
    NiftiHeader h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    for (int a = 0; a < 3; ++a) h.dim[1 + a] = static_cast<std::int16_t>(img.geom.dim[a]);
    for (int a = 4; a < 8; ++a) h.dim[a] = 1;
    h.datatype = kNiftiFloat32;
    h.bitpix = 32;
    h.pixdim[0] = 1.0f;
    for (int a = 0; a < 3; ++a) h.pixdim[1 + a] = static_cast<float>(img.geom.spacing[a]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.qform_code = 0;
    h.sform_code = 1;
    h.srow_x[0] = static_cast<float>(img.geom.spacing[0]);
    h.srow_y[1] = static_cast<float>(img.geom.spacing[1]);
    h.srow_z[2] = static_cast<float>(img.geom.spacing[2]);
    h.srow_x[3] = static_cast<float>(img.geom.origin[0]);
    h.srow_y[3] = static_cast<float>(img.geom.origin[1]);
    h.srow_z[3] = static_cast<float>(img.geom.origin[2]);
    std::memcpy(h.magic, "n+1", 4);

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(&h), sizeof(h));
    const char extender[4] = {0, 0, 0, 0};
    f.write(extender, 4);
    const auto payload = to_f32(img.data);
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
    if (!f) throw io_error("write failed: " + path.string());
}

ScalarImage read_nifti(const fs::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() < sizeof(NiftiHeader))
        throw io_error(path.string() + ": file shorter than a NIfTI-1 header");
    NiftiHeader h;
    std::memcpy(&h, bytes.data(), sizeof(h));
    if (std::memcmp(h.magic, "n+1", 3) != 0) {
        if (std::memcmp(h.magic, "ni1", 3) == 0)
            throw io_error(path.string() + ": two-file NIfTI (.hdr/.img) is not supported");
        throw io_error(path.string() + ": missing NIfTI-1 magic");
    }
    if (h.sizeof_hdr != 348)
        throw io_error(path.string() + ": unsupported NIfTI byte order or header size");
    if (h.datatype != kNiftiFloat32)
        throw io_error(path.string() + ": unsupported dtype (only float32 is handled)");
    if (h.dim[0] != 3)
        throw io_error(path.string() + ": expected a 3D volume, got dim[0]=" +
                       std::to_string(h.dim[0]));

    GridGeom g;
    g.ndim = 3;
    for (int a = 0; a < 3; ++a) {
        g.dim[a] = h.dim[1 + a];
        const float s = h.pixdim[1 + a];
        g.spacing[a] = (std::isfinite(s) && s > 0.0f) ? s : 1.0;
    }
    if (h.sform_code > 0) {
        g.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    } else if (h.qform_code > 0) {
        g.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    }
    g.validate();

    const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
    const std::size_t expected = g.voxels() * 4;
    if (bytes.size() < offset + expected)
        throw io_error(path.string() + ": payload length mismatch, expected " +
                       std::to_string(offset + expected) + " bytes, got " +
                       std::to_string(bytes.size()));

    ScalarImage img(g);
    img.data = from_f32(bytes.data() + offset, g.voxels());
    const double slope = (h.scl_slope != 0.0f) ? h.scl_slope : 1.0;
    const double inter = (h.scl_slope != 0.0f) ? h.scl_inter : 0.0;
    if (slope != 1.0 || inter != 0.0)
        for (double& v : img.data) v = v * slope + inter;
    require_finite(img, "read_nifti");
    return img;
}

bool is_nifti_path(const fs::path& path) { return path.extension() == ".nii"; }

}  // namespace

// ---- public image / field IO ------------------------------------------------

ScalarImage read_image(const fs::path& path) {
    if (is_nifti_path(path)) return read_nifti(path);
    RawjData raw = read_rawj(path);
    if (raw.role != "scalar" || raw.components != 1)
        throw io_error(path.string() + ": expected a scalar image, found role '" + raw.role + "'");
    ScalarImage img(raw.geom);
    img.data = std::move(raw.data);
    require_finite(img, "read_image");
    return img;
}

void write_image(const ScalarImage& img, const fs::path& path) {
    if (is_nifti_path(path)) {
        write_nifti(img, path);
        return;
    }
    write_rawj(path, img.geom, 1, "scalar", img.data);
}

VectorField read_field(const fs::path& path) {
    RawjData raw = read_rawj(path);
    if (raw.components != raw.geom.ndim)
        throw io_error(path.string() + ": expected a vector field, found " +
                       std::to_string(raw.components) + " component(s)");
    FieldRole role;
    if (raw.role == "velocity")
        role = FieldRole::velocity;
    else if (raw.role == "displacement")
        role = FieldRole::displacement;
    else
        throw io_error(path.string() + ": unknown field role '" + raw.role + "'");
    VectorField f(raw.geom, role);
    f.data = std::move(raw.data);
    require_finite(f, "read_field");
    return f;
}

void write_field(const VectorField& field, const fs::path& path) {
    write_rawj(path, field.geom, field.geom.ndim, std::string(role_name(field.role)), field.data);
}

// ---- model persistence --------------------------------------------------------

namespace {

json gamma_to_json(const GammaCurve& c) {
    json knots = json::array();
    for (const auto& [t, g] : c.knots) knots.push_back(json::array({t, g}));
    return knots;
}

GammaCurve gamma_from_json(const json& j, double anchor) {
    GammaCurve c;
    c.anchor = anchor;
    for (const auto& k : j) {
        if (!k.is_array() || k.size() != 2)
            throw std::invalid_argument("model manifest: malformed gamma knot");
        c.knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    c.validate();   // strictly increasing times, zero anchor present
    return c;
}

json path_to_json(const PathModel& p, const std::string& payload) {
    return json{{"velocity", payload},
                {"domain", json::array({p.t_lo, p.t_hi})},
                {"degenerate", p.degenerate},
                {"gamma_knots", gamma_to_json(p.rate)}};
}

json reg_to_json(const RegParams& r) {
    return json{{"levels", r.levels},
                {"iters_per_level", r.iters_per_level},
                {"sigma_fluid", r.sigma_fluid},
                {"sigma_diffusion", r.sigma_diffusion},
                {"step_cap", r.step_cap},
                {"stop_tol", r.stop_tol}};
}

RegParams reg_from_json(const json& j) {
    RegParams r;
    r.levels = j.at("levels").get<int>();
    r.iters_per_level = j.at("iters_per_level").get<int>();
    r.sigma_fluid = j.at("sigma_fluid").get<double>();
    r.sigma_diffusion = j.at("sigma_diffusion").get<double>();
    r.step_cap = j.at("step_cap").get<double>();
    r.stop_tol = j.at("stop_tol").get<double>();
    return r;
}

}  // namespace

void save_model(const TsModel& model, const fs::path& dir) {
    fs::create_directories(dir);
    write_image(model.shape, dir / "shape");
    write_field(model.future.direction, dir / "v_future");
    write_field(model.past.direction, dir / "v_past");

    const int nonmonotone = (model.future.rate.monotone() ? 0 : 1) +
                            (model.past.rate.monotone() ? 0 : 1);
    const int degenerate = (model.future.degenerate ? 1 : 0) + (model.past.degenerate ? 1 : 0);
    json manifest{
        {"schema", 1},
        {"m", model.m},
        {"range", json::array({model.t0, model.tn})},
        {"provenance", model.provenance == ShapeMode::longitudinal ? "longitudinal" : "template"},
        {"times", model.fit_times},
        {"shape", "shape"},
        {"paths",
         {{"future", path_to_json(model.future, "v_future")},
          {"past", path_to_json(model.past, "v_past")}}},
        {"registration", reg_to_json(model.reg)},
        {"warnings", {{"nonmonotone_rates", nonmonotone}, {"degenerate_paths", degenerate}}},
    };
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

TsModel load_model(const fs::path& dir) {
    const json manifest = read_json(dir / "manifest.json");
    if (!manifest.contains("schema") || manifest["schema"] != 1)
        throw std::invalid_argument(dir.string() + ": unsupported model schema");

    TsModel model;
    model.m = manifest.at("m").get<double>();
    model.t0 = manifest.at("range").at(0).get<double>();
    model.tn = manifest.at("range").at(1).get<double>();
    const std::string prov = manifest.at("provenance").get<std::string>();
    if (prov == "longitudinal")
        model.provenance = ShapeMode::longitudinal;
    else if (prov == "template")
        model.provenance = ShapeMode::template_mean;
    else
        throw std::invalid_argument(dir.string() + ": unknown provenance '" + prov + "'");
    model.fit_times = manifest.at("times").get<std::vector<double>>();
    model.reg = reg_from_json(manifest.at("registration"));

    model.shape = read_image(dir / manifest.at("shape").get<std::string>());

    auto load_path = [&](const json& j) {
        PathModel p;
        p.direction = read_field(dir / j.at("velocity").get<std::string>());
        require_role(p.direction, FieldRole::velocity, "load_model");
        require_same_geom(p.direction.geom, model.shape.geom, "load_model");
        p.t_lo = j.at("domain").at(0).get<double>();
        p.t_hi = j.at("domain").at(1).get<double>();
        p.degenerate = j.at("degenerate").get<bool>();
        p.rate = gamma_from_json(j.at("gamma_knots"), model.m);
        return p;
    };
    model.future = load_path(manifest.at("paths").at("future"));
    model.past = load_path(manifest.at("paths").at("past"));

    if (!(model.t0 <= model.m && model.m <= model.tn))
        throw std::invalid_argument(dir.string() + ": shape time lies outside the fitted range");
    return model;
}

// ---- reports and heatmaps -----------------------------------------------------

namespace {

void write_pgm(const fs::path& path, int width, int height,
               const std::vector<std::uint8_t>& pixels) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
    if (!f) throw io_error("write failed: " + path.string());
}

inline std::uint8_t to_pixel(double v, double scale_max) {
    if (scale_max <= 0.0) return 0;
    if (v <= 0.0) return 0;
    const double x = 255.0 * (v / scale_max) + 0.5;
    return x >= 255.0 ? 255 : static_cast<std::uint8_t>(x);
}

// Extract one canonical slice as an 8-bit raster, rows along `row_axis`.
std::vector<std::uint8_t> slice_pixels(const ScalarImage& map, int col_axis, int row_axis,
                                       int fixed_axis, int fixed_index, double scale_max) {
    const int w = map.geom.dim[col_axis];
    const int h = map.geom.dim[row_axis];
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
    int coord[3];
    coord[fixed_axis] = fixed_index;
    for (int r = 0; r < h; ++r) {
        coord[row_axis] = r;
        for (int c = 0; c < w; ++c) {
            coord[col_axis] = c;
            px[static_cast<std::size_t>(r) * w + c] =
                to_pixel(map.at(coord[0], coord[1], coord[2]), scale_max);
        }
    }
    return px;
}

}  // namespace

void export_heatmap(const ScalarImage& map, const fs::path& path,
                    std::optional<double> fixed_scale) {
    const double scale_max = fixed_scale ? *fixed_scale : max_value(map);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());

    fs::path stem = path;
    stem.replace_extension();

    if (map.geom.ndim == 2) {
        fs::path out = path;
        if (out.extension() != ".pgm") out.replace_extension(".pgm");
        write_pgm(out, map.geom.dim[0], map.geom.dim[1],
                  slice_pixels(map, 0, 1, 2, 0, scale_max));
    } else {
        write_pgm(fs::path(stem).concat("_axial.pgm"), map.geom.dim[0], map.geom.dim[1],
                  slice_pixels(map, 0, 1, 2, map.geom.dim[2] / 2, scale_max));
        write_pgm(fs::path(stem).concat("_coronal.pgm"), map.geom.dim[0], map.geom.dim[2],
                  slice_pixels(map, 0, 2, 1, map.geom.dim[1] / 2, scale_max));
        write_pgm(fs::path(stem).concat("_sagittal.pgm"), map.geom.dim[1], map.geom.dim[2],
                  slice_pixels(map, 1, 2, 0, map.geom.dim[0] / 2, scale_max));
    }

    const json sidecar{{"scale_max", scale_max},
                       {"mode", fixed_scale ? "fixed" : "auto"},
                       {"mapping", scale_max > 0.0 ? "linear [0,scale_max] -> [0,255]"
                                                   : "zero map, all pixels 0"}};
    write_text(fs::path(stem).concat(".scale.json"), sidecar.dump(2) + "\n");
}

void write_report(const DistanceReport& report, const RegParams& reg, const fs::path& dir) {
    fs::create_directories(dir);

    if (std::abs(report.total - (report.ds + report.dp)) >
        1e-12 * std::max(1.0, std::abs(report.total)))
        throw std::logic_error("report invariant violated: total != ds + dp");

    write_image(report.ds_map, dir / "ds_map");
    write_image(report.dp_map, dir / "dp_map");
    export_heatmap(report.ds_map, dir / "ds_map.pgm");
    export_heatmap(report.dp_map, dir / "dp_map.pgm");

    ScalarImage mask_img(report.mask.geom);
    for (std::size_t i = 0; i < mask_img.data.size(); ++i)
        mask_img.data[i] = report.mask.data[i] ? 1.0 : 0.0;
    write_image(mask_img, dir / "mask");

    const json j{
        {"schema", 1},
        {"ds", report.ds},
        {"dp", report.dp},
        {"total", report.total},
        {"reductions",
         {{"ds_max", report.ds_max},
          {"ds_p95", report.ds_p95},
          {"dp_max", report.dp_max},
          {"dp_p95", report.dp_p95}}},
        {"interval", json::array({report.t_a, report.t_b})},
        {"n_time_samples", report.n_time_samples},
        {"mask_voxels", report.mask.count_true()},
        {"reference", report.reference},
        {"warnings",
         {{"transport_fallbacks", report.transport_fallbacks},
          {"nonmonotone_rates", report.nonmonotone_rates}}},
        {"params", {{"registration", reg_to_json(reg)}, {"mask_frac", 0.01}}},
        {"provenance",
         {{"transport", "conjugate-pushforward through the shape velocity"},
          {"scalars", "mean of the voxel maps over the foreground mask"},
          {"maps", "reference shape frame; directions transported before differencing"}}},
    };
    write_text(dir / "report.json", j.dump(2) + "\n");
}

}  // namespace tsm
