#include <cstdint>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "tsm/io.hpp"
#include "tsm/kernels.hpp"
#include "tsm/metric.hpp"
#include "tsm/phantom.hpp"
#include "tsm/svf.hpp"

using namespace tsm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary | std::ios::ate);
    REQUIRE(f.good());
    std::vector<char> buf(static_cast<std::size_t>(f.tellg()));
    f.seekg(0);
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    return buf;
}

// Image whose values are exactly representable in 32-bit floats, so a write
// and read round trip is lossless.
ScalarImage f32_image(const GridGeom& g, unsigned seed) {
    ScalarImage img(g);
    std::uint32_t state = seed;
    for (double& v : img.data) {
        state = state * 1664525u + 1013904223u;
        v = static_cast<double>(static_cast<float>(state % 4096) / 16.0f);
    }
    return img;
}

TsModel small_model(const GridGeom& g) {
    TsModel model;
    model.shape = shepp_logan(g);
    model.m = 2.0;
    model.t0 = 0.0;
    model.tn = 4.0;
    model.fit_times = {0.0, 1.0, 2.0, 3.0, 4.0};
    const VectorField v = synth_svf(g, 2.0, 6.0, 71);
    model.future.direction = v;
    model.future.rate.anchor = 2.0;
    model.future.rate.knots = {{2.0, 0.0}, {3.0, 0.5}, {4.0, 1.0}};
    model.future.t_lo = 2.0;
    model.future.t_hi = 4.0;
    model.past.direction = scale_field(v, -1.0, FieldRole::velocity);
    model.past.rate.anchor = 2.0;
    model.past.rate.knots = {{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.0}};
    model.past.t_lo = 0.0;
    model.past.t_hi = 2.0;
    return model;
}

}  // namespace

TEST_CASE("RAWJ image round trip") {
    const fs::path dir = fresh_dir("tsm_io_rawj");
    const GridGeom g = GridGeom::make2d(9, 7);

    SUBCASE("write then read is lossless for f32 data") {
        ScalarImage img = f32_image(g, 5);
        write_image(img, dir / "img");
        ScalarImage back = read_image(dir / "img");
        CHECK(back.data == img.data);
        CHECK(back.geom == img.geom);
    }
    SUBCASE("reading accepts the stem, the .json and the .bin path") {
        ScalarImage img = f32_image(g, 6);
        write_image(img, dir / "img2");
        CHECK(read_image(dir / "img2.json").data == img.data);
        CHECK(read_image(dir / "img2.bin").data == img.data);
    }
    SUBCASE("rewriting a read image is byte-identical") {
        ScalarImage img(g);
        for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1 * i;   // not f32-exact
        write_image(img, dir / "a");
        ScalarImage once = read_image(dir / "a");
        write_image(once, dir / "b");
        CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
        CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    }
    SUBCASE("truncated payload names expected and actual sizes") {
        ScalarImage img = f32_image(g, 7);
        write_image(img, dir / "short");
        fs::resize_file(dir / "short.bin", fs::file_size(dir / "short.bin") - 4);
        CHECK_THROWS_WITH_AS(read_image(dir / "short"),
                             doctest::Contains("length mismatch"), io_error);
        try {
            read_image(dir / "short");
        } catch (const io_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find(std::to_string(9 * 7 * 4)) != std::string::npos);
            CHECK(msg.find(std::to_string(9 * 7 * 4 - 4)) != std::string::npos);
        }
    }
    SUBCASE("role and dtype mismatches are rejected") {
        VectorField v(g, FieldRole::velocity);
        write_field(v, dir / "field");
        CHECK_THROWS_AS(read_image(dir / "field"), io_error);

        const auto header_bytes = slurp(dir / "field.json");
        json h = json::parse(header_bytes.begin(), header_bytes.end());
        h["dtype"] = "f64";
        std::ofstream(dir / "field.json") << h.dump(2);
        CHECK_THROWS_WITH_AS(read_field(dir / "field"),
                             doctest::Contains("unsupported dtype"), io_error);
    }
}

TEST_CASE("vector field round trip keeps the role tag") {
    const fs::path dir = fresh_dir("tsm_io_field");
    const GridGeom g = GridGeom::make2d(6, 5);
    VectorField v(g, FieldRole::displacement);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(0.5 * i);
    write_field(v, dir / "disp");
    VectorField back = read_field(dir / "disp");
    CHECK(back.role == FieldRole::displacement);
    CHECK(back.data == v.data);
}

TEST_CASE("NIfTI-1 volumes") {
    const fs::path dir = fresh_dir("tsm_io_nifti");
    const GridGeom g = GridGeom::make3d(7, 6, 5);
    ScalarImage img = f32_image(g, 9);
    img.geom.spacing = {1.5, 2.0, 2.5};
    img.geom.origin = {-3.0, 4.0, 0.5};
    write_image(img, dir / "vol.nii");

    SUBCASE("round trip through our reader") {
        ScalarImage back = read_image(dir / "vol.nii");
        CHECK(back.data == img.data);
        CHECK(back.geom.spacing[0] == doctest::Approx(1.5));
        CHECK(back.geom.origin[1] == doctest::Approx(4.0));
    }
    SUBCASE("an independent field-by-field parse sees the same volume") {
        const auto bytes = slurp(dir / "vol.nii");
        REQUIRE(bytes.size() >= 352);

        auto rd16 = [&](std::size_t off) {
            std::int16_t v;
            std::memcpy(&v, bytes.data() + off, 2);
            return v;
        };
        auto rdf = [&](std::size_t off) {
            float v;
            std::memcpy(&v, bytes.data() + off, 4);
            return v;
        };
        std::int32_t hdr_size;
        std::memcpy(&hdr_size, bytes.data(), 4);
        CHECK(hdr_size == 348);
        CHECK(std::memcmp(bytes.data() + 344, "n+1", 3) == 0);   // magic
        CHECK(rd16(40) == 3);                                    // dim[0]
        CHECK(rd16(42) == 7);
        CHECK(rd16(44) == 6);
        CHECK(rd16(46) == 5);
        CHECK(rd16(70) == 16);                                   // float32
        CHECK(rd16(72) == 32);                                   // bitpix
        CHECK(rdf(80) == doctest::Approx(1.5));                  // pixdim[1]
        const std::size_t off = static_cast<std::size_t>(rdf(108));
        CHECK(off == 352);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            float v;
            std::memcpy(&v, bytes.data() + off + 4 * i, 4);
            CHECK(static_cast<double>(v) == img.data[i]);
        }
    }
    SUBCASE("corrupted magic is rejected") {
        auto bytes = slurp(dir / "vol.nii");
        bytes[344] = 'x';
        std::ofstream(dir / "bad.nii", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(read_image(dir / "bad.nii"), doctest::Contains("magic"), io_error);
    }
    SUBCASE("2D images refuse the NIfTI path") {
        ScalarImage flat(GridGeom::make2d(4, 4), 1.0);
        CHECK_THROWS_AS(write_image(flat, dir / "flat.nii"), std::invalid_argument);
    }
}

TEST_CASE("model persistence") {
    const fs::path dir = fresh_dir("tsm_io_model");
    const GridGeom g = GridGeom::make2d(32, 32);
    const TsModel model = small_model(g);

    save_model(model, dir / "m1");
    const TsModel loaded = load_model(dir / "m1");

    SUBCASE("metadata survives") {
        CHECK(loaded.m == model.m);
        CHECK(loaded.t0 == model.t0);
        CHECK(loaded.tn == model.tn);
        CHECK(loaded.fit_times == model.fit_times);
        CHECK(loaded.future.rate.knots == model.future.rate.knots);
        CHECK(loaded.past.rate.knots == model.past.rate.knots);
    }
    SUBCASE("a second round trip is bit-exact") {
        save_model(loaded, dir / "m2");
        CHECK(slurp(dir / "m1" / "manifest.json") == slurp(dir / "m2" / "manifest.json"));
        CHECK(slurp(dir / "m1" / "shape.bin") == slurp(dir / "m2" / "shape.bin"));
        CHECK(slurp(dir / "m1" / "v_future.bin") == slurp(dir / "m2" / "v_future.bin"));
        CHECK(slurp(dir / "m1" / "v_past.bin") == slurp(dir / "m2" / "v_past.bin"));

        const TsModel again = load_model(dir / "m2");
        for (double t : {0.0, 1.3, 2.0, 2.9, 4.0})
            CHECK(evaluate(again, t).data == evaluate(loaded, t).data);
    }
    SUBCASE("evaluating the loaded model at its shape time returns the stored shape") {
        CHECK(evaluate(loaded, loaded.m).data == loaded.shape.data);
    }
    SUBCASE("a loaded model has zero self-distance") {
        const DistanceReport r = total_distance(loaded, loaded, {}, RegParams{});
        CHECK(r.total <= 1e-6);
    }
    SUBCASE("missing payload is an io error") {
        save_model(model, dir / "m3");
        fs::remove(dir / "m3" / "v_future.bin");
        CHECK_THROWS_AS(load_model(dir / "m3"), io_error);
    }
    SUBCASE("a manifest without the rate anchor fails validation") {
        save_model(model, dir / "m4");
        json manifest = json::parse(std::ifstream(dir / "m4" / "manifest.json"));
        json& knots = manifest["paths"]["future"]["gamma_knots"];
        json kept = json::array();
        for (const auto& k : knots)
            if (!(k[0].get<double>() == model.m)) kept.push_back(k);
        knots = kept;
        std::ofstream(dir / "m4" / "manifest.json") << manifest.dump(2);
        CHECK_THROWS_AS(load_model(dir / "m4"), std::invalid_argument);
    }
    SUBCASE("unknown schema is rejected") {
        save_model(model, dir / "m5");
        json manifest = json::parse(std::ifstream(dir / "m5" / "manifest.json"));
        manifest["schema"] = 99;
        std::ofstream(dir / "m5" / "manifest.json") << manifest.dump(2);
        CHECK_THROWS_AS(load_model(dir / "m5"), std::invalid_argument);
    }
}

TEST_CASE("heatmap export") {
    const fs::path dir = fresh_dir("tsm_io_heatmap");
    const GridGeom g = GridGeom::make2d(4, 3);

    SUBCASE("zero map gives an all-zero raster and a zero scale") {
        ScalarImage zero(g, 0.0);
        export_heatmap(zero, dir / "zero.pgm");
        const auto bytes = slurp(dir / "zero.pgm");
        const std::string header = "P5\n4 3\n255\n";
        REQUIRE(bytes.size() == header.size() + 12);
        CHECK(std::memcmp(bytes.data(), header.data(), header.size()) == 0);
        for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0);
        const json sidecar = json::parse(std::ifstream(dir / "zero.scale.json"));
        CHECK(sidecar["scale_max"] == 0.0);
    }
    SUBCASE("constant map with auto scale saturates") {
        ScalarImage c(g, 2.5);
        export_heatmap(c, dir / "c.pgm");
        const auto bytes = slurp(dir / "c.pgm");
        for (std::size_t i = bytes.size() - 12; i < bytes.size(); ++i)
            CHECK(static_cast<unsigned char>(bytes[i]) == 255);
        const json sidecar = json::parse(std::ifstream(dir / "c.scale.json"));
        CHECK(sidecar["scale_max"] == 2.5);
        CHECK(sidecar["mode"] == "auto");
    }
    SUBCASE("fixed scale at twice the value gives mid-gray, rounded half-up") {
        ScalarImage c(g, 2.5);
        export_heatmap(c, dir / "half.pgm", 5.0);
        const auto bytes = slurp(dir / "half.pgm");
        for (std::size_t i = bytes.size() - 12; i < bytes.size(); ++i)
            CHECK(static_cast<unsigned char>(bytes[i]) == 128);
    }
    SUBCASE("3D maps emit the three canonical central slices") {
        ScalarImage vol(GridGeom::make3d(6, 5, 4), 1.0);
        export_heatmap(vol, dir / "vol.pgm");
        CHECK(fs::exists(dir / "vol_axial.pgm"));
        CHECK(fs::exists(dir / "vol_coronal.pgm"));
        CHECK(fs::exists(dir / "vol_sagittal.pgm"));
        CHECK(fs::exists(dir / "vol.scale.json"));
        const auto axial = slurp(dir / "vol_axial.pgm");
        const std::string header = "P5\n6 5\n255\n";
        CHECK(std::memcmp(axial.data(), header.data(), header.size()) == 0);
    }
}

TEST_CASE("report writing") {
    const fs::path dir = fresh_dir("tsm_io_report");
    const GridGeom g = GridGeom::make2d(32, 32);

    TsModel a = small_model(g);
    TsModel b = a;
    b.future.direction = scale_field(a.future.direction, -1.0, FieldRole::velocity);
    b.past.direction = scale_field(a.past.direction, -1.0, FieldRole::velocity);

    const RegParams reg;
    const DistanceReport r = total_distance(a, b, {}, reg);
    write_report(r, reg, dir / "out");

    CHECK(fs::exists(dir / "out" / "ds_map.bin"));
    CHECK(fs::exists(dir / "out" / "dp_map.bin"));
    CHECK(fs::exists(dir / "out" / "ds_map.pgm"));
    CHECK(fs::exists(dir / "out" / "dp_map.pgm"));
    CHECK(fs::exists(dir / "out" / "mask.bin"));

    const json j = json::parse(std::ifstream(dir / "out" / "report.json"));
    CHECK(j["total"].get<double>() ==
          doctest::Approx(j["ds"].get<double>() + j["dp"].get<double>()).epsilon(1e-12));
    CHECK(j["n_time_samples"] == 101);
    CHECK(j["interval"][0] == 0.0);
    CHECK(j["interval"][1] == 4.0);
    CHECK(j["params"]["registration"]["levels"] == reg.levels);
    CHECK(j["warnings"].contains("transport_fallbacks"));
    CHECK(j["mask_voxels"].get<std::size_t>() == r.mask.count_true());
}
