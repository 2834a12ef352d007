#include <cmath>
#include <random>

#include "doctest.h"

#include "tsm/grid.hpp"
#include "tsm/kernels.hpp"
#include "tsm/phantom.hpp"
#include "tsm/serial_ref.hpp"
#include "tsm/svf.hpp"

using namespace tsm;

namespace {

ScalarImage ramp_x(const GridGeom& g) {
    ScalarImage img(g);
    for (int y = 0; y < g.dim[1]; ++y)
        for (int x = 0; x < g.dim[0]; ++x) img.at(x, y) = static_cast<double>(x);
    return img;
}

ScalarImage random_image(const GridGeom& g, unsigned seed) {
    ScalarImage img(g);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 10.0);
    for (double& v : img.data) v = d(rng);
    return img;
}

VectorField random_field(const GridGeom& g, FieldRole role, double amp, unsigned seed) {
    VectorField f(g, role);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-amp, amp);
    for (double& v : f.data) v = d(rng);
    return f;
}

// Small smooth sinusoidal velocity, zero-ish near nothing in particular;
// used where an analytic smooth field is enough.
VectorField sine_velocity(const GridGeom& g, double amp) {
    VectorField f(g, FieldRole::velocity);
    const double wx = 2.0 * M_PI / g.dim[0];
    const double wy = 2.0 * M_PI / g.dim[1];
    std::size_t i = 0;
    for (int z = 0; z < g.dim[2]; ++z)
        for (int y = 0; y < g.dim[1]; ++y)
            for (int x = 0; x < g.dim[0]; ++x, ++i) {
                f.vec(i)[0] = amp * std::sin(wx * x) * std::cos(wy * y);
                f.vec(i)[1] = -amp * std::cos(wx * x) * std::sin(wy * y);
            }
    return f;
}

}  // namespace

TEST_CASE("interp_scalar basics") {
    const GridGeom g = GridGeom::make2d(8, 8);

    SUBCASE("constant field returns the constant anywhere") {
        ScalarImage img(g, 5.0);
        CHECK(interp_scalar(img, 1.3, 2.7) == doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("lattice points are exact") {
        ScalarImage img = random_image(g, 11);
        CHECK(interp_scalar(img, 3.0, 5.0) == img.at(3, 5));
        CHECK(interp_scalar(img, 0.0, 0.0) == img.at(0, 0));
        CHECK(interp_scalar(img, 7.0, 7.0) == img.at(7, 7));
    }
    SUBCASE("linear ramp interpolates linearly") {
        ScalarImage img = ramp_x(g);
        CHECK(interp_scalar(img, 1.5, 0.0) == doctest::Approx(1.5).epsilon(1e-14));
    }
    SUBCASE("out-of-bounds coordinates clamp to the boundary") {
        ScalarImage img = ramp_x(g);
        CHECK(interp_scalar(img, -3.0, 2.0) == 0.0);
        CHECK(interp_scalar(img, 100.0, 2.0) == 7.0);
    }
    SUBCASE("non-finite coordinate is rejected") {
        ScalarImage img(g, 1.0);
        CHECK_THROWS_AS(interp_scalar(img, std::nan(""), 0.0), std::domain_error);
    }
}

TEST_CASE("interp_vector basics") {
    const GridGeom g = GridGeom::make2d(6, 6);

    SUBCASE("constant field") {
        VectorField f(g, FieldRole::velocity);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            f.vec(i)[0] = 2.0;
            f.vec(i)[1] = -1.0;
        }
        double out[2];
        const double p[2] = {1.7, 3.2};
        interp_vector(f, p, out);
        CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-14));
    }
    SUBCASE("voxel hit returns stored vector") {
        VectorField f = random_field(g, FieldRole::velocity, 2.0, 3);
        double out[2];
        const double p[2] = {4.0, 2.0};
        interp_vector(f, p, out);
        CHECK(out[0] == f.comp(f.geom.dim[0] * 2 + 4, 0));
        CHECK(out[1] == f.comp(f.geom.dim[0] * 2 + 4, 1));
    }
    SUBCASE("linear-in-x field gives the midpoint vector") {
        VectorField f(g, FieldRole::velocity);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) {
                f.vec(y * 6 + x)[0] = static_cast<double>(x);
                f.vec(y * 6 + x)[1] = 0.0;
            }
        double out[2];
        const double p[2] = {0.5, 0.0};
        interp_vector(f, p, out);
        CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("warp_image") {
    const GridGeom g = GridGeom::make2d(16, 16);

    SUBCASE("zero displacement is the exact identity") {
        ScalarImage img = random_image(g, 5);
        VectorField zero(g, FieldRole::displacement);
        CHECK(warp_image(img, zero).data == img.data);
    }
    SUBCASE("constant displacement shifts a ramp") {
        ScalarImage img = ramp_x(g);
        VectorField disp(g, FieldRole::displacement);
        for (std::size_t i = 0; i < g.voxels(); ++i) disp.vec(i)[0] = 1.0;
        ScalarImage out = warp_image(img, disp);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 14; ++x)   // interior: clamping touches the last column
                CHECK(out.at(x, y) == doctest::Approx(x + 1.0).epsilon(1e-13));
    }
    SUBCASE("velocity fields are rejected") {
        ScalarImage img(g, 1.0);
        VectorField v(g, FieldRole::velocity);
        CHECK_THROWS_AS(warp_image(img, v), std::invalid_argument);
    }
    SUBCASE("geometry mismatch is rejected") {
        ScalarImage img(g, 1.0);
        VectorField disp(GridGeom::make2d(8, 8), FieldRole::displacement);
        CHECK_THROWS_AS(warp_image(img, disp), std::invalid_argument);
    }
    SUBCASE("warp by a field then by its inverse restores the image") {
        const GridGeom big = GridGeom::make2d(48, 48);
        // Gaussian bump: smooth, full dynamic range inside the grid.
        ScalarImage img(big);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x)
                img.at(x, y) = std::exp(-((x - 24.0) * (x - 24.0) + (y - 24.0) * (y - 24.0)) / 80.0);
        VectorField v = sine_velocity(big, 2.0);
        ScalarImage round = warp_image(warp_image(img, exp_svf(v, 1.0)), invert_svf(v));
        double err = 0.0, range = 1.0;
        for (std::size_t i = 0; i < img.data.size(); ++i) err += std::abs(round.data[i] - img.data[i]);
        err /= static_cast<double>(img.data.size());
        CHECK(err <= 0.005 * range);
    }
}

TEST_CASE("compose_disp") {
    const GridGeom g = GridGeom::make2d(12, 12);

    SUBCASE("identity on either side") {
        VectorField u = random_field(g, FieldRole::displacement, 0.5, 9);
        VectorField zero(g, FieldRole::displacement);
        CHECK(compose_disp(zero, u).data == u.data);        // outer identity: exact
        CHECK(compose_disp(u, zero).data == u.data);        // inner identity: lattice sample
    }
    SUBCASE("translations add") {
        VectorField a(g, FieldRole::displacement), b(g, FieldRole::displacement);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            a.vec(i)[0] = 0.75;
            a.vec(i)[1] = -0.25;
            b.vec(i)[0] = 0.5;
            b.vec(i)[1] = 1.0;
        }
        VectorField c = compose_disp(a, b);
        // interior voxels only: near the border the outer sample clamps
        for (int y = 2; y < 10; ++y)
            for (int x = 2; x < 10; ++x) {
                CHECK(c.comp(y * 12 + x, 0) == doctest::Approx(1.25).epsilon(1e-13));
                CHECK(c.comp(y * 12 + x, 1) == doctest::Approx(0.75).epsilon(1e-13));
            }
    }
    SUBCASE("field composed with its inverse is nearly zero") {
        const GridGeom big = GridGeom::make2d(64, 64);
        VectorField v = synth_svf(big, 3.0, 8.0, 4);
        VectorField round = compose_disp(exp_svf(v, 1.0), invert_svf(v));
        double worst = 0.0;
        for (int y = 4; y < 60; ++y)
            for (int x = 4; x < 60; ++x) {
                const double* d = round.vec(y * 64 + x);
                worst = std::max(worst, std::hypot(d[0], d[1]));
            }
        CHECK(worst <= 0.1);
    }
}

TEST_CASE("magnitude_map") {
    const GridGeom g = GridGeom::make2d(10, 10);

    SUBCASE("zero field maps to zero") {
        VectorField f(g, FieldRole::velocity);
        ScalarImage m = magnitude_map(f);
        for (double v : m.data) CHECK(v == 0.0);
    }
    SUBCASE("3-4-5 triangle") {
        VectorField f(g, FieldRole::velocity);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            f.vec(i)[0] = 3.0;
            f.vec(i)[1] = 4.0;
        }
        ScalarImage m = magnitude_map(f);
        for (double v : m.data) CHECK(v == 5.0);
    }
    SUBCASE("random field matches the scalar-loop reference exactly") {
        VectorField f = random_field(g, FieldRole::velocity, 3.0, 77);
        CHECK(magnitude_map(f).data == serial::magnitude_map(f).data);
    }
    SUBCASE("invariant under a global 90-degree component rotation") {
        VectorField f = random_field(g, FieldRole::velocity, 3.0, 78);
        VectorField rot(g, FieldRole::velocity);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            rot.vec(i)[0] = -f.vec(i)[1];
            rot.vec(i)[1] = f.vec(i)[0];
        }
        CHECK(magnitude_map(f).data == magnitude_map(rot).data);
    }
}

TEST_CASE("mean_over_mask") {
    const GridGeom g = GridGeom::make2d(8, 8);

    SUBCASE("constant map") {
        ScalarImage map(g, 3.25);
        Mask full(g, true);
        CHECK(mean_over_mask(map, full) == doctest::Approx(3.25).epsilon(1e-15));
    }
    SUBCASE("single-voxel mask picks that voxel") {
        ScalarImage map = random_image(g, 21);
        Mask one(g, false);
        one.data[19] = 1;
        CHECK(mean_over_mask(map, one) == map.data[19]);
    }
    SUBCASE("checkerboard of 0 and 2 averages to 1") {
        ScalarImage map(g);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) map.at(x, y) = ((x + y) % 2) ? 2.0 : 0.0;
        Mask full(g, true);
        CHECK(mean_over_mask(map, full) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("agrees with independent sum/count to 1e-12 relative") {
        ScalarImage map = random_image(g, 22);
        Mask full(g, true);
        double sum = 0.0;
        for (double v : map.data) sum += v;
        const double expected = sum / static_cast<double>(map.data.size());
        CHECK(mean_over_mask(map, full) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("empty mask is rejected") {
        ScalarImage map(g, 1.0);
        Mask none(g, false);
        CHECK_THROWS_AS(mean_over_mask(map, none), std::invalid_argument);
    }
}

TEST_CASE("foreground_mask") {
    const GridGeom g = GridGeom::make2d(8, 8);

    SUBCASE("all-ones images keep every voxel") {
        ScalarImage a(g, 1.0), b(g, 1.0);
        CHECK(foreground_mask(a, b, 0.01).count_true() == g.voxels());
    }
    SUBCASE("all-zero images are degenerate") {
        ScalarImage a(g, 0.0), b(g, 0.0);
        CHECK_THROWS_AS(foreground_mask(a, b, 0.01), std::invalid_argument);
    }
    SUBCASE("matches a per-voxel threshold scan") {
        ScalarImage a = random_image(g, 31);
        ScalarImage b = random_image(g, 32);
        // half-bright: zero out one half of each image
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 4; ++x) {
                a.at(x, y) = 0.0;
                b.at(7 - x, y) = 0.0;
            }
        const double frac = 0.25;
        Mask m = foreground_mask(a, b, frac);
        double ma = 0.0, mb = 0.0;
        for (double v : a.data) ma = std::max(ma, v);
        for (double v : b.data) mb = std::max(mb, v);
        for (std::size_t i = 0; i < g.voxels(); ++i) {
            const bool expect = a.data[i] > frac * ma || b.data[i] > frac * mb;
            CHECK(m.at(i) == expect);
        }
    }
}

TEST_CASE("gaussian_smooth") {
    const GridGeom g = GridGeom::make2d(15, 15);

    SUBCASE("sigma zero is the identity") {
        ScalarImage img = random_image(g, 41);
        CHECK(gaussian_smooth(img, 0.0).data == img.data);
    }
    SUBCASE("constant images are preserved") {
        ScalarImage img(g, 4.2);
        ScalarImage out = gaussian_smooth(img, 2.5);
        for (double v : out.data) CHECK(v == doctest::Approx(4.2).epsilon(1e-12));
    }
    SUBCASE("unit impulse reproduces the sampled kernel") {
        ScalarImage img(g);
        img.at(7, 7) = 1.0;
        const double sigma = 1.0;
        ScalarImage out = gaussian_smooth(img, sigma);

        // direct kernel computation
        const int radius = static_cast<int>(std::ceil(3.0 * sigma));
        double sum = 0.0;
        std::vector<double> w(2 * radius + 1);
        for (int k = -radius; k <= radius; ++k) {
            w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
            sum += w[k + radius];
        }
        for (double& v : w) v /= sum;
        CHECK(out.at(7, 7) == doctest::Approx(w[radius] * w[radius]).epsilon(1e-6));
        CHECK(out.at(8, 7) == doctest::Approx(w[radius + 1] * w[radius]).epsilon(1e-6));
    }
}

TEST_CASE("parallel kernels agree with the serial reference bit-exactly") {
    const GridGeom g = GridGeom::make2d(33, 27);   // odd sizes on purpose
    ScalarImage img = random_image(g, 51);
    VectorField disp = random_field(g, FieldRole::displacement, 2.0, 52);
    VectorField v = random_field(g, FieldRole::velocity, 2.0, 53);

    CHECK(warp_image(img, disp).data == serial::warp_image(img, disp).data);
    CHECK(compose_disp(disp, disp).data == serial::compose_disp(disp, disp).data);
    CHECK(magnitude_map(v).data == serial::magnitude_map(v).data);
    CHECK(gaussian_smooth(img, 1.5).data == serial::gaussian_smooth(img, 1.5).data);
    CHECK(gaussian_smooth(v, 1.5).data == serial::gaussian_smooth(v, 1.5).data);

    Mask full(g, true);
    CHECK(mean_over_mask(img, full) == serial::mean_over_mask(img, full));
}

TEST_CASE("parallel kernels agree with the serial reference in 3D") {
    const GridGeom g = GridGeom::make3d(12, 10, 9);
    ScalarImage img = random_image(g, 61);
    VectorField disp = random_field(g, FieldRole::displacement, 1.5, 62);

    CHECK(warp_image(img, disp).data == serial::warp_image(img, disp).data);
    CHECK(compose_disp(disp, disp).data == serial::compose_disp(disp, disp).data);
    CHECK(gaussian_smooth(img, 1.0).data == serial::gaussian_smooth(img, 1.0).data);
}
