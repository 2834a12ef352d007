#include "tsm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsm/kernels.hpp"
#include "tsm/svf.hpp"

namespace tsm {

void SimConfig::validate() const {
    geom.validate();
    if (n_frames < 3) throw std::invalid_argument("SimConfig: n_frames must be >= 3");
    if (shape_amp < 0.0 || path_amp < 0.0)
        throw std::invalid_argument("SimConfig: amplitudes must be >= 0");
    if (sigma < 0.0) throw std::invalid_argument("SimConfig: sigma must be >= 0");
}

namespace {

struct Ellipse {
    double a, b, c;      // semi-axes (c unused in 2D)
    double x0, y0, z0;   // center
    double phi_deg;      // rotation about z
    double value;        // additive intensity
};

// The [0,1]-intensity ellipse set: skull 1.0, brain 0.2 after the -0.8
// interior, ventricles back to 0, small features +0.1.
constexpr Ellipse kEllipses[10] = {
    {0.6900, 0.920, 0.810, 0.00, 0.0000, 0.00, 0.0, 1.0},
    {0.6624, 0.874, 0.780, 0.00, -0.0184, 0.00, 0.0, -0.8},
    {0.1100, 0.310, 0.220, 0.22, 0.0000, 0.00, -18.0, -0.2},
    {0.1600, 0.410, 0.280, -0.22, 0.0000, 0.00, 18.0, -0.2},
    {0.2100, 0.250, 0.410, 0.00, 0.3500, -0.15, 0.0, 0.1},
    {0.0460, 0.046, 0.050, 0.00, 0.1000, 0.25, 0.0, 0.1},
    {0.0460, 0.046, 0.050, 0.00, -0.1000, 0.25, 0.0, 0.1},
    {0.0460, 0.023, 0.050, -0.08, -0.6050, 0.00, 0.0, 0.1},
    {0.0230, 0.023, 0.020, 0.00, -0.6060, 0.00, 0.0, 0.1},
    {0.0230, 0.046, 0.020, 0.06, -0.6050, 0.00, 0.0, 0.1},
};

inline double ellipse_sum(double x, double y, double z, bool threed) {
    double v = 0.0;
    for (const Ellipse& e : kEllipses) {
        const double phi = e.phi_deg * M_PI / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double xr = dx * std::cos(phi) + dy * std::sin(phi);
        const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
        double q = (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b);
        if (threed) {
            const double dz = z - e.z0;
            q += (dz * dz) / (e.c * e.c);
        }
        if (q <= 1.0) v += e.value;
    }
    return v < 0.0 ? 0.0 : v;
}

}  // namespace

ScalarImage shepp_logan(const GridGeom& geom) {
    geom.validate();
    ScalarImage out(geom);
    const bool threed = geom.ndim == 3;
    std::size_t i = 0;
    for (int z = 0; z < geom.dim[2]; ++z) {
        const double pz = threed ? -1.0 + 2.0 * z / (geom.dim[2] - 1) : 0.0;
        for (int y = 0; y < geom.dim[1]; ++y) {
            const double py = -1.0 + 2.0 * y / (geom.dim[1] - 1);
            for (int x = 0; x < geom.dim[0]; ++x, ++i) {
                const double px = -1.0 + 2.0 * x / (geom.dim[0] - 1);
                out.data[i] = ellipse_sum(px, py, pz, threed);
            }
        }
    }
    return out;
}

VectorField synth_svf(const GridGeom& geom, double amp, double sigma, unsigned seed) {
    geom.validate();
    if (amp < 0.0) throw std::invalid_argument("synth_svf: amp must be >= 0");
    VectorField field(geom, FieldRole::velocity);
    if (amp == 0.0) return field;

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : field.data) v = dist(rng);

    field = gaussian_smooth(field, sigma);

    // Soft window: zero within 3 voxels of any border, ramping up over a
    // couple of correlation lengths so the exponentials stay well-behaved
    // at the cutoff.
    const double ramp = std::max(8.0, 2.0 * sigma);
    const int nd = geom.ndim;
    std::size_t i = 0;
    for (int z = 0; z < geom.dim[2]; ++z) {
        for (int y = 0; y < geom.dim[1]; ++y) {
            for (int x = 0; x < geom.dim[0]; ++x, ++i) {
                const int coord[3] = {x, y, z};
                int border = geom.dim[0];
                for (int a = 0; a < nd; ++a) {
                    border = std::min(border, coord[a]);
                    border = std::min(border, geom.dim[a] - 1 - coord[a]);
                }
                double w = 0.0;
                if (border >= 3) {
                    const double s = std::min(1.0, (border - 3) / ramp);
                    w = s * s * (3.0 - 2.0 * s);
                }
                for (int c = 0; c < nd; ++c) field.vec(i)[c] *= w;
            }
        }
    }

    const double mm = max_magnitude(field);
    if (mm > 0.0) {
        const double s = amp / mm;
        for (double& v : field.data) v *= s;
    }
    return field;
}

SimSet build_sim_set(int set_id, const SimConfig& config) {
    config.validate();
    if (set_id < 1 || set_id > 3) throw std::invalid_argument("build_sim_set: set must be 1, 2 or 3");

    SimSet out;
    out.v_shape = synth_svf(config.geom, config.shape_amp, config.sigma, config.seed * 2 + 1);
    out.v_path = synth_svf(config.geom, config.path_amp, config.sigma, config.seed * 2 + 2);

    // Symmetric profile over [-1, 1]: gamma[k] == -gamma[n-1-k] bit-exactly,
    // so inverse-process frame sequences are exact mirror images.
    const int n = config.n_frames;
    out.gamma.assign(n, 0.0);
    for (int k = 0; k < n / 2; ++k) {
        const double v = -1.0 + 2.0 * static_cast<double>(k) / (n - 1);
        out.gamma[k] = v;
        out.gamma[n - 1 - k] = -v;
    }

    const ScalarImage phantom = shepp_logan(config.geom);
    const ScalarImage deformed = warp_image(phantom, exp_svf(out.v_shape, 1.0));

    const ScalarImage& base_i = phantom;
    const ScalarImage& base_j = set_id == 2 ? phantom : deformed;
    const bool invert_j = set_id != 1;

    out.frames_i.reserve(n);
    out.frames_j.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double gi = out.gamma[k];
        const double gj = invert_j ? -out.gamma[k] : out.gamma[k];
        out.frames_i.push_back(warp_image(base_i, exp_svf(out.v_path, gi)));
        out.frames_j.push_back(warp_image(base_j, exp_svf(out.v_path, gj)));
        out.times_i.push_back(static_cast<double>(k));
        out.times_j.push_back(static_cast<double>(k));
    }
    return out;
}

}  // namespace tsm
