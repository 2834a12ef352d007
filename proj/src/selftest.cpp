#include "tsm/selftest.hpp"

#include <cmath>
#include <iomanip>
#include <string>

#include "tsm/kernels.hpp"
#include "tsm/metric.hpp"
#include "tsm/phantom.hpp"
#include "tsm/svf.hpp"
#include "tsm/ts_model.hpp"

namespace tsm {

namespace {

struct Checker {
    std::ostream& out;
    bool all_ok = true;

    void check(const std::string& name, bool ok, double value, double limit) {
        all_ok &= ok;
        out << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << std::scientific
            << std::setprecision(3) << value << " vs limit " << limit << ")\n";
    }
};

double mean_magnitude(const VectorField& f) {
    ScalarImage m = magnitude_map(f);
    double s = 0.0;
    for (double v : m.data) s += v;
    return s / static_cast<double>(m.data.size());
}

double max_interior_magnitude(const VectorField& f, int margin) {
    const GridGeom& g = f.geom;
    double best = 0.0;
    std::size_t i = 0;
    for (int z = 0; z < g.dim[2]; ++z)
        for (int y = 0; y < g.dim[1]; ++y)
            for (int x = 0; x < g.dim[0]; ++x, ++i) {
                const int c[3] = {x, y, z};
                bool interior = true;
                for (int a = 0; a < g.ndim; ++a)
                    if (c[a] < margin || c[a] > g.dim[a] - 1 - margin) interior = false;
                if (!interior) continue;
                double s = 0.0;
                for (int a = 0; a < g.ndim; ++a) s += f.comp(i, a) * f.comp(i, a);
                best = std::max(best, std::sqrt(s));
            }
    return best;
}

VectorField field_difference(const VectorField& a, const VectorField& b) {
    VectorField d(a.geom, a.role);
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = a.data[i] - b.data[i];
    return d;
}

// Independent flow integration: classic RK4 on dx/dt = v(x) from every
// voxel, interpolating v with the same clamped multilinear scheme.
double exp_vs_rk4_mean_error(const VectorField& v, const VectorField& disp, int steps) {
    const GridGeom& g = v.geom;
    const int nd = g.ndim;
    const double h = 1.0 / steps;
    double err_sum = 0.0;
    std::size_t i = 0;
    for (int z = 0; z < g.dim[2]; ++z)
        for (int y = 0; y < g.dim[1]; ++y)
            for (int x = 0; x < g.dim[0]; ++x, ++i) {
                double p[3] = {static_cast<double>(x), static_cast<double>(y),
                               static_cast<double>(z)};
                double k1[3], k2[3], k3[3], k4[3], q[3];
                for (int s = 0; s < steps; ++s) {
                    interp_vector(v, p, k1);
                    for (int c = 0; c < nd; ++c) q[c] = p[c] + 0.5 * h * k1[c];
                    interp_vector(v, q, k2);
                    for (int c = 0; c < nd; ++c) q[c] = p[c] + 0.5 * h * k2[c];
                    interp_vector(v, q, k3);
                    for (int c = 0; c < nd; ++c) q[c] = p[c] + h * k3[c];
                    interp_vector(v, q, k4);
                    for (int c = 0; c < nd; ++c)
                        p[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
                const double start[3] = {static_cast<double>(x), static_cast<double>(y),
                                         static_cast<double>(z)};
                double e2 = 0.0;
                for (int c = 0; c < nd; ++c) {
                    const double d = (p[c] - start[c]) - disp.comp(i, c);
                    e2 += d * d;
                }
                err_sum += std::sqrt(e2);
            }
    return err_sum / static_cast<double>(g.voxels());
}

}  // namespace

bool run_selftest(std::ostream& out) {
    Checker ck{out};
    const GridGeom grid = GridGeom::make2d(64, 64);

    // --- stationary-velocity algebra -----------------------------------
    {
        VectorField zero(grid, FieldRole::velocity);
        const VectorField disp = exp_svf(zero, 1.0);
        ck.check("exp of the zero field is the exact identity", max_magnitude(disp) == 0.0,
                 max_magnitude(disp), 0.0);
    }
    {
        const VectorField v = synth_svf(grid, 4.0, 8.0, 101);
        const VectorField whole = exp_svf(v, 1.0);
        const VectorField split = compose_disp(exp_svf(v, 0.35), exp_svf(v, 0.65));
        const double err = mean_magnitude(field_difference(whole, split));
        ck.check("one-parameter subgroup property", err <= 0.05, err, 0.05);
    }
    {
        const VectorField v = synth_svf(grid, 3.0, 8.0, 102);
        const VectorField round = compose_disp(exp_svf(v, 1.0), invert_svf(v));
        const double err = max_interior_magnitude(round, 4);
        ck.check("exponential/inverse round trip", err <= 0.1, err, 0.1);
    }
    {
        const VectorField v = synth_svf(grid, 4.0, 8.0, 103);
        const double err = exp_vs_rk4_mean_error(v, exp_svf(v, 1.0), 64);
        ck.check("exponential matches 64-step RK4 flow", err <= 0.05, err, 0.05);
    }

    // --- rank-1 fit ------------------------------------------------------
    {
        const VectorField v_true = synth_svf(grid, 2.0, 8.0, 104);
        const std::vector<double> gamma_true{0.3, 0.7, 1.0};
        std::vector<VectorField> samples;
        for (double gk : gamma_true)
            samples.push_back(scale_field(v_true, gk, FieldRole::velocity));
        const std::vector<double> init{1.0 / 3.0, 2.0 / 3.0, 1.0};
        const Rank1Fit fit = fit_rank1(samples, init, 2);
        double rel = 0.0;
        for (std::size_t k = 0; k < gamma_true.size(); ++k)
            rel = std::max(rel, std::abs(fit.gamma[k] - gamma_true[k]) / gamma_true[k]);
        ck.check("rank-1 fit recovers noiseless rates", !fit.degenerate && rel <= 1e-6, rel, 1e-6);
    }

    // --- fitted-model properties ----------------------------------------
    {
        SimConfig cfg;
        cfg.geom = grid;
        cfg.n_frames = 5;
        cfg.shape_amp = 2.5;
        cfg.path_amp = 2.5;
        cfg.seed = 7;
        const SimSet sim = build_sim_set(2, cfg);
        const RegParams reg;
        const TsModel model_i =
            fit_ts_model(sim.frames_i, sim.times_i, ShapeMode::longitudinal, reg);
        const TsModel model_j =
            fit_ts_model(sim.frames_j, sim.times_j, ShapeMode::longitudinal, reg);

        const DistanceReport self = total_distance(model_i, model_i, {}, reg);
        ck.check("self distance vanishes", self.total <= 1e-6, self.total, 1e-6);

        const DistanceReport d101 = total_distance(model_i, model_j, {}, reg, 101);
        const DistanceReport d201 = total_distance(model_i, model_j, {}, reg, 201);
        const double drift =
            d101.dp > 0.0 ? std::abs(d201.dp - d101.dp) / d101.dp : std::abs(d201.dp);
        ck.check("path distance stable when time sampling doubles", drift <= 0.01, drift, 0.01);
    }

    out << (ck.all_ok ? "selftest: all checks passed\n" : "selftest: FAILURES above\n");
    return ck.all_ok;
}

}  // namespace tsm
