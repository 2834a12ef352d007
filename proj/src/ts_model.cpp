#include "tsm/ts_model.hpp"

#include <algorithm>
#include <cmath>

#include "tsm/kernels.hpp"
#include "tsm/svf.hpp"

namespace tsm {

double GammaCurve::operator()(double t) const {
    if (!std::isfinite(t)) throw std::domain_error("gamma: time is not finite");
    if (knots.empty()) throw std::logic_error("gamma: curve has no knots");
    if (knots.size() == 1) return knots.front().second;

    // Segment lookup; outside the span the outermost segment extends.
    std::size_t hi = 1;
    while (hi < knots.size() - 1 && t > knots[hi].first) ++hi;
    const auto& [t0, g0] = knots[hi - 1];
    const auto& [t1, g1] = knots[hi];
    if (t == t0) return g0;   // knot hits are exact, including the anchor
    if (t == t1) return g1;
    const double slope = (g1 - g0) / (t1 - t0);
    return g0 + slope * (t - t0);
}

bool GammaCurve::monotone() const {
    if (knots.size() < 2) return true;
    bool incr = true, decr = true;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (knots[i].second < knots[i - 1].second) incr = false;
        if (knots[i].second > knots[i - 1].second) decr = false;
    }
    return incr || decr;
}

void GammaCurve::validate() const {
    if (knots.empty()) throw std::invalid_argument("gamma curve has no knots");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i].first > knots[i - 1].first))
            throw std::invalid_argument("gamma knot times must be strictly increasing");
    for (const auto& [t, g] : knots)
        if (!std::isfinite(t) || !std::isfinite(g))
            throw std::invalid_argument("gamma knots must be finite");
    const auto it = std::find_if(knots.begin(), knots.end(),
                                 [&](const auto& k) { return k.first == anchor; });
    if (it == knots.end() || it->second != 0.0)
        throw std::invalid_argument("gamma curve is missing its zero anchor knot");
}

GammaCurve GammaCurve::anchored(double m) {
    GammaCurve c;
    c.anchor = m;
    c.knots = {{m, 0.0}};
    return c;
}

std::pair<ScalarImage, double> select_shape(const std::vector<ScalarImage>& frames,
                                            const std::vector<double>& times,
                                            ShapeMode mode) {
    const std::size_t n = frames.size();
    if (n < 3) throw std::invalid_argument("select_shape: need at least 3 frames");
    if (times.size() != n) throw std::invalid_argument("select_shape: times/frames size mismatch");
    for (std::size_t i = 1; i < n; ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("select_shape: times must be strictly increasing");
    for (std::size_t i = 1; i < n; ++i)
        require_same_geom(frames[i].geom, frames[0].geom, "select_shape");

    if (mode == ShapeMode::longitudinal) {
        const std::size_t mid = n / 2;
        return {frames[mid], times[mid]};
    }

    ScalarImage mean(frames[0].geom);
    for (const auto& f : frames)
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += f.data[i];
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : mean.data) v *= inv;

    // Median time, snapped to the nearest frame time (lower index on ties).
    const double median = (n % 2 == 1) ? times[n / 2]
                                       : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    double m = times[0];
    double best = std::abs(times[0] - median);
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::abs(times[i] - median);
        if (d < best) {
            best = d;
            m = times[i];
        }
    }
    return {std::move(mean), m};
}

namespace {

double dot_fields(const VectorField& a, const VectorField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace

Rank1Fit fit_rank1(const std::vector<VectorField>& samples, std::vector<double> gamma,
                   std::size_t norm_index, int max_iters, double tol) {
    if (samples.empty()) throw std::invalid_argument("fit_rank1: no samples");
    if (gamma.size() != samples.size())
        throw std::invalid_argument("fit_rank1: gamma_init size mismatch");
    if (norm_index >= samples.size())
        throw std::invalid_argument("fit_rank1: norm_index out of range");
    const GridGeom& g = samples[0].geom;
    for (const auto& s : samples) require_same_geom(s.geom, g, "fit_rank1");

    Rank1Fit out;
    double peak = 0.0;
    for (const auto& s : samples) peak = std::max(peak, max_magnitude(s));
    if (peak < 1e-12) {
        out.direction = VectorField(g, FieldRole::velocity);
        out.gamma = std::move(gamma);
        out.degenerate = true;
        return out;
    }

    VectorField v(g, FieldRole::velocity);
    for (int iter = 0; iter < max_iters; ++iter) {
        double s2 = 0.0;
        for (double gk : gamma) s2 += gk * gk;
        if (s2 < 1e-24) break;
        std::fill(v.data.begin(), v.data.end(), 0.0);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double w = gamma[k] / s2;
            const auto& sd = samples[k].data;
            for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += w * sd[i];
        }
        const double vv = dot_fields(v, v);
        if (vv < 1e-24) break;
        double delta = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double gk = dot_fields(samples[k], v) / vv;
            delta = std::max(delta, std::abs(gk - gamma[k]));
            gamma[k] = gk;
        }
        if (delta < tol) break;
    }

    const double scale = gamma[norm_index];
    if (std::abs(scale) > 1e-12) {
        for (double& d : v.data) d *= scale;
        for (double& gk : gamma) gk /= scale;
    }
    out.direction = std::move(v);
    out.gamma = std::move(gamma);
    return out;
}

PathModel fit_path(const ScalarImage& shape, const std::vector<ScalarImage>& frames,
                   const std::vector<double>& times, double m, bool future_side,
                   const RegParams& reg) {
    if (frames.empty()) throw std::invalid_argument("fit_path: no frames");
    if (frames.size() != times.size())
        throw std::invalid_argument("fit_path: times/frames size mismatch");
    for (std::size_t k = 0; k < times.size(); ++k) {
        const bool ok = future_side ? times[k] > m : times[k] < m;
        if (!ok)
            throw std::invalid_argument("fit_path: frame times must lie strictly on the fitted side");
    }

    std::vector<VectorField> u;
    u.reserve(frames.size());
    for (const auto& frame : frames) u.push_back(register_svf(frame, shape, reg));

    std::size_t far_idx = 0;
    for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - m) > std::abs(times[far_idx] - m)) far_idx = k;

    std::vector<double> gamma_init(times.size());
    for (std::size_t k = 0; k < times.size(); ++k)
        gamma_init[k] = (times[k] - m) / (times[far_idx] - m);

    Rank1Fit fit = fit_rank1(u, gamma_init, far_idx);
    if (fit.degenerate) fit.gamma = gamma_init;   // keep the linear profile

    PathModel path;
    path.direction = std::move(fit.direction);
    path.degenerate = fit.degenerate;
    path.rate.anchor = m;
    path.rate.knots.emplace_back(m, 0.0);
    for (std::size_t k = 0; k < times.size(); ++k)
        path.rate.knots.emplace_back(times[k], fit.gamma[k]);
    std::sort(path.rate.knots.begin(), path.rate.knots.end());
    path.rate.validate();
    path.t_lo = future_side ? m : times.front();
    path.t_hi = future_side ? times.back() : m;
    return path;
}

TsModel fit_ts_model(const std::vector<ScalarImage>& frames, const std::vector<double>& times,
                     ShapeMode mode, const RegParams& reg) {
    reg.validate();
    auto [shape, m] = select_shape(frames, times, mode);
    for (const auto& f : frames) require_finite(f, "fit_ts_model");

    std::vector<ScalarImage> past_frames, future_frames;
    std::vector<double> past_times, future_times;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (times[k] < m) {
            past_frames.push_back(frames[k]);
            past_times.push_back(times[k]);
        } else if (times[k] > m) {
            future_frames.push_back(frames[k]);
            future_times.push_back(times[k]);
        }
        // the frame at exactly m is represented by the shape itself
    }

    TsModel model;
    model.m = m;
    model.t0 = times.front();
    model.tn = times.back();
    model.provenance = mode;
    model.fit_times = times;
    model.reg = reg;

    if (future_frames.empty()) {
        model.future.direction = VectorField(shape.geom, FieldRole::velocity);
        model.future.rate = GammaCurve::anchored(m);
        model.future.degenerate = true;
        model.future.t_lo = m;
        model.future.t_hi = model.tn;
    } else {
        model.future = fit_path(shape, future_frames, future_times, m, true, reg);
        model.future.t_hi = model.tn;
    }
    if (past_frames.empty()) {
        model.past.direction = VectorField(shape.geom, FieldRole::velocity);
        model.past.rate = GammaCurve::anchored(m);
        model.past.degenerate = true;
        model.past.t_lo = model.t0;
        model.past.t_hi = m;
    } else {
        model.past = fit_path(shape, past_frames, past_times, m, false, reg);
        model.past.t_lo = model.t0;
    }
    model.shape = std::move(shape);
    return model;
}

ScalarImage evaluate(const TsModel& model, double t) {
    if (!std::isfinite(t)) throw std::domain_error("evaluate: time is not finite");
    const PathModel& side = t >= model.m ? model.future : model.past;
    const double g = side.rate(t);
    return warp_image(model.shape, exp_svf(side.direction, g));
}

}  // namespace tsm
