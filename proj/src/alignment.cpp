#include "tsm/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "tsm/kernels.hpp"
#include "tsm/svf.hpp"

namespace tsm {

std::pair<double, double> common_interval(const TsModel& a, const TsModel& b) {
    const double lo = std::max(a.t0, b.t0);
    const double hi = std::min(a.tn, b.tn);
    if (!(lo <= hi))
        throw std::invalid_argument(
            "common_interval: fitted ranges are disjoint; pass an explicit interval");
    return {lo, hi};
}

namespace {

// Shift all knot values by -g and pin an exact zero at the new anchor.
GammaCurve reanchor_same_direction(const GammaCurve& rate, double g, double mt) {
    GammaCurve out;
    out.anchor = mt;
    for (const auto& [t, gamma] : rate.knots) {
        if (t == mt) continue;
        out.knots.emplace_back(t, gamma - g);
    }
    out.knots.emplace_back(mt, 0.0);
    std::sort(out.knots.begin(), out.knots.end());
    out.validate();
    return out;
}

// The path on the opposite side of the shift: sample the first-order
// corrected velocity v*gamma(t) + shift over the path's own domain and
// refit it to rank-1 form, then append the new anchor knot.
PathModel reanchor_cross_path(const PathModel& path, const VectorField& shift, double mt) {
    const GridGeom& g = path.direction.geom;
    const double lo = path.t_lo, hi = path.t_hi;
    const int n_samples = hi > lo ? 11 : 1;

    std::vector<VectorField> samples;
    std::vector<double> ts(n_samples);
    samples.reserve(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        const double t = n_samples == 1
                             ? lo
                             : lo + (hi - lo) * static_cast<double>(s) / (n_samples - 1);
        ts[s] = t;
        VectorField w = scale_field(path.direction, path.rate(t), FieldRole::velocity);
        samples.push_back(bch_combine(w, shift));
    }

    std::size_t far_idx = 0;
    for (int s = 1; s < n_samples; ++s)
        if (std::abs(ts[s] - mt) > std::abs(ts[far_idx] - mt)) far_idx = s;

    if (ts[far_idx] == mt) {
        // The whole domain collapses onto the new anchor.
        PathModel out;
        out.direction = VectorField(g, FieldRole::velocity);
        out.rate = GammaCurve::anchored(mt);
        out.degenerate = true;
        return out;
    }

    std::vector<double> gamma_init(n_samples);
    for (int s = 0; s < n_samples; ++s)
        gamma_init[s] = (ts[s] - mt) / (ts[far_idx] - mt);

    Rank1Fit fit = fit_rank1(samples, gamma_init, far_idx);

    PathModel out;
    out.direction = std::move(fit.direction);
    out.degenerate = fit.degenerate;
    out.rate.anchor = mt;
    for (int s = 0; s < n_samples; ++s) {
        if (ts[s] == mt) continue;
        out.rate.knots.emplace_back(ts[s], fit.degenerate ? 0.0 : fit.gamma[s]);
    }
    out.rate.knots.emplace_back(mt, 0.0);
    std::sort(out.rate.knots.begin(), out.rate.knots.end());
    out.rate.validate();
    return out;
}

TsModel shift_model(const TsModel& in, double mt) {
    if (in.m == mt) return in;   // bit-exact identity

    const double delta = mt - in.m;
    const PathModel& own = delta > 0 ? in.future : in.past;
    const PathModel& other = delta > 0 ? in.past : in.future;
    const double g = own.rate(mt);

    TsModel out = in;
    out.m = mt;
    out.shape = warp_image(in.shape, exp_svf(own.direction, g));

    PathModel own_new = own;
    own_new.rate = reanchor_same_direction(own.rate, g, mt);

    const VectorField neg_shift = scale_field(own.direction, -g, FieldRole::velocity);
    PathModel other_new = reanchor_cross_path(other, neg_shift, mt);

    // Re-split the two domains at the new anchor.
    if (delta > 0) {
        own_new.t_lo = mt;
        own_new.t_hi = std::max(mt, in.tn);
        other_new.t_lo = std::min(mt, in.t0);
        other_new.t_hi = mt;
        out.future = std::move(own_new);
        out.past = std::move(other_new);
    } else {
        own_new.t_lo = std::min(mt, in.t0);
        own_new.t_hi = mt;
        other_new.t_lo = mt;
        other_new.t_hi = std::max(mt, in.tn);
        out.past = std::move(own_new);
        out.future = std::move(other_new);
    }
    return out;
}

}  // namespace

AlignedPair align_pair(const TsModel& model_i, const TsModel& model_j,
                       std::optional<std::pair<double, double>> requested_interval) {
    require_same_geom(model_i.shape.geom, model_j.shape.geom, "align_pair");

    const double mt = 0.5 * (model_i.m + model_j.m);

    double t_a, t_b;
    if (requested_interval) {
        t_a = requested_interval->first;
        t_b = requested_interval->second;
        if (!(t_a <= t_b)) throw std::invalid_argument("align_pair: interval is empty");
        if (!(t_a <= mt && mt <= t_b))
            throw std::invalid_argument(
                "align_pair: interval must contain the common shape time " + std::to_string(mt));
    } else {
        std::tie(t_a, t_b) = common_interval(model_i, model_j);
    }

    AlignedPair pair;
    pair.model_i = shift_model(model_i, mt);
    pair.model_j = shift_model(model_j, mt);
    pair.t_a = t_a;
    pair.t_b = t_b;
    return pair;
}

}  // namespace tsm
