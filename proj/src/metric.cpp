#include "tsm/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tsm/kernels.hpp"

namespace tsm {

ShapeDistanceResult shape_distance(const AlignedPair& pair, const RegParams& reg) {
    ShapeDistanceResult out;
    out.velocity = register_svf(pair.model_j.shape, pair.model_i.shape, reg);
    out.ds_map = magnitude_map(out.velocity);
    out.mask = foreground_mask(pair.model_i.shape, pair.model_j.shape, 0.01);
    out.ds = mean_over_mask(out.ds_map, out.mask);
    return out;
}

PathDistanceResult path_distance(const AlignedPair& pair, const VectorField& shape_velocity,
                                 const Mask& mask, int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("path_distance: need at least 2 time samples");
    const GridGeom& g = pair.model_i.shape.geom;
    require_same_geom(g, shape_velocity.geom, "path_distance");
    require_same_geom(g, mask.geom, "path_distance");

    // Rate curves are frame-free scalars; only the directions move frames.
    TransportResult future_i = parallel_transport(pair.model_i.future.direction, shape_velocity);
    TransportResult past_i = parallel_transport(pair.model_i.past.direction, shape_velocity);

    PathDistanceResult out;
    out.transport_fallbacks = future_i.fallback_count + past_i.fallback_count;
    out.dp_map = ScalarImage(g, 0.0);

    const double mt = pair.model_i.m;
    const int nd = g.ndim;
    const std::int64_t n = static_cast<std::int64_t>(g.voxels());
    for (int s = 0; s < n_samples; ++s) {
        const double t = pair.t_a + (pair.t_b - pair.t_a) * static_cast<double>(s) / (n_samples - 1);
        const bool future = t >= mt;
        const VectorField& vi = future ? future_i.field : past_i.field;
        const VectorField& vj = future ? pair.model_j.future.direction
                                       : pair.model_j.past.direction;
        const double gi = (future ? pair.model_i.future.rate : pair.model_i.past.rate)(t);
        const double gj = (future ? pair.model_j.future.rate : pair.model_j.past.rate)(t);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            const double* a = vi.vec(u);
            const double* b = vj.vec(u);
            double s2 = 0.0;
            for (int c = 0; c < nd; ++c) {
                const double d = a[c] * gi - b[c] * gj;
                s2 += d * d;
            }
            const double mag = std::sqrt(s2);
            if (mag > out.dp_map.data[u]) out.dp_map.data[u] = mag;
        }
    }
    out.dp = mean_over_mask(out.dp_map, mask);
    return out;
}

namespace {

double percentile95(const ScalarImage& map, const Mask& mask) {
    std::vector<double> vals;
    vals.reserve(mask.count_true());
    for (std::size_t i = 0; i < map.data.size(); ++i)
        if (mask.data[i]) vals.push_back(map.data[i]);
    if (vals.empty()) return 0.0;
    std::sort(vals.begin(), vals.end());
    const std::size_t idx = static_cast<std::size_t>(0.95 * (vals.size() - 1));
    return vals[idx];
}

double max_over_mask(const ScalarImage& map, const Mask& mask) {
    double m = 0.0;
    for (std::size_t i = 0; i < map.data.size(); ++i)
        if (mask.data[i]) m = std::max(m, map.data[i]);
    return m;
}

}  // namespace

DistanceReport total_distance(const TsModel& model_i, const TsModel& model_j,
                              std::optional<std::pair<double, double>> requested_interval,
                              const RegParams& reg, int n_samples) {
    const AlignedPair pair = align_pair(model_i, model_j, requested_interval);
    ShapeDistanceResult sd = shape_distance(pair, reg);
    PathDistanceResult pd = path_distance(pair, sd.velocity, sd.mask, n_samples);

    DistanceReport report;
    report.ds = sd.ds;
    report.dp = pd.dp;
    report.total = sd.ds + pd.dp;
    report.ds_max = max_over_mask(sd.ds_map, sd.mask);
    report.dp_max = max_over_mask(pd.dp_map, sd.mask);
    report.ds_p95 = percentile95(sd.ds_map, sd.mask);
    report.dp_p95 = percentile95(pd.dp_map, sd.mask);
    report.t_a = pair.t_a;
    report.t_b = pair.t_b;
    report.n_time_samples = n_samples;
    report.reference = "second";
    report.transport_fallbacks = pd.transport_fallbacks;
    report.nonmonotone_rates = 0;
    for (const PathModel* p : {&pair.model_i.future, &pair.model_i.past,
                               &pair.model_j.future, &pair.model_j.past})
        if (!p->rate.monotone()) ++report.nonmonotone_rates;
    report.ds_map = std::move(sd.ds_map);
    report.dp_map = std::move(pd.dp_map);
    report.mask = std::move(sd.mask);
    return report;
}

}  // namespace tsm
