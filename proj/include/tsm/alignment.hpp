#pragma once

#include <optional>
#include <utility>

#include "tsm/ts_model.hpp"

namespace tsm {

// Two models re-anchored to the common shape time (m_i + m_j)/2, plus the
// interval the comparison runs over.
struct AlignedPair {
    TsModel model_i;
    TsModel model_j;
    double t_a = 0.0, t_b = 0.0;
};

// Intersection of the two fitted ranges; throws if disjoint.
std::pair<double, double> common_interval(const TsModel& a, const TsModel& b);

// Moves both shapes to the midpoint time along their own paths and updates
// the four rate curves so every re-anchored gamma vanishes at the new m.
// The path sharing its direction with the shift is updated exactly (scalar
// shift of gamma); the opposite path gets a first-order velocity correction
// refit to rank-1 form over 11 samples of its domain.
AlignedPair align_pair(const TsModel& model_i, const TsModel& model_j,
                       std::optional<std::pair<double, double>> requested_interval = {});

}  // namespace tsm
