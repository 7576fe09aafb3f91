#pragma once

#include <string>
#include <vector>

#include "triflow/network.hpp"
#include "triflow/state.hpp"

namespace triflow {

struct MarginEntry {
    std::string id;
    double margin = 0.0;  // positive = satisfied slack
};

struct BoundFamily {
    std::string name;
    std::vector<MarginEntry> entries;
    double worst() const;  // smallest margin; +inf when empty
};

struct FeasibilityReport {
    std::vector<BoundFamily> families;
    double worst_margin() const;
    const BoundFamily* find(const std::string& name) const;
};

/// Signed margins for every bound family in the natural variable space:
/// voltage magnitudes, unit powers, branch/unit/shunt current ratings,
/// apparent-power ratings, branch voltage-angle differences and bus
/// phase-angle spreads. Rows with unbounded ratings are omitted.
FeasibilityReport bounds_margins(const Network& net, const IVState& s);

/// The lifted-space bound forms: diagonal and entrywise W bounds, cross
/// product entry bounds, the SOC current limit in W, the linear total
/// current bounds recovered from (L, W, S^s), implied series-current
/// bounds, and the tangent-form angle bounds.
FeasibilityReport bounds_margins(const Network& net, const LiftedState& s);

}  // namespace triflow
