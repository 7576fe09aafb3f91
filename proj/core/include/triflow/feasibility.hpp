#pragma once

#include <optional>
#include <string>
#include <vector>

#include "triflow/bounds.hpp"
#include "triflow/residuals.hpp"
#include "triflow/state.hpp"

namespace triflow {

struct ToleranceProfile {
    double eq_tol = 1e-8;
    double rank_tol = 1e-8;
    double psd_tol = 1e-10;
    double bound_tol = 1e-9;

    /// "default", "strict" or "loose".
    static std::optional<ToleranceProfile> named(const std::string& name);
};

struct ConsistencyReport {
    /// inf-norm per formulation, in evaluation order:
    /// iv, polar, rect, bim_lifted, bfm_lifted.
    std::vector<std::pair<std::string, double>> formulation_norms;
    /// inf-norm per residual group, keyed "<formulation>.<group>".
    std::vector<std::pair<std::string, double>> group_norms;
    /// Formulations skipped because the network has a zero-impedance
    /// branch (the admittance forms cannot represent it).
    std::vector<std::string> not_applicable;
    /// Name of the first residual group found above tolerance, if any.
    std::string worst_group;
    double worst_rank = 0.0;
    double worst_psd = 0.0;
    FeasibilityReport bounds_natural;
    FeasibilityReport bounds_lifted;
    bool consistent = false;

    /// Deterministic line-oriented form; identical inputs yield
    /// identical bytes.
    std::string to_text() const;
};

/// Converts and lifts the natural state into the four remaining
/// formulation spaces, evaluates every residual group and bound family,
/// and issues the equivalence verdict against the profile.
ConsistencyReport cross_validate(const Network& net, const IVState& s,
                                 const ToleranceProfile& profile = {});

struct BoundVerdict {
    FeasibilityReport report;
    bool feasible = false;
};

BoundVerdict check_bounds(const Network& net, const IVState& s, const ToleranceProfile& profile = {});
BoundVerdict check_bounds(const Network& net, const LiftedState& s, const ToleranceProfile& profile = {});

}  // namespace triflow
