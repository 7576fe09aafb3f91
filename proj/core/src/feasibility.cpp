#include "triflow/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace triflow {

std::optional<ToleranceProfile> ToleranceProfile::named(const std::string& name) {
    if (name.empty() || name == "default") return ToleranceProfile{};
    if (name == "strict") return ToleranceProfile{1e-10, 1e-10, 1e-12, 1e-11};
    if (name == "loose") return ToleranceProfile{1e-6, 1e-6, 1e-8, 1e-7};
    return std::nullopt;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

bool has_zero_impedance(const Network& net) {
    return std::any_of(net.branches.begin(), net.branches.end(),
                       [](const Branch& b) { return b.z_series.is_zero(); });
}

void fold_rank_psd(const ResidualReport& rep, double& worst_rank, double& worst_psd) {
    if (const ResidualGroup* g = rep.find("rank"))
        worst_rank = std::max(worst_rank, g->inf_norm());
    if (const ResidualGroup* g = rep.find("psd"))
        worst_psd = std::max(worst_psd, g->inf_norm());
}

}  // namespace

std::string ConsistencyReport::to_text() const {
    std::ostringstream os;
    for (const auto& [name, norm] : formulation_norms)
        os << "formulation " << name << " inf " << fmt(norm) << "\n";
    for (const auto& name : not_applicable) os << "formulation " << name << " not-applicable\n";
    for (const auto& [name, norm] : group_norms) os << "group " << name << " inf " << fmt(norm) << "\n";
    os << "rank worst " << fmt(worst_rank) << "\n";
    os << "psd worst " << fmt(worst_psd) << "\n";
    for (const auto& fam : bounds_natural.families)
        if (!fam.entries.empty()) os << "bound " << fam.name << " worst " << fmt(fam.worst()) << "\n";
    for (const auto& fam : bounds_lifted.families)
        if (!fam.entries.empty()) os << "bound " << fam.name << " worst " << fmt(fam.worst()) << "\n";
    for (const auto* rep : {&bounds_natural, &bounds_lifted})
        for (const auto& fam : rep->families)
            for (const auto& e : fam.entries)
                if (e.margin < 0.0)
                    os << "violation " << fam.name << " " << e.id << " " << fmt(e.margin) << "\n";
    if (!worst_group.empty()) os << "worst_group " << worst_group << "\n";
    os << "verdict " << (consistent ? "consistent" : "inconsistent") << "\n";
    return os.str();
}

ConsistencyReport cross_validate(const Network& net, const IVState& s,
                                 const ToleranceProfile& profile) {
    ConsistencyReport out;

    const ResidualReport iv = residual_iv(net, s);
    const PolarState polar = iv_to_polar(net, s);
    const RectState rect = iv_to_rect(net, s);
    const LiftedState lifted = lift(net, s);

    std::vector<std::pair<std::string, ResidualReport>> reports;
    reports.emplace_back("iv", iv);
    const bool skip_admittance_forms = has_zero_impedance(net);
    if (skip_admittance_forms) {
        // Zero-impedance branches are representable only in the
        // impedance-form evaluators.
        out.not_applicable = {"polar", "rect", "bim_lifted"};
    } else {
        reports.emplace_back("polar", residual_polar(net, polar));
        reports.emplace_back("rect", residual_rect(net, rect));
        reports.emplace_back("bim_lifted", residual_bim_lifted(net, lifted));
    }
    reports.emplace_back("bfm_lifted", residual_bfm_lifted(net, lifted));

    out.consistent = true;
    for (const auto& [name, rep] : reports) {
        double norm = 0.0;
        for (const ResidualGroup& g : rep.groups) {
            if (g.name == "rank" || g.name == "psd") continue;  // separate tolerances
            const double gn = g.inf_norm();
            out.group_norms.emplace_back(name + "." + g.name, gn);
            norm = std::max(norm, gn);
            if (gn > profile.eq_tol && out.worst_group.empty()) out.worst_group = name + "." + g.name;
            if (gn > profile.eq_tol) out.consistent = false;
        }
        out.formulation_norms.emplace_back(name, norm);
        fold_rank_psd(rep, out.worst_rank, out.worst_psd);
    }
    if (out.worst_rank > profile.rank_tol) out.consistent = false;
    if (out.worst_psd > profile.psd_tol) out.consistent = false;

    out.bounds_natural = bounds_margins(net, s);
    out.bounds_lifted = bounds_margins(net, lifted);
    if (out.bounds_natural.worst_margin() < -profile.bound_tol) out.consistent = false;
    if (out.bounds_lifted.worst_margin() < -profile.bound_tol) out.consistent = false;

    return out;
}

BoundVerdict check_bounds(const Network& net, const IVState& s, const ToleranceProfile& profile) {
    BoundVerdict v;
    v.report = bounds_margins(net, s);
    v.feasible = v.report.worst_margin() >= -profile.bound_tol;
    return v;
}

BoundVerdict check_bounds(const Network& net, const LiftedState& s, const ToleranceProfile& profile) {
    BoundVerdict v;
    v.report = bounds_margins(net, s);
    v.feasible = v.report.worst_margin() >= -profile.bound_tol;
    return v;
}

}  // namespace triflow
