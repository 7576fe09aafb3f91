#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "triflow/feasibility.hpp"
#include "triflow/ingest.hpp"
#include "triflow/residuals.hpp"
#include "triflow/solver.hpp"

using namespace triflow;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(TRIFLOW_FIXTURE_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Network load(const std::string& name) {
    ParseResult r = parse_native(fixture(name));
    REQUIRE_MESSAGE(r.ok(), r.diagnostics_text());
    return std::move(*r.network);
}

IVState flat_state(const Network& net) {
    IVState s = IVState::sized_for(net);
    const Bus& ref = net.buses[static_cast<std::size_t>(net.reference_bus_indices().front())];
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        for (int p = 0; p < b.phases.size(); ++p) {
            const Phase ph = b.phases.member(p);
            s.v[k][p] = ref.phases.contains(ph) ? ref.vref[static_cast<std::size_t>(ref.phases.index_of(ph))]
                                                : ref.vref[0];
        }
    }
    return s;
}

}  // namespace

TEST_CASE("named tolerance profiles") {
    CHECK(ToleranceProfile::named("").has_value());
    CHECK(ToleranceProfile::named("default").has_value());
    CHECK(ToleranceProfile::named("strict").has_value());
    CHECK(ToleranceProfile::named("loose").has_value());
    CHECK_FALSE(ToleranceProfile::named("nonsense").has_value());
    CHECK(ToleranceProfile::named("strict")->eq_tol < ToleranceProfile{}.eq_tol);
}

TEST_CASE("flat no-load network is consistent with zero norms") {
    Network net = load("case2_bal.net");
    net.units.clear();
    net.rebuild_index();
    ConsistencyReport rep = cross_validate(net, flat_state(net));
    CHECK(rep.consistent);
    for (const auto& [name, norm] : rep.formulation_norms) {
        CAPTURE(name);
        CHECK(norm < 1e-13);
    }
    CHECK(rep.worst_rank < 1e-12);
    CHECK(rep.worst_psd < 1e-12);
}

TEST_CASE("solved fixtures are consistent at the default profile") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net"}) {
        CAPTURE(name);
        Network net = load(name);
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        ConsistencyReport rep = cross_validate(net, sol.state);
        CHECK_MESSAGE(rep.consistent, rep.to_text());
        CHECK(rep.formulation_norms.size() == 5);
    }
}

TEST_CASE("converted residuals stay within 100x of the natural tolerance") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        CAPTURE(name);
        Network net = load(name);
        SolveOptions opts;
        opts.tol = 1e-10;
        SolveResult sol = solve_newton(net, opts);
        REQUIRE(sol.converged);
        const double eps = std::max(residual_iv(net, sol.state).inf_norm(), opts.tol);
        ConsistencyReport rep = cross_validate(net, sol.state);
        for (const auto& [fname, norm] : rep.formulation_norms) {
            CAPTURE(fname);
            CHECK(norm <= 100.0 * eps);
        }
    }
}

TEST_CASE("a perturbed voltage breaks consistency through the ohm group") {
    Network net = load("case2_bal.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    IVState s = sol.state;
    s.v[1][0] += 1e-3 * 230.0;  // 1e-3 pu expressed in volts
    ConsistencyReport rep = cross_validate(net, s);
    CHECK_FALSE(rep.consistent);
    CHECK(rep.worst_group.find("ohm") != std::string::npos);
}

TEST_CASE("meshed network runs the full system block checks") {
    Network net = load("case4_mesh.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    ConsistencyReport rep = cross_validate(net, sol.state);
    CHECK_MESSAGE(rep.consistent, rep.to_text());
    // the system-wide matrix appears as its own psd/rank entry
    ResidualReport bim = residual_bim_lifted(net, lift(net, sol.state));
    bool system_entry = false;
    for (const auto& e : bim.find("psd")->entries)
        if (e.id == "system") system_entry = true;
    CHECK(system_entry);
}

TEST_CASE("zero-impedance branches mark the admittance forms not-applicable") {
    Network net = load("case2_bal.net");
    net.units.clear();
    net.rebuild_index();
    net.branches[0].z_series = CMat(3);
    ConsistencyReport rep = cross_validate(net, flat_state(net));
    CHECK(rep.consistent);
    REQUIRE(rep.not_applicable.size() == 3);
    CHECK(rep.formulation_norms.size() == 2);  // iv + bfm remain
}

TEST_CASE("verdict is monotone in the tolerance profile") {
    Network net = load("case2_bal.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    IVState s = sol.state;
    // the admittance scales this into the scalar-form flow residuals by
    // roughly 8x, landing between the default and loose equality bands
    s.v[1][0] += 1e-7 * 230.0;
    ToleranceProfile strict = *ToleranceProfile::named("strict");
    ToleranceProfile fallback = *ToleranceProfile::named("default");
    ToleranceProfile loose = *ToleranceProfile::named("loose");
    const bool strict_ok = cross_validate(net, s, strict).consistent;
    const bool default_ok = cross_validate(net, s, fallback).consistent;
    const bool loose_ok = cross_validate(net, s, loose).consistent;
    CHECK_FALSE(strict_ok);
    CHECK_FALSE(default_ok);
    CHECK(loose_ok);
    // loosening never flips consistent -> inconsistent
    CHECK((!strict_ok || default_ok));
    CHECK((!default_ok || loose_ok));
}

TEST_CASE("reports serialize deterministically") {
    Network net = load("case3_unbal.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    const std::string a = cross_validate(net, sol.state).to_text();
    const std::string b = cross_validate(net, sol.state).to_text();
    CHECK(a == b);
    CHECK(a.find("verdict consistent") != std::string::npos);
    CHECK(a.find("group iv.ohm inf") != std::string::npos);
    CHECK(a.find("group bfm_lifted.balance_p inf") != std::string::npos);
    CHECK(a.find("bound voltage worst") != std::string::npos);
}

TEST_CASE("violated bounds are itemized in the report") {
    Network net = load("case2_bal.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    net.buses[1].vmin = {229.0, 229.0, 229.0};  // above the solved magnitude
    ConsistencyReport rep = cross_validate(net, sol.state);
    CHECK_FALSE(rep.consistent);
    CHECK(rep.to_text().find("violation voltage loadbus.") != std::string::npos);
}

TEST_CASE("check_bounds thresholds the worst margin") {
    Network net = load("case2_bal.net");
    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    CHECK(check_bounds(net, sol.state).feasible);
    CHECK(check_bounds(net, lift(net, sol.state)).feasible);
    // shrink the voltage band until the solution violates it
    net.buses[1].vmin = {229.0, 229.0, 229.0};
    CHECK_FALSE(check_bounds(net, sol.state).feasible);
}
