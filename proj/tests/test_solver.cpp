#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "triflow/ingest.hpp"
#include "triflow/residuals.hpp"
#include "triflow/solver.hpp"

using namespace triflow;

namespace {

constexpr double kPi = std::numbers::pi;

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

IVState case2_oracle(const Network& net) {
    const cx z_eq{0.2, 0.4};
    const cx s_load{1000.0, 300.0};
    cx v{230.0, 0.0};
    for (int k = 0; k < 200; ++k) v = cx{230.0, 0.0} - z_eq * std::conj(s_load / v);
    IVState s = IVState::sized_for(net);
    for (int p = 0; p < 3; ++p) {
        const cx rot = std::polar(1.0, -2.0 * kPi / 3.0 * p);
        s.v[0][p] = cx{230.0, 0.0} * rot;
        s.v[1][p] = v * rot;
        s.i_series[0][p] = std::conj(s_load / (v * rot));
        s.unit_s[0][p] = s_load;
    }
    return s;
}

double max_voltage_gap_pu(const Network& net, const IVState& a, const IVState& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const double vb = net.unit_system == UnitSystem::si ? net.bus_vbase(static_cast<int>(k)) : 1.0;
        for (int p = 0; p < a.v[k].size(); ++p)
            worst = std::max(worst, std::abs(a.v[k][p] - b.v[k][p]) / vb);
    }
    return worst;
}

}  // namespace

TEST_CASE("no-load network converges immediately to the flat profile") {
    Network net = load("case2_bal.net");
    net.units.clear();
    net.rebuild_index();
    SolveResult result = solve_newton(net);
    CHECK(result.converged);
    CHECK(result.trace.iterations() <= 1);
    for (int p = 0; p < 3; ++p)
        CHECK(std::abs(result.state.v[1][p] - net.buses[0].vref[static_cast<std::size_t>(p)]) < 1e-12);
}

TEST_CASE("newton matches the scalar fixed-point oracle on case2_bal") {
    Network net = load("case2_bal.net");
    SolveResult result = solve_newton(net);
    REQUIRE(result.converged);
    IVState oracle = case2_oracle(net);
    CHECK(max_voltage_gap_pu(net, result.state, oracle) < 1e-8);
    CHECK(residual_iv(net, result.state).inf_norm() < 1e-10);
}

TEST_CASE("newton and sweep agree on the radial fixtures") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net"}) {
        CAPTURE(name);
        Network net = load(name);
        SolveResult newton = solve_newton(net);
        SolveResult sweep = solve_sweep(net);
        REQUIRE(newton.converged);
        REQUIRE(sweep.converged);
        CHECK(max_voltage_gap_pu(net, newton.state, sweep.state) < 1e-8);
    }
}

TEST_CASE("newton handles the meshed ring; sweep refuses it") {
    Network net = load("case4_mesh.net");
    SolveResult newton = solve_newton(net);
    CHECK(newton.converged);
    CHECK(residual_iv(net, newton.state).inf_norm() < 1e-10);
    CHECK_THROWS_WITH_AS(solve_sweep(net), doctest::Contains("radial"), Error);
}

TEST_CASE("structural solver errors") {
    SUBCASE("missing setpoint") {
        Network net = load("case2_bal.net");
        net.units[0].setpoint.reset();
        CHECK_THROWS_AS(solve_newton(net), Error);
    }
    SUBCASE("no reference bus") {
        Network net = load("case2_bal.net");
        net.buses[0].is_reference = false;
        net.buses[0].vref.clear();
        CHECK_THROWS_AS(solve_newton(net), Error);
    }
    SUBCASE("conductor with no path to the reference") {
        Network net = load("case2_bal.net");
        Bus island;
        island.id = "island";
        island.phases = PhaseSet::abc();
        net.buses.push_back(island);
        apply_defaults(net);
        CHECK_THROWS_WITH_AS(solve_newton(net), doctest::Contains("island"), Error);
    }
    SUBCASE("forced non-convergence is reported, not thrown") {
        Network net = load("case3_unbal.net");
        SolveOptions opts;
        opts.tol = 1e-30;
        opts.max_iter = 1;
        SolveResult result = solve_newton(net, opts);
        CHECK_FALSE(result.converged);
        CHECK(result.trace.reason == Termination::max_iterations);
    }
}

TEST_CASE("analytic Jacobian matches central differences") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        CAPTURE(name);
        Network pu = to_per_unit(load(name));
        NewtonSystem sys(pu);
        std::mt19937 gen(777);
        std::uniform_real_distribution<double> d(-0.1, 0.1);
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<double> x = sys.flat_vector();
            for (double& v : x) v += d(gen);
            Mat j = sys.jacobian(x);
            const double h = 1e-6;
            double worst = 0.0;
            for (int col = 0; col < sys.size(); ++col) {
                std::vector<double> xp = x, xm = x;
                xp[static_cast<std::size_t>(col)] += h;
                xm[static_cast<std::size_t>(col)] -= h;
                std::vector<double> rp = sys.residual(xp);
                std::vector<double> rm = sys.residual(xm);
                for (int row = 0; row < sys.size(); ++row) {
                    const double fd =
                        (rp[static_cast<std::size_t>(row)] - rm[static_cast<std::size_t>(row)]) / (2.0 * h);
                    worst = std::max(worst, std::abs(fd - j.at(row, col)));
                }
            }
            CHECK(worst / std::max(j.inf_norm(), 1.0) < 1e-5);
        }
    }
}

TEST_CASE("newton converges monotonically with a quadratic tail") {
    Network net = load("case3_unbal.net");
    SolveOptions opts;
    opts.tol = 1e-12;
    SolveResult result = solve_newton(net, opts);
    REQUIRE(result.converged);
    const auto& norms = result.trace.residual_norms;
    REQUIRE(norms.size() >= 3);
    for (std::size_t k = 1; k < norms.size(); ++k) CHECK(norms[k] <= norms[k - 1]);
    // ratio test on the last two steps that are above rounding noise
    for (std::size_t k = norms.size() - 1; k >= 1; --k) {
        if (norms[k - 1] > 1e-8) {
            CHECK(norms[k] <= 10.0 * norms[k - 1] * norms[k - 1]);
            break;
        }
        if (k == 1) break;
    }
}

TEST_CASE("per-unit and SI solves land on the same per-unit solution") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net"}) {
        CAPTURE(name);
        Network si = load(name);
        Network pu = to_per_unit(si);
        SolveResult from_si = solve_newton(si);
        SolveResult from_pu = solve_newton(pu);
        REQUIRE(from_si.converged);
        REQUIRE(from_pu.converged);
        IVState si_in_pu = state_to_per_unit(si, from_si.state);
        double worst = 0.0;
        for (std::size_t k = 0; k < pu.buses.size(); ++k)
            for (int p = 0; p < si_in_pu.v[k].size(); ++p)
                worst = std::max(worst, std::abs(si_in_pu.v[k][p] - from_pu.state.v[k][p]));
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("coordinate conversions") {
    SUBCASE("cardinal points") {
        RectState r;
        r.vre = {{1.0, 0.0}};
        r.vim = {{0.0, -1.0}};
        PolarState p = polar_from_rect(r);
        CHECK(p.vm[0][0] == doctest::Approx(1.0));
        CHECK(p.va[0][0] == doctest::Approx(0.0));
        CHECK(p.vm[0][1] == doctest::Approx(1.0));
        CHECK(p.va[0][1] == doctest::Approx(-kPi / 2.0));
    }
    SUBCASE("round-trip on the unbalanced solution is the identity") {
        Network net = load("case3_unbal.net");
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        PolarState p = iv_to_polar(net, sol.state);
        RectState r = rect_from_polar(p);
        PolarState p2 = polar_from_rect(r);
        for (std::size_t k = 0; k < p.vm.size(); ++k)
            for (std::size_t ph = 0; ph < p.vm[k].size(); ++ph) {
                CHECK(p.vm[k][ph] == doctest::Approx(p2.vm[k][ph]).epsilon(1e-12));
                CHECK(p.va[k][ph] == doctest::Approx(p2.va[k][ph]).epsilon(1e-12));
            }
        RectState r_direct = iv_to_rect(net, sol.state);
        for (std::size_t k = 0; k < r.vre.size(); ++k)
            for (std::size_t ph = 0; ph < r.vre[k].size(); ++ph) {
                CHECK(r.vre[k][ph] == doctest::Approx(r_direct.vre[k][ph]).epsilon(1e-12).scale(230.0));
                CHECK(r.vim[k][ph] == doctest::Approx(r_direct.vim[k][ph]).epsilon(1e-12).scale(230.0));
            }
    }
}

TEST_CASE("lifting a solution") {
    SUBCASE("flat state lifts to 120-degree off-diagonals") {
        Network net = load("case2_bal.net");
        net.units.clear();
        net.rebuild_index();
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        LiftedState lifted = lift(net, sol.state);
        const Hermitian& w = lifted.w[1];
        const double vref2 = 230.0 * 230.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                CHECK(std::abs(w.at(p, q)) == doctest::Approx(vref2).epsilon(1e-12));
                // each off-diagonal sits at +120 or -120 degrees
                CHECK(std::abs(std::abs(std::arg(w.at(p, q))) - 2.0 * kPi / 3.0) < 1e-12);
            }
    }
    SUBCASE("lifted solution passes both lifted evaluators") {
        Network net = load("case2_bal.net");
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        LiftedState lifted = lift(net, sol.state);
        CHECK(residual_bfm_lifted(net, lifted).find("balance_p")->inf_norm() < 1e-8);
        CHECK(residual_bim_lifted(net, lifted).find("pf_p")->inf_norm() < 1e-8);
        CHECK(residual_bfm_lifted(net, lifted).find("rank")->inf_norm() < 1e-10);
    }
    SUBCASE("single-phase branch produces one-dimensional lifted blocks") {
        Network net = load("case2_1ph.net");
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        LiftedState lifted = lift(net, sol.state);
        CHECK(lifted.l_series[0].size() == 1);
        CHECK(lifted.s_series[0].rows() == 1);
        CHECK(residual_bfm_lifted(net, lifted).inf_norm() < 1e-8);
        CHECK(residual_bim_lifted(net, lifted).inf_norm() < 1e-8);
    }
}

TEST_CASE("warm start from a previous solution converges immediately") {
    Network net = load("case3_unbal.net");
    SolveResult cold = solve_newton(net);
    REQUIRE(cold.converged);
    SolveOptions opts;
    opts.flat_start = false;
    opts.initial = cold.state;
    SolveResult warm = solve_newton(net, opts);
    CHECK(warm.converged);
    CHECK(warm.trace.iterations() <= 1);
}

TEST_CASE("damping keeps a heavily loaded feeder convergent") {
    Network net = load("case2_bal.net");
    (*net.units[0].setpoint)[0] = cx{9000.0, 3000.0};
    (*net.units[0].setpoint)[1] = cx{9000.0, 3000.0};
    (*net.units[0].setpoint)[2] = cx{9000.0, 3000.0};
    SolveOptions opts;
    opts.max_iter = 80;
    SolveResult result = solve_newton(net, opts);
    CHECK(result.converged);
    CHECK(residual_iv(net, result.state).inf_norm() < 1e-10);
}
