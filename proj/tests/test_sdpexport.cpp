#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "triflow/ingest.hpp"
#include "triflow/sdpexport.hpp"
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

// Independent row evaluator: parse the emitted text back and check a
// variable assignment against every diagonal row and psd block.
struct EvaluatedFile {
    double worst_row_violation = 0.0;
    double worst_block_eig = 0.0;  // most negative eigenvalue, clipped
};

EvaluatedFile evaluate_sdpa(const std::string& text, const std::vector<double>& x) {
    SdpaFile f = parse_sdpa(text);
    REQUIRE(static_cast<std::size_t>(f.m) == x.size());
    EvaluatedFile out;

    const int nblocks = static_cast<int>(f.block_sizes.size());
    // diagonal rows: X_kk = sum_i x_i F_i[kk] - F_0[kk] >= 0
    std::map<std::pair<int, int>, double> diag_acc;
    std::vector<Mat> blocks;
    for (int b = 0; b < nblocks; ++b) {
        const int dim = f.block_sizes[static_cast<std::size_t>(b)];
        blocks.emplace_back(dim > 0 ? dim : 0, dim > 0 ? dim : 0);
    }
    for (const auto& e : f.entries) {
        const int bs = f.block_sizes[static_cast<std::size_t>(e.block - 1)];
        const double xv = e.matno == 0 ? -1.0 : x[static_cast<std::size_t>(e.matno - 1)];
        if (bs < 0) {
            diag_acc[{e.block, e.row}] += e.value * xv;
        } else {
            Mat& m = blocks[static_cast<std::size_t>(e.block - 1)];
            m.at(e.row - 1, e.col - 1) += e.value * xv;
            if (e.row != e.col) m.at(e.col - 1, e.row - 1) += e.value * xv;
        }
    }
    for (const auto& [key, v] : diag_acc)
        out.worst_row_violation = std::max(out.worst_row_violation, std::max(0.0, -v));
    for (int b = 0; b < nblocks; ++b) {
        if (f.block_sizes[static_cast<std::size_t>(b)] < 0) continue;
        std::vector<double> ev = symmetric_eigenvalues(blocks[static_cast<std::size_t>(b)]);
        if (!ev.empty()) out.worst_block_eig = std::max(out.worst_block_eig, std::max(0.0, -ev.front()));
    }
    return out;
}

}  // namespace

TEST_CASE("a network without branches exports only unit and reference rows") {
    const char* doc = R"(triflow-net 1
name lone
sbase 1000
vbase 230

bus only
  phases abc
  ref (230 0) (-115 -199.18584287042087) (-115 199.18584287042087)
end

unit u1
  bus only
  phases abc
  setpoint (100 10) (100 10) (100 10)
end
)";
    ParseResult r = parse_native(doc);
    REQUIRE_MESSAGE(r.ok(), r.diagnostics_text());
    ConicProblem p = build_bfm_sdp(*r.network, SdpObjective::min_total_injection);
    CHECK(p.blocks.empty());
    for (const auto& row : p.rows) {
        CAPTURE(row.name);
        CHECK((row.name.rfind("unit.", 0) == 0 || row.name.rfind("ref.", 0) == 0));
    }
    CHECK(p.count_equalities() == 9 + 6);  // W pinning + unit setpoints
}

TEST_CASE("case2_bal exports one branch block and one leaf block with the documented rows") {
    Network net = load("case2_bal.net");
    ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);

    REQUIRE(p.blocks.size() == 2);
    CHECK(p.blocks[0].name == "branch.line1");
    CHECK(p.blocks[0].dim == 12);
    CHECK(p.blocks[1].name == "leaf.loadbus");
    CHECK(p.blocks[1].dim == 6);

    // Hand enumeration over the fixture (3 phases everywhere):
    //   equalities: reference 9, balance 18, ohm 9, kcl 6, unit pins 6 -> 48
    //   inequalities: voltage diag 6 + W entries 18, total current
    //   2 * (diag 6 + entries 18) = 48, angle rows 6 -> 78
    CHECK(p.count_equalities() == 48);
    CHECK(p.count_inequalities() == 78);

    // variables: W 2*9, series flows 2*18, L 9, unit 6
    CHECK(p.vars.size() == 18 + 36 + 9 + 6);
}

TEST_CASE("the lifted power-flow solution satisfies every exported row") {
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net"}) {
        CAPTURE(name);
        Network net = load(name);
        SolveResult sol = solve_newton(net);
        REQUIRE(sol.converged);
        Network pu = to_per_unit(net);
        LiftedState lifted = lift(pu, state_to_per_unit(net, sol.state));

        ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);
        std::vector<double> x = conic_vector_from_lifted(p, pu, lifted);
        EvaluatedFile ev = evaluate_sdpa(write_sdpa(p), x);
        CHECK(ev.worst_row_violation < 1e-8);
        CHECK(ev.worst_block_eig < 1e-8);
    }
}

TEST_CASE("meshed input is redirected to the bus-injection export") {
    Network net = load("case4_mesh.net");
    CHECK_THROWS_WITH_AS(build_bfm_sdp(net, SdpObjective::min_total_injection),
                         doctest::Contains("bim"), Error);
    ConicProblem p = build_bim_sdp(net, SdpObjective::min_total_injection);
    REQUIRE(p.blocks.size() == 1);  // one system-wide block
    CHECK(p.blocks[0].dim == 2 * 12);

    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    Network pu = to_per_unit(net);
    LiftedState lifted = lift(pu, state_to_per_unit(net, sol.state));
    std::vector<double> x = conic_vector_from_lifted(p, pu, lifted);
    EvaluatedFile ev = evaluate_sdpa(write_sdpa(p), x);
    CHECK(ev.worst_row_violation < 1e-8);
    CHECK(ev.worst_block_eig < 1e-8);
}

TEST_CASE("radial bus-injection export uses bus-pair blocks") {
    Network net = load("case2_bal.net");
    ConicProblem p = build_bim_sdp(net, SdpObjective::min_losses);
    REQUIRE(p.blocks.size() == 1);
    CHECK(p.blocks[0].dim == 12);  // [[W_i, W_ij], [W_ij^H, W_j]] doubled

    SolveResult sol = solve_newton(net);
    REQUIRE(sol.converged);
    Network pu = to_per_unit(net);
    LiftedState lifted = lift(pu, state_to_per_unit(net, sol.state));
    std::vector<double> x = conic_vector_from_lifted(p, pu, lifted);
    EvaluatedFile ev = evaluate_sdpa(write_sdpa(p), x);
    CHECK(ev.worst_row_violation < 1e-8);
    CHECK(ev.worst_block_eig < 1e-8);
}

TEST_CASE("sdpa writer round-trips through the bundled reader") {
    Network net = load("case2_bal.net");
    ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);
    const std::string text = write_sdpa(p);
    SdpaFile f = parse_sdpa(text);

    CHECK(f.m == static_cast<int>(p.vars.size()));
    // positive block sizes match the conic problem; the trailing
    // negative block carries the scalar rows
    std::vector<int> psd_sizes;
    for (int s : f.block_sizes)
        if (s > 0) psd_sizes.push_back(s);
    REQUIRE(psd_sizes.size() == p.blocks.size());
    for (std::size_t k = 0; k < psd_sizes.size(); ++k) CHECK(psd_sizes[k] == p.blocks[k].dim);

    // coefficient conservation: every psd-block entry of the problem
    // appears exactly once in the file
    std::size_t psd_entries_in_problem = 0;
    for (const auto& b : p.blocks) psd_entries_in_problem += b.entries.size();
    std::size_t psd_entries_in_file = 0;
    for (const auto& e : f.entries)
        if (f.block_sizes[static_cast<std::size_t>(e.block - 1)] > 0) ++psd_entries_in_file;
    CHECK(psd_entries_in_file == psd_entries_in_problem);

    // re-parse reproduces the multiset of coefficients
    SdpaFile again = parse_sdpa(text);
    REQUIRE(again.entries.size() == f.entries.size());
    for (std::size_t k = 0; k < f.entries.size(); ++k) {
        CHECK(again.entries[k].matno == f.entries[k].matno);
        CHECK(again.entries[k].value == f.entries[k].value);
    }
}

TEST_CASE("export is byte-deterministic") {
    Network net = load("case3_unbal.net");
    const std::string a = write_sdpa(build_bfm_sdp(net, SdpObjective::min_total_injection));
    const std::string b = write_sdpa(build_bfm_sdp(net, SdpObjective::min_total_injection));
    CHECK(a == b);
    const std::string map_a = write_index_map(build_bfm_sdp(net, SdpObjective::min_total_injection));
    CHECK(map_a.find("triflow-sdpa-map 1") == 0);
}

TEST_CASE("objective selection changes the cost vector only") {
    Network net = load("case2_bal.net");
    ConicProblem inj = build_bfm_sdp(net, SdpObjective::min_total_injection);
    ConicProblem loss = build_bfm_sdp(net, SdpObjective::min_losses);
    CHECK(inj.rows.size() == loss.rows.size());
    CHECK(inj.vars.size() == loss.vars.size());
    CHECK(inj.objective != loss.objective);
    CHECK_FALSE(inj.objective.empty());
}

TEST_CASE("index map covers every variable exactly once") {
    Network net = load("case3_unbal.net");
    ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);
    std::istringstream is(write_index_map(p));
    std::string header;
    std::getline(is, header);
    CHECK(header == "triflow-sdpa-map 1");
    std::size_t count = 0;
    int index;
    std::string symbol, entity, pair;
    while (is >> index >> symbol >> entity >> pair) {
        CHECK(index == static_cast<int>(count) + 1);
        CHECK(p.var_index(symbol, entity, pair) == static_cast<int>(count));
        ++count;
    }
    CHECK(count == p.vars.size());
}
