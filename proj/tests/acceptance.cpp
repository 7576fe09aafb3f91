// Acceptance suite: one pass/fail line per criterion, nonzero exit on
// any failure. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "triflow/bounds.hpp"
#include "triflow/feasibility.hpp"
#include "triflow/ingest.hpp"
#include "triflow/residuals.hpp"
#include "triflow/sdpexport.hpp"
#include "triflow/solver.hpp"

using namespace triflow;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << number << ". " << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n";
    if (!pass) ++failures;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Network load(const std::string& name) {
    ParseResult r = parse_native(slurp(std::string(TRIFLOW_FIXTURE_DIR) + "/" + name));
    if (!r.ok()) throw Error(ErrorKind::input, "fixture " + name + ":\n" + r.diagnostics_text());
    return std::move(*r.network);
}

double now_solve_seconds(const Network& net, bool sweep, IVState& out) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveResult r = sweep ? solve_sweep(net) : solve_newton(net);
    const auto t1 = std::chrono::steady_clock::now();
    if (!r.converged) throw Error(ErrorKind::numerical, "solver did not converge");
    out = std::move(r.state);
    return std::chrono::duration<double>(t1 - t0).count();
}

double voltage_gap_pu(const Network& net, const IVState& a, const IVState& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const double vb = net.unit_system == UnitSystem::si ? net.bus_vbase(static_cast<int>(k)) : 1.0;
        for (int p = 0; p < a.v[k].size(); ++p)
            worst = std::max(worst, std::abs(a.v[k][p] - b.v[k][p]) / vb);
    }
    return worst;
}

// ---- criterion 1: oracle equivalence ------------------------------------
void criterion_oracle_equivalence() {
    bool pass = true;
    std::ostringstream detail;
    for (const char* name : {"case2_bal.net", "case3_unbal.net"}) {
        Network net = load(name);
        IVState newton, sweep;
        const double t_newton = now_solve_seconds(net, false, newton);
        const double t_sweep = now_solve_seconds(net, true, sweep);
        const double gap = voltage_gap_pu(net, newton, sweep);
        detail << name << " gap=" << gap << " ";
        if (gap > 1e-8) pass = false;
        if (t_newton > 1.0 || t_sweep > 1.0) pass = false;
    }
    report(1, "newton and sweep voltages agree within 1e-8 pu in under a second", pass,
           detail.str());
}

// ---- criterion 2: cross-formulation consistency --------------------------
void criterion_cross_formulation() {
    bool pass = true;
    std::ostringstream detail;
    for (const char* name :
         {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        Network net = load(name);
        IVState state;
        now_solve_seconds(net, false, state);

        const auto t0 = std::chrono::steady_clock::now();
        const PolarState polar = iv_to_polar(net, state);
        const RectState rect = iv_to_rect(net, state);
        const LiftedState lifted = lift(net, state);
        double worst_eq = residual_iv(net, state).inf_norm();
        for (const ResidualGroup& g : residual_polar(net, polar).groups)
            worst_eq = std::max(worst_eq, g.inf_norm());
        for (const ResidualGroup& g : residual_rect(net, rect).groups)
            worst_eq = std::max(worst_eq, g.inf_norm());
        double worst_rank = 0.0;
        for (const ResidualReport& rep :
             {residual_bim_lifted(net, lifted), residual_bfm_lifted(net, lifted)}) {
            for (const ResidualGroup& g : rep.groups) {
                if (g.name == "rank") {
                    worst_rank = std::max(worst_rank, g.inf_norm());
                } else if (g.name != "psd") {
                    worst_eq = std::max(worst_eq, g.inf_norm());
                }
            }
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        detail << name << " eq=" << worst_eq << " rank=" << worst_rank << " ";
        if (worst_eq > 1e-6 || worst_rank > 1e-10 || seconds > 1.0) pass = false;
    }
    report(2, "all five formulations hold at the solution (1e-6 pu, rank 1e-10)", pass, detail.str());
}

// ---- criterion 3: loss balance -------------------------------------------
void criterion_loss_balance() {
    bool pass = true;
    double worst = 0.0;
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        Network si = load(name);
        IVState state;
        now_solve_seconds(si, false, state);
        Network pu = to_per_unit(si);
        IVState spu = state_to_per_unit(si, state);
        LiftedState lifted = lift(pu, spu);
        for (std::size_t k = 0; k < pu.branches.size(); ++k) {
            const Branch& br = pu.branches[k];
            const CMat w_i = lifted.w[static_cast<std::size_t>(pu.bus_index(br.from_bus))].to_cmat();
            const CMat w_j = lifted.w[static_cast<std::size_t>(pu.bus_index(br.to_bus))].to_cmat();
            const CMat loss = w_i * br.y_sh_from.adjoint() +
                              br.z_series * lifted.l_series[k].to_cmat() + w_j * br.y_sh_to.adjoint();
            const CMat total = lifted.s_total_from[k] + lifted.s_total_to[k];
            for (int p = 0; p < br.phases.size(); ++p)
                worst = std::max(worst, std::abs(total.at(p, p) - loss.at(p, p)));
        }
    }
    if (worst > 1e-9) pass = false;
    report(3, "sending plus receiving power equals shunt and series losses (1e-9 pu)", pass,
           "worst=" + std::to_string(worst));
}

// ---- criterion 4: jacobian check ------------------------------------------
void criterion_jacobian() {
    bool pass = true;
    double worst_rel = 0.0;
    std::mt19937 gen(31415926);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        Network pu = to_per_unit(load(name));
        NewtonSystem sys(pu);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> x = sys.flat_vector();
            for (double& v : x) v += d(gen);
            Mat j = sys.jacobian(x);
            const double h = 1e-6;
            double worst_abs = 0.0;
            for (int col = 0; col < sys.size(); ++col) {
                std::vector<double> xp = x, xm = x;
                xp[static_cast<std::size_t>(col)] += h;
                xm[static_cast<std::size_t>(col)] -= h;
                const std::vector<double> rp = sys.residual(xp);
                const std::vector<double> rm = sys.residual(xm);
                for (int row = 0; row < sys.size(); ++row)
                    worst_abs = std::max(
                        worst_abs, std::abs((rp[static_cast<std::size_t>(row)] - rm[static_cast<std::size_t>(row)]) /
                                                (2.0 * h) -
                                            j.at(row, col)));
            }
            worst_rel = std::max(worst_rel, worst_abs / std::max(j.inf_norm(), 1.0));
        }
    }
    if (worst_rel > 1e-5) pass = false;
    report(4, "analytic Jacobian matches central differences (1e-5 relative)", pass,
           "worst=" + std::to_string(worst_rel));
}

// ---- criterion 5: angle-bound equivalence ---------------------------------
void criterion_angle_bounds() {
    bool pass = true;
    int disagreements = 0;
    std::mt19937 gen(271828);
    std::uniform_real_distribution<double> mag_d(0.9, 1.1);
    std::uniform_real_distribution<double> half_d(-kPi / 4.0, kPi / 4.0);
    std::uniform_real_distribution<double> bound_d(0.01, 0.6);
    constexpr double kTie = 1e-12;

    for (const char* name : {"case2_bal.net", "case3_unbal.net"}) {
        Network net = to_per_unit(load(name));
        for (int trial = 0; trial < 100; ++trial) {
            // one random voltage state; angle spreads stay in (-pi/2, pi/2)
            IVState s = IVState::sized_for(net);
            for (std::size_t k = 0; k < net.buses.size(); ++k)
                for (int p = 0; p < s.v[k].size(); ++p)
                    s.v[k][p] = std::polar(mag_d(gen), -2.0 * kPi / 3.0 * p + half_d(gen));
            for (std::size_t k = 0; k < net.branches.size(); ++k) {
                Branch& br = net.branches[k];
                for (int p = 0; p < br.phases.size(); ++p) {
                    br.vad_min[static_cast<std::size_t>(p)] = -bound_d(gen);
                    br.vad_max[static_cast<std::size_t>(p)] = bound_d(gen);
                }
                const int fi = net.bus_index(br.from_bus);
                const int ti = net.bus_index(br.to_bus);
                const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
                const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
                for (int p = 0; p < br.phases.size(); ++p) {
                    const double lo = br.vad_min[static_cast<std::size_t>(p)];
                    const double hi = br.vad_max[static_cast<std::size_t>(p)];
                    const cx vi = s.v[static_cast<std::size_t>(fi)][bf.phases.index_of(br.phases.member(p))];
                    const cx vj = s.v[static_cast<std::size_t>(ti)][bt.phases.index_of(br.phases.member(p))];

                    const double dtheta = wrap_angle(std::arg(vi) - std::arg(vj));
                    const bool polar_ok = dtheta >= lo - kTie && dtheta <= hi + kTie;

                    // rectangular product form over the voltage components
                    const double wre = vi.real() * vj.real() + vi.imag() * vj.imag();
                    const double wim = vi.imag() * vj.real() - vi.real() * vj.imag();
                    const bool rect_ok =
                        wim >= std::tan(lo) * wre - kTie && wim <= std::tan(hi) * wre + kTie;

                    // lifted form over the cross-product diagonal
                    const cx wpq = vi * std::conj(vj);
                    const bool lifted_ok = wpq.imag() >= std::tan(lo) * wpq.real() - kTie &&
                                           wpq.imag() <= std::tan(hi) * wpq.real() + kTie;

                    if (polar_ok != rect_ok || polar_ok != lifted_ok) ++disagreements;
                }
            }
        }
    }
    if (disagreements > 0) pass = false;
    report(5, "polar, rectangular and lifted angle bounds classify identically", pass,
           "disagreements=" + std::to_string(disagreements));
}

// ---- criterion 6: relaxation feasibility transfer -------------------------
// Local dat-s reader so the check does not reuse the export module's own
// parsing path.
struct LocalSdpa {
    int m = 0;
    std::vector<int> sizes;
    struct Entry {
        int matno, block, row, col;
        double value;
    };
    std::vector<Entry> entries;
};

LocalSdpa read_sdpa_text(const std::string& text) {
    LocalSdpa f;
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> content;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '*' && line[0] != '"') content.push_back(line);
    f.m = std::stoi(content.at(0));
    std::istringstream bs(content.at(2));
    int v;
    while (bs >> v) f.sizes.push_back(v);
    for (std::size_t k = 4; k < content.size(); ++k) {
        std::istringstream es(content[k]);
        LocalSdpa::Entry e{};
        if (es >> e.matno >> e.block >> e.row >> e.col >> e.value) f.entries.push_back(e);
    }
    return f;
}

void criterion_feasibility_transfer() {
    bool pass = true;
    std::ostringstream detail;
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net"}) {
        Network net = load(name);
        IVState state;
        now_solve_seconds(net, false, state);
        Network pu = to_per_unit(net);
        LiftedState lifted = lift(pu, state_to_per_unit(net, state));

        ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);
        const std::vector<double> x = conic_vector_from_lifted(p, pu, lifted);
        LocalSdpa f = read_sdpa_text(write_sdpa(p));
        if (static_cast<std::size_t>(f.m) != x.size()) {
            pass = false;
            continue;
        }

        std::map<std::pair<int, int>, double> diag;
        std::map<int, Mat> blocks;
        for (std::size_t b = 0; b < f.sizes.size(); ++b)
            if (f.sizes[b] > 0) blocks[static_cast<int>(b) + 1] = Mat(f.sizes[b], f.sizes[b]);
        for (const auto& e : f.entries) {
            const double xv = e.matno == 0 ? -1.0 : x[static_cast<std::size_t>(e.matno - 1)];
            if (f.sizes[static_cast<std::size_t>(e.block - 1)] < 0) {
                diag[{e.block, e.row}] += e.value * xv;
            } else {
                Mat& m = blocks[e.block];
                m.at(e.row - 1, e.col - 1) += e.value * xv;
                if (e.row != e.col) m.at(e.col - 1, e.row - 1) += e.value * xv;
            }
        }
        double worst = 0.0;
        for (const auto& [key, v] : diag) worst = std::max(worst, -v);
        for (auto& [idx, m] : blocks) {
            std::vector<double> ev = symmetric_eigenvalues(m);
            if (!ev.empty()) worst = std::max(worst, -ev.front());
        }
        detail << name << " worst=" << worst << " ";
        if (worst > 1e-8) pass = false;
    }
    report(6, "lifted solutions satisfy every exported relaxation row (1e-8 pu)", pass, detail.str());
}

// ---- criterion 7: per-unit invariance --------------------------------------
void criterion_per_unit_invariance() {
    bool pass = true;
    double worst = 0.0;
    for (const char* name : {"case2_bal.net", "case3_unbal.net", "case2_1ph.net", "case4_mesh.net"}) {
        Network si = load(name);
        Network pu = to_per_unit(si);
        IVState from_si, from_pu;
        now_solve_seconds(si, false, from_si);
        now_solve_seconds(pu, false, from_pu);
        IVState si_pu = state_to_per_unit(si, from_si);
        for (std::size_t k = 0; k < pu.buses.size(); ++k)
            for (int p = 0; p < si_pu.v[k].size(); ++p)
                worst = std::max(worst, std::abs(si_pu.v[k][p] - from_pu.v[k][p]));
    }
    if (worst > 1e-9) pass = false;
    report(7, "SI and per-unit solves produce the same per-unit voltages (1e-9)", pass,
           "worst=" + std::to_string(worst));
}

// ---- criterion 8: parser robustness ----------------------------------------
void criterion_parser_robustness() {
    bool pass = true;
    std::ostringstream detail;

    std::mt19937 gen(555000111);
    std::uniform_int_distribution<int> len_d(0, 4096);
    std::uniform_int_distribution<int> byte_d(0, 255);
    try {
        for (int trial = 0; trial < 200; ++trial) {
            std::string junk(static_cast<std::size_t>(len_d(gen)), '\0');
            for (char& c : junk) c = static_cast<char>(byte_d(gen));
            (void)parse_native(junk);
            (void)parse_dss_subset(junk);
        }
        const std::string seed = slurp(std::string(TRIFLOW_FIXTURE_DIR) + "/case3_unbal.net");
        for (int trial = 0; trial < 200; ++trial) {
            std::string a = seed;
            for (int hits = 0; hits < 12; ++hits)
                a[static_cast<std::size_t>(gen() % a.size())] = static_cast<char>(byte_d(gen));
            (void)parse_native(a);
        }
    } catch (...) {
        pass = false;
        detail << "parser threw on fuzzed input ";
    }

    int files = 0, rejected_with_line = 0;
    for (const auto& entry :
         fs::directory_iterator(fs::path(TRIFLOW_FIXTURE_DIR) / "malformed")) {
        ++files;
        const std::string text = slurp(entry.path().string());
        ParseResult r = entry.path().extension() == ".dss" ? parse_dss_subset(text) : parse_native(text);
        bool ok = !r.ok();
        bool has_line = false;
        for (const auto& d : r.diagnostics)
            if (d.severity == ParseDiagnostic::Severity::error && d.line >= 1) has_line = true;
        if (ok && has_line) ++rejected_with_line;
    }
    detail << rejected_with_line << "/" << files << " malformed files rejected with line numbers";
    if (files == 0 || rejected_with_line != files) pass = false;
    report(8, "parsers never crash and reject the malformed corpus with line numbers", pass,
           detail.str());
}

// ---- criterion 9: restriction enforcement ----------------------------------
void criterion_pad_restriction() {
    Network net = load("case2_bal.net");
    net.buses[1].pad_min = {-kPi / 4.0, -0.1, -0.1};
    ValidationReport low = validate(net);
    bool low_flagged = false;
    for (const auto& d : low.diagnostics)
        if (d.path.find("pad_min") != std::string::npos &&
            d.message.find("[-pi/6, pi/3]") != std::string::npos)
            low_flagged = true;

    Network net2 = load("case2_bal.net");
    net2.buses[1].pad_max = {0.1, kPi / 2.0, 0.1};
    ValidationReport high = validate(net2);
    bool high_flagged = false;
    for (const auto& d : high.diagnostics)
        if (d.path.find("pad_max") != std::string::npos) high_flagged = true;

    // parse-level rejection with a line number
    ParseResult r =
        parse_native(slurp(std::string(TRIFLOW_FIXTURE_DIR) + "/malformed/pad_range.net"));
    bool parse_flagged = !r.ok();

    report(9, "phase-angle-spread bounds outside [-pi/6, pi/3] are rejected by name",
           low_flagged && high_flagged && parse_flagged);
}

}  // namespace

int main() {
    std::cout << "triflow acceptance criteria\n";
    try {
        criterion_oracle_equivalence();
        criterion_cross_formulation();
        criterion_loss_balance();
        criterion_jacobian();
        criterion_angle_bounds();
        criterion_feasibility_transfer();
        criterion_per_unit_invariance();
        criterion_parser_robustness();
        criterion_pad_restriction();
    } catch (const std::exception& e) {
        std::cout << "FAIL  acceptance suite aborted: " << e.what() << "\n";
        return 99;
    }
    std::cout << (failures == 0 ? "all criteria passed\n" : "criteria failed\n");
    return failures;
}
