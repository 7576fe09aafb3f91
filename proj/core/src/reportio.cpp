#include "triflow/reportio.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace triflow {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void put_cvec(std::ostringstream& os, const char* key, const CVec& v) {
    os << "  " << key;
    for (int p = 0; p < v.size(); ++p) os << " (" << fmt(v[p].real()) << " " << fmt(v[p].imag()) << ")";
    os << "\n";
}

void put_cmat(std::ostringstream& os, const char* key, const CMat& m) {
    os << "  " << key;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            os << " (" << fmt(m.at(r, c).real()) << " " << fmt(m.at(r, c).imag()) << ")";
    os << "\n";
}

// Minimal line scanner for the solution format: "(", ")" split off.
struct ScannedLine {
    int number = 0;
    std::vector<std::string> tokens;
};

std::vector<ScannedLine> scan(const std::string& text) {
    std::vector<ScannedLine> lines;
    std::istringstream is(text);
    std::string raw;
    int number = 0;
    while (std::getline(is, raw)) {
        ++number;
        ScannedLine line;
        line.number = number;
        std::string token;
        for (char ch : raw) {
            if (ch == '#') break;
            if (ch == '(' || ch == ')') {
                if (!token.empty()) {
                    line.tokens.push_back(token);
                    token.clear();
                }
                line.tokens.push_back(std::string(1, ch));
            } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == '\r') {
                if (!token.empty()) {
                    line.tokens.push_back(token);
                    token.clear();
                }
            } else {
                token.push_back(ch);
            }
        }
        if (!token.empty()) line.tokens.push_back(token);
        if (!line.tokens.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<cx> complex_list(const ScannedLine& line, std::size_t start) {
    std::vector<cx> out;
    std::size_t k = start;
    while (k + 3 < line.tokens.size()) {
        if (line.tokens[k] != "(" || line.tokens[k + 3] != ")") break;
        out.emplace_back(std::stod(line.tokens[k + 1]), std::stod(line.tokens[k + 2]));
        k += 4;
    }
    return out;
}

}  // namespace

std::string write_solution(const Network& net_in, const IVState& state_in, const SolveTrace& trace,
                           bool converged, const RunManifest& manifest) {
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const IVState s = si ? state_to_per_unit(net_in, state_in) : state_in;
    std::ostringstream os;
    os << "triflow-solution 1\n";
    os << manifest.comment_lines();
    if (!net.name.empty()) os << "network " << net.name << "\n";
    os << "unit_system per_unit\n";
    os << "sbase " << fmt(net.sbase) << "\n";
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        os << "bus " << b.id << "\n";
        put_cvec(os, "v_rect", s.v[k]);
        CVec polar(s.v[k].size());
        for (int p = 0; p < s.v[k].size(); ++p)
            polar[p] = cx{std::abs(s.v[k][p]), wrap_angle(std::arg(s.v[k][p]))};
        put_cvec(os, "v_polar", polar);
        os << "end\n";
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        os << "branch " << br.id << "\n";
        put_cvec(os, "i_series", s.i_series[k]);
        const Bus& bf = net.buses[static_cast<std::size_t>(net.bus_index(br.from_bus))];
        const Bus& bt = net.buses[static_cast<std::size_t>(net.bus_index(br.to_bus))];
        CVec vf(br.phases.size()), vt(br.phases.size());
        for (int p = 0; p < br.phases.size(); ++p) {
            vf[p] = s.v[static_cast<std::size_t>(net.bus_index(br.from_bus))][bf.phases.index_of(br.phases.member(p))];
            vt[p] = s.v[static_cast<std::size_t>(net.bus_index(br.to_bus))][bt.phases.index_of(br.phases.member(p))];
        }
        const CVec i_from = branch_total_current(br, vf, s.i_series[k], true);
        const CVec i_to = branch_total_current(br, vt, s.i_series[k], false);
        CVec s_from(br.phases.size()), s_to(br.phases.size());
        for (int p = 0; p < br.phases.size(); ++p) {
            s_from[p] = vf[p] * std::conj(i_from[p]);
            s_to[p] = vt[p] * std::conj(i_to[p]);
        }
        put_cvec(os, "s_from", s_from);
        put_cvec(os, "s_to", s_to);
        os << "end\n";
    }
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        os << "unit " << net.units[k].id << "\n";
        put_cvec(os, "s", s.unit_s[k]);
        os << "end\n";
    }
    os << "converged " << (converged ? 1 : 0) << "\n";
    os << "iterations " << trace.iterations() << "\n";
    return os.str();
}

IVState read_solution(const std::string& text, const Network& net) {
    const std::vector<ScannedLine> lines = scan(text);
    if (lines.empty() || lines[0].tokens.size() != 2 || lines[0].tokens[0] != "triflow-solution")
        throw Error(ErrorKind::input, "expected header 'triflow-solution 1'");

    IVState s = IVState::sized_for(net);
    std::string block_kind, block_id;
    std::map<std::string, bool> seen_bus, seen_branch;

    auto bus_idx = [&](const std::string& id) {
        const int k = net.bus_index(id);
        if (k < 0) throw Error(ErrorKind::input, "solution references unknown bus " + id);
        return k;
    };
    auto branch_idx = [&](const std::string& id) {
        for (std::size_t k = 0; k < net.branches.size(); ++k)
            if (net.branches[k].id == id) return static_cast<int>(k);
        throw Error(ErrorKind::input, "solution references unknown branch " + id);
    };
    auto unit_idx = [&](const std::string& id) {
        for (std::size_t k = 0; k < net.units.size(); ++k)
            if (net.units[k].id == id) return static_cast<int>(k);
        throw Error(ErrorKind::input, "solution references unknown unit " + id);
    };

    for (std::size_t k = 1; k < lines.size(); ++k) {
        const ScannedLine& line = lines[k];
        const std::string& key = line.tokens[0];
        if (key == "bus" || key == "branch" || key == "unit") {
            block_kind = key;
            block_id = line.tokens.size() > 1 ? line.tokens[1] : "";
        } else if (key == "end") {
            block_kind.clear();
        } else if (key == "v_rect" && block_kind == "bus") {
            const int bi = bus_idx(block_id);
            std::vector<cx> vals = complex_list(line, 1);
            if (static_cast<int>(vals.size()) != net.buses[static_cast<std::size_t>(bi)].phases.size())
                throw Error(ErrorKind::input, "bus " + block_id + ": voltage entry count " +
                                                  std::to_string(vals.size()) + " does not match phase set");
            for (std::size_t p = 0; p < vals.size(); ++p) s.v[static_cast<std::size_t>(bi)][static_cast<int>(p)] = vals[p];
            seen_bus[block_id] = true;
        } else if (key == "i_series" && block_kind == "branch") {
            const int bk = branch_idx(block_id);
            std::vector<cx> vals = complex_list(line, 1);
            if (static_cast<int>(vals.size()) != net.branches[static_cast<std::size_t>(bk)].phases.size())
                throw Error(ErrorKind::input, "branch " + block_id + ": current entry count does not match phase set");
            for (std::size_t p = 0; p < vals.size(); ++p)
                s.i_series[static_cast<std::size_t>(bk)][static_cast<int>(p)] = vals[p];
            seen_branch[block_id] = true;
        } else if (key == "s" && block_kind == "unit") {
            const int uk = unit_idx(block_id);
            std::vector<cx> vals = complex_list(line, 1);
            if (static_cast<int>(vals.size()) != net.units[static_cast<std::size_t>(uk)].phases.size())
                throw Error(ErrorKind::input, "unit " + block_id + ": power entry count does not match phase set");
            for (std::size_t p = 0; p < vals.size(); ++p)
                s.unit_s[static_cast<std::size_t>(uk)][static_cast<int>(p)] = vals[p];
        }
        // v_polar, s_from, s_to, trailer keys: derived values, ignored.
    }

    for (const Bus& b : net.buses)
        if (!seen_bus.count(b.id))
            throw Error(ErrorKind::input, "solution is missing bus " + b.id);
    for (const Branch& br : net.branches)
        if (!seen_branch.count(br.id))
            throw Error(ErrorKind::input, "solution is missing branch " + br.id);
    return s;
}

std::string write_lifted_file(const Network& net_in, const LiftedState& s,
                              const RunManifest& manifest) {
    const Network net = net_in.unit_system == UnitSystem::si ? to_per_unit(net_in) : net_in;
    std::ostringstream os;
    os << "triflow-lifted 1\n";
    os << manifest.comment_lines();
    if (!net.name.empty()) os << "network " << net.name << "\n";
    double worst_rank = 0.0, worst_psd = 0.0;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        os << "bus " << b.id << "\n";
        put_cmat(os, "w", s.w[k].to_cmat());
        const double rr = rank1_residual(s.w[k].to_cmat());
        const double pr = psd_residual(s.w[k]);
        worst_rank = std::max(worst_rank, rr);
        worst_psd = std::max(worst_psd, pr);
        os << "  rank " << fmt(rr) << " psd " << fmt(pr) << "\n";
        os << "end\n";
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        os << "branch " << br.id << "\n";
        put_cmat(os, "l", s.l_series[k].to_cmat());
        put_cmat(os, "s_series", s.s_series[k]);
        put_cmat(os, "s_total_from", s.s_total_from[k]);
        put_cmat(os, "s_total_to", s.s_total_to[k]);
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        if (const CMat* cross = s.cross(fi, ti))
            put_cmat(os, "w_cross", fi < ti ? *cross : cross->adjoint());
        // branch block [[W_i, S^s], [S^sH, L]] over the branch phases
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const int n = br.phases.size();
        CDense block(2 * n);
        CMat w_i(n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                w_i.at(r, c) = s.w[static_cast<std::size_t>(fi)].at(bf.phases.index_of(br.phases.member(r)),
                                                                    bf.phases.index_of(br.phases.member(c)));
        block.set_block(0, 0, w_i);
        block.set_block(0, n, s.s_series[k]);
        block.set_block(n, 0, s.s_series[k].adjoint());
        block.set_block(n, n, s.l_series[k].to_cmat());
        const double rr = rank1_residual(block);
        const double pr = psd_residual(block);
        worst_rank = std::max(worst_rank, rr);
        worst_psd = std::max(worst_psd, pr);
        os << "  rank " << fmt(rr) << " psd " << fmt(pr) << "\n";
        os << "end\n";
    }
    os << "summary worst_rank " << fmt(worst_rank) << " worst_psd " << fmt(worst_psd) << "\n";
    return os.str();
}

std::string write_report(const ConsistencyReport& consistency, const RunManifest& manifest) {
    std::ostringstream os;
    os << "triflow-report 1\n";
    os << manifest.comment_lines();
    os << consistency.to_text();
    return os.str();
}

std::string reproducible_payload(const std::string& file_text) {
    std::istringstream is(file_text);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("# generated", 0) == 0) continue;
        os << line << "\n";
    }
    return os.str();
}

}  // namespace triflow
