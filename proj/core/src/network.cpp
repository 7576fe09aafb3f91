#include "triflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace triflow {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kPadLow = -kPi / 6.0;
constexpr double kPadHigh = kPi / 3.0;
constexpr double kVadDefault = kPi / 2.0 - 1e-6;
}  // namespace

char phase_letter(Phase p) {
    switch (p) {
        case Phase::a: return 'a';
        case Phase::b: return 'b';
        case Phase::c: return 'c';
    }
    return '?';
}

PhaseSet PhaseSet::abc() {
    PhaseSet s;
    s.add(Phase::a);
    s.add(Phase::b);
    s.add(Phase::c);
    return s;
}

PhaseSet PhaseSet::single(Phase p) {
    PhaseSet s;
    s.add(p);
    return s;
}

std::optional<PhaseSet> PhaseSet::parse(std::string_view sv) {
    PhaseSet s;
    for (char ch : sv) {
        Phase p;
        if (ch == 'a' || ch == 'A')
            p = Phase::a;
        else if (ch == 'b' || ch == 'B')
            p = Phase::b;
        else if (ch == 'c' || ch == 'C')
            p = Phase::c;
        else
            return std::nullopt;
        if (s.contains(p)) return std::nullopt;  // duplicate
        s.add(p);
    }
    if (s.empty()) return std::nullopt;
    return s;
}

int PhaseSet::size() const {
    int n = 0;
    for (int k = 0; k < 3; ++k)
        if (mask_ & (1u << k)) ++n;
    return n;
}

int PhaseSet::index_of(Phase p) const {
    if (!contains(p)) return -1;
    int idx = 0;
    for (int k = 0; k < static_cast<int>(p); ++k)
        if (mask_ & (1u << k)) ++idx;
    return idx;
}

Phase PhaseSet::member(int k) const {
    int seen = 0;
    for (int b = 0; b < 3; ++b) {
        if (mask_ & (1u << b)) {
            if (seen == k) return static_cast<Phase>(b);
            ++seen;
        }
    }
    return Phase::a;
}

std::string PhaseSet::str() const {
    std::string s;
    for (int k = 0; k < size(); ++k) s.push_back(phase_letter(member(k)));
    return s;
}

std::vector<std::pair<Phase, Phase>> Bus::pad_pairs() const {
    static constexpr std::pair<Phase, Phase> cyclic[3] = {
        {Phase::a, Phase::b}, {Phase::b, Phase::c}, {Phase::c, Phase::a}};
    std::vector<std::pair<Phase, Phase>> out;
    for (auto [p, q] : cyclic)
        if (phases.contains(p) && phases.contains(q) && phases.size() >= 2) out.emplace_back(p, q);
    // A two-phase bus yields a single pair; three phases yield all three.
    if (phases.size() == 2 && out.size() > 1) out.resize(1);
    return out;
}

int Network::bus_index(const std::string& id) const {
    auto it = bus_lookup_.find(id);
    return it == bus_lookup_.end() ? -1 : it->second;
}

const Bus& Network::bus(const std::string& id) const {
    int k = bus_index(id);
    if (k < 0) throw Error(ErrorKind::input, "unknown bus id: " + id);
    return buses[static_cast<std::size_t>(k)];
}

double Network::bus_vbase(int bus_idx) const { return bus_vbase(buses[static_cast<std::size_t>(bus_idx)]); }

double Network::bus_vbase(const Bus& b) const { return b.vbase > 0.0 ? b.vbase : vbase; }

void Network::rebuild_index() {
    bus_lookup_.clear();
    for (int k = 0; k < static_cast<int>(buses.size()); ++k) bus_lookup_[buses[static_cast<std::size_t>(k)].id] = k;
}

std::vector<int> Network::reference_bus_indices() const {
    std::vector<int> out;
    for (int k = 0; k < static_cast<int>(buses.size()); ++k)
        if (buses[static_cast<std::size_t>(k)].is_reference) out.push_back(k);
    return out;
}

bool Network::is_radial() const {
    // Union-find over bus indices; a branch joining an already-joined
    // component closes a cycle.
    std::vector<int> parent(buses.size());
    for (std::size_t k = 0; k < parent.size(); ++k) parent[k] = static_cast<int>(k);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (const Branch& br : branches) {
        int i = bus_index(br.from_bus);
        int j = bus_index(br.to_bus);
        if (i < 0 || j < 0) continue;
        int ri = find(i), rj = find(j);
        if (ri == rj) return false;
        parent[static_cast<std::size_t>(ri)] = rj;
    }
    return true;
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    for (const auto& d : diagnostics) os << d.path << ": " << d.message << "\n";
    return os.str();
}

namespace {

void require_len(std::vector<ValidationDiagnostic>& out, const std::string& path,
                 const std::vector<double>& v, int n, const char* what) {
    if (!v.empty() && static_cast<int>(v.size()) != n) {
        out.push_back({path, std::string(what) + " has " + std::to_string(v.size()) +
                                 " entries, expected " + std::to_string(n)});
    }
}

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return !std::isnan(x); });
}

}  // namespace

ValidationReport validate(const Network& net) {
    ValidationReport rep;
    auto& out = rep.diagnostics;

    if (net.sbase <= 0.0) out.push_back({"network.sbase", "power base must be positive"});
    if (net.vbase <= 0.0) out.push_back({"network.vbase", "voltage base must be positive"});

    std::set<std::string> seen;
    for (const Bus& b : net.buses) {
        const std::string path = "bus " + b.id;
        if (!seen.insert(b.id).second) out.push_back({path, "duplicate bus id"});
        const int n = b.phases.size();
        if (b.phases.empty()) out.push_back({path, "empty phase set"});
        require_len(out, path + ".vmin", b.vmin, n, "vmin");
        require_len(out, path + ".vmax", b.vmax, n, "vmax");
        const int npairs = static_cast<int>(b.pad_pairs().size());
        require_len(out, path + ".pad_min", b.pad_min, npairs, "pad_min");
        require_len(out, path + ".pad_max", b.pad_max, npairs, "pad_max");
        for (std::size_t k = 0; k < b.vmin.size() && k < b.vmax.size(); ++k) {
            if (b.vmin[k] < 0.0)
                out.push_back({path + ".vmin", "negative magnitude lower bound"});
            if (b.vmin[k] > b.vmax[k])
                out.push_back({path + ".vmin", "vmin exceeds vmax on phase " +
                                                   std::string(1, phase_letter(b.phases.member(static_cast<int>(k))))});
        }
        for (std::size_t k = 0; k < b.pad_min.size() && k < b.pad_max.size(); ++k) {
            if (b.pad_min[k] > b.pad_max[k]) out.push_back({path + ".pad_min", "pad_min exceeds pad_max"});
            // The tangent reformulation needs 2pi/3 + pad inside [pi/2, pi],
            // i.e. pad bounds inside [-pi/6, pi/3].
            if (b.pad_min[k] < kPadLow - 1e-12 || b.pad_max[k] > kPadHigh + 1e-12)
                out.push_back({path + (b.pad_min[k] < kPadLow - 1e-12 ? ".pad_min" : ".pad_max"),
                               "phase angle spread bounds must lie in [-pi/6, pi/3] so the tangent "
                               "reformulation stays increasing and invertible"});
        }
        if (b.is_reference) {
            if (static_cast<int>(b.vref.size()) != n)
                out.push_back({path + ".ref", "reference phasor has " + std::to_string(b.vref.size()) +
                                                  " entries, expected " + std::to_string(n)});
            for (std::size_t k = 0; k < b.vref.size(); ++k) {
                const double mag = std::abs(b.vref[k]);
                if (k < b.vmin.size() && mag < b.vmin[k] - 1e-9 * (1.0 + b.vmin[k]))
                    out.push_back({path + ".ref", "reference magnitude below vmin"});
                if (k < b.vmax.size() && mag > b.vmax[k] + 1e-9 * (1.0 + mag))
                    out.push_back({path + ".ref", "reference magnitude above vmax"});
            }
        } else if (!b.vref.empty()) {
            out.push_back({path + ".ref", "voltage phasor given on a non-reference bus"});
        }
        if (!finite_all(b.vmin) || !finite_all(b.vmax))
            out.push_back({path, "NaN in voltage bounds"});
    }

    if (net.reference_bus_indices().empty())
        rep.diagnostics.push_back({"network", "no reference bus"});

    std::set<std::string> seen_br;
    for (const Branch& br : net.branches) {
        const std::string path = "branch " + br.id;
        if (!seen_br.insert(br.id).second) out.push_back({path, "duplicate branch id"});
        const int n = br.phases.size();
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        if (fi < 0) out.push_back({path, "references missing bus " + br.from_bus});
        if (ti < 0) out.push_back({path, "references missing bus " + br.to_bus});
        if (fi >= 0 && !br.phases.subset_of(net.buses[static_cast<std::size_t>(fi)].phases))
            out.push_back({path, "phases " + br.phases.str() + " not a subset of bus " + br.from_bus});
        if (ti >= 0 && !br.phases.subset_of(net.buses[static_cast<std::size_t>(ti)].phases))
            out.push_back({path, "phases " + br.phases.str() + " not a subset of bus " + br.to_bus});
        if (br.z_series.rows() != n || br.z_series.cols() != n)
            out.push_back({path + ".z_series", "matrix dimension does not match phase set " + br.phases.str()});
        if (br.y_sh_from.rows() != n || br.y_sh_from.cols() != n)
            out.push_back({path + ".y_sh_from", "matrix dimension does not match phase set"});
        if (br.y_sh_to.rows() != n || br.y_sh_to.cols() != n)
            out.push_back({path + ".y_sh_to", "matrix dimension does not match phase set"});
        require_len(out, path + ".i_rated", br.i_rated, n, "i_rated");
        require_len(out, path + ".s_rated", br.s_rated, n, "s_rated");
        require_len(out, path + ".vad_min", br.vad_min, n, "vad_min");
        require_len(out, path + ".vad_max", br.vad_max, n, "vad_max");
        for (double v : br.i_rated)
            if (v < 0.0) out.push_back({path + ".i_rated", "negative current rating"});
        for (double v : br.s_rated)
            if (v < 0.0) out.push_back({path + ".s_rated", "negative power rating"});
        for (std::size_t k = 0; k < br.vad_min.size() && k < br.vad_max.size(); ++k) {
            if (br.vad_min[k] > br.vad_max[k]) out.push_back({path + ".vad_min", "vad_min exceeds vad_max"});
            if (br.vad_min[k] <= -kPi / 2.0 || br.vad_max[k] >= kPi / 2.0)
                out.push_back({path + ".vad_min", "voltage angle difference bounds must lie inside (-pi/2, pi/2)"});
        }
        if (fi == ti && fi >= 0) out.push_back({path, "self-loop"});
    }

    std::set<std::string> seen_u;
    for (const Unit& u : net.units) {
        const std::string path = "unit " + u.id;
        if (!seen_u.insert(u.id).second) out.push_back({path, "duplicate unit id"});
        const int bi = net.bus_index(u.bus);
        if (bi < 0) out.push_back({path, "references missing bus " + u.bus});
        if (bi >= 0 && !u.phases.subset_of(net.buses[static_cast<std::size_t>(bi)].phases))
            out.push_back({path, "phases " + u.phases.str() + " not a subset of bus " + u.bus});
        const int n = u.phases.size();
        require_len(out, path + ".p_min", u.p_min, n, "p_min");
        require_len(out, path + ".p_max", u.p_max, n, "p_max");
        require_len(out, path + ".q_min", u.q_min, n, "q_min");
        require_len(out, path + ".q_max", u.q_max, n, "q_max");
        require_len(out, path + ".i_rated", u.i_rated, n, "i_rated");
        for (std::size_t k = 0; k < u.p_min.size() && k < u.p_max.size(); ++k)
            if (u.p_min[k] > u.p_max[k]) out.push_back({path + ".p_min", "p_min exceeds p_max"});
        for (std::size_t k = 0; k < u.q_min.size() && k < u.q_max.size(); ++k)
            if (u.q_min[k] > u.q_max[k]) out.push_back({path + ".q_min", "q_min exceeds q_max"});
        if (u.setpoint && static_cast<int>(u.setpoint->size()) != n)
            out.push_back({path + ".setpoint", "setpoint has " + std::to_string(u.setpoint->size()) +
                                                   " entries, expected " + std::to_string(n)});
    }

    std::set<std::string> seen_s;
    for (const Shunt& sh : net.shunts) {
        const std::string path = "shunt " + sh.id;
        if (!seen_s.insert(sh.id).second) out.push_back({path, "duplicate shunt id"});
        const int bi = net.bus_index(sh.bus);
        if (bi < 0) out.push_back({path, "references missing bus " + sh.bus});
        if (bi >= 0 && !sh.phases.subset_of(net.buses[static_cast<std::size_t>(bi)].phases))
            out.push_back({path, "phases not a subset of bus " + sh.bus});
        const int n = sh.phases.size();
        if (sh.y.rows() != n || sh.y.cols() != n)
            out.push_back({path + ".y", "matrix dimension does not match phase set"});
        require_len(out, path + ".i_rated", sh.i_rated, n, "i_rated");
    }

    for (const std::string& p : unreachable_phases(net))
        out.push_back({p, "no path to a reference bus on this conductor"});

    return rep;
}

void apply_defaults(Network& net) {
    net.rebuild_index();
    for (Bus& b : net.buses) {
        const std::size_t n = static_cast<std::size_t>(b.phases.size());
        if (b.vmin.empty()) b.vmin.assign(n, 0.0);
        if (b.vmax.empty()) b.vmax.assign(n, kUnbounded);
        const std::size_t npairs = b.pad_pairs().size();
        if (b.pad_min.empty()) b.pad_min.assign(npairs, kPadLow);
        if (b.pad_max.empty()) b.pad_max.assign(npairs, kPadHigh);
    }
    for (Branch& br : net.branches) {
        const int n = br.phases.size();
        if (br.y_sh_from.rows() == 0) br.y_sh_from = CMat(n);
        if (br.y_sh_to.rows() == 0) br.y_sh_to = CMat(n);
        if (br.i_rated.empty()) br.i_rated.assign(static_cast<std::size_t>(n), kUnbounded);
        if (br.s_rated.empty()) br.s_rated.assign(static_cast<std::size_t>(n), kUnbounded);
        if (br.vad_min.empty()) br.vad_min.assign(static_cast<std::size_t>(n), -kVadDefault);
        if (br.vad_max.empty()) br.vad_max.assign(static_cast<std::size_t>(n), kVadDefault);
    }
    for (Unit& u : net.units) {
        if (u.phases.empty()) {
            int bi = net.bus_index(u.bus);
            if (bi >= 0) u.phases = net.buses[static_cast<std::size_t>(bi)].phases;
        }
        const std::size_t n = static_cast<std::size_t>(u.phases.size());
        if (u.p_min.empty()) u.p_min.assign(n, -kUnbounded);
        if (u.p_max.empty()) u.p_max.assign(n, kUnbounded);
        if (u.q_min.empty()) u.q_min.assign(n, -kUnbounded);
        if (u.q_max.empty()) u.q_max.assign(n, kUnbounded);
        if (u.i_rated.empty()) u.i_rated.assign(n, kUnbounded);
    }
    for (Shunt& sh : net.shunts) {
        if (sh.phases.empty()) {
            int bi = net.bus_index(sh.bus);
            if (bi >= 0) sh.phases = net.buses[static_cast<std::size_t>(bi)].phases;
        }
        if (sh.i_rated.empty()) sh.i_rated.assign(static_cast<std::size_t>(sh.phases.size()), kUnbounded);
    }
}

std::vector<std::string> unreachable_phases(const Network& net) {
    // BFS over (bus, phase) nodes joined by branch conductors.
    const int nb = static_cast<int>(net.buses.size());
    std::vector<std::array<bool, 3>> reached(static_cast<std::size_t>(nb), {false, false, false});
    std::queue<std::pair<int, int>> q;
    for (int k = 0; k < nb; ++k) {
        const Bus& b = net.buses[static_cast<std::size_t>(k)];
        if (!b.is_reference) continue;
        for (int j = 0; j < b.phases.size(); ++j) {
            int ph = static_cast<int>(b.phases.member(j));
            reached[static_cast<std::size_t>(k)][static_cast<std::size_t>(ph)] = true;
            q.emplace(k, ph);
        }
    }
    while (!q.empty()) {
        auto [bi, ph] = q.front();
        q.pop();
        for (const Branch& br : net.branches) {
            if (!br.phases.contains(static_cast<Phase>(ph))) continue;
            int fi = net.bus_index(br.from_bus);
            int ti = net.bus_index(br.to_bus);
            if (fi < 0 || ti < 0) continue;
            int other = -1;
            if (fi == bi)
                other = ti;
            else if (ti == bi)
                other = fi;
            if (other < 0) continue;
            if (!reached[static_cast<std::size_t>(other)][static_cast<std::size_t>(ph)]) {
                reached[static_cast<std::size_t>(other)][static_cast<std::size_t>(ph)] = true;
                q.emplace(other, ph);
            }
        }
    }
    std::vector<std::string> out;
    for (int k = 0; k < nb; ++k) {
        const Bus& b = net.buses[static_cast<std::size_t>(k)];
        for (int j = 0; j < b.phases.size(); ++j) {
            Phase p = b.phases.member(j);
            if (!reached[static_cast<std::size_t>(k)][static_cast<std::size_t>(static_cast<int>(p))])
                out.push_back("bus " + b.id + "." + std::string(1, phase_letter(p)));
        }
    }
    return out;
}

CMat series_admittance(const Branch& b) { return pinv(b.z_series); }

namespace {

std::vector<double> scaled(const std::vector<double>& v, double f) {
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] * f;
    return out;
}

CMat scaled(const CMat& m, double f) { return m * cx{f, 0.0}; }

Network convert_units(const Network& net, bool to_pu) {
    if (net.sbase <= 0.0) throw Error(ErrorKind::input, "power base must be positive");
    if (net.vbase <= 0.0) throw Error(ErrorKind::input, "voltage base must be positive");

    Network out = net;
    out.unit_system = to_pu ? UnitSystem::per_unit : UnitSystem::si;

    auto vb_of = [&](const std::string& bus_id) {
        int k = net.bus_index(bus_id);
        if (k < 0) throw Error(ErrorKind::input, "unknown bus id: " + bus_id);
        return net.bus_vbase(k);
    };

    for (Bus& b : out.buses) {
        const double vb = net.bus_vbase(b);
        if (vb <= 0.0) throw Error(ErrorKind::input, "voltage base must be positive at bus " + b.id);
        const double fv = to_pu ? 1.0 / vb : vb;
        b.vmin = scaled(b.vmin, fv);
        b.vmax = scaled(b.vmax, fv);
        for (cx& v : b.vref) v *= fv;
        // pad bounds are angles, untouched
    }
    for (Branch& br : out.branches) {
        const double vb_from = vb_of(br.from_bus);
        const double vb_to = vb_of(br.to_bus);
        if (std::abs(vb_from - vb_to) > 1e-9 * vb_from)
            throw Error(ErrorKind::input,
                        "branch " + br.id + " joins buses with different voltage bases");
        const double zb = vb_from * vb_from / net.sbase;
        const double ib = net.sbase / vb_from;
        br.z_series = scaled(br.z_series, to_pu ? 1.0 / zb : zb);
        br.y_sh_from = scaled(br.y_sh_from, to_pu ? zb : 1.0 / zb);
        br.y_sh_to = scaled(br.y_sh_to, to_pu ? zb : 1.0 / zb);
        br.i_rated = scaled(br.i_rated, to_pu ? 1.0 / ib : ib);
        br.s_rated = scaled(br.s_rated, to_pu ? 1.0 / net.sbase : net.sbase);
    }
    for (Unit& u : out.units) {
        const double vb = vb_of(u.bus);
        const double ib = net.sbase / vb;
        const double fs = to_pu ? 1.0 / net.sbase : net.sbase;
        u.p_min = scaled(u.p_min, fs);
        u.p_max = scaled(u.p_max, fs);
        u.q_min = scaled(u.q_min, fs);
        u.q_max = scaled(u.q_max, fs);
        u.i_rated = scaled(u.i_rated, to_pu ? 1.0 / ib : ib);
        if (u.setpoint)
            for (cx& s : *u.setpoint) s *= fs;
    }
    for (Shunt& sh : out.shunts) {
        const double vb = vb_of(sh.bus);
        const double zb = vb * vb / net.sbase;
        const double ib = net.sbase / vb;
        sh.y = scaled(sh.y, to_pu ? zb : 1.0 / zb);
        sh.i_rated = scaled(sh.i_rated, to_pu ? 1.0 / ib : ib);
    }
    out.rebuild_index();
    return out;
}

}  // namespace

Network to_per_unit(const Network& net) {
    if (net.unit_system != UnitSystem::si)
        throw Error(ErrorKind::input, "to_per_unit expects an SI network");
    return convert_units(net, true);
}

Network from_per_unit(const Network& net) {
    if (net.unit_system != UnitSystem::per_unit)
        throw Error(ErrorKind::input, "from_per_unit expects a per-unit network");
    return convert_units(net, false);
}

}  // namespace triflow
