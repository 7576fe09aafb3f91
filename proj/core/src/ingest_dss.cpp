#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "triflow/ingest.hpp"

namespace triflow {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

struct DssStatement {
    int line = 0;
    std::string verb;          // "new", "clear", ...
    std::string element_type;  // "circuit", "line", ...
    std::string element_name;
    std::vector<std::pair<std::string, std::string>> properties;  // lowercase keys
};

// One logical statement per "New ..." line plus its "~" continuations.
class DssLexer {
  public:
    explicit DssLexer(std::string_view text) {
        std::size_t pos = 0;
        int number = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            std::string_view raw =
                text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
            ++number;
            handle_line(raw, number);
            if (eol == std::string_view::npos) break;
            pos = eol + 1;
        }
        flush();
    }

    std::vector<DssStatement> statements;
    std::vector<ParseDiagnostic> diagnostics;

  private:
    void handle_line(std::string_view raw, int number) {
        std::string line(raw);
        // '!' and '//' start comments.
        if (auto p = line.find('!'); p != std::string::npos) line.erase(p);
        if (auto p = line.find("//"); p != std::string::npos) line.erase(p);
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) return;
        line.erase(0, first);

        if (line[0] == '~') {
            if (!open_) {
                diagnostics.push_back({ParseDiagnostic::Severity::error, number,
                                       "continuation line with no preceding statement"});
                return;
            }
            parse_properties(line.substr(1), number);
            return;
        }
        flush();
        open_ = true;
        current_ = DssStatement{};
        current_.line = number;

        std::size_t sp = line.find_first_of(" \t");
        std::string head = line.substr(0, sp);
        std::string rest = sp == std::string::npos ? std::string() : line.substr(sp + 1);
        current_.verb = lower(head);
        if (current_.verb == "new" || current_.verb == "edit") {
            std::size_t sp2 = rest.find_first_of(" \t");
            std::string spec = rest.substr(0, sp2);
            std::string props = sp2 == std::string::npos ? std::string() : rest.substr(sp2 + 1);
            std::size_t dot = spec.find('.');
            current_.element_type = lower(spec.substr(0, dot));
            if (dot != std::string::npos) current_.element_name = lower(spec.substr(dot + 1));
            parse_properties(props, number);
        } else {
            current_.element_type = rest;
        }
    }

    void parse_properties(const std::string& text, int number) {
        std::size_t k = 0;
        const std::size_t n = text.size();
        while (k < n) {
            while (k < n && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
            if (k >= n) break;
            std::size_t eq = text.find('=', k);
            if (eq == std::string::npos) {
                diagnostics.push_back({ParseDiagnostic::Severity::warning, number,
                                       "ignored bare token '" + text.substr(k) + "'"});
                break;
            }
            std::string key = lower(text.substr(k, eq - k));
            key.erase(std::remove_if(key.begin(), key.end(),
                                     [](unsigned char c) { return std::isspace(c); }),
                      key.end());
            k = eq + 1;
            while (k < n && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
            std::string value;
            if (k < n && (text[k] == '[' || text[k] == '(' || text[k] == '"')) {
                const char close = text[k] == '[' ? ']' : (text[k] == '(' ? ')' : '"');
                std::size_t end = text.find(close, k + 1);
                if (end == std::string::npos) {
                    diagnostics.push_back({ParseDiagnostic::Severity::error, number,
                                           "unterminated bracketed value for '" + key + "'"});
                    return;
                }
                value = text.substr(k + 1, end - k - 1);
                k = end + 1;
            } else {
                std::size_t end = k;
                while (end < n && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
                value = text.substr(k, end - k);
                k = end;
            }
            current_.properties.emplace_back(key, value);
        }
    }

    void flush() {
        if (open_) statements.push_back(std::move(current_));
        open_ = false;
    }

    bool open_ = false;
    DssStatement current_;
};

struct LineCode {
    int nphases = 3;
    double unit_factor = 1.0;  // meters per stated length unit
    bool has_units = false;
    CMat r, x, c;  // per length unit
    int line = 0;
};

double length_unit_factor(const std::string& u, bool& ok) {
    ok = true;
    std::string s = lower(u);
    if (s == "m") return 1.0;
    if (s == "km") return 1000.0;
    if (s == "ft") return 0.3048;
    if (s == "kft") return 304.8;
    if (s == "mi") return 1609.344;
    ok = false;
    return 1.0;
}

class DssParser {
  public:
    DssParser(std::string_view text, const DssOptions& options) : lexer_(text), options_(options) {}

    ParseResult run() {
        ParseResult result;
        diags_ = &result.diagnostics;
        for (const auto& d : lexer_.diagnostics) result.diagnostics.push_back(d);

        for (const DssStatement& st : lexer_.statements) dispatch(st);

        if (!saw_circuit_)
            error(1, "no 'New Circuit' statement; a source bus is required");

        if (result.has_errors()) return result;

        apply_defaults(net_);
        ValidationReport vr = validate(net_);
        for (const auto& d : vr.diagnostics) error(element_line(d.path), d.path + ": " + d.message);
        if (result.has_errors()) return result;

        result.network = std::move(net_);
        return result;
    }

  private:
    void dispatch(const DssStatement& st) {
        if (st.verb != "new") {
            // Commands like Clear / Set / Solve are outside the subset.
            warning(st.line, "ignored command '" + st.verb + "'");
            return;
        }
        if (st.element_type == "circuit")
            new_circuit(st);
        else if (st.element_type == "linecode")
            new_linecode(st);
        else if (st.element_type == "line")
            new_line(st);
        else if (st.element_type == "load")
            new_load(st);
        else
            error(st.line, "unsupported element '" + st.element_type +
                               "'; this reader accepts Circuit, Linecode, Line and Load only");
    }

    bool to_double(const std::string& s, double& out) {
        const char* b = s.data();
        auto [p, ec] = std::from_chars(b, b + s.size(), out);
        return ec == std::errc{} && p == b + s.size() && std::isfinite(out);
    }

    std::optional<CMat> parse_matrix(const std::string& value, int n, int line, const std::string& what) {
        std::vector<std::vector<double>> rows(1);
        std::string tok;
        std::string buffer;
        // '|' separates rows and may touch numbers.
        for (char ch : value) {
            if (ch == '|') {
                buffer.push_back(' ');
                buffer.push_back('|');
                buffer.push_back(' ');
            } else {
                buffer.push_back(ch);
            }
        }
        std::istringstream is2(buffer);
        while (is2 >> tok) {
            if (tok == "|") {
                rows.emplace_back();
                continue;
            }
            double v = 0.0;
            if (!to_double(tok, v)) {
                error(line, what + ": bad number '" + tok + "'");
                return std::nullopt;
            }
            rows.back().push_back(v);
        }
        while (!rows.empty() && rows.back().empty()) rows.pop_back();
        if (static_cast<int>(rows.size()) != n) {
            error(line, what + ": expected " + std::to_string(n) + " rows, got " +
                            std::to_string(rows.size()));
            return std::nullopt;
        }
        CMat m(n);
        bool lower_triangle = true;
        for (int r = 0; r < n; ++r)
            if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != r + 1) lower_triangle = false;
        if (lower_triangle) {
            for (int r = 0; r < n; ++r)
                for (int c = 0; c <= r; ++c) {
                    m.at(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                    m.at(c, r) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                }
            return m;
        }
        for (int r = 0; r < n; ++r) {
            if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != n) {
                error(line, what + ": row " + std::to_string(r + 1) + " has " +
                                std::to_string(rows[static_cast<std::size_t>(r)].size()) +
                                " entries, expected " + std::to_string(n) + " (or a lower triangle)");
                return std::nullopt;
            }
            for (int c = 0; c < n; ++c) m.at(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        return m;
    }

    // "busname.1.2" -> (busname, {a,b}); no suffix -> empty set (caller decides).
    std::pair<std::string, PhaseSet> split_bus(const std::string& spec, int line) {
        std::size_t dot = spec.find('.');
        if (dot == std::string::npos) return {spec, PhaseSet{}};
        std::string name = spec.substr(0, dot);
        PhaseSet ps;
        std::size_t k = dot;
        while (k != std::string::npos && k < spec.size()) {
            std::size_t next = spec.find('.', k + 1);
            std::string digit = spec.substr(k + 1, next == std::string::npos ? std::string::npos : next - k - 1);
            if (digit == "1")
                ps.add(Phase::a);
            else if (digit == "2")
                ps.add(Phase::b);
            else if (digit == "3")
                ps.add(Phase::c);
            else if (digit == "0")
                error(line, "neutral terminal '.0' is not supported (three-wire model)");
            else
                error(line, "bad conductor suffix '." + digit + "' on bus '" + spec + "'");
            k = next;
        }
        return {name, ps};
    }

    Bus& ensure_bus(const std::string& id, PhaseSet phases, int line) {
        int k = net_.bus_index(id);
        if (k < 0) {
            Bus b;
            b.id = id;
            b.phases = phases;
            net_.buses.push_back(std::move(b));
            net_.rebuild_index();
            k = net_.bus_index(id);
            element_lines_["bus " + id] = line;
        } else {
            Bus& b = net_.buses[static_cast<std::size_t>(k)];
            for (int j = 0; j < phases.size(); ++j) b.phases.add(phases.member(j));
        }
        return net_.buses[static_cast<std::size_t>(net_.bus_index(id))];
    }

    void new_circuit(const DssStatement& st) {
        if (saw_circuit_) {
            error(st.line, "duplicate Circuit definition");
            return;
        }
        saw_circuit_ = true;
        net_.name = st.element_name;
        std::string bus1 = "sourcebus";
        double basekv = 0.0, pu = 1.0, angle_deg = 0.0;
        int phases = 3;
        for (const auto& [key, value] : st.properties) {
            if (key == "bus1")
                bus1 = lower(value);
            else if (key == "basekv") {
                if (!to_double(value, basekv)) error(st.line, "circuit: bad basekv");
            } else if (key == "pu") {
                if (!to_double(value, pu)) error(st.line, "circuit: bad pu");
            } else if (key == "angle") {
                if (!to_double(value, angle_deg)) error(st.line, "circuit: bad angle");
            } else if (key == "phases") {
                double v;
                if (!to_double(value, v) || (v != 3.0)) error(st.line, "circuit: only phases=3 is supported");
                phases = 3;
            } else {
                warning(st.line, "circuit: ignored property '" + key + "'");
            }
        }
        (void)phases;
        if (basekv <= 0.0) {
            error(st.line, "circuit: basekv must be given and positive");
            return;
        }
        // basekv is line-to-line; the reference phasor is line-to-neutral.
        const double vln = basekv * 1000.0 / std::sqrt(3.0);
        net_.vbase = vln;
        net_.frequency = options_.frequency;
        net_.sbase = 1.0e4;  // fixed interchange base, see format notes

        auto [name, suffix] = split_bus(bus1, st.line);
        Bus& b = ensure_bus(name, PhaseSet::abc(), st.line);
        b.is_reference = true;
        b.vref.clear();
        const double a0 = angle_deg * std::numbers::pi / 180.0;
        const double shift = 2.0 * std::numbers::pi / 3.0;
        for (int k = 0; k < 3; ++k) {
            double ang = wrap_angle(a0 - k * shift);
            b.vref.push_back(std::polar(vln * pu, ang));
        }
        source_bus_ = name;
        (void)suffix;
    }

    void new_linecode(const DssStatement& st) {
        LineCode lc;
        lc.line = st.line;
        std::optional<CMat> r, x, c;
        std::string rtext, xtext, ctext;
        for (const auto& [key, value] : st.properties) {
            if (key == "nphases") {
                double v;
                if (!to_double(value, v) || v < 1 || v > 3) {
                    error(st.line, "linecode: bad nphases");
                    return;
                }
                lc.nphases = static_cast<int>(v);
            } else if (key == "rmatrix")
                rtext = value;
            else if (key == "xmatrix")
                xtext = value;
            else if (key == "cmatrix")
                ctext = value;
            else if (key == "units") {
                bool ok;
                lc.unit_factor = length_unit_factor(value, ok);
                lc.has_units = true;
                if (!ok) error(st.line, "linecode: unknown units '" + value + "'");
            } else
                warning(st.line, "linecode: ignored property '" + key + "'");
        }
        if (rtext.empty() || xtext.empty()) {
            error(st.line, "linecode " + st.element_name + ": rmatrix and xmatrix are required");
            return;
        }
        r = parse_matrix(rtext, lc.nphases, st.line, "linecode " + st.element_name + ".rmatrix");
        x = parse_matrix(xtext, lc.nphases, st.line, "linecode " + st.element_name + ".xmatrix");
        if (!r || !x) return;
        lc.r = *r;
        lc.x = *x;
        if (!ctext.empty()) {
            c = parse_matrix(ctext, lc.nphases, st.line, "linecode " + st.element_name + ".cmatrix");
            if (!c) return;
            lc.c = *c;
        } else {
            lc.c = CMat(lc.nphases);
        }
        linecodes_[st.element_name] = lc;
    }

    void new_line(const DssStatement& st) {
        std::string bus1, bus2, code;
        double length = 1.0;
        double line_unit_factor = 0.0;  // 0 = inherit the linecode's
        int phases = 0;
        for (const auto& [key, value] : st.properties) {
            if (key == "bus1")
                bus1 = lower(value);
            else if (key == "bus2")
                bus2 = lower(value);
            else if (key == "linecode")
                code = lower(value);
            else if (key == "length") {
                if (!to_double(value, length)) error(st.line, "line: bad length");
            } else if (key == "units") {
                bool ok;
                line_unit_factor = length_unit_factor(value, ok);
                if (!ok) error(st.line, "line: unknown units '" + value + "'");
            } else if (key == "phases") {
                double v;
                if (!to_double(value, v) || v < 1 || v > 3) error(st.line, "line: bad phases");
                phases = static_cast<int>(v);
            } else
                warning(st.line, "line: ignored property '" + key + "'");
        }
        if (bus1.empty() || bus2.empty() || code.empty()) {
            error(st.line, "line " + st.element_name + ": bus1, bus2 and linecode are required");
            return;
        }
        auto it = linecodes_.find(code);
        if (it == linecodes_.end()) {
            error(st.line, "line " + st.element_name + ": unknown linecode '" + code + "'");
            return;
        }
        const LineCode& lc = it->second;
        if (length <= 0.0) {
            error(st.line, "line " + st.element_name + ": length must be positive");
            return;
        }

        auto [n1, ps1] = split_bus(bus1, st.line);
        auto [n2, ps2] = split_bus(bus2, st.line);
        PhaseSet bps;
        if (!ps1.empty())
            bps = ps1;
        else if (!ps2.empty())
            bps = ps2;
        else if (phases == 3 || (phases == 0 && lc.nphases == 3))
            bps = PhaseSet::abc();
        else {
            // unsuffixed buses with fewer conductors take the leading phases
            int n = phases > 0 ? phases : lc.nphases;
            for (int k = 0; k < n; ++k) bps.add(static_cast<Phase>(k));
        }
        if (bps.size() != lc.nphases) {
            error(st.line, "line " + st.element_name + ": phase count " + std::to_string(bps.size()) +
                               " does not match linecode nphases " + std::to_string(lc.nphases));
            return;
        }

        // Scale per-length matrices to the full line length, converting
        // the line's length unit into the linecode's.
        double factor = length;
        if (line_unit_factor > 0.0 && lc.has_units) factor = length * line_unit_factor / lc.unit_factor;

        const int n = lc.nphases;
        Branch br;
        br.id = st.element_name;
        br.from_bus = n1;
        br.to_bus = n2;
        br.phases = bps;
        br.z_series = CMat(n);
        for (int rr = 0; rr < n; ++rr)
            for (int cc = 0; cc < n; ++cc)
                br.z_series.at(rr, cc) = cx{lc.r.at(rr, cc).real() * factor, lc.x.at(rr, cc).real() * factor};
        // cmatrix is nF per length unit: b = 2 pi f C, half to each end.
        const double omega = 2.0 * std::numbers::pi * options_.frequency;
        br.y_sh_from = CMat(n);
        br.y_sh_to = CMat(n);
        for (int rr = 0; rr < n; ++rr)
            for (int cc = 0; cc < n; ++cc) {
                const double b_half = 0.5 * omega * lc.c.at(rr, cc).real() * 1e-9 * factor;
                br.y_sh_from.at(rr, cc) = cx{0.0, b_half};
                br.y_sh_to.at(rr, cc) = cx{0.0, b_half};
            }

        ensure_bus(n1, bps, st.line);
        ensure_bus(n2, bps, st.line);
        element_lines_["branch " + br.id] = st.line;
        net_.branches.push_back(std::move(br));
    }

    void new_load(const DssStatement& st) {
        std::string bus1;
        double kw = 0.0, kvar = 0.0, pf = 0.0;
        bool has_kvar = false, has_pf = false;
        int phases = 0;
        for (const auto& [key, value] : st.properties) {
            if (key == "bus1")
                bus1 = lower(value);
            else if (key == "kw") {
                if (!to_double(value, kw)) error(st.line, "load: bad kw");
            } else if (key == "kvar") {
                if (!to_double(value, kvar)) error(st.line, "load: bad kvar");
                has_kvar = true;
            } else if (key == "pf") {
                if (!to_double(value, pf)) error(st.line, "load: bad pf");
                has_pf = true;
            } else if (key == "phases") {
                double v;
                if (!to_double(value, v) || v < 1 || v > 3) error(st.line, "load: bad phases");
                phases = static_cast<int>(v);
            } else if (key == "conn") {
                if (lower(value) == "delta" || lower(value) == "ll")
                    error(st.line, "load " + st.element_name +
                                       ": delta-connected loads are out of scope (wye only)");
                else if (lower(value) != "wye" && lower(value) != "ln")
                    error(st.line, "load: unknown connection '" + value + "'");
            } else if (key == "kv" || key == "model" || key == "vminpu" || key == "vmaxpu") {
                // accepted and irrelevant for fixed-power loads
            } else
                warning(st.line, "load: ignored property '" + key + "'");
        }
        if (bus1.empty()) {
            error(st.line, "load " + st.element_name + ": bus1 is required");
            return;
        }
        auto [name, ps] = split_bus(bus1, st.line);
        if (ps.empty()) {
            if (phases == 0) phases = 3;
            for (int k = 0; k < phases; ++k) ps.add(static_cast<Phase>(k));
        }
        if (phases != 0 && phases != ps.size()) {
            error(st.line, "load " + st.element_name + ": phases=" + std::to_string(phases) +
                               " conflicts with bus suffix '" + bus1 + "'");
            return;
        }
        if (has_pf && !has_kvar) {
            if (pf <= 0.0 || pf > 1.0) {
                error(st.line, "load: pf must be in (0, 1]");
                return;
            }
            kvar = kw * std::tan(std::acos(pf));
        }
        const int n = ps.size();
        Unit u;
        u.id = st.element_name;
        u.bus = name;
        u.phases = ps;
        std::vector<cx> sp(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k)
            sp[static_cast<std::size_t>(k)] = cx{kw * 1000.0 / n, kvar * 1000.0 / n};
        u.setpoint = std::move(sp);
        ensure_bus(name, ps, st.line);
        element_lines_["unit " + u.id] = st.line;
        net_.units.push_back(std::move(u));
    }

    int element_line(const std::string& validation_path) const {
        for (const auto& [prefix, line] : element_lines_)
            if (validation_path.rfind(prefix, 0) == 0) return line;
        return 1;
    }

    void error(int line, const std::string& message) {
        diags_->push_back({ParseDiagnostic::Severity::error, line, message});
    }
    void warning(int line, const std::string& message) {
        diags_->push_back({ParseDiagnostic::Severity::warning, line, message});
    }

    DssLexer lexer_;
    DssOptions options_;
    std::vector<ParseDiagnostic>* diags_ = nullptr;
    Network net_;
    std::map<std::string, LineCode> linecodes_;
    std::map<std::string, int> element_lines_;
    bool saw_circuit_ = false;
    std::string source_bus_;
};

}  // namespace

ParseResult parse_dss_subset(std::string_view text, const DssOptions& options) {
    return DssParser(text, options).run();
}

}  // namespace triflow
