#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "triflow/ingest.hpp"

namespace triflow {

bool ParseResult::has_errors() const {
    for (const auto& d : diagnostics)
        if (d.severity == ParseDiagnostic::Severity::error) return true;
    return false;
}

std::string ParseResult::diagnostics_text() const {
    std::ostringstream os;
    for (const auto& d : diagnostics) {
        os << (d.severity == ParseDiagnostic::Severity::error ? "error" : "warning") << " line "
           << d.line << ": " << d.message << "\n";
    }
    return os.str();
}

namespace {

struct Line {
    int number = 0;
    std::vector<std::string> tokens;
};

// Splits into lines and whitespace tokens; '(' and ')' become their own
// tokens; '#' starts a comment.
std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> lines;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        ++number;
        Line line;
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
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return lines;
}

class NativeParser {
  public:
    explicit NativeParser(std::string_view text) : lines_(tokenize(text)) {}

    ParseResult run() {
        ParseResult result;
        diags_ = &result.diagnostics;

        if (lines_.empty() || lines_[0].tokens.size() != 2 || lines_[0].tokens[0] != "triflow-net" ||
            lines_[0].tokens[1] != "1") {
            error(lines_.empty() ? 1 : lines_[0].number, "expected header 'triflow-net 1'");
            return result;
        }

        for (std::size_t k = 1; k < lines_.size(); ++k) top_level(lines_[k], k);
        if (!open_block_.empty()) error(open_line_, "unclosed '" + open_block_ + "' block at end of input");

        if (result.has_errors()) return result;

        apply_defaults(net_);
        ValidationReport vr = validate(net_);
        for (const auto& d : vr.diagnostics)
            error(element_line(d.path), d.path + ": " + d.message);
        if (result.has_errors()) return result;

        result.network = std::move(net_);
        return result;
    }

  private:
    void top_level(const Line& line, std::size_t k) {
        const std::string& key = line.tokens[0];
        if (!open_block_.empty()) {
            if (key == "end") {
                if (line.tokens.size() != 1) error(line.number, "'end' takes no arguments");
                finish_block();
            } else {
                attribute(line);
            }
            return;
        }
        if (key == "name") {
            if (line.tokens.size() == 2)
                net_.name = line.tokens[1];
            else
                error(line.number, "'name' expects one value");
        } else if (key == "unit_system") {
            if (line.tokens.size() == 2 && line.tokens[1] == "si")
                net_.unit_system = UnitSystem::si;
            else if (line.tokens.size() == 2 && line.tokens[1] == "per_unit")
                net_.unit_system = UnitSystem::per_unit;
            else
                error(line.number, "'unit_system' expects 'si' or 'per_unit'");
        } else if (key == "sbase") {
            net_.sbase = number_arg(line, "sbase");
        } else if (key == "vbase") {
            net_.vbase = number_arg(line, "vbase");
        } else if (key == "frequency") {
            net_.frequency = number_arg(line, "frequency");
        } else if (key == "bus" || key == "branch" || key == "unit" || key == "shunt") {
            if (line.tokens.size() != 2) {
                error(line.number, "'" + key + "' expects an identifier");
                return;
            }
            open_block_ = key;
            open_id_ = line.tokens[1];
            open_line_ = line.number;
            attrs_.clear();
            element_lines_[key + " " + open_id_] = line.number;
        } else {
            error(line.number, "unknown top-level key '" + key + "'");
        }
        (void)k;
    }

    struct Attr {
        Line line;
    };

    void attribute(const Line& line) {
        const std::string& key = line.tokens[0];
        if (attrs_.count(key)) {
            error(line.number, "duplicate attribute '" + key + "' in " + open_block_ + " " + open_id_);
            return;
        }
        attrs_[key] = Attr{line};
    }

    void finish_block() {
        const std::string path = open_block_ + " " + open_id_;
        if (open_block_ == "bus") {
            Bus b;
            b.id = open_id_;
            b.phases = phases_attr(path);
            const int n = b.phases.size();
            b.vbase = take_number("vbase", path, 0.0);
            b.vmin = take_reals("vmin", path, n, SentinelKind::none);
            b.vmax = take_reals("vmax", path, n, SentinelKind::plus);
            const int npairs = n >= 3 ? 3 : (n == 2 ? 1 : 0);
            b.pad_min = take_reals("pad_min", path, npairs, SentinelKind::none);
            b.pad_max = take_reals("pad_max", path, npairs, SentinelKind::none);
            b.vref = take_complexes("ref", path, n);
            b.is_reference = !b.vref.empty();
            reject_leftovers(path);
            net_.buses.push_back(std::move(b));
        } else if (open_block_ == "branch") {
            Branch br;
            br.id = open_id_;
            br.from_bus = take_word("from", path);
            br.to_bus = take_word("to", path);
            br.phases = phases_attr(path);
            const int n = br.phases.size();
            br.z_series = take_matrix("z_series", path, n, true);
            br.y_sh_from = take_matrix("y_sh_from", path, n, false);
            br.y_sh_to = take_matrix("y_sh_to", path, n, false);
            br.i_rated = take_reals("i_rated", path, n, SentinelKind::plus);
            br.s_rated = take_reals("s_rated", path, n, SentinelKind::plus);
            br.vad_min = take_reals("vad_min", path, n, SentinelKind::none);
            br.vad_max = take_reals("vad_max", path, n, SentinelKind::none);
            reject_leftovers(path);
            net_.branches.push_back(std::move(br));
        } else if (open_block_ == "unit") {
            Unit u;
            u.id = open_id_;
            u.bus = take_word("bus", path);
            if (attrs_.count("phases")) u.phases = phases_attr(path);
            const int n = u.phases.empty() ? -1 : u.phases.size();
            u.p_min = take_reals("p_min", path, n, SentinelKind::minus);
            u.p_max = take_reals("p_max", path, n, SentinelKind::plus);
            u.q_min = take_reals("q_min", path, n, SentinelKind::minus);
            u.q_max = take_reals("q_max", path, n, SentinelKind::plus);
            u.i_rated = take_reals("i_rated", path, n, SentinelKind::plus);
            std::vector<cx> sp = take_complexes("setpoint", path, n);
            if (!sp.empty()) u.setpoint = std::move(sp);
            reject_leftovers(path);
            net_.units.push_back(std::move(u));
        } else if (open_block_ == "shunt") {
            Shunt sh;
            sh.id = open_id_;
            sh.bus = take_word("bus", path);
            sh.phases = phases_attr(path);
            sh.y = take_matrix("y", path, sh.phases.size(), true);
            sh.i_rated = take_reals("i_rated", path, sh.phases.size(), SentinelKind::plus);
            reject_leftovers(path);
            net_.shunts.push_back(std::move(sh));
        }
        open_block_.clear();
        open_id_.clear();
        attrs_.clear();
    }

    PhaseSet phases_attr(const std::string& path) {
        auto it = attrs_.find("phases");
        if (it == attrs_.end()) {
            error(open_line_, path + ": missing 'phases'");
            return PhaseSet::abc();
        }
        const Line& line = it->second.line;
        PhaseSet out = PhaseSet::abc();
        if (line.tokens.size() != 2) {
            error(line.number, path + ".phases: expected one token like 'abc'");
        } else if (auto ps = PhaseSet::parse(line.tokens[1])) {
            out = *ps;
        } else {
            error(line.number, path + ".phases: bad phase set '" + line.tokens[1] + "'");
        }
        attrs_.erase(it);
        return out;
    }

    enum class SentinelKind { none, plus, minus };

    bool parse_double(const std::string& tok, double& out) {
        const char* begin = tok.data();
        const char* end = begin + tok.size();
        auto [p, ec] = std::from_chars(begin, end, out);
        if (ec != std::errc{} || p != end) return false;
        return std::isfinite(out);
    }

    double number_arg(const Line& line, const std::string& what) {
        double v = 0.0;
        if (line.tokens.size() != 2 || !parse_double(line.tokens[1], v))
            error(line.number, "'" + what + "' expects one finite number");
        return v;
    }

    std::string take_word(const std::string& key, const std::string& path) {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) {
            error(open_line_, path + ": missing '" + key + "'");
            return {};
        }
        std::string out;
        if (it->second.line.tokens.size() == 2)
            out = it->second.line.tokens[1];
        else
            error(it->second.line.number, path + "." + key + ": expected one value");
        attrs_.erase(it);
        return out;
    }

    double take_number(const std::string& key, const std::string& path, double fallback) {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) return fallback;
        double v = fallback;
        if (it->second.line.tokens.size() != 2 || !parse_double(it->second.line.tokens[1], v))
            error(it->second.line.number, path + "." + key + ": expected one finite number");
        attrs_.erase(it);
        return v;
    }

    std::vector<double> take_reals(const std::string& key, const std::string& path, int n,
                                   SentinelKind sentinel) {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) return {};
        const Line& line = it->second.line;
        std::vector<double> out;
        for (std::size_t k = 1; k < line.tokens.size(); ++k) {
            const std::string& tok = line.tokens[k];
            double v = 0.0;
            if (tok == "unbounded" && sentinel != SentinelKind::none) {
                v = sentinel == SentinelKind::plus ? kUnbounded : -kUnbounded;
            } else if (!parse_double(tok, v)) {
                error(line.number, path + "." + key + ": bad number '" + tok + "'");
                attrs_.erase(it);
                return {};
            }
            out.push_back(v);
        }
        if (n >= 0 && static_cast<int>(out.size()) != n)
            error(line.number, path + "." + key + ": expected " + std::to_string(n) +
                                   " values, got " + std::to_string(out.size()));
        attrs_.erase(it);
        return out;
    }

    // Sequence of (re im) groups.
    std::vector<cx> parse_complex_list(const Line& line, const std::string& what) {
        std::vector<cx> out;
        std::size_t k = 1;
        while (k < line.tokens.size()) {
            if (line.tokens[k] != "(") {
                error(line.number, what + ": expected '(' starting a (re im) pair");
                return {};
            }
            if (k + 3 >= line.tokens.size()) {
                error(line.number, what + ": truncated (re im) pair");
                return {};
            }
            double re = 0.0, im = 0.0;
            if (!parse_double(line.tokens[k + 1], re) || !parse_double(line.tokens[k + 2], im)) {
                error(line.number, what + ": bad number in (re im) pair");
                return {};
            }
            if (line.tokens[k + 3] != ")") {
                error(line.number, what + ": expected ')' closing a (re im) pair");
                return {};
            }
            out.emplace_back(re, im);
            k += 4;
        }
        return out;
    }

    std::vector<cx> take_complexes(const std::string& key, const std::string& path, int n) {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) return {};
        const Line line = it->second.line;
        attrs_.erase(it);
        std::vector<cx> out = parse_complex_list(line, path + "." + key);
        if (!out.empty() && n >= 0 && static_cast<int>(out.size()) != n)
            error(line.number, path + "." + key + ": expected " + std::to_string(n) +
                                   " complex (re im) pairs, got " + std::to_string(out.size()));
        return out;
    }

    CMat take_matrix(const std::string& key, const std::string& path, int n, bool required) {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) {
            if (required) error(open_line_, path + ": missing '" + key + "'");
            return CMat();
        }
        const Line line = it->second.line;
        attrs_.erase(it);
        std::vector<cx> vals = parse_complex_list(line, path + "." + key);
        if (static_cast<int>(vals.size()) != n * n) {
            error(line.number, path + "." + key + ": expected " + std::to_string(n * n) +
                                   " complex (re im) pairs, got " + std::to_string(vals.size()));
            return CMat(n);
        }
        CMat m(n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m.at(r, c) = vals[static_cast<std::size_t>(r * n + c)];
        return m;
    }

    void reject_leftovers(const std::string& path) {
        for (const auto& [key, attr] : attrs_)
            error(attr.line.number, path + ": unknown attribute '" + key + "'");
        attrs_.clear();
    }

    int element_line(const std::string& validation_path) const {
        // Longest element prefix that matches, e.g. "branch line1.z_series".
        for (const auto& [prefix, line] : element_lines_)
            if (validation_path.rfind(prefix, 0) == 0) return line;
        return 1;
    }

    void error(int line, const std::string& message) {
        diags_->push_back({ParseDiagnostic::Severity::error, line, message});
    }

    std::vector<Line> lines_;
    std::vector<ParseDiagnostic>* diags_ = nullptr;
    Network net_;
    std::string open_block_;
    std::string open_id_;
    int open_line_ = 0;
    std::map<std::string, Attr> attrs_;
    std::map<std::string, int> element_lines_;
};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_reals(std::ostringstream& os, const char* key, const std::vector<double>& v) {
    if (v.empty()) return;
    os << "  " << key;
    for (double x : v) {
        if (std::isinf(x))
            os << " unbounded";
        else
            os << " " << fmt_double(x);
    }
    os << "\n";
}

void write_complexes(std::ostringstream& os, const char* key, const std::vector<cx>& v) {
    if (v.empty()) return;
    os << "  " << key;
    for (cx x : v) os << " (" << fmt_double(x.real()) << " " << fmt_double(x.imag()) << ")";
    os << "\n";
}

void write_matrix(std::ostringstream& os, const char* key, const CMat& m) {
    if (m.rows() == 0) return;
    os << "  " << key;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            os << " (" << fmt_double(m.at(r, c).real()) << " " << fmt_double(m.at(r, c).imag()) << ")";
    os << "\n";
}

}  // namespace

ParseResult parse_native(std::string_view text) { return NativeParser(text).run(); }

std::string write_native(const Network& net) {
    std::ostringstream os;
    os << "triflow-net 1\n";
    if (!net.name.empty()) os << "name " << net.name << "\n";
    os << "unit_system " << (net.unit_system == UnitSystem::si ? "si" : "per_unit") << "\n";
    os << "sbase " << fmt_double(net.sbase) << "\n";
    os << "vbase " << fmt_double(net.vbase) << "\n";
    os << "frequency " << fmt_double(net.frequency) << "\n";
    for (const Bus& b : net.buses) {
        os << "\nbus " << b.id << "\n";
        os << "  phases " << b.phases.str() << "\n";
        if (b.vbase > 0.0) os << "  vbase " << fmt_double(b.vbase) << "\n";
        write_reals(os, "vmin", b.vmin);
        write_reals(os, "vmax", b.vmax);
        write_reals(os, "pad_min", b.pad_min);
        write_reals(os, "pad_max", b.pad_max);
        if (b.is_reference) write_complexes(os, "ref", b.vref);
        os << "end\n";
    }
    for (const Branch& br : net.branches) {
        os << "\nbranch " << br.id << "\n";
        os << "  from " << br.from_bus << "\n";
        os << "  to " << br.to_bus << "\n";
        os << "  phases " << br.phases.str() << "\n";
        write_matrix(os, "z_series", br.z_series);
        if (!br.y_sh_from.is_zero()) write_matrix(os, "y_sh_from", br.y_sh_from);
        if (!br.y_sh_to.is_zero()) write_matrix(os, "y_sh_to", br.y_sh_to);
        write_reals(os, "i_rated", br.i_rated);
        write_reals(os, "s_rated", br.s_rated);
        write_reals(os, "vad_min", br.vad_min);
        write_reals(os, "vad_max", br.vad_max);
        os << "end\n";
    }
    for (const Unit& u : net.units) {
        os << "\nunit " << u.id << "\n";
        os << "  bus " << u.bus << "\n";
        os << "  phases " << u.phases.str() << "\n";
        write_reals(os, "p_min", u.p_min);
        write_reals(os, "p_max", u.p_max);
        write_reals(os, "q_min", u.q_min);
        write_reals(os, "q_max", u.q_max);
        write_reals(os, "i_rated", u.i_rated);
        if (u.setpoint) write_complexes(os, "setpoint", *u.setpoint);
        os << "end\n";
    }
    for (const Shunt& sh : net.shunts) {
        os << "\nshunt " << sh.id << "\n";
        os << "  bus " << sh.bus << "\n";
        os << "  phases " << sh.phases.str() << "\n";
        write_matrix(os, "y", sh.y);
        write_reals(os, "i_rated", sh.i_rated);
        os << "end\n";
    }
    return os.str();
}

}  // namespace triflow
