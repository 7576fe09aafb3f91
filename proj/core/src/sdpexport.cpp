#include "triflow/sdpexport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace triflow {

namespace {

std::string pid(Phase p) { return std::string(1, phase_letter(p)); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Affine combination of scalar variables; the building block for rows,
/// block entries and objectives.
struct Expr {
    std::map<int, double> coeffs;
    double constant = 0.0;

    void add(int var, double c) {
        if (c == 0.0) return;
        coeffs[var] += c;
        if (coeffs[var] == 0.0) coeffs.erase(var);
    }
    Expr& operator+=(const Expr& o) {
        for (auto [v, c] : o.coeffs) add(v, c);
        constant += o.constant;
        return *this;
    }
    Expr operator+(const Expr& o) const {
        Expr r = *this;
        r += o;
        return r;
    }
    Expr operator-(const Expr& o) const {
        Expr r = *this;
        for (auto [v, c] : o.coeffs) r.add(v, -c);
        r.constant -= o.constant;
        return r;
    }
    Expr operator*(double f) const {
        Expr r;
        for (auto [v, c] : coeffs) r.add(v, c * f);
        r.constant = constant * f;
        return r;
    }
};

/// Matrix of affine expressions split into real and imaginary parts.
struct ExprMat {
    int rows = 0, cols = 0;
    std::vector<Expr> re, im;

    ExprMat() = default;
    ExprMat(int r, int c) : rows(r), cols(c), re(static_cast<std::size_t>(r) * c), im(static_cast<std::size_t>(r) * c) {}

    Expr& re_at(int r, int c) { return re[static_cast<std::size_t>(r) * cols + c]; }
    Expr& im_at(int r, int c) { return im[static_cast<std::size_t>(r) * cols + c]; }
    const Expr& re_at(int r, int c) const { return re[static_cast<std::size_t>(r) * cols + c]; }
    const Expr& im_at(int r, int c) const { return im[static_cast<std::size_t>(r) * cols + c]; }

    ExprMat adjoint() const {
        ExprMat out(cols, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                out.re_at(c, r) = re_at(r, c);
                out.im_at(c, r) = im_at(r, c) * -1.0;
            }
        return out;
    }
    ExprMat operator+(const ExprMat& o) const {
        ExprMat out(rows, cols);
        for (std::size_t k = 0; k < re.size(); ++k) {
            out.re[k] = re[k] + o.re[k];
            out.im[k] = im[k] + o.im[k];
        }
        return out;
    }
    ExprMat operator-(const ExprMat& o) const {
        ExprMat out(rows, cols);
        for (std::size_t k = 0; k < re.size(); ++k) {
            out.re[k] = re[k] - o.re[k];
            out.im[k] = im[k] - o.im[k];
        }
        return out;
    }
};

// constant * expr-matrix
ExprMat mul(const CMat& a, const ExprMat& x) {
    ExprMat out(a.rows(), x.cols);
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < x.cols; ++c) {
            Expr re, im;
            for (int k = 0; k < a.cols(); ++k) {
                const double ar = a.at(r, k).real();
                const double ai = a.at(r, k).imag();
                re += x.re_at(k, c) * ar - x.im_at(k, c) * ai;
                im += x.re_at(k, c) * ai + x.im_at(k, c) * ar;
            }
            out.re_at(r, c) = re;
            out.im_at(r, c) = im;
        }
    return out;
}

// expr-matrix * constant
ExprMat mul(const ExprMat& x, const CMat& a) {
    ExprMat out(x.rows, a.cols());
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < a.cols(); ++c) {
            Expr re, im;
            for (int k = 0; k < x.cols; ++k) {
                const double ar = a.at(k, c).real();
                const double ai = a.at(k, c).imag();
                re += x.re_at(r, k) * ar - x.im_at(r, k) * ai;
                im += x.re_at(r, k) * ai + x.im_at(r, k) * ar;
            }
            out.re_at(r, c) = re;
            out.im_at(r, c) = im;
        }
    return out;
}

class ProblemBuilder {
  public:
    explicit ProblemBuilder(const Network& pu_net) : net_(pu_net) {}

    int add_var(const std::string& symbol, const std::string& entity, const std::string& pair) {
        problem_.vars.push_back({symbol, entity, pair});
        return static_cast<int>(problem_.vars.size()) - 1;
    }

    void add_row(const std::string& name, char relation, const Expr& lhs, double rhs) {
        LinearRow row;
        row.name = name;
        row.relation = relation;
        row.rhs = rhs - lhs.constant;
        for (auto [v, c] : lhs.coeffs) row.coeffs.emplace_back(v, c);
        problem_.rows.push_back(std::move(row));
    }

    /// Hermitian variable bundle (W or L): one scalar per unique entry.
    struct HermVars {
        int n = 0;
        std::vector<int> re_idx;  // (p <= q) row-major upper
        std::vector<int> im_idx;  // (p < q)
        int re(int p, int q) const {
            if (p > q) std::swap(p, q);
            return re_idx[static_cast<std::size_t>(p * n - p * (p + 1) / 2 + q)];
        }
        // sign-carrying imaginary lookup: im[p][q] = sign * var
        std::pair<int, double> im(int p, int q) const {
            if (p == q) return {-1, 0.0};
            double sign = 1.0;
            if (p > q) {
                std::swap(p, q);
                sign = -1.0;
            }
            return {im_idx[static_cast<std::size_t>(p * n - p * (p + 1) / 2 + q - (p + 1))], sign};
        }
    };

    HermVars add_hermitian(const std::string& symbol, const std::string& entity, const PhaseSet& ps) {
        HermVars h;
        h.n = ps.size();
        for (int p = 0; p < h.n; ++p)
            for (int q = p; q < h.n; ++q)
                h.re_idx.push_back(add_var(symbol + "_re", entity, pid(ps.member(p)) + pid(ps.member(q))));
        for (int p = 0; p < h.n; ++p)
            for (int q = p + 1; q < h.n; ++q)
                h.im_idx.push_back(add_var(symbol + "_im", entity, pid(ps.member(p)) + pid(ps.member(q))));
        return h;
    }

    struct FullVars {
        int rows = 0, cols = 0;
        std::vector<int> re_idx, im_idx;  // row-major
        int re(int p, int q) const { return re_idx[static_cast<std::size_t>(p * cols + q)]; }
        int im(int p, int q) const { return im_idx[static_cast<std::size_t>(p * cols + q)]; }
    };

    FullVars add_full(const std::string& re_symbol, const std::string& im_symbol,
                      const std::string& entity, const PhaseSet& row_ps, const PhaseSet& col_ps) {
        FullVars f;
        f.rows = row_ps.size();
        f.cols = col_ps.size();
        for (int p = 0; p < f.rows; ++p)
            for (int q = 0; q < f.cols; ++q)
                f.re_idx.push_back(add_var(re_symbol, entity, pid(row_ps.member(p)) + pid(col_ps.member(q))));
        for (int p = 0; p < f.rows; ++p)
            for (int q = 0; q < f.cols; ++q)
                f.im_idx.push_back(add_var(im_symbol, entity, pid(row_ps.member(p)) + pid(col_ps.member(q))));
        return f;
    }

    ExprMat herm_expr(const HermVars& h, const std::vector<int>& keep) const {
        const int n = static_cast<int>(keep.size());
        ExprMat m(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                m.re_at(r, c).add(h.re(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]), 1.0);
                auto [var, sign] = h.im(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
                if (var >= 0) m.im_at(r, c).add(var, sign);
            }
        return m;
    }

    ExprMat full_expr(const FullVars& f) const {
        ExprMat m(f.rows, f.cols);
        for (int r = 0; r < f.rows; ++r)
            for (int c = 0; c < f.cols; ++c) {
                m.re_at(r, c).add(f.re(r, c), 1.0);
                m.im_at(r, c).add(f.im(r, c), 1.0);
            }
        return m;
    }

    /// Indices of the branch phases inside the bus phase set.
    static std::vector<int> keep_indices(const PhaseSet& bus_ps, const PhaseSet& branch_ps) {
        std::vector<int> keep;
        for (int k = 0; k < branch_ps.size(); ++k) keep.push_back(bus_ps.index_of(branch_ps.member(k)));
        return keep;
    }

    /// Real embedding [[Re, Im], [-Im, Re]] of a Hermitian expression
    /// block; only upper-triangle positions are stored.
    void add_psd_block(const std::string& name, const ExprMat& block) {
        const int n = block.rows;
        PsdBlockSpec spec;
        spec.name = name;
        spec.dim = 2 * n;
        auto push = [&spec](int r, int c, const Expr& e) {
            for (auto [v, coeff] : e.coeffs) spec.entries.push_back({r, c, v, coeff});
        };
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                push(i, j, block.re_at(i, j));
                push(i + n, j + n, block.re_at(i, j));
                if (i < j) {
                    push(i, j + n, block.im_at(i, j));
                    push(j, i + n, block.im_at(i, j) * -1.0);
                }
            }
        problem_.blocks.push_back(std::move(spec));
    }

    void pin_hermitian(const std::string& name, const HermVars& h, const Hermitian& value) {
        for (int p = 0; p < h.n; ++p)
            for (int q = p; q < h.n; ++q) {
                Expr e;
                e.add(h.re(p, q), 1.0);
                add_row(name + ".re", '=', e, value.re(p, q));
                if (q > p) {
                    Expr ei;
                    ei.add(h.im(p, q).first, 1.0);
                    add_row(name + ".im", '=', ei, value.im(p, q));
                }
            }
    }

    const Network& net_;
    ConicProblem problem_;
};

struct BfmLayout {
    std::vector<ProblemBuilder::HermVars> w;        // per bus
    std::vector<ProblemBuilder::FullVars> ss_from;  // per branch
    std::vector<ProblemBuilder::FullVars> ss_to;
    std::vector<ProblemBuilder::HermVars> l;
    std::vector<ProblemBuilder::FullVars> unit_pq;  // rows=1
};

void unit_rows(ProblemBuilder& b, const Network& net, const std::vector<int>& up_vars,
               const std::vector<int>& uq_vars, std::size_t unit_k) {
    const Unit& u = net.units[unit_k];
    for (int p = 0; p < u.phases.size(); ++p) {
        const std::string id = "unit." + u.id + "." + pid(u.phases.member(p));
        Expr ep, eq;
        ep.add(up_vars[static_cast<std::size_t>(p)], 1.0);
        eq.add(uq_vars[static_cast<std::size_t>(p)], 1.0);
        if (u.setpoint) {
            // Dispatch is fixed in power-flow fixtures; pin it so the
            // relaxation contains exactly the solved operating point.
            b.add_row(id + ".p", '=', ep, (*u.setpoint)[static_cast<std::size_t>(p)].real());
            b.add_row(id + ".q", '=', eq, (*u.setpoint)[static_cast<std::size_t>(p)].imag());
        }
        if (std::isfinite(u.p_min[static_cast<std::size_t>(p)]))
            b.add_row(id + ".p_lo", '>', ep, u.p_min[static_cast<std::size_t>(p)]);
        if (std::isfinite(u.p_max[static_cast<std::size_t>(p)]))
            b.add_row(id + ".p_hi", '>', ep * -1.0, -u.p_max[static_cast<std::size_t>(p)]);
        if (std::isfinite(u.q_min[static_cast<std::size_t>(p)]))
            b.add_row(id + ".q_lo", '>', eq, u.q_min[static_cast<std::size_t>(p)]);
        if (std::isfinite(u.q_max[static_cast<std::size_t>(p)]))
            b.add_row(id + ".q_hi", '>', eq * -1.0, -u.q_max[static_cast<std::size_t>(p)]);
    }
}

void voltage_rows(ProblemBuilder& b, const Network& net, const std::vector<ProblemBuilder::HermVars>& w) {
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& bus = net.buses[k];
        if (bus.is_reference) continue;  // pinned by the reference rows
        for (int p = 0; p < bus.phases.size(); ++p) {
            const std::string id = "vm." + bus.id + "." + pid(bus.phases.member(p));
            Expr diag;
            diag.add(w[k].re(p, p), 1.0);
            const double lo = bus.vmin[static_cast<std::size_t>(p)];
            if (lo > 0.0) b.add_row(id + ".lo", '>', diag, lo * lo);
            const double hi = bus.vmax[static_cast<std::size_t>(p)];
            if (std::isfinite(hi)) b.add_row(id + ".hi", '>', diag * -1.0, -hi * hi);
        }
        for (int p = 0; p < bus.phases.size(); ++p)
            for (int q = p; q < bus.phases.size(); ++q) {
                const double cap = bus.vmax[static_cast<std::size_t>(p)] * bus.vmax[static_cast<std::size_t>(q)];
                if (!std::isfinite(cap)) continue;
                const std::string id =
                    "w." + bus.id + "." + pid(bus.phases.member(p)) + pid(bus.phases.member(q));
                Expr re;
                re.add(w[k].re(p, q), 1.0);
                b.add_row(id + ".re.hi", '>', re * -1.0, -cap);
                b.add_row(id + ".re.lo", '>', re, -cap);
                if (q > p) {
                    Expr im;
                    im.add(w[k].im(p, q).first, 1.0);
                    b.add_row(id + ".im.hi", '>', im * -1.0, -cap);
                    b.add_row(id + ".im.lo", '>', im, -cap);
                }
            }
    }
}

}  // namespace

int ConicProblem::count_equalities() const {
    int n = 0;
    for (const auto& r : rows)
        if (r.relation == '=') ++n;
    return n;
}

int ConicProblem::count_inequalities() const {
    int n = 0;
    for (const auto& r : rows)
        if (r.relation == '>') ++n;
    return n;
}

int ConicProblem::var_index(const std::string& symbol, const std::string& entity,
                            const std::string& phase_pair) const {
    for (std::size_t k = 0; k < vars.size(); ++k)
        if (vars[k].symbol == symbol && vars[k].entity == entity && vars[k].phase_pair == phase_pair)
            return static_cast<int>(k);
    return -1;
}

ConicProblem build_bfm_sdp(const Network& net_in, SdpObjective objective) {
    const Network net = net_in.unit_system == UnitSystem::si ? to_per_unit(net_in) : net_in;
    if (!net.is_radial())
        throw Error(ErrorKind::input,
                    "meshed network: the branch-flow relaxation covers radial feeders only; use the "
                    "bus-injection export (--relaxation bim)");
    ValidationReport vr = validate(net);
    if (!vr.ok()) throw Error(ErrorKind::input, "invalid network:\n" + vr.to_text());

    ProblemBuilder b(net);
    BfmLayout vars;

    for (const Bus& bus : net.buses) vars.w.push_back(b.add_hermitian("w", bus.id, bus.phases));
    for (const Branch& br : net.branches) {
        vars.ss_from.push_back(b.add_full("ps", "qs", br.id + ".from", br.phases, br.phases));
        vars.ss_to.push_back(b.add_full("ps", "qs", br.id + ".to", br.phases, br.phases));
        vars.l.push_back(b.add_hermitian("l", br.id, br.phases));
    }
    std::vector<std::vector<int>> up(net.units.size()), uq(net.units.size());
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        for (int p = 0; p < u.phases.size(); ++p) {
            up[k].push_back(b.add_var("unit_p", u.id, pid(u.phases.member(p))));
            uq[k].push_back(b.add_var("unit_q", u.id, pid(u.phases.member(p))));
        }
    }

    // Nodal power mismatch accumulators over bus phases.
    std::vector<std::vector<Expr>> kcl_p(net.buses.size()), kcl_q(net.buses.size());
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        kcl_p[k].resize(static_cast<std::size_t>(net.buses[k].phases.size()));
        kcl_q[k].resize(static_cast<std::size_t>(net.buses[k].phases.size()));
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const int n = br.phases.size();

        const ExprMat w_i = b.herm_expr(vars.w[static_cast<std::size_t>(fi)],
                                        ProblemBuilder::keep_indices(bf.phases, br.phases));
        const ExprMat w_j = b.herm_expr(vars.w[static_cast<std::size_t>(ti)],
                                        ProblemBuilder::keep_indices(bt.phases, br.phases));
        std::vector<int> all(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) all[static_cast<std::size_t>(p)] = p;
        const ExprMat l = b.herm_expr(vars.l[k], all);
        const ExprMat ss_f = b.full_expr(vars.ss_from[k]);
        const ExprMat ss_t = b.full_expr(vars.ss_to[k]);

        const ExprMat s_tot_from = ss_f + mul(w_i, br.y_sh_from.adjoint());
        const ExprMat s_tot_to = ss_t + mul(w_j, br.y_sh_to.adjoint());
        const ExprMat loss =
            mul(w_i, br.y_sh_from.adjoint()) + mul(br.z_series, l) + mul(w_j, br.y_sh_to.adjoint());

        // Loss balance of the two directed total flows, full matrix.
        const ExprMat balance = s_tot_from + s_tot_to - loss;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const std::string id = "balance." + br.id + "." + pid(br.phases.member(r)) + pid(br.phases.member(c));
                b.add_row(id + ".p", '=', balance.re_at(r, c), 0.0);
                b.add_row(id + ".q", '=', balance.im_at(r, c), 0.0);
            }

        // Squared Ohm's law: W_j = W_i - S^s z^H - z S^sH + z L z^H.
        const ExprMat ohm = w_j - (w_i - mul(ss_f, br.z_series.adjoint()) -
                                   mul(br.z_series, ss_f.adjoint()) +
                                   mul(mul(br.z_series, l), br.z_series.adjoint()));
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) {
                const std::string id = "ohm." + br.id + "." + pid(br.phases.member(r)) + pid(br.phases.member(c));
                b.add_row(id + ".re", '=', ohm.re_at(r, c), 0.0);
                if (c > r) b.add_row(id + ".im", '=', ohm.im_at(r, c), 0.0);
            }

        for (int p = 0; p < n; ++p) {
            const int slot_f = bf.phases.index_of(br.phases.member(p));
            const int slot_t = bt.phases.index_of(br.phases.member(p));
            kcl_p[static_cast<std::size_t>(fi)][static_cast<std::size_t>(slot_f)] += s_tot_from.re_at(p, p);
            kcl_q[static_cast<std::size_t>(fi)][static_cast<std::size_t>(slot_f)] += s_tot_from.im_at(p, p);
            kcl_p[static_cast<std::size_t>(ti)][static_cast<std::size_t>(slot_t)] += s_tot_to.re_at(p, p);
            kcl_q[static_cast<std::size_t>(ti)][static_cast<std::size_t>(slot_t)] += s_tot_to.im_at(p, p);
        }

        // Linear total-current bounds through I I^H = L + y W y^H + y S^s
        // + (y S^s)^H, per direction, when the branch is rated.
        const bool rated = std::all_of(br.i_rated.begin(), br.i_rated.end(),
                                       [](double r) { return std::isfinite(r); });
        if (rated) {
            for (int side = 0; side < 2; ++side) {
                const bool from_side = side == 0;
                const CMat& ysh = from_side ? br.y_sh_from : br.y_sh_to;
                const ExprMat& w_end = from_side ? w_i : w_j;
                const ExprMat ss_dir = from_side ? ss_f : ss_t;
                const ExprMat ysl = mul(ysh, ss_dir);
                const ExprMat isq =
                    l + mul(mul(ysh, w_end), ysh.adjoint()) + ysl + ysl.adjoint();
                const std::string tag = from_side ? ".from." : ".to.";
                for (int p = 0; p < n; ++p) {
                    const std::string id = "itot." + br.id + tag + pid(br.phases.member(p));
                    b.add_row(id + ".psd", '>', isq.re_at(p, p), 0.0);
                    const double cap = br.i_rated[static_cast<std::size_t>(p)];
                    b.add_row(id + ".hi", '>', isq.re_at(p, p) * -1.0, -cap * cap);
                }
                for (int p = 0; p < n; ++p)
                    for (int q = p; q < n; ++q) {
                        const double cap = br.i_rated[static_cast<std::size_t>(p)] *
                                           br.i_rated[static_cast<std::size_t>(q)];
                        const std::string id =
                            "itot." + br.id + tag + pid(br.phases.member(p)) + pid(br.phases.member(q));
                        b.add_row(id + ".re.hi", '>', isq.re_at(p, q) * -1.0, -cap);
                        b.add_row(id + ".re.lo", '>', isq.re_at(p, q), -cap);
                        if (q > p) {
                            b.add_row(id + ".im.hi", '>', isq.im_at(p, q) * -1.0, -cap);
                            b.add_row(id + ".im.lo", '>', isq.im_at(p, q), -cap);
                        }
                    }
            }
        }

        // Angle difference via the substituted cross product
        // W_ij = W_i - S^s z^H; rows bound its diagonal tangent.
        const ExprMat w_ij = w_i - mul(ss_f, br.z_series.adjoint());
        for (int p = 0; p < n; ++p) {
            const double lo = br.vad_min[static_cast<std::size_t>(p)];
            const double hi = br.vad_max[static_cast<std::size_t>(p)];
            const std::string id = "vad." + br.id + "." + pid(br.phases.member(p));
            if (std::abs(std::cos(lo)) > 1e-9)
                b.add_row(id + ".lo", '>', w_ij.im_at(p, p) - w_ij.re_at(p, p) * std::tan(lo), 0.0);
            if (std::abs(std::cos(hi)) > 1e-9)
                b.add_row(id + ".hi", '>', w_ij.re_at(p, p) * std::tan(hi) - w_ij.im_at(p, p), 0.0);
        }
    }

    // Bus shunts enter the nodal balance as diag(W y^H).
    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const ExprMat w_sh = b.herm_expr(vars.w[static_cast<std::size_t>(bi)],
                                         ProblemBuilder::keep_indices(bus.phases, sh.phases));
        const ExprMat s_sh = mul(w_sh, sh.y.adjoint());
        for (int p = 0; p < sh.phases.size(); ++p) {
            const int slot = bus.phases.index_of(sh.phases.member(p));
            kcl_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.re_at(p, p);
            kcl_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.im_at(p, p);
        }
    }

    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const int slot = bus.phases.index_of(u.phases.member(p));
            Expr ep, eq;
            ep.add(up[k][static_cast<std::size_t>(p)], 1.0);
            eq.add(uq[k][static_cast<std::size_t>(p)], 1.0);
            kcl_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += ep;
            kcl_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += eq;
        }
        unit_rows(b, net, up[k], uq[k], k);
    }

    // Power balance at non-reference buses; reference buses act as the
    // slack injection and get their W pinned instead.
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& bus = net.buses[k];
        if (bus.is_reference) {
            CVec vref(bus.phases.size());
            for (int p = 0; p < bus.phases.size(); ++p) vref[p] = bus.vref[static_cast<std::size_t>(p)];
            b.pin_hermitian("ref." + bus.id, vars.w[k], Hermitian::from_outer(vref));
            continue;
        }
        for (int p = 0; p < bus.phases.size(); ++p) {
            const std::string id = "kcl." + bus.id + "." + pid(bus.phases.member(p));
            b.add_row(id + ".p", '=', kcl_p[k][static_cast<std::size_t>(p)], 0.0);
            b.add_row(id + ".q", '=', kcl_q[k][static_cast<std::size_t>(p)], 0.0);
        }
    }

    voltage_rows(b, net, vars.w);

    // PSD blocks: [[W_i, S^s], [S^sH, L]] per branch; an explicit W
    // block for buses that never appear on a sending side.
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const int n = br.phases.size();
        const ExprMat w_i = b.herm_expr(vars.w[static_cast<std::size_t>(fi)],
                                        ProblemBuilder::keep_indices(bf.phases, br.phases));
        std::vector<int> all(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) all[static_cast<std::size_t>(p)] = p;
        const ExprMat l = b.herm_expr(vars.l[k], all);
        const ExprMat ss_f = b.full_expr(vars.ss_from[k]);
        ExprMat block(2 * n, 2 * n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                block.re_at(r, c) = w_i.re_at(r, c);
                block.im_at(r, c) = w_i.im_at(r, c);
                block.re_at(r, n + c) = ss_f.re_at(r, c);
                block.im_at(r, n + c) = ss_f.im_at(r, c);
                block.re_at(n + r, c) = ss_f.re_at(c, r);
                block.im_at(n + r, c) = ss_f.im_at(c, r) * -1.0;
                block.re_at(n + r, n + c) = l.re_at(r, c);
                block.im_at(n + r, n + c) = l.im_at(r, c);
            }
        b.add_psd_block("branch." + br.id, block);
    }
    std::set<std::string> senders, receivers;
    for (const Branch& br : net.branches) {
        senders.insert(br.from_bus);
        receivers.insert(br.to_bus);
    }
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& bus = net.buses[k];
        if (senders.count(bus.id) || !receivers.count(bus.id)) continue;
        std::vector<int> all(static_cast<std::size_t>(bus.phases.size()));
        for (int p = 0; p < bus.phases.size(); ++p) all[static_cast<std::size_t>(p)] = p;
        b.add_psd_block("leaf." + bus.id, b.herm_expr(vars.w[k], all));
    }

    // Objective.
    Expr obj;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const ExprMat w_i = b.herm_expr(vars.w[static_cast<std::size_t>(fi)],
                                        ProblemBuilder::keep_indices(bf.phases, br.phases));
        const ExprMat w_j = b.herm_expr(vars.w[static_cast<std::size_t>(ti)],
                                        ProblemBuilder::keep_indices(bt.phases, br.phases));
        const ExprMat s_tot_from = b.full_expr(vars.ss_from[k]) + mul(w_i, br.y_sh_from.adjoint());
        const ExprMat s_tot_to = b.full_expr(vars.ss_to[k]) + mul(w_j, br.y_sh_to.adjoint());
        if (objective == SdpObjective::min_losses) {
            for (int p = 0; p < br.phases.size(); ++p)
                obj += s_tot_from.re_at(p, p) + s_tot_to.re_at(p, p);
        } else {
            if (net.buses[static_cast<std::size_t>(fi)].is_reference)
                for (int p = 0; p < br.phases.size(); ++p) obj += s_tot_from.re_at(p, p);
            if (net.buses[static_cast<std::size_t>(ti)].is_reference)
                for (int p = 0; p < br.phases.size(); ++p) obj += s_tot_to.re_at(p, p);
        }
    }
    for (auto [v, c] : obj.coeffs) b.problem_.objective.emplace_back(v, c);

    return std::move(b.problem_);
}

ConicProblem build_bim_sdp(const Network& net_in, SdpObjective objective) {
    const Network net = net_in.unit_system == UnitSystem::si ? to_per_unit(net_in) : net_in;
    ValidationReport vr = validate(net);
    if (!vr.ok()) throw Error(ErrorKind::input, "invalid network:\n" + vr.to_text());
    for (const Branch& br : net.branches)
        if (br.z_series.is_zero())
            throw Error(ErrorKind::input, "branch " + br.id +
                                              " has a zero series impedance; the bus-injection "
                                              "relaxation needs the admittance form");

    const bool radial = net.is_radial();

    ProblemBuilder b(net);
    std::vector<ProblemBuilder::HermVars> w;
    for (const Bus& bus : net.buses) w.push_back(b.add_hermitian("w", bus.id, bus.phases));

    // Cross products: per branch pair when radial; every bus pair when
    // meshed so the system block closes.
    std::map<std::pair<int, int>, ProblemBuilder::FullVars> wc;
    auto wc_key = [](int i, int j) { return std::make_pair(std::min(i, j), std::max(i, j)); };
    if (radial) {
        for (const Branch& br : net.branches) {
            const int fi = net.bus_index(br.from_bus);
            const int ti = net.bus_index(br.to_bus);
            const auto key = wc_key(fi, ti);
            if (wc.count(key)) continue;
            const Bus& bi = net.buses[static_cast<std::size_t>(key.first)];
            const Bus& bj = net.buses[static_cast<std::size_t>(key.second)];
            wc[key] = b.add_full("wc_re", "wc_im", bi.id + ":" + bj.id, bi.phases, bj.phases);
        }
    } else {
        for (int i = 0; i < static_cast<int>(net.buses.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(net.buses.size()); ++j)
                wc[{i, j}] = b.add_full("wc_re", "wc_im", net.buses[static_cast<std::size_t>(i)].id + ":" +
                                                              net.buses[static_cast<std::size_t>(j)].id,
                                        net.buses[static_cast<std::size_t>(i)].phases,
                                        net.buses[static_cast<std::size_t>(j)].phases);
    }

    std::vector<std::vector<int>> up(net.units.size()), uq(net.units.size());
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        for (int p = 0; p < u.phases.size(); ++p) {
            up[k].push_back(b.add_var("unit_p", u.id, pid(u.phases.member(p))));
            uq[k].push_back(b.add_var("unit_q", u.id, pid(u.phases.member(p))));
        }
    }

    std::vector<std::vector<Expr>> kcl_p(net.buses.size()), kcl_q(net.buses.size());
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        kcl_p[k].resize(static_cast<std::size_t>(net.buses[k].phases.size()));
        kcl_q[k].resize(static_cast<std::size_t>(net.buses[k].phases.size()));
    }

    Expr obj;
    for (const Branch& br : net.branches) {
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const CMat y_series = series_admittance(br);
        for (int side = 0; side < 2; ++side) {
            const int bus_i = side == 0 ? fi : ti;
            const int bus_j = side == 0 ? ti : fi;
            const Bus& bi = net.buses[static_cast<std::size_t>(bus_i)];
            const Bus& bj = net.buses[static_cast<std::size_t>(bus_j)];
            const CMat& ysh = side == 0 ? br.y_sh_from : br.y_sh_to;

            const ExprMat w_i = b.herm_expr(w[static_cast<std::size_t>(bus_i)],
                                            ProblemBuilder::keep_indices(bi.phases, br.phases));
            const auto key = wc_key(bus_i, bus_j);
            const ExprMat wc_full = b.full_expr(wc.at(key));
            const ExprMat wc_oriented = key.first == bus_i ? wc_full : wc_full.adjoint();
            // restrict the cross product to the branch phases
            ExprMat w_ij(br.phases.size(), br.phases.size());
            for (int r = 0; r < br.phases.size(); ++r)
                for (int c = 0; c < br.phases.size(); ++c) {
                    w_ij.re_at(r, c) = wc_oriented.re_at(bi.phases.index_of(br.phases.member(r)),
                                                         bj.phases.index_of(br.phases.member(c)));
                    w_ij.im_at(r, c) = wc_oriented.im_at(bi.phases.index_of(br.phases.member(r)),
                                                         bj.phases.index_of(br.phases.member(c)));
                }

            const ExprMat s_ij = mul(w_i, ysh.adjoint()) + mul(w_i - w_ij, y_series.adjoint());
            for (int p = 0; p < br.phases.size(); ++p) {
                const int slot = bi.phases.index_of(br.phases.member(p));
                kcl_p[static_cast<std::size_t>(bus_i)][static_cast<std::size_t>(slot)] += s_ij.re_at(p, p);
                kcl_q[static_cast<std::size_t>(bus_i)][static_cast<std::size_t>(slot)] += s_ij.im_at(p, p);
            }
            if (objective == SdpObjective::min_losses ||
                (objective == SdpObjective::min_total_injection && bi.is_reference))
                for (int p = 0; p < br.phases.size(); ++p) obj += s_ij.re_at(p, p);

            // Tangent angle-difference rows on the cross-product diagonal.
            if (side == 0) {
                for (int p = 0; p < br.phases.size(); ++p) {
                    const double lo = br.vad_min[static_cast<std::size_t>(p)];
                    const double hi = br.vad_max[static_cast<std::size_t>(p)];
                    const std::string id = "vad." + br.id + "." + pid(br.phases.member(p));
                    if (std::abs(std::cos(lo)) > 1e-9)
                        b.add_row(id + ".lo", '>', w_ij.im_at(p, p) - w_ij.re_at(p, p) * std::tan(lo), 0.0);
                    if (std::abs(std::cos(hi)) > 1e-9)
                        b.add_row(id + ".hi", '>', w_ij.re_at(p, p) * std::tan(hi) - w_ij.im_at(p, p), 0.0);
                }
            }
        }
    }

    // Cross-product entry bounds from the voltage caps.
    for (const auto& [key, f] : wc) {
        const Bus& bi = net.buses[static_cast<std::size_t>(key.first)];
        const Bus& bj = net.buses[static_cast<std::size_t>(key.second)];
        for (int p = 0; p < bi.phases.size(); ++p)
            for (int q = 0; q < bj.phases.size(); ++q) {
                const double cap = bi.vmax[static_cast<std::size_t>(p)] * bj.vmax[static_cast<std::size_t>(q)];
                if (!std::isfinite(cap)) continue;
                const std::string id = "wc." + bi.id + ":" + bj.id + "." + pid(bi.phases.member(p)) +
                                       pid(bj.phases.member(q));
                Expr re, im;
                re.add(f.re(p, q), 1.0);
                im.add(f.im(p, q), 1.0);
                b.add_row(id + ".re.hi", '>', re * -1.0, -cap);
                b.add_row(id + ".re.lo", '>', re, -cap);
                b.add_row(id + ".im.hi", '>', im * -1.0, -cap);
                b.add_row(id + ".im.lo", '>', im, -cap);
            }
    }

    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const ExprMat w_sh = b.herm_expr(w[static_cast<std::size_t>(bi)],
                                         ProblemBuilder::keep_indices(bus.phases, sh.phases));
        const ExprMat s_sh = mul(w_sh, sh.y.adjoint());
        for (int p = 0; p < sh.phases.size(); ++p) {
            const int slot = bus.phases.index_of(sh.phases.member(p));
            kcl_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.re_at(p, p);
            kcl_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.im_at(p, p);
        }
    }

    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const int slot = bus.phases.index_of(u.phases.member(p));
            Expr ep, eq;
            ep.add(up[k][static_cast<std::size_t>(p)], 1.0);
            eq.add(uq[k][static_cast<std::size_t>(p)], 1.0);
            kcl_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += ep;
            kcl_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += eq;
        }
        unit_rows(b, net, up[k], uq[k], k);
    }

    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& bus = net.buses[k];
        if (bus.is_reference) {
            CVec vref(bus.phases.size());
            for (int p = 0; p < bus.phases.size(); ++p) vref[p] = bus.vref[static_cast<std::size_t>(p)];
            b.pin_hermitian("ref." + bus.id, w[k], Hermitian::from_outer(vref));
            continue;
        }
        for (int p = 0; p < bus.phases.size(); ++p) {
            const std::string id = "kcl." + bus.id + "." + pid(bus.phases.member(p));
            b.add_row(id + ".p", '=', kcl_p[k][static_cast<std::size_t>(p)], 0.0);
            b.add_row(id + ".q", '=', kcl_q[k][static_cast<std::size_t>(p)], 0.0);
        }
    }

    voltage_rows(b, net, w);

    if (radial) {
        std::set<std::pair<int, int>> done;
        for (const Branch& br : net.branches) {
            const auto key = wc_key(net.bus_index(br.from_bus), net.bus_index(br.to_bus));
            if (!done.insert(key).second) continue;
            const Bus& bi = net.buses[static_cast<std::size_t>(key.first)];
            const Bus& bj = net.buses[static_cast<std::size_t>(key.second)];
            const int ni = bi.phases.size();
            const int nj = bj.phases.size();
            std::vector<int> all_i(static_cast<std::size_t>(ni)), all_j(static_cast<std::size_t>(nj));
            for (int p = 0; p < ni; ++p) all_i[static_cast<std::size_t>(p)] = p;
            for (int p = 0; p < nj; ++p) all_j[static_cast<std::size_t>(p)] = p;
            const ExprMat w_i = b.herm_expr(w[static_cast<std::size_t>(key.first)], all_i);
            const ExprMat w_j = b.herm_expr(w[static_cast<std::size_t>(key.second)], all_j);
            const ExprMat cross = b.full_expr(wc.at(key));
            ExprMat block(ni + nj, ni + nj);
            for (int r = 0; r < ni; ++r)
                for (int c = 0; c < ni; ++c) {
                    block.re_at(r, c) = w_i.re_at(r, c);
                    block.im_at(r, c) = w_i.im_at(r, c);
                }
            for (int r = 0; r < ni; ++r)
                for (int c = 0; c < nj; ++c) {
                    block.re_at(r, ni + c) = cross.re_at(r, c);
                    block.im_at(r, ni + c) = cross.im_at(r, c);
                    block.re_at(ni + c, r) = cross.re_at(r, c);
                    block.im_at(ni + c, r) = cross.im_at(r, c) * -1.0;
                }
            for (int r = 0; r < nj; ++r)
                for (int c = 0; c < nj; ++c) {
                    block.re_at(ni + r, ni + c) = w_j.re_at(r, c);
                    block.im_at(ni + r, ni + c) = w_j.im_at(r, c);
                }
            b.add_psd_block("buspair." + bi.id + ":" + bj.id, block);
        }
    } else {
        int dim = 0;
        std::vector<int> offset(net.buses.size(), 0);
        for (std::size_t k = 0; k < net.buses.size(); ++k) {
            offset[k] = dim;
            dim += net.buses[k].phases.size();
        }
        ExprMat block(dim, dim);
        for (int i = 0; i < static_cast<int>(net.buses.size()); ++i) {
            const Bus& bi = net.buses[static_cast<std::size_t>(i)];
            std::vector<int> all(static_cast<std::size_t>(bi.phases.size()));
            for (int p = 0; p < bi.phases.size(); ++p) all[static_cast<std::size_t>(p)] = p;
            const ExprMat w_i = b.herm_expr(w[static_cast<std::size_t>(i)], all);
            for (int r = 0; r < bi.phases.size(); ++r)
                for (int c = 0; c < bi.phases.size(); ++c) {
                    block.re_at(offset[static_cast<std::size_t>(i)] + r, offset[static_cast<std::size_t>(i)] + c) = w_i.re_at(r, c);
                    block.im_at(offset[static_cast<std::size_t>(i)] + r, offset[static_cast<std::size_t>(i)] + c) = w_i.im_at(r, c);
                }
            for (int j = i + 1; j < static_cast<int>(net.buses.size()); ++j) {
                const Bus& bj = net.buses[static_cast<std::size_t>(j)];
                const ExprMat cross = b.full_expr(wc.at({i, j}));
                for (int r = 0; r < bi.phases.size(); ++r)
                    for (int c = 0; c < bj.phases.size(); ++c) {
                        block.re_at(offset[static_cast<std::size_t>(i)] + r, offset[static_cast<std::size_t>(j)] + c) = cross.re_at(r, c);
                        block.im_at(offset[static_cast<std::size_t>(i)] + r, offset[static_cast<std::size_t>(j)] + c) = cross.im_at(r, c);
                        block.re_at(offset[static_cast<std::size_t>(j)] + c, offset[static_cast<std::size_t>(i)] + r) = cross.re_at(r, c);
                        block.im_at(offset[static_cast<std::size_t>(j)] + c, offset[static_cast<std::size_t>(i)] + r) = cross.im_at(r, c) * -1.0;
                    }
            }
        }
        b.add_psd_block("system", block);
    }

    for (auto [v, c] : obj.coeffs) b.problem_.objective.emplace_back(v, c);
    return std::move(b.problem_);
}

std::string write_index_map(const ConicProblem& p) {
    std::ostringstream os;
    os << "triflow-sdpa-map 1\n";
    for (std::size_t k = 0; k < p.vars.size(); ++k)
        os << (k + 1) << " " << p.vars[k].symbol << " " << p.vars[k].entity << " "
           << p.vars[k].phase_pair << "\n";
    return os.str();
}

std::string write_sdpa(const ConicProblem& p) {
    // Standard sparse SDPA: minimize c^T x with
    // X = sum_i x_i F_i - F_0 psd, block diagonal. Linear rows form the
    // trailing diagonal block; an equality row becomes two opposed
    // inequalities (slots r and r+1).
    std::ostringstream os;
    os << "* triflow branch/bus relaxation export (sparse SDPA)\n";
    os << "* variables: " << p.vars.size() << "; psd blocks: " << p.blocks.size()
       << "; rows: " << p.rows.size() << " (" << p.count_equalities() << " eq, "
       << p.count_inequalities() << " ineq)\n";
    os << "* index map (1-based variable column -> symbol entity phases):\n";
    for (std::size_t k = 0; k < p.vars.size(); ++k)
        os << "* " << (k + 1) << " " << p.vars[k].symbol << " " << p.vars[k].entity << " "
           << p.vars[k].phase_pair << "\n";

    const int diag_size = 2 * p.count_equalities() + p.count_inequalities();
    const int nblocks = static_cast<int>(p.blocks.size()) + (diag_size > 0 ? 1 : 0);

    os << p.vars.size() << "\n";
    os << nblocks << "\n";
    for (std::size_t k = 0; k < p.blocks.size(); ++k) os << (k ? " " : "") << p.blocks[k].dim;
    if (diag_size > 0) os << (p.blocks.empty() ? "" : " ") << -diag_size;
    os << "\n";

    std::vector<double> c(p.vars.size(), 0.0);
    for (auto [v, coeff] : p.objective) c[static_cast<std::size_t>(v)] += coeff;
    for (std::size_t k = 0; k < c.size(); ++k) os << (k ? " " : "") << fmt(c[k]);
    os << (c.empty() ? "0" : "") << "\n";

    for (std::size_t bk = 0; bk < p.blocks.size(); ++bk)
        for (const PsdEntry& e : p.blocks[bk].entries)
            os << (e.var + 1) << " " << (bk + 1) << " " << (e.row + 1) << " " << (e.col + 1) << " "
               << fmt(e.coeff) << "\n";

    if (diag_size > 0) {
        const int diag_block = static_cast<int>(p.blocks.size()) + 1;
        int slot = 1;
        for (const LinearRow& row : p.rows) {
            const int repeats = row.relation == '=' ? 2 : 1;
            for (int rep = 0; rep < repeats; ++rep) {
                const double sign = rep == 0 ? 1.0 : -1.0;
                for (auto [v, coeff] : row.coeffs)
                    os << (v + 1) << " " << diag_block << " " << slot << " " << slot << " "
                       << fmt(sign * coeff) << "\n";
                if (row.rhs != 0.0)
                    os << 0 << " " << diag_block << " " << slot << " " << slot << " "
                       << fmt(sign * row.rhs) << "\n";
                ++slot;
            }
        }
    }
    return os.str();
}

SdpaFile parse_sdpa(const std::string& text) {
    SdpaFile f;
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> content;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '*' || line[0] == '"') continue;
        content.push_back(line);
    }
    if (content.size() < 4) throw Error(ErrorKind::input, "truncated SDPA file");
    f.m = std::stoi(content[0]);
    const int nblocks = std::stoi(content[1]);
    {
        std::istringstream bs(content[2]);
        int v;
        while (bs >> v) f.block_sizes.push_back(v);
        if (static_cast<int>(f.block_sizes.size()) != nblocks)
            throw Error(ErrorKind::input, "SDPA block size line does not match block count");
    }
    {
        std::istringstream cs(content[3]);
        double v;
        while (cs >> v) f.c.push_back(v);
    }
    for (std::size_t k = 4; k < content.size(); ++k) {
        std::istringstream es(content[k]);
        SdpaFile::Entry e;
        if (es >> e.matno >> e.block >> e.row >> e.col >> e.value) f.entries.push_back(e);
    }
    return f;
}

std::vector<double> conic_vector_from_lifted(const ConicProblem& p, const Network& pu_net,
                                             const LiftedState& s) {
    std::vector<double> x(p.vars.size(), 0.0);
    auto pair_of = [&](const std::string& pp, const PhaseSet& row_ps,
                       const PhaseSet& col_ps) -> std::pair<int, int> {
        const Phase r = pp[0] == 'a' ? Phase::a : (pp[0] == 'b' ? Phase::b : Phase::c);
        const Phase c = pp[1] == 'a' ? Phase::a : (pp[1] == 'b' ? Phase::b : Phase::c);
        return {row_ps.index_of(r), col_ps.index_of(c)};
    };

    for (std::size_t k = 0; k < p.vars.size(); ++k) {
        const ConicVar& v = p.vars[k];
        if (v.symbol == "w_re" || v.symbol == "w_im") {
            const int bi = pu_net.bus_index(v.entity);
            const auto [r, c] = pair_of(v.phase_pair, pu_net.buses[static_cast<std::size_t>(bi)].phases,
                                        pu_net.buses[static_cast<std::size_t>(bi)].phases);
            x[k] = v.symbol == "w_re" ? s.w[static_cast<std::size_t>(bi)].re(r, c)
                                      : s.w[static_cast<std::size_t>(bi)].im(r, c);
        } else if (v.symbol == "ps" || v.symbol == "qs") {
            std::string branch_id = v.entity;
            bool from_side = true;
            if (branch_id.size() > 5 && branch_id.substr(branch_id.size() - 5) == ".from")
                branch_id = branch_id.substr(0, branch_id.size() - 5);
            else if (branch_id.size() > 3 && branch_id.substr(branch_id.size() - 3) == ".to") {
                branch_id = branch_id.substr(0, branch_id.size() - 3);
                from_side = false;
            }
            for (std::size_t bk = 0; bk < pu_net.branches.size(); ++bk) {
                if (pu_net.branches[bk].id != branch_id) continue;
                const Branch& br = pu_net.branches[bk];
                const auto [r, c] = pair_of(v.phase_pair, br.phases, br.phases);
                const CMat ss = from_side
                                    ? s.s_series[bk]
                                    : br.z_series * s.l_series[bk].to_cmat() - s.s_series[bk];
                x[k] = v.symbol == "ps" ? ss.at(r, c).real() : ss.at(r, c).imag();
            }
        } else if (v.symbol == "l_re" || v.symbol == "l_im") {
            for (std::size_t bk = 0; bk < pu_net.branches.size(); ++bk) {
                if (pu_net.branches[bk].id != v.entity) continue;
                const Branch& br = pu_net.branches[bk];
                const auto [r, c] = pair_of(v.phase_pair, br.phases, br.phases);
                x[k] = v.symbol == "l_re" ? s.l_series[bk].re(r, c) : s.l_series[bk].im(r, c);
            }
        } else if (v.symbol == "wc_re" || v.symbol == "wc_im") {
            const auto colon = v.entity.find(':');
            const int bi = pu_net.bus_index(v.entity.substr(0, colon));
            const int bj = pu_net.bus_index(v.entity.substr(colon + 1));
            const CMat* cross = s.cross(bi, bj);
            if (!cross) continue;
            const CMat oriented = bi < bj ? *cross : cross->adjoint();
            const auto [r, c] = pair_of(v.phase_pair, pu_net.buses[static_cast<std::size_t>(bi)].phases,
                                        pu_net.buses[static_cast<std::size_t>(bj)].phases);
            x[k] = v.symbol == "wc_re" ? oriented.at(r, c).real() : oriented.at(r, c).imag();
        } else if (v.symbol == "unit_p" || v.symbol == "unit_q") {
            for (std::size_t uk = 0; uk < pu_net.units.size(); ++uk) {
                if (pu_net.units[uk].id != v.entity) continue;
                const Unit& u = pu_net.units[uk];
                const Phase ph = v.phase_pair[0] == 'a' ? Phase::a
                                                        : (v.phase_pair[0] == 'b' ? Phase::b : Phase::c);
                const int idx = u.phases.index_of(ph);
                x[k] = v.symbol == "unit_p" ? s.unit_p[uk][static_cast<std::size_t>(idx)]
                                            : s.unit_q[uk][static_cast<std::size_t>(idx)];
            }
        }
    }
    return x;
}

}  // namespace triflow
