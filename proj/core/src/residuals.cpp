#include "triflow/residuals.hpp"

#include <algorithm>
#include <cmath>

namespace triflow {

double ResidualGroup::inf_norm() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, std::abs(e.value));
    return m;
}

double ResidualReport::inf_norm() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.inf_norm());
    return m;
}

const ResidualGroup* ResidualReport::find(const std::string& name) const {
    for (const auto& g : groups)
        if (g.name == name) return &g;
    return nullptr;
}

namespace {

constexpr double kDivGuard = 1e-9;  // pu; exactness needs nonzero voltage

std::string pid(Phase p) { return std::string(1, phase_letter(p)); }

void sort_entries(ResidualGroup& g) {
    std::stable_sort(g.entries.begin(), g.entries.end(),
                     [](const ResidualEntry& a, const ResidualEntry& b) { return a.id < b.id; });
}

ResidualReport finish(std::vector<ResidualGroup> groups) {
    for (auto& g : groups) sort_entries(g);
    ResidualReport rep;
    rep.groups = std::move(groups);
    return rep;
}

CVec restrict_vec(const CVec& v, const PhaseSet& bus_ps, const PhaseSet& branch_ps) {
    CVec out(branch_ps.size());
    for (int k = 0; k < branch_ps.size(); ++k) out[k] = v[bus_ps.index_of(branch_ps.member(k))];
    return out;
}

CMat restrict_mat(const Hermitian& h, const PhaseSet& bus_ps, const PhaseSet& branch_ps) {
    CMat out(branch_ps.size());
    for (int r = 0; r < branch_ps.size(); ++r)
        for (int c = 0; c < branch_ps.size(); ++c)
            out.at(r, c) = h.at(bus_ps.index_of(branch_ps.member(r)), bus_ps.index_of(branch_ps.member(c)));
    return out;
}

CMat restrict_cross(const CMat& m, const PhaseSet& row_ps, const PhaseSet& row_sub,
                    const PhaseSet& col_ps, const PhaseSet& col_sub) {
    CMat out(row_sub.size(), col_sub.size());
    for (int r = 0; r < row_sub.size(); ++r)
        for (int c = 0; c < col_sub.size(); ++c)
            out.at(r, c) = m.at(row_ps.index_of(row_sub.member(r)), col_ps.index_of(col_sub.member(c)));
    return out;
}

struct BranchSide {
    int bus = 0;            // sending-side bus index
    int other = 0;          // receiving-side bus index
    bool from_side = true;  // direction of this row set
    std::string tag;        // "from" or "to"
};

std::array<BranchSide, 2> branch_sides(const Network& net, const Branch& br) {
    const int fi = net.bus_index(br.from_bus);
    const int ti = net.bus_index(br.to_bus);
    return {BranchSide{fi, ti, true, "from"}, BranchSide{ti, fi, false, "to"}};
}

void require_nonzero_impedance(const Network& net) {
    for (const Branch& br : net.branches)
        if (br.z_series.is_zero())
            throw Error(ErrorKind::input,
                        "branch " + br.id +
                            " has a zero series impedance; the admittance-form evaluators cannot "
                            "represent it (use the current-voltage or lifted branch-flow form)");
}

}  // namespace

ResidualReport residual_iv(const Network& net_in, const IVState& s_in) {
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const IVState s = si ? state_to_per_unit(net_in, s_in) : s_in;

    ResidualGroup ohm{"ohm", {}};
    ResidualGroup kcl{"kcl", {}};
    ResidualGroup ref{"ref", {}};

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const Bus& bf = net.buses[static_cast<std::size_t>(net.bus_index(br.from_bus))];
        const Bus& bt = net.buses[static_cast<std::size_t>(net.bus_index(br.to_bus))];
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.from_bus))], bf.phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.to_bus))], bt.phases, br.phases);
        const CVec drop = vt - vf + br.z_series * s.i_series[k];
        for (int p = 0; p < br.phases.size(); ++p)
            ohm.entries.push_back({br.id + "." + pid(br.phases.member(p)), std::abs(drop[p])});
    }

    std::vector<CVec> mismatch;
    mismatch.reserve(net.buses.size());
    for (const Bus& b : net.buses) mismatch.emplace_back(b.phases.size());

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bus = net.buses[static_cast<std::size_t>(side.bus)];
            const CVec v_end = restrict_vec(s.v[static_cast<std::size_t>(side.bus)], bus.phases, br.phases);
            const CVec i_dir = branch_total_current(br, v_end, s.i_series[k], side.from_side);
            for (int p = 0; p < br.phases.size(); ++p) {
                const int slot = bus.phases.index_of(br.phases.member(p));
                mismatch[static_cast<std::size_t>(side.bus)][slot] += i_dir[p];
            }
        }
    }
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const CVec v_u = restrict_vec(s.v[static_cast<std::size_t>(bi)], bus.phases, u.phases);
        const CVec iu = unit_current(s.unit_s[k], v_u, kDivGuard);
        for (int p = 0; p < u.phases.size(); ++p)
            mismatch[static_cast<std::size_t>(bi)][bus.phases.index_of(u.phases.member(p))] += iu[p];
    }
    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const CVec v_sh = restrict_vec(s.v[static_cast<std::size_t>(bi)], bus.phases, sh.phases);
        const CVec ish = sh.y * v_sh;
        for (int p = 0; p < sh.phases.size(); ++p)
            mismatch[static_cast<std::size_t>(bi)][bus.phases.index_of(sh.phases.member(p))] += ish[p];
    }

    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        if (b.is_reference) {
            for (int p = 0; p < b.phases.size(); ++p)
                ref.entries.push_back({b.id + "." + pid(b.phases.member(p)),
                                       std::abs(s.v[k][p] - b.vref[static_cast<std::size_t>(p)])});
        } else {
            for (int p = 0; p < b.phases.size(); ++p)
                kcl.entries.push_back({b.id + "." + pid(b.phases.member(p)), std::abs(mismatch[k][p])});
        }
    }

    return finish({std::move(ohm), std::move(kcl), std::move(ref)});
}

namespace {

// Scalar power flow of one branch direction in polar coordinates; the
// shared quadratic pattern also covers the bus-shunt expression when the
// "remote" terms are dropped.
struct TrigFlows {
    std::vector<double> p, q;
};

TrigFlows polar_direction_flow(const std::vector<double>& vm_i, const std::vector<double>& va_i,
                               const std::vector<double>& vm_j, const std::vector<double>& va_j,
                               const CMat& y_series, const CMat& y_shunt) {
    const int n = y_series.rows();
    TrigFlows out;
    out.p.assign(static_cast<std::size_t>(n), 0.0);
    out.q.assign(static_cast<std::size_t>(n), 0.0);
    for (int p = 0; p < n; ++p) {
        double acc_p = 0.0, acc_q = 0.0;
        for (int q = 0; q < n; ++q) {
            const double g = y_series.at(p, q).real();
            const double b = y_series.at(p, q).imag();
            const double gt = g + y_shunt.at(p, q).real();
            const double bt = b + y_shunt.at(p, q).imag();
            const double own = vm_i[static_cast<std::size_t>(p)] * vm_i[static_cast<std::size_t>(q)];
            const double d_own = va_i[static_cast<std::size_t>(p)] - va_i[static_cast<std::size_t>(q)];
            const double rem = vm_i[static_cast<std::size_t>(p)] * vm_j[static_cast<std::size_t>(q)];
            const double d_rem = va_i[static_cast<std::size_t>(p)] - va_j[static_cast<std::size_t>(q)];
            acc_p += own * std::cos(d_own) * gt + own * std::sin(d_own) * bt;
            acc_p -= rem * std::cos(d_rem) * g + rem * std::sin(d_rem) * b;
            acc_q += -own * std::cos(d_own) * bt + own * std::sin(d_own) * gt;
            acc_q += rem * std::cos(d_rem) * b - rem * std::sin(d_rem) * g;
        }
        out.p[static_cast<std::size_t>(p)] = acc_p;
        out.q[static_cast<std::size_t>(p)] = acc_q;
    }
    return out;
}

TrigFlows polar_shunt_power(const std::vector<double>& vm, const std::vector<double>& va,
                            const CMat& y) {
    const int n = y.rows();
    TrigFlows out;
    out.p.assign(static_cast<std::size_t>(n), 0.0);
    out.q.assign(static_cast<std::size_t>(n), 0.0);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            const double g = y.at(p, q).real();
            const double b = y.at(p, q).imag();
            const double vv = vm[static_cast<std::size_t>(p)] * vm[static_cast<std::size_t>(q)];
            const double d = va[static_cast<std::size_t>(p)] - va[static_cast<std::size_t>(q)];
            out.p[static_cast<std::size_t>(p)] += vv * std::cos(d) * g + vv * std::sin(d) * b;
            out.q[static_cast<std::size_t>(p)] += -vv * std::cos(d) * b + vv * std::sin(d) * g;
        }
    }
    return out;
}

std::vector<double> sub_vm(const std::vector<double>& v, const PhaseSet& bus_ps, const PhaseSet& sub) {
    std::vector<double> out(static_cast<std::size_t>(sub.size()));
    for (int k = 0; k < sub.size(); ++k) out[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(bus_ps.index_of(sub.member(k)))];
    return out;
}

PolarState polar_to_pu(const Network& si_net, const PolarState& s) {
    PolarState out = s;
    for (std::size_t k = 0; k < si_net.buses.size(); ++k) {
        const double vb = si_net.bus_vbase(static_cast<int>(k));
        for (double& x : out.vm[k]) x /= vb;
    }
    auto scale_flows = [&](std::vector<std::vector<double>>& f) {
        for (auto& row : f)
            for (double& x : row) x /= si_net.sbase;
    };
    scale_flows(out.branch_p_from);
    scale_flows(out.branch_q_from);
    scale_flows(out.branch_p_to);
    scale_flows(out.branch_q_to);
    scale_flows(out.unit_p);
    scale_flows(out.unit_q);
    return out;
}

RectState rect_to_pu(const Network& si_net, const RectState& s) {
    RectState out = s;
    for (std::size_t k = 0; k < si_net.buses.size(); ++k) {
        const double vb = si_net.bus_vbase(static_cast<int>(k));
        for (double& x : out.vre[k]) x /= vb;
        for (double& x : out.vim[k]) x /= vb;
    }
    auto scale_flows = [&](std::vector<std::vector<double>>& f) {
        for (auto& row : f)
            for (double& x : row) x /= si_net.sbase;
    };
    scale_flows(out.branch_p_from);
    scale_flows(out.branch_q_from);
    scale_flows(out.branch_p_to);
    scale_flows(out.branch_q_to);
    scale_flows(out.unit_p);
    scale_flows(out.unit_q);
    return out;
}

// Shared scalar-form KCL and reference rows for the polar and
// rectangular evaluators, which differ only in the flow expressions.
template <typename ShuntPQ, typename RefRows>
void scalar_kcl_and_ref(const Network& net, const std::vector<std::vector<double>>& branch_p_from,
                        const std::vector<std::vector<double>>& branch_q_from,
                        const std::vector<std::vector<double>>& branch_p_to,
                        const std::vector<std::vector<double>>& branch_q_to,
                        const std::vector<std::vector<double>>& unit_p,
                        const std::vector<std::vector<double>>& unit_q, ShuntPQ shunt_pq,
                        RefRows ref_rows, ResidualGroup& kcl_p, ResidualGroup& kcl_q,
                        ResidualGroup& ref) {
    std::vector<std::vector<double>> mis_p(net.buses.size()), mis_q(net.buses.size());
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        mis_p[k].assign(static_cast<std::size_t>(net.buses[k].phases.size()), 0.0);
        mis_q[k].assign(static_cast<std::size_t>(net.buses[k].phases.size()), 0.0);
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bus = net.buses[static_cast<std::size_t>(side.bus)];
            const auto& bp = side.from_side ? branch_p_from[k] : branch_p_to[k];
            const auto& bq = side.from_side ? branch_q_from[k] : branch_q_to[k];
            for (int p = 0; p < br.phases.size(); ++p) {
                const int slot = bus.phases.index_of(br.phases.member(p));
                mis_p[static_cast<std::size_t>(side.bus)][static_cast<std::size_t>(slot)] += bp[static_cast<std::size_t>(p)];
                mis_q[static_cast<std::size_t>(side.bus)][static_cast<std::size_t>(slot)] += bq[static_cast<std::size_t>(p)];
            }
        }
    }
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const int slot = bus.phases.index_of(u.phases.member(p));
            mis_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += unit_p[k][static_cast<std::size_t>(p)];
            mis_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += unit_q[k][static_cast<std::size_t>(p)];
        }
    }
    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        TrigFlows f = shunt_pq(sh, bi);
        for (int p = 0; p < sh.phases.size(); ++p) {
            const int slot = bus.phases.index_of(sh.phases.member(p));
            mis_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += f.p[static_cast<std::size_t>(p)];
            mis_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += f.q[static_cast<std::size_t>(p)];
        }
    }
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        if (b.is_reference) {
            ref_rows(b, k, ref);
            continue;
        }
        for (int p = 0; p < b.phases.size(); ++p) {
            kcl_p.entries.push_back({b.id + "." + pid(b.phases.member(p)), mis_p[k][static_cast<std::size_t>(p)]});
            kcl_q.entries.push_back({b.id + "." + pid(b.phases.member(p)), mis_q[k][static_cast<std::size_t>(p)]});
        }
    }
}

}  // namespace

ResidualReport residual_polar(const Network& net_in, const PolarState& s_in) {
    require_nonzero_impedance(net_in);
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const PolarState s = si ? polar_to_pu(net_in, s_in) : s_in;

    ResidualGroup pf_p{"pf_p", {}}, pf_q{"pf_q", {}};
    ResidualGroup kcl_p{"kcl_p", {}}, kcl_q{"kcl_q", {}};
    ResidualGroup ref{"ref", {}};

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const CMat y_series = series_admittance(br);
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bi = net.buses[static_cast<std::size_t>(side.bus)];
            const Bus& bj = net.buses[static_cast<std::size_t>(side.other)];
            const CMat& ysh = side.from_side ? br.y_sh_from : br.y_sh_to;
            TrigFlows f = polar_direction_flow(
                sub_vm(s.vm[static_cast<std::size_t>(side.bus)], bi.phases, br.phases),
                sub_vm(s.va[static_cast<std::size_t>(side.bus)], bi.phases, br.phases),
                sub_vm(s.vm[static_cast<std::size_t>(side.other)], bj.phases, br.phases),
                sub_vm(s.va[static_cast<std::size_t>(side.other)], bj.phases, br.phases), y_series, ysh);
            const auto& bp = side.from_side ? s.branch_p_from[k] : s.branch_p_to[k];
            const auto& bq = side.from_side ? s.branch_q_from[k] : s.branch_q_to[k];
            for (int p = 0; p < br.phases.size(); ++p) {
                const std::string id = br.id + "." + side.tag + "." + pid(br.phases.member(p));
                pf_p.entries.push_back({id, bp[static_cast<std::size_t>(p)] - f.p[static_cast<std::size_t>(p)]});
                pf_q.entries.push_back({id, bq[static_cast<std::size_t>(p)] - f.q[static_cast<std::size_t>(p)]});
            }
        }
    }

    scalar_kcl_and_ref(
        net, s.branch_p_from, s.branch_q_from, s.branch_p_to, s.branch_q_to, s.unit_p, s.unit_q,
        [&](const Shunt& sh, int bi) {
            const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
            return polar_shunt_power(sub_vm(s.vm[static_cast<std::size_t>(bi)], bus.phases, sh.phases),
                                     sub_vm(s.va[static_cast<std::size_t>(bi)], bus.phases, sh.phases), sh.y);
        },
        [&](const Bus& b, std::size_t k, ResidualGroup& out) {
            for (int p = 0; p < b.phases.size(); ++p) {
                const cx vref = b.vref[static_cast<std::size_t>(p)];
                out.entries.push_back({b.id + ".vm." + pid(b.phases.member(p)),
                                       s.vm[k][static_cast<std::size_t>(p)] - std::abs(vref)});
                out.entries.push_back({b.id + ".va." + pid(b.phases.member(p)),
                                       wrap_angle(s.va[k][static_cast<std::size_t>(p)] - std::arg(vref))});
            }
        },
        kcl_p, kcl_q, ref);

    return finish({std::move(pf_p), std::move(pf_q), std::move(kcl_p), std::move(kcl_q), std::move(ref)});
}

namespace {

TrigFlows rect_direction_flow(const std::vector<double>& re_i, const std::vector<double>& im_i,
                              const std::vector<double>& re_j, const std::vector<double>& im_j,
                              const CMat& y_series, const CMat& y_shunt) {
    const int n = y_series.rows();
    TrigFlows out;
    out.p.assign(static_cast<std::size_t>(n), 0.0);
    out.q.assign(static_cast<std::size_t>(n), 0.0);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            const double g = y_series.at(p, q).real();
            const double b = y_series.at(p, q).imag();
            const double gt = g + y_shunt.at(p, q).real();
            const double bt = b + y_shunt.at(p, q).imag();
            const double own_c = re_i[static_cast<std::size_t>(p)] * re_i[static_cast<std::size_t>(q)] + im_i[static_cast<std::size_t>(p)] * im_i[static_cast<std::size_t>(q)];
            const double own_s = im_i[static_cast<std::size_t>(p)] * re_i[static_cast<std::size_t>(q)] - re_i[static_cast<std::size_t>(p)] * im_i[static_cast<std::size_t>(q)];
            const double rem_c = re_i[static_cast<std::size_t>(p)] * re_j[static_cast<std::size_t>(q)] + im_i[static_cast<std::size_t>(p)] * im_j[static_cast<std::size_t>(q)];
            const double rem_s = im_i[static_cast<std::size_t>(p)] * re_j[static_cast<std::size_t>(q)] - re_i[static_cast<std::size_t>(p)] * im_j[static_cast<std::size_t>(q)];
            out.p[static_cast<std::size_t>(p)] += own_c * gt + own_s * bt - rem_c * g - rem_s * b;
            out.q[static_cast<std::size_t>(p)] += -own_c * bt + own_s * gt + rem_c * b - rem_s * g;
        }
    }
    return out;
}

TrigFlows rect_shunt_power(const std::vector<double>& re, const std::vector<double>& im, const CMat& y) {
    const int n = y.rows();
    TrigFlows out;
    out.p.assign(static_cast<std::size_t>(n), 0.0);
    out.q.assign(static_cast<std::size_t>(n), 0.0);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            const double g = y.at(p, q).real();
            const double b = y.at(p, q).imag();
            const double cterm = re[static_cast<std::size_t>(p)] * re[static_cast<std::size_t>(q)] + im[static_cast<std::size_t>(p)] * im[static_cast<std::size_t>(q)];
            const double sterm = im[static_cast<std::size_t>(p)] * re[static_cast<std::size_t>(q)] - re[static_cast<std::size_t>(p)] * im[static_cast<std::size_t>(q)];
            out.p[static_cast<std::size_t>(p)] += cterm * g + sterm * b;
            out.q[static_cast<std::size_t>(p)] += -cterm * b + sterm * g;
        }
    }
    return out;
}

}  // namespace

ResidualReport residual_rect(const Network& net_in, const RectState& s_in) {
    require_nonzero_impedance(net_in);
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const RectState s = si ? rect_to_pu(net_in, s_in) : s_in;

    ResidualGroup pf_p{"pf_p", {}}, pf_q{"pf_q", {}};
    ResidualGroup kcl_p{"kcl_p", {}}, kcl_q{"kcl_q", {}};
    ResidualGroup ref{"ref", {}};

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const CMat y_series = series_admittance(br);
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bi = net.buses[static_cast<std::size_t>(side.bus)];
            const Bus& bj = net.buses[static_cast<std::size_t>(side.other)];
            const CMat& ysh = side.from_side ? br.y_sh_from : br.y_sh_to;
            TrigFlows f = rect_direction_flow(
                sub_vm(s.vre[static_cast<std::size_t>(side.bus)], bi.phases, br.phases),
                sub_vm(s.vim[static_cast<std::size_t>(side.bus)], bi.phases, br.phases),
                sub_vm(s.vre[static_cast<std::size_t>(side.other)], bj.phases, br.phases),
                sub_vm(s.vim[static_cast<std::size_t>(side.other)], bj.phases, br.phases), y_series, ysh);
            const auto& bp = side.from_side ? s.branch_p_from[k] : s.branch_p_to[k];
            const auto& bq = side.from_side ? s.branch_q_from[k] : s.branch_q_to[k];
            for (int p = 0; p < br.phases.size(); ++p) {
                const std::string id = br.id + "." + side.tag + "." + pid(br.phases.member(p));
                pf_p.entries.push_back({id, bp[static_cast<std::size_t>(p)] - f.p[static_cast<std::size_t>(p)]});
                pf_q.entries.push_back({id, bq[static_cast<std::size_t>(p)] - f.q[static_cast<std::size_t>(p)]});
            }
        }
    }

    scalar_kcl_and_ref(
        net, s.branch_p_from, s.branch_q_from, s.branch_p_to, s.branch_q_to, s.unit_p, s.unit_q,
        [&](const Shunt& sh, int bi) {
            const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
            return rect_shunt_power(sub_vm(s.vre[static_cast<std::size_t>(bi)], bus.phases, sh.phases),
                                    sub_vm(s.vim[static_cast<std::size_t>(bi)], bus.phases, sh.phases), sh.y);
        },
        [&](const Bus& b, std::size_t k, ResidualGroup& out) {
            for (int p = 0; p < b.phases.size(); ++p) {
                const cx vref = b.vref[static_cast<std::size_t>(p)];
                out.entries.push_back({b.id + ".re." + pid(b.phases.member(p)),
                                       s.vre[k][static_cast<std::size_t>(p)] - vref.real()});
                out.entries.push_back({b.id + ".im." + pid(b.phases.member(p)),
                                       s.vim[k][static_cast<std::size_t>(p)] - vref.imag()});
            }
        },
        kcl_p, kcl_q, ref);

    return finish({std::move(pf_p), std::move(pf_q), std::move(kcl_p), std::move(kcl_q), std::move(ref)});
}

namespace {

struct LiftedCommon {
    ResidualGroup kcl_p{"kcl_p", {}};
    ResidualGroup kcl_q{"kcl_q", {}};
    ResidualGroup ref{"ref", {}};
};

// KCL over diagonals of the total-flow matrices plus lifted shunt power
// diag(W y^H); reference rows pin W to the outer product of the phasor.
LiftedCommon lifted_kcl_and_ref(const Network& net, const LiftedState& s) {
    LiftedCommon out;
    std::vector<std::vector<double>> mis_p(net.buses.size()), mis_q(net.buses.size());
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        mis_p[k].assign(static_cast<std::size_t>(net.buses[k].phases.size()), 0.0);
        mis_q[k].assign(static_cast<std::size_t>(net.buses[k].phases.size()), 0.0);
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bus = net.buses[static_cast<std::size_t>(side.bus)];
            const CMat& st = side.from_side ? s.s_total_from[k] : s.s_total_to[k];
            for (int p = 0; p < br.phases.size(); ++p) {
                const int slot = bus.phases.index_of(br.phases.member(p));
                mis_p[static_cast<std::size_t>(side.bus)][static_cast<std::size_t>(slot)] += st.at(p, p).real();
                mis_q[static_cast<std::size_t>(side.bus)][static_cast<std::size_t>(slot)] += st.at(p, p).imag();
            }
        }
    }
    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const int slot = bus.phases.index_of(u.phases.member(p));
            mis_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s.unit_p[k][static_cast<std::size_t>(p)];
            mis_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s.unit_q[k][static_cast<std::size_t>(p)];
        }
    }
    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        CMat w_sh(sh.phases.size());
        for (int r = 0; r < sh.phases.size(); ++r)
            for (int c = 0; c < sh.phases.size(); ++c)
                w_sh.at(r, c) = s.w[static_cast<std::size_t>(bi)].at(bus.phases.index_of(sh.phases.member(r)),
                                                                     bus.phases.index_of(sh.phases.member(c)));
        const CMat s_sh = w_sh * sh.y.adjoint();
        for (int p = 0; p < sh.phases.size(); ++p) {
            const int slot = bus.phases.index_of(sh.phases.member(p));
            mis_p[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.at(p, p).real();
            mis_q[static_cast<std::size_t>(bi)][static_cast<std::size_t>(slot)] += s_sh.at(p, p).imag();
        }
    }
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        if (b.is_reference) {
            CVec vref(b.phases.size());
            for (int p = 0; p < b.phases.size(); ++p) vref[p] = b.vref[static_cast<std::size_t>(p)];
            const Hermitian pinned = Hermitian::from_outer(vref);
            for (int r = 0; r < b.phases.size(); ++r)
                for (int c = r; c < b.phases.size(); ++c)
                    out.ref.entries.push_back({b.id + "." + pid(b.phases.member(r)) + pid(b.phases.member(c)),
                                               std::abs(s.w[k].at(r, c) - pinned.at(r, c))});
            continue;
        }
        for (int p = 0; p < b.phases.size(); ++p) {
            out.kcl_p.entries.push_back({b.id + "." + pid(b.phases.member(p)), mis_p[k][static_cast<std::size_t>(p)]});
            out.kcl_q.entries.push_back({b.id + "." + pid(b.phases.member(p)), mis_q[k][static_cast<std::size_t>(p)]});
        }
    }
    return out;
}

void push_matrix_entries(ResidualGroup& re_group, ResidualGroup& im_group, const std::string& base,
                         const Branch& br, const CMat& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            const std::string id = base + "." + pid(br.phases.member(r)) + pid(br.phases.member(c));
            re_group.entries.push_back({id, m.at(r, c).real()});
            im_group.entries.push_back({id, m.at(r, c).imag()});
        }
}

LiftedState lifted_to_pu(const Network& net, const LiftedState& s) { return state_to_per_unit(net, s); }

}  // namespace

ResidualReport residual_bim_lifted(const Network& net_in, const LiftedState& s_in) {
    require_nonzero_impedance(net_in);
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const LiftedState s = si ? lifted_to_pu(net_in, s_in) : s_in;

    ResidualGroup pf_p{"pf_p", {}}, pf_q{"pf_q", {}};
    ResidualGroup hermitian{"hermitian", {}};
    ResidualGroup psd{"psd", {}}, rank{"rank", {}};

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const CMat y_series = series_admittance(br);
        for (const BranchSide& side : branch_sides(net, br)) {
            const Bus& bus_i = net.buses[static_cast<std::size_t>(side.bus)];
            const Bus& bus_j = net.buses[static_cast<std::size_t>(side.other)];
            const CMat w_i = restrict_mat(s.w[static_cast<std::size_t>(side.bus)], bus_i.phases, br.phases);
            const CMat* cross = s.cross(side.bus, side.other);
            if (!cross)
                throw Error(ErrorKind::input, "missing voltage cross product for branch " + br.id);
            CMat w_ij = side.bus < side.other ? *cross : cross->adjoint();
            w_ij = restrict_cross(w_ij, bus_i.phases, br.phases, bus_j.phases, br.phases);
            const CMat& ysh = side.from_side ? br.y_sh_from : br.y_sh_to;
            const CMat expr = w_i * ysh.adjoint() + (w_i - w_ij) * y_series.adjoint();
            const CMat& st = side.from_side ? s.s_total_from[k] : s.s_total_to[k];
            push_matrix_entries(pf_p, pf_q, br.id + "." + side.tag, br, st - expr);
        }
    }

    hermitian.entries.push_back({"w", s.w_defect});

    // Positive-semidefinite and rank-1 checks on the bus-pair blocks
    // [[W_i, W_ij], [W_ij^H, W_j]]; meshed topologies get one additional
    // block assembled over every bus pair.
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const int ni = bf.phases.size();
        const int nj = bt.phases.size();
        const CMat* cross = s.cross(fi, ti);
        if (!cross) throw Error(ErrorKind::input, "missing voltage cross product for branch " + br.id);
        const CMat w_ij = fi < ti ? *cross : cross->adjoint();
        CDense block(ni + nj);
        block.set_block(0, 0, s.w[static_cast<std::size_t>(fi)].to_cmat());
        block.set_block(0, ni, w_ij);
        block.set_block(ni, 0, w_ij.adjoint());
        block.set_block(ni, ni, s.w[static_cast<std::size_t>(ti)].to_cmat());
        psd.entries.push_back({br.id, psd_residual(block)});
        rank.entries.push_back({br.id, rank1_residual(block)});
    }
    if (!net.is_radial()) {
        bool complete = true;
        int dim = 0;
        std::vector<int> offset(net.buses.size(), 0);
        for (std::size_t k = 0; k < net.buses.size(); ++k) {
            offset[k] = dim;
            dim += net.buses[k].phases.size();
        }
        for (int i = 0; complete && i < static_cast<int>(net.buses.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(net.buses.size()); ++j)
                if (!s.cross(i, j)) {
                    complete = false;
                    break;
                }
        if (complete && dim > 0) {
            CDense system(dim);
            for (int i = 0; i < static_cast<int>(net.buses.size()); ++i) {
                system.set_block(offset[static_cast<std::size_t>(i)], offset[static_cast<std::size_t>(i)],
                                 s.w[static_cast<std::size_t>(i)].to_cmat());
                for (int j = i + 1; j < static_cast<int>(net.buses.size()); ++j) {
                    const CMat& c = *s.cross(i, j);
                    system.set_block(offset[static_cast<std::size_t>(i)], offset[static_cast<std::size_t>(j)], c);
                    system.set_block(offset[static_cast<std::size_t>(j)], offset[static_cast<std::size_t>(i)], c.adjoint());
                }
            }
            psd.entries.push_back({"system", psd_residual(system)});
            rank.entries.push_back({"system", rank1_residual(system)});
        }
    }

    LiftedCommon common = lifted_kcl_and_ref(net, s);
    return finish({std::move(pf_p), std::move(pf_q), std::move(common.kcl_p), std::move(common.kcl_q),
                   std::move(hermitian), std::move(psd), std::move(rank), std::move(common.ref)});
}

ResidualReport residual_bfm_lifted(const Network& net_in, const LiftedState& s_in) {
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const LiftedState s = si ? lifted_to_pu(net_in, s_in) : s_in;

    ResidualGroup balance_p{"balance_p", {}}, balance_q{"balance_q", {}};
    ResidualGroup ohm_re{"ohm_re", {}}, ohm_im{"ohm_im", {}};
    ResidualGroup link_p{"link_p", {}}, link_q{"link_q", {}};
    ResidualGroup psd{"psd", {}}, rank{"rank", {}};
    ResidualGroup hermitian{"hermitian", {}};

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const CMat w_i = restrict_mat(s.w[static_cast<std::size_t>(fi)], bf.phases, br.phases);
        const CMat w_j = restrict_mat(s.w[static_cast<std::size_t>(ti)], bt.phases, br.phases);
        const CMat& z = br.z_series;
        const CMat l = s.l_series[k].to_cmat();
        const CMat& ss = s.s_series[k];

        // Loss balance: both total flows against shunt + series losses.
        const CMat loss = w_i * br.y_sh_from.adjoint() + z * l + w_j * br.y_sh_to.adjoint();
        push_matrix_entries(balance_p, balance_q, br.id, br,
                            s.s_total_from[k] + s.s_total_to[k] - loss);

        // Squared Ohm's law; symmetric, so scalar rows cover the upper
        // triangle (plus the diagonal for the real part).
        const CMat ohm = w_j - (w_i - ss * z.adjoint() - z * ss.adjoint() + z * l * z.adjoint());
        for (int r = 0; r < br.phases.size(); ++r)
            for (int c = r; c < br.phases.size(); ++c) {
                const std::string id = br.id + "." + pid(br.phases.member(r)) + pid(br.phases.member(c));
                ohm_re.entries.push_back({id, ohm.at(r, c).real()});
                if (c > r) ohm_im.entries.push_back({id, ohm.at(r, c).imag()});
            }

        // Total flow equals series flow plus the sending-side shunt
        // share, per direction; the reverse series flow is z L - S^s.
        const CMat link_from = s.s_total_from[k] - (ss + w_i * br.y_sh_from.adjoint());
        const CMat ss_rev = z * l - ss;
        const CMat link_to = s.s_total_to[k] - (ss_rev + w_j * br.y_sh_to.adjoint());
        push_matrix_entries(link_p, link_q, br.id + ".from", br, link_from);
        push_matrix_entries(link_p, link_q, br.id + ".to", br, link_to);

        // Branch block [[W_i, S^s], [S^sH, L]] over the branch phases.
        const int n = br.phases.size();
        CDense block(2 * n);
        block.set_block(0, 0, w_i);
        block.set_block(0, n, ss);
        block.set_block(n, 0, ss.adjoint());
        block.set_block(n, n, l);
        psd.entries.push_back({br.id, psd_residual(block)});
        rank.entries.push_back({br.id, rank1_residual(block)});
    }

    hermitian.entries.push_back({"l", s.l_defect});

    LiftedCommon common = lifted_kcl_and_ref(net, s);
    return finish({std::move(balance_p), std::move(balance_q), std::move(ohm_re), std::move(ohm_im),
                   std::move(link_p), std::move(link_q), std::move(common.kcl_p),
                   std::move(common.kcl_q), std::move(psd), std::move(rank), std::move(hermitian),
                   std::move(common.ref)});
}

}  // namespace triflow
