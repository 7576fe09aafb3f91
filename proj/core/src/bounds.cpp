#include "triflow/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace triflow {

double BoundFamily::worst() const {
    double w = kUnbounded;
    for (const auto& e : entries) w = std::min(w, e.margin);
    return w;
}

double FeasibilityReport::worst_margin() const {
    double w = kUnbounded;
    for (const auto& f : families) w = std::min(w, f.worst());
    return w;
}

const BoundFamily* FeasibilityReport::find(const std::string& name) const {
    for (const auto& f : families)
        if (f.name == name) return &f;
    return nullptr;
}

namespace {

constexpr double kThird = 2.0 * std::numbers::pi / 3.0;

std::string pid(Phase p) { return std::string(1, phase_letter(p)); }

void sort_family(BoundFamily& f) {
    std::stable_sort(f.entries.begin(), f.entries.end(),
                     [](const MarginEntry& a, const MarginEntry& b) { return a.id < b.id; });
}

FeasibilityReport finish(std::vector<BoundFamily> families) {
    for (auto& f : families) sort_family(f);
    FeasibilityReport rep;
    rep.families = std::move(families);
    return rep;
}

CVec restrict_vec(const CVec& v, const PhaseSet& bus_ps, const PhaseSet& sub) {
    CVec out(sub.size());
    for (int k = 0; k < sub.size(); ++k) out[k] = v[bus_ps.index_of(sub.member(k))];
    return out;
}

// tan is unusable as a product-form multiplier when the shifted angle
// sits on pi/2; those rows are vacuous and skipped.
bool tan_usable(double shifted_angle) {
    return std::abs(std::cos(shifted_angle)) > 1e-9;
}

}  // namespace

FeasibilityReport bounds_margins(const Network& net_in, const IVState& s_in) {
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const IVState s = si ? state_to_per_unit(net_in, s_in) : s_in;

    BoundFamily voltage{"voltage", {}};
    BoundFamily unit_power{"unit_power", {}};
    BoundFamily branch_current{"branch_current", {}};
    BoundFamily unit_current{"unit_current", {}};
    BoundFamily shunt_current{"shunt_current", {}};
    BoundFamily branch_power{"branch_power", {}};
    BoundFamily s_entry{"s_entry", {}};
    BoundFamily vad{"vad", {}};
    BoundFamily pad{"pad", {}};

    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        for (int p = 0; p < b.phases.size(); ++p) {
            const double mag = std::abs(s.v[k][p]);
            const std::string id = b.id + "." + pid(b.phases.member(p));
            voltage.entries.push_back({id + ".lo", mag - b.vmin[static_cast<std::size_t>(p)]});
            if (std::isfinite(b.vmax[static_cast<std::size_t>(p)]))
                voltage.entries.push_back({id + ".hi", b.vmax[static_cast<std::size_t>(p)] - mag});
        }
        // Phase angle spreads relative to 120 degrees: differences are
        // wrapped into (-pi, pi] before the shift is removed.
        const auto pairs = b.pad_pairs();
        for (std::size_t kp = 0; kp < pairs.size(); ++kp) {
            const auto [p, q] = pairs[kp];
            const double ap = std::arg(s.v[k][b.phases.index_of(p)]);
            const double aq = std::arg(s.v[k][b.phases.index_of(q)]);
            const double spread = wrap_angle(ap - aq) - kThird;
            const std::string id = b.id + "." + pid(p) + pid(q);
            pad.entries.push_back({id + ".lo", spread - b.pad_min[kp]});
            pad.entries.push_back({id + ".hi", b.pad_max[kp] - spread});
        }
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(fi)], bf.phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(ti)], bt.phases, br.phases);
        const CVec i_from = branch_total_current(br, vf, s.i_series[k], true);
        const CVec i_to = branch_total_current(br, vt, s.i_series[k], false);
        for (int p = 0; p < br.phases.size(); ++p) {
            const std::string ph = pid(br.phases.member(p));
            if (std::isfinite(br.i_rated[static_cast<std::size_t>(p)])) {
                branch_current.entries.push_back(
                    {br.id + ".from." + ph, br.i_rated[static_cast<std::size_t>(p)] - std::abs(i_from[p])});
                branch_current.entries.push_back(
                    {br.id + ".to." + ph, br.i_rated[static_cast<std::size_t>(p)] - std::abs(i_to[p])});
            }
            if (std::isfinite(br.s_rated[static_cast<std::size_t>(p)])) {
                branch_power.entries.push_back(
                    {br.id + ".from." + ph,
                     br.s_rated[static_cast<std::size_t>(p)] - std::abs(vf[p] * std::conj(i_from[p]))});
                branch_power.entries.push_back(
                    {br.id + ".to." + ph,
                     br.s_rated[static_cast<std::size_t>(p)] - std::abs(vt[p] * std::conj(i_to[p]))});
            }
            const double dtheta = wrap_angle(std::arg(vf[p]) - std::arg(vt[p]));
            vad.entries.push_back({br.id + "." + ph + ".lo", dtheta - br.vad_min[static_cast<std::size_t>(p)]});
            vad.entries.push_back({br.id + "." + ph + ".hi", br.vad_max[static_cast<std::size_t>(p)] - dtheta});
        }
        // Entrywise caps vmax_p * i_rated_q on the full flow matrices.
        for (int side = 0; side < 2; ++side) {
            const bool from_side = side == 0;
            const Bus& end_bus = from_side ? bf : bt;
            const CVec& v_end = from_side ? vf : vt;
            const CVec& i_end = from_side ? i_from : i_to;
            const std::string tag = from_side ? ".from." : ".to.";
            for (int p = 0; p < br.phases.size(); ++p)
                for (int q = 0; q < br.phases.size(); ++q) {
                    const double vmax_p =
                        end_bus.vmax[static_cast<std::size_t>(end_bus.phases.index_of(br.phases.member(p)))];
                    const double cap = vmax_p * br.i_rated[static_cast<std::size_t>(q)];
                    if (!std::isfinite(cap)) continue;
                    const cx spq = v_end[p] * std::conj(i_end[q]);
                    const std::string id =
                        br.id + tag + pid(br.phases.member(p)) + pid(br.phases.member(q));
                    s_entry.entries.push_back({id + ".p.hi", cap - spq.real()});
                    s_entry.entries.push_back({id + ".p.lo", spq.real() + cap});
                    s_entry.entries.push_back({id + ".q.hi", cap - spq.imag()});
                    s_entry.entries.push_back({id + ".q.lo", spq.imag() + cap});
                }
        }
    }

    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        const int bi = net.bus_index(u.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const CVec v_u = restrict_vec(s.v[static_cast<std::size_t>(bi)], bus.phases, u.phases);
        for (int p = 0; p < u.phases.size(); ++p) {
            const std::string id = u.id + "." + pid(u.phases.member(p));
            const double up = s.unit_s[k][p].real();
            const double uq = s.unit_s[k][p].imag();
            if (std::isfinite(u.p_min[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".p_lo", up - u.p_min[static_cast<std::size_t>(p)]});
            if (std::isfinite(u.p_max[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".p_hi", u.p_max[static_cast<std::size_t>(p)] - up});
            if (std::isfinite(u.q_min[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".q_lo", uq - u.q_min[static_cast<std::size_t>(p)]});
            if (std::isfinite(u.q_max[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".q_hi", u.q_max[static_cast<std::size_t>(p)] - uq});
            if (std::isfinite(u.i_rated[static_cast<std::size_t>(p)])) {
                const double mag_v = std::abs(v_u[p]);
                const double mag_i = mag_v > 0.0 ? std::abs(s.unit_s[k][p]) / mag_v : 0.0;
                unit_current.entries.push_back({id, u.i_rated[static_cast<std::size_t>(p)] - mag_i});
            }
        }
    }

    for (const Shunt& sh : net.shunts) {
        const int bi = net.bus_index(sh.bus);
        const Bus& bus = net.buses[static_cast<std::size_t>(bi)];
        const CVec ish = sh.y * restrict_vec(s.v[static_cast<std::size_t>(bi)], bus.phases, sh.phases);
        for (int p = 0; p < sh.phases.size(); ++p)
            if (std::isfinite(sh.i_rated[static_cast<std::size_t>(p)]))
                shunt_current.entries.push_back(
                    {sh.id + "." + pid(sh.phases.member(p)), sh.i_rated[static_cast<std::size_t>(p)] - std::abs(ish[p])});
    }

    return finish({std::move(voltage), std::move(unit_power), std::move(branch_current),
                   std::move(unit_current), std::move(shunt_current), std::move(branch_power),
                   std::move(s_entry), std::move(vad), std::move(pad)});
}

FeasibilityReport bounds_margins(const Network& net_in, const LiftedState& s_in) {
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    const LiftedState s = si ? state_to_per_unit(net_in, s_in) : s_in;

    BoundFamily voltage{"voltage_lifted", {}};
    BoundFamily w_entry{"w_entry", {}};
    BoundFamily w_cross_entry{"w_cross_entry", {}};
    BoundFamily unit_power{"unit_power", {}};
    BoundFamily s_entry{"s_entry", {}};
    BoundFamily current_soc{"current_soc", {}};
    BoundFamily current_linear{"current_linear", {}};
    BoundFamily series_current_implied{"series_current_implied", {}};
    BoundFamily vad_lifted{"vad_lifted", {}};
    BoundFamily vad_lifted_bfm{"vad_lifted_bfm", {}};
    BoundFamily pad_lifted{"pad_lifted", {}};

    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        const Hermitian& w = s.w[k];
        for (int p = 0; p < b.phases.size(); ++p) {
            const std::string id = b.id + "." + pid(b.phases.member(p));
            const double wpp = w.re(p, p);
            const double lo = b.vmin[static_cast<std::size_t>(p)];
            voltage.entries.push_back({id + ".lo", wpp - lo * lo});
            if (std::isfinite(b.vmax[static_cast<std::size_t>(p)]))
                voltage.entries.push_back(
                    {id + ".hi", b.vmax[static_cast<std::size_t>(p)] * b.vmax[static_cast<std::size_t>(p)] - wpp});
        }
        for (int p = 0; p < b.phases.size(); ++p)
            for (int q = p; q < b.phases.size(); ++q) {
                const double cap = b.vmax[static_cast<std::size_t>(p)] * b.vmax[static_cast<std::size_t>(q)];
                if (!std::isfinite(cap)) continue;
                const std::string id = b.id + "." + pid(b.phases.member(p)) + pid(b.phases.member(q));
                w_entry.entries.push_back({id + ".re.hi", cap - w.re(p, q)});
                w_entry.entries.push_back({id + ".re.lo", w.re(p, q) + cap});
                if (q > p) {
                    w_entry.entries.push_back({id + ".im.hi", cap - w.im(p, q)});
                    w_entry.entries.push_back({id + ".im.lo", w.im(p, q) + cap});
                }
            }
        // Tangent form of the 120-degree spread bounds; the shifted
        // angle lives in [pi/2, pi] where the cosine is negative, so the
        // product inequalities flip relative to the angle-space ones.
        const auto pairs = b.pad_pairs();
        for (std::size_t kp = 0; kp < pairs.size(); ++kp) {
            const auto [p, q] = pairs[kp];
            const cx wpq = w.at(b.phases.index_of(p), b.phases.index_of(q));
            const std::string id = b.id + "." + pid(p) + pid(q);
            const double lo_angle = kThird + b.pad_min[kp];
            const double hi_angle = kThird + b.pad_max[kp];
            if (tan_usable(lo_angle))
                pad_lifted.entries.push_back({id + ".lo", std::tan(lo_angle) * wpq.real() - wpq.imag()});
            if (tan_usable(hi_angle))
                pad_lifted.entries.push_back({id + ".hi", wpq.imag() - std::tan(hi_angle) * wpq.real()});
        }
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const int fi = net.bus_index(br.from_bus);
        const int ti = net.bus_index(br.to_bus);
        const Bus& bf = net.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net.buses[static_cast<std::size_t>(ti)];
        const CMat* cross = s.cross(fi, ti);
        const CMat w_ij_full = cross ? (fi < ti ? *cross : cross->adjoint()) : CMat();

        if (cross) {
            for (int p = 0; p < bf.phases.size(); ++p)
                for (int q = 0; q < bt.phases.size(); ++q) {
                    const double cap = bf.vmax[static_cast<std::size_t>(p)] * bt.vmax[static_cast<std::size_t>(q)];
                    if (!std::isfinite(cap)) continue;
                    const std::string id =
                        br.id + "." + pid(bf.phases.member(p)) + pid(bt.phases.member(q));
                    const cx v = w_ij_full.at(p, q);
                    w_cross_entry.entries.push_back({id + ".re.hi", cap - v.real()});
                    w_cross_entry.entries.push_back({id + ".re.lo", v.real() + cap});
                    w_cross_entry.entries.push_back({id + ".im.hi", cap - v.imag()});
                    w_cross_entry.entries.push_back({id + ".im.lo", v.imag() + cap});
                }
        }

        // Entrywise caps vmax_p * i_rated_q on the total-flow matrices.
        for (int side = 0; side < 2; ++side) {
            const bool from_side = side == 0;
            const Bus& end_bus = from_side ? bf : bt;
            const CMat& st = from_side ? s.s_total_from[k] : s.s_total_to[k];
            const std::string tag = from_side ? ".from." : ".to.";
            for (int p = 0; p < br.phases.size(); ++p)
                for (int q = 0; q < br.phases.size(); ++q) {
                    const double vmax_p =
                        end_bus.vmax[static_cast<std::size_t>(end_bus.phases.index_of(br.phases.member(p)))];
                    const double cap = vmax_p * br.i_rated[static_cast<std::size_t>(q)];
                    if (!std::isfinite(cap)) continue;
                    const std::string id =
                        br.id + tag + pid(br.phases.member(p)) + pid(br.phases.member(q));
                    s_entry.entries.push_back({id + ".p.hi", cap - st.at(p, q).real()});
                    s_entry.entries.push_back({id + ".p.lo", st.at(p, q).real() + cap});
                    s_entry.entries.push_back({id + ".q.hi", cap - st.at(p, q).imag()});
                    s_entry.entries.push_back({id + ".q.lo", st.at(p, q).imag() + cap});
                }
        }

        // SOC current limit in the W space: |S_pp|^2 <= i_rated^2 W_pp.
        for (int side = 0; side < 2; ++side) {
            const bool from_side = side == 0;
            const Bus& bus = from_side ? bf : bt;
            const int bus_idx = from_side ? fi : ti;
            const CMat& st = from_side ? s.s_total_from[k] : s.s_total_to[k];
            const std::string tag = from_side ? ".from." : ".to.";
            for (int p = 0; p < br.phases.size(); ++p) {
                const double rated = br.i_rated[static_cast<std::size_t>(p)];
                if (!std::isfinite(rated)) continue;
                const double wpp = s.w[static_cast<std::size_t>(bus_idx)].re(
                    bus.phases.index_of(br.phases.member(p)), bus.phases.index_of(br.phases.member(p)));
                const double spp2 = std::norm(st.at(p, p));
                current_soc.entries.push_back(
                    {br.id + tag + pid(br.phases.member(p)), rated * rated * wpp - spp2});
            }
        }

        // Linear total-current bounds via the lifted recovery
        // I I^H = L + y W y^H + y S^s + (y S^s)^H per direction.
        const CMat l = s.l_series[k].to_cmat();
        const CMat ss = s.s_series[k];
        const CMat ss_rev = br.z_series * l - ss;
        for (int side = 0; side < 2; ++side) {
            const bool from_side = side == 0;
            const Bus& bus = from_side ? bf : bt;
            const int bus_idx = from_side ? fi : ti;
            const CMat& ysh = from_side ? br.y_sh_from : br.y_sh_to;
            const CMat w_end = [&] {
                CMat out(br.phases.size());
                for (int r = 0; r < br.phases.size(); ++r)
                    for (int c = 0; c < br.phases.size(); ++c)
                        out.at(r, c) = s.w[static_cast<std::size_t>(bus_idx)].at(
                            bus.phases.index_of(br.phases.member(r)), bus.phases.index_of(br.phases.member(c)));
                return out;
            }();
            const CMat& ss_dir = from_side ? ss : ss_rev;
            const CMat ysl = ysh * ss_dir;
            const CMat isq = l + ysh * w_end * ysh.adjoint() + ysl + ysl.adjoint();
            const std::string tag = from_side ? ".from." : ".to.";
            for (int p = 0; p < br.phases.size(); ++p) {
                const std::string id = br.id + tag + pid(br.phases.member(p));
                const double rated = br.i_rated[static_cast<std::size_t>(p)];
                current_linear.entries.push_back({id + ".psd", isq.at(p, p).real()});
                if (std::isfinite(rated))
                    current_linear.entries.push_back({id + ".hi", rated * rated - isq.at(p, p).real()});
            }
            if (std::all_of(br.i_rated.begin(), br.i_rated.end(),
                            [](double r) { return std::isfinite(r); })) {
                for (int p = 0; p < br.phases.size(); ++p)
                    for (int q = p; q < br.phases.size(); ++q) {
                        const double cap =
                            br.i_rated[static_cast<std::size_t>(p)] * br.i_rated[static_cast<std::size_t>(q)];
                        const std::string id =
                            br.id + tag + pid(br.phases.member(p)) + pid(br.phases.member(q));
                        current_linear.entries.push_back({id + ".re.hi", cap - isq.at(p, q).real()});
                        current_linear.entries.push_back({id + ".re.lo", isq.at(p, q).real() + cap});
                        if (q > p) {
                            current_linear.entries.push_back({id + ".im.hi", cap - isq.at(p, q).imag()});
                            current_linear.entries.push_back({id + ".im.lo", isq.at(p, q).imag() + cap});
                        }
                    }
            }
        }

        // Implied series-current bounds from the ratings and the shunt
        // path: |L| <= i_rated i_rated^T + |y^sh| vmax vmax^T |y^sh|^T.
        {
            bool usable = std::all_of(br.i_rated.begin(), br.i_rated.end(),
                                      [](double r) { return std::isfinite(r); });
            for (int p = 0; usable && p < br.phases.size(); ++p)
                if (!std::isfinite(bf.vmax[static_cast<std::size_t>(bf.phases.index_of(br.phases.member(p)))]))
                    usable = false;
            if (usable) {
                const int n = br.phases.size();
                CMat absy(n);
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < n; ++c) absy.at(r, c) = std::abs(br.y_sh_from.at(r, c));
                CVec vmax(n);
                for (int p = 0; p < n; ++p)
                    vmax[p] = bf.vmax[static_cast<std::size_t>(bf.phases.index_of(br.phases.member(p)))];
                for (int p = 0; p < n; ++p)
                    for (int q = p; q < n; ++q) {
                        double shunt_term = 0.0;
                        for (int r = 0; r < n; ++r)
                            for (int c = 0; c < n; ++c)
                                shunt_term += absy.at(p, r).real() * vmax[r].real() * vmax[c].real() *
                                              absy.at(q, c).real();
                        const double cap = br.i_rated[static_cast<std::size_t>(p)] *
                                               br.i_rated[static_cast<std::size_t>(q)] +
                                           shunt_term;
                        const std::string id =
                            br.id + "." + pid(br.phases.member(p)) + pid(br.phases.member(q));
                        series_current_implied.entries.push_back({id + ".re.hi", cap - l.at(p, q).real()});
                        series_current_implied.entries.push_back({id + ".re.lo", l.at(p, q).real() + cap});
                        if (q > p) {
                            series_current_implied.entries.push_back({id + ".im.hi", cap - l.at(p, q).imag()});
                            series_current_implied.entries.push_back({id + ".im.lo", l.at(p, q).imag() + cap});
                        }
                    }
            }
        }

        // Voltage angle difference, tangent form. The difference is
        // bounded inside (-pi/2, pi/2) so the diagonal of the cross
        // product keeps a positive real part and no flip is needed.
        for (int p = 0; p < br.phases.size(); ++p) {
            const double lo = br.vad_min[static_cast<std::size_t>(p)];
            const double hi = br.vad_max[static_cast<std::size_t>(p)];
            const std::string id = br.id + "." + pid(br.phases.member(p));
            if (cross) {
                const cx wpq = w_ij_full.at(bf.phases.index_of(br.phases.member(p)),
                                            bt.phases.index_of(br.phases.member(p)));
                if (tan_usable(lo))
                    vad_lifted.entries.push_back({id + ".lo", wpq.imag() - std::tan(lo) * wpq.real()});
                if (tan_usable(hi))
                    vad_lifted.entries.push_back({id + ".hi", std::tan(hi) * wpq.real() - wpq.imag()});
            }
            // Substituted form W_ij = W_i - S^s z^H, branch phases only.
            const CMat w_i = [&] {
                CMat out(br.phases.size());
                for (int r = 0; r < br.phases.size(); ++r)
                    for (int c = 0; c < br.phases.size(); ++c)
                        out.at(r, c) = s.w[static_cast<std::size_t>(fi)].at(
                            bf.phases.index_of(br.phases.member(r)), bf.phases.index_of(br.phases.member(c)));
                return out;
            }();
            const CMat w_ij_sub = w_i - ss * br.z_series.adjoint();
            const cx wpq = w_ij_sub.at(p, p);
            if (tan_usable(lo))
                vad_lifted_bfm.entries.push_back({id + ".lo", wpq.imag() - std::tan(lo) * wpq.real()});
            if (tan_usable(hi))
                vad_lifted_bfm.entries.push_back({id + ".hi", std::tan(hi) * wpq.real() - wpq.imag()});
        }
    }

    for (std::size_t k = 0; k < net.units.size(); ++k) {
        const Unit& u = net.units[k];
        for (int p = 0; p < u.phases.size(); ++p) {
            const std::string id = u.id + "." + pid(u.phases.member(p));
            const double up = s.unit_p[k][static_cast<std::size_t>(p)];
            const double uq = s.unit_q[k][static_cast<std::size_t>(p)];
            if (std::isfinite(u.p_min[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".p_lo", up - u.p_min[static_cast<std::size_t>(p)]});
            if (std::isfinite(u.p_max[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".p_hi", u.p_max[static_cast<std::size_t>(p)] - up});
            if (std::isfinite(u.q_min[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".q_lo", uq - u.q_min[static_cast<std::size_t>(p)]});
            if (std::isfinite(u.q_max[static_cast<std::size_t>(p)]))
                unit_power.entries.push_back({id + ".q_hi", u.q_max[static_cast<std::size_t>(p)] - uq});
        }
    }

    return finish({std::move(voltage), std::move(w_entry), std::move(w_cross_entry),
                   std::move(unit_power), std::move(s_entry), std::move(current_soc),
                   std::move(current_linear), std::move(series_current_implied),
                   std::move(vad_lifted), std::move(vad_lifted_bfm), std::move(pad_lifted)});
}

}  // namespace triflow
