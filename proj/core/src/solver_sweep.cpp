#include <algorithm>
#include <cmath>

#include "triflow/residuals.hpp"
#include "triflow/solver.hpp"

namespace triflow {

namespace {

CVec restrict_vec(const CVec& v, const PhaseSet& bus_ps, const PhaseSet& sub) {
    CVec out(sub.size());
    for (int k = 0; k < sub.size(); ++k) out[k] = v[bus_ps.index_of(sub.member(k))];
    return out;
}

struct TreeEdge {
    int branch = -1;
    int other = -1;  // the endpoint away from the bus holding this edge
    bool forward = true;  // true when the branch's from side faces the root
};

}  // namespace

SolveResult solve_sweep(const Network& net_in, const SolveOptions& opts) {
    if (opts.tol <= 0.0 || opts.max_iter < 1)
        throw Error(ErrorKind::input, "bad solver options");
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;

    if (!net.is_radial())
        throw Error(ErrorKind::input, "the sweep solver requires a radial network");
    const std::vector<int> refs = net.reference_bus_indices();
    if (refs.empty()) throw Error(ErrorKind::input, "power flow needs at least one reference bus");
    for (const Unit& u : net.units)
        if (!u.setpoint)
            throw Error(ErrorKind::input, "unit " + u.id + " has no setpoint (power-flow mode)");
    if (!unreachable_phases(net).empty())
        throw Error(ErrorKind::input, "no path to a reference bus for " + unreachable_phases(net).front());

    const int nb = static_cast<int>(net.buses.size());

    // Root every component at its reference bus; a component with two
    // references over-constrains the tree.
    std::vector<TreeEdge> parent_edge(static_cast<std::size_t>(nb));
    std::vector<std::vector<TreeEdge>> children(static_cast<std::size_t>(nb));
    std::vector<int> order;  // pre-order
    std::vector<bool> seen(static_cast<std::size_t>(nb), false);
    for (int root : refs) {
        if (seen[static_cast<std::size_t>(root)])
            throw Error(ErrorKind::input, "multiple reference buses in one radial component");
        seen[static_cast<std::size_t>(root)] = true;
        std::vector<int> stack{root};
        while (!stack.empty()) {
            const int bus = stack.back();
            stack.pop_back();
            order.push_back(bus);
            for (int bk = 0; bk < static_cast<int>(net.branches.size()); ++bk) {
                const Branch& br = net.branches[static_cast<std::size_t>(bk)];
                const int fi = net.bus_index(br.from_bus);
                const int ti = net.bus_index(br.to_bus);
                int other = -1;
                bool forward = true;
                if (fi == bus) {
                    other = ti;
                    forward = true;
                } else if (ti == bus) {
                    other = fi;
                    forward = false;
                } else {
                    continue;
                }
                if (seen[static_cast<std::size_t>(other)]) continue;
                if (net.buses[static_cast<std::size_t>(other)].is_reference)
                    throw Error(ErrorKind::input, "multiple reference buses in one radial component");
                seen[static_cast<std::size_t>(other)] = true;
                children[static_cast<std::size_t>(bus)].push_back({bk, other, forward});
                parent_edge[static_cast<std::size_t>(other)] = {bk, bus, forward};
                stack.push_back(other);
            }
        }
    }

    IVState s = IVState::sized_for(net);
    for (std::size_t k = 0; k < net.units.size(); ++k)
        for (int p = 0; p < net.units[k].phases.size(); ++p)
            s.unit_s[k][p] = (*net.units[k].setpoint)[static_cast<std::size_t>(p)];

    // Flat start: every bus carries its root's reference phasor.
    {
        std::vector<CVec> root_v(static_cast<std::size_t>(nb));
        for (int root : refs) {
            const Bus& rb = net.buses[static_cast<std::size_t>(root)];
            CVec vr(rb.phases.size());
            for (int p = 0; p < rb.phases.size(); ++p) vr[p] = rb.vref[static_cast<std::size_t>(p)];
            root_v[static_cast<std::size_t>(root)] = vr;
        }
        for (int bus : order) {
            const Bus& b = net.buses[static_cast<std::size_t>(bus)];
            if (b.is_reference) {
                s.v[static_cast<std::size_t>(bus)] = root_v[static_cast<std::size_t>(bus)];
                continue;
            }
            const int par = parent_edge[static_cast<std::size_t>(bus)].other;
            const Bus& pb = net.buses[static_cast<std::size_t>(par)];
            for (int p = 0; p < b.phases.size(); ++p) {
                const Phase ph = b.phases.member(p);
                s.v[static_cast<std::size_t>(bus)][p] =
                    pb.phases.contains(ph)
                        ? s.v[static_cast<std::size_t>(par)][pb.phases.index_of(ph)]
                        : s.v[static_cast<std::size_t>(par)][0];
            }
        }
    }

    SolveResult result;
    double max_dv = 0.0;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        // Backward: series currents from the leaves toward the roots.
        // The series current toward child c gathers everything drawn at
        // and below c, including both branch-end shunt currents.
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int bus = *it;
            const Bus& b = net.buses[static_cast<std::size_t>(bus)];
            CVec draw(b.phases.size());
            for (std::size_t uk = 0; uk < net.units.size(); ++uk) {
                const Unit& u = net.units[uk];
                if (net.bus_index(u.bus) != bus) continue;
                const CVec v_u = restrict_vec(s.v[static_cast<std::size_t>(bus)], b.phases, u.phases);
                for (int p = 0; p < u.phases.size(); ++p) {
                    const cx v = v_u[p];
                    const double mag = std::abs(v);
                    const cx i = mag > 1e-9 ? std::conj(s.unit_s[uk][p] / v) : cx{0.0, 0.0};
                    draw[b.phases.index_of(u.phases.member(p))] += i;
                }
            }
            for (const Shunt& sh : net.shunts) {
                if (net.bus_index(sh.bus) != bus) continue;
                const CVec ish = sh.y * restrict_vec(s.v[static_cast<std::size_t>(bus)], b.phases, sh.phases);
                for (int p = 0; p < sh.phases.size(); ++p)
                    draw[b.phases.index_of(sh.phases.member(p))] += ish[p];
            }
            for (const TreeEdge& e : children[static_cast<std::size_t>(bus)]) {
                const Branch& br = net.branches[static_cast<std::size_t>(e.branch)];
                const CVec v_here = restrict_vec(s.v[static_cast<std::size_t>(bus)], b.phases, br.phases);
                const CVec i_total = branch_total_current(br, v_here, s.i_series[static_cast<std::size_t>(e.branch)],
                                                          e.forward);
                for (int p = 0; p < br.phases.size(); ++p)
                    draw[b.phases.index_of(br.phases.member(p))] += i_total[p];
            }
            if (b.is_reference) continue;
            const TreeEdge& pe = parent_edge[static_cast<std::size_t>(bus)];
            const Branch& br = net.branches[static_cast<std::size_t>(pe.branch)];
            // The total current flowing from this bus toward the parent
            // must cancel the local draw; strip this end's shunt share
            // to recover the series current.
            const CVec v_here = restrict_vec(s.v[static_cast<std::size_t>(bus)], b.phases, br.phases);
            const CMat& ysh_here = pe.forward ? br.y_sh_to : br.y_sh_from;
            CVec i_up(br.phases.size());
            for (int p = 0; p < br.phases.size(); ++p)
                i_up[p] = -draw[b.phases.index_of(br.phases.member(p))];
            const CVec i_series_here = i_up - ysh_here * v_here;
            // Stored orientation is from -> to.
            s.i_series[static_cast<std::size_t>(pe.branch)] =
                pe.forward ? -i_series_here : i_series_here;
        }

        // Forward: voltages from the roots toward the leaves.
        max_dv = 0.0;
        for (int bus : order) {
            const Bus& b = net.buses[static_cast<std::size_t>(bus)];
            if (b.is_reference) continue;
            const TreeEdge& pe = parent_edge[static_cast<std::size_t>(bus)];
            const Branch& br = net.branches[static_cast<std::size_t>(pe.branch)];
            const int par = pe.other;
            const Bus& pb = net.buses[static_cast<std::size_t>(par)];
            const CVec v_par = restrict_vec(s.v[static_cast<std::size_t>(par)], pb.phases, br.phases);
            // Voltage drop over the series impedance in the direction
            // away from the root.
            const CVec i_away = pe.forward ? s.i_series[static_cast<std::size_t>(pe.branch)]
                                           : -s.i_series[static_cast<std::size_t>(pe.branch)];
            const CVec v_new = v_par - br.z_series * i_away;
            for (int p = 0; p < br.phases.size(); ++p) {
                const int slot = b.phases.index_of(br.phases.member(p));
                max_dv = std::max(max_dv, std::abs(v_new[p] - s.v[static_cast<std::size_t>(bus)][slot]));
                s.v[static_cast<std::size_t>(bus)][slot] = v_new[p];
            }
        }

        const double rn = residual_iv(net, s).inf_norm();
        result.trace.residual_norms.push_back(rn);
        if (rn <= opts.tol) break;
        if (max_dv == 0.0 && rn > opts.tol && iter > 2) break;  // stagnated
    }

    const double final_rn = result.trace.residual_norms.empty()
                                ? kUnbounded
                                : result.trace.residual_norms.back();
    result.converged = final_rn <= opts.tol;
    result.trace.reason = result.converged ? Termination::converged : Termination::max_iterations;
    if (!result.converged)
        result.trace.detail = "sweep residual " + std::to_string(final_rn) + " above tolerance";

    if (si) {
        for (std::size_t k = 0; k < net_in.buses.size(); ++k) {
            const double vb = net_in.bus_vbase(static_cast<int>(k));
            for (int p = 0; p < s.v[k].size(); ++p) s.v[k][p] *= vb;
        }
        for (std::size_t k = 0; k < net_in.branches.size(); ++k) {
            const double vb = net_in.bus_vbase(net_in.bus_index(net_in.branches[k].from_bus));
            const double ib = net_in.sbase / vb;
            for (int p = 0; p < s.i_series[k].size(); ++p) s.i_series[k][p] *= ib;
        }
        for (std::size_t k = 0; k < net_in.units.size(); ++k)
            for (int p = 0; p < s.unit_s[k].size(); ++p) s.unit_s[k][p] *= net_in.sbase;
    }
    result.state = std::move(s);
    return result;
}

}  // namespace triflow
