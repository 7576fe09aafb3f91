#include <algorithm>
#include <cmath>

#include "triflow/residuals.hpp"
#include "triflow/solver.hpp"

namespace triflow {

namespace {

constexpr double kClampGuard = 1e-6;  // pu divisor floor inside iterations

CVec restrict_vec(const CVec& v, const PhaseSet& bus_ps, const PhaseSet& sub) {
    CVec out(sub.size());
    for (int k = 0; k < sub.size(); ++k) out[k] = v[bus_ps.index_of(sub.member(k))];
    return out;
}

void check_power_flow_ready(const Network& net) {
    if (net.reference_bus_indices().empty())
        throw Error(ErrorKind::input, "power flow needs at least one reference bus");
    for (const Unit& u : net.units)
        if (!u.setpoint)
            throw Error(ErrorKind::input, "unit " + u.id + " has no setpoint (power-flow mode)");
    std::vector<std::string> isolated = unreachable_phases(net);
    if (!isolated.empty())
        throw Error(ErrorKind::input, "no path to a reference bus for " + isolated.front());
}

}  // namespace

NewtonSystem::NewtonSystem(const Network& pu_net) : net_(pu_net) {
    int offset = 0;
    bus_offset_.resize(net_.buses.size(), -1);
    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        if (net_.buses[k].is_reference) continue;
        bus_offset_[k] = offset;
        offset += 2 * net_.buses[k].phases.size();
    }
    branch_offset_.resize(net_.branches.size(), 0);
    for (std::size_t k = 0; k < net_.branches.size(); ++k) {
        branch_offset_[k] = offset;
        offset += 2 * net_.branches[k].phases.size();
    }
    size_ = offset;
}

std::vector<double> NewtonSystem::pack(const IVState& s) const {
    std::vector<double> x(static_cast<std::size_t>(size_), 0.0);
    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        if (bus_offset_[k] < 0) continue;
        for (int p = 0; p < net_.buses[k].phases.size(); ++p) {
            x[static_cast<std::size_t>(bus_offset_[k] + 2 * p)] = s.v[k][p].real();
            x[static_cast<std::size_t>(bus_offset_[k] + 2 * p + 1)] = s.v[k][p].imag();
        }
    }
    for (std::size_t k = 0; k < net_.branches.size(); ++k)
        for (int p = 0; p < net_.branches[k].phases.size(); ++p) {
            x[static_cast<std::size_t>(branch_offset_[k] + 2 * p)] = s.i_series[k][p].real();
            x[static_cast<std::size_t>(branch_offset_[k] + 2 * p + 1)] = s.i_series[k][p].imag();
        }
    return x;
}

IVState NewtonSystem::unpack(const std::vector<double>& x) const {
    IVState s = IVState::sized_for(net_);
    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        const Bus& b = net_.buses[k];
        if (b.is_reference) {
            for (int p = 0; p < b.phases.size(); ++p) s.v[k][p] = b.vref[static_cast<std::size_t>(p)];
        } else {
            for (int p = 0; p < b.phases.size(); ++p)
                s.v[k][p] = cx{x[static_cast<std::size_t>(bus_offset_[k] + 2 * p)],
                               x[static_cast<std::size_t>(bus_offset_[k] + 2 * p + 1)]};
        }
    }
    for (std::size_t k = 0; k < net_.branches.size(); ++k)
        for (int p = 0; p < net_.branches[k].phases.size(); ++p)
            s.i_series[k][p] = cx{x[static_cast<std::size_t>(branch_offset_[k] + 2 * p)],
                                  x[static_cast<std::size_t>(branch_offset_[k] + 2 * p + 1)]};
    for (std::size_t k = 0; k < net_.units.size(); ++k) {
        const Unit& u = net_.units[k];
        for (int p = 0; p < u.phases.size(); ++p) s.unit_s[k][p] = (*u.setpoint)[static_cast<std::size_t>(p)];
    }
    return s;
}

std::vector<double> NewtonSystem::flat_vector() const {
    // Every bus starts from the nearest reference phasor; in a single
    // voltage level that is simply the first reference bus's phasor.
    IVState s = IVState::sized_for(net_);
    const int ref = net_.reference_bus_indices().front();
    const Bus& rb = net_.buses[static_cast<std::size_t>(ref)];
    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        const Bus& b = net_.buses[k];
        for (int p = 0; p < b.phases.size(); ++p) {
            const Phase ph = b.phases.member(p);
            if (b.is_reference)
                s.v[k][p] = b.vref[static_cast<std::size_t>(p)];
            else if (rb.phases.contains(ph))
                s.v[k][p] = rb.vref[static_cast<std::size_t>(rb.phases.index_of(ph))];
            else
                s.v[k][p] = rb.vref[0];
        }
    }
    return pack(s);
}

std::vector<double> NewtonSystem::residual(const std::vector<double>& x) const {
    clamped_ = false;
    const IVState s = unpack(x);
    std::vector<double> r(static_cast<std::size_t>(size_), 0.0);

    int row = 0;
    for (std::size_t k = 0; k < net_.branches.size(); ++k) {
        const Branch& br = net_.branches[k];
        const int fi = net_.bus_index(br.from_bus);
        const int ti = net_.bus_index(br.to_bus);
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(fi)],
                                     net_.buses[static_cast<std::size_t>(fi)].phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(ti)],
                                     net_.buses[static_cast<std::size_t>(ti)].phases, br.phases);
        const CVec drop = vt - vf + br.z_series * s.i_series[k];
        for (int p = 0; p < br.phases.size(); ++p) {
            r[static_cast<std::size_t>(row++)] = drop[p].real();
            r[static_cast<std::size_t>(row++)] = drop[p].imag();
        }
    }

    std::vector<CVec> mismatch;
    mismatch.reserve(net_.buses.size());
    for (const Bus& b : net_.buses) mismatch.emplace_back(b.phases.size());

    for (std::size_t k = 0; k < net_.branches.size(); ++k) {
        const Branch& br = net_.branches[k];
        const int fi = net_.bus_index(br.from_bus);
        const int ti = net_.bus_index(br.to_bus);
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(fi)],
                                     net_.buses[static_cast<std::size_t>(fi)].phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(ti)],
                                     net_.buses[static_cast<std::size_t>(ti)].phases, br.phases);
        const CVec i_from = branch_total_current(br, vf, s.i_series[k], true);
        const CVec i_to = branch_total_current(br, vt, s.i_series[k], false);
        const Bus& bf = net_.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net_.buses[static_cast<std::size_t>(ti)];
        for (int p = 0; p < br.phases.size(); ++p) {
            mismatch[static_cast<std::size_t>(fi)][bf.phases.index_of(br.phases.member(p))] += i_from[p];
            mismatch[static_cast<std::size_t>(ti)][bt.phases.index_of(br.phases.member(p))] += i_to[p];
        }
    }
    for (std::size_t k = 0; k < net_.units.size(); ++k) {
        const Unit& u = net_.units[k];
        const int bi = net_.bus_index(u.bus);
        const Bus& bus = net_.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const cx sp = (*u.setpoint)[static_cast<std::size_t>(p)];
            cx v = s.v[static_cast<std::size_t>(bi)][bus.phases.index_of(u.phases.member(p))];
            double mag = std::abs(v);
            if (mag < kClampGuard) {
                // Keep the iterate finite; the final state is checked by
                // the full residual evaluator anyway.
                clamped_ = true;
                v = mag == 0.0 ? cx{kClampGuard, 0.0} : v * (kClampGuard / mag);
            }
            mismatch[static_cast<std::size_t>(bi)][bus.phases.index_of(u.phases.member(p))] +=
                std::conj(sp / v);
        }
    }
    for (const Shunt& sh : net_.shunts) {
        const int bi = net_.bus_index(sh.bus);
        const Bus& bus = net_.buses[static_cast<std::size_t>(bi)];
        const CVec ish = sh.y * restrict_vec(s.v[static_cast<std::size_t>(bi)], bus.phases, sh.phases);
        for (int p = 0; p < sh.phases.size(); ++p)
            mismatch[static_cast<std::size_t>(bi)][bus.phases.index_of(sh.phases.member(p))] += ish[p];
    }

    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        if (bus_offset_[k] < 0) continue;
        for (int p = 0; p < net_.buses[k].phases.size(); ++p) {
            r[static_cast<std::size_t>(row++)] = mismatch[k][p].real();
            r[static_cast<std::size_t>(row++)] = mismatch[k][p].imag();
        }
    }
    return r;
}

Mat NewtonSystem::jacobian(const std::vector<double>& x) const {
    const IVState s = unpack(x);
    Mat j(size_, size_);

    // d(re, im)/d(re z, im z) of a linear complex term c * z.
    auto add_complex = [&](int row, int col, cx c) {
        j.at(row, col) += c.real();
        j.at(row, col + 1) += -c.imag();
        j.at(row + 1, col) += c.imag();
        j.at(row + 1, col + 1) += c.real();
    };

    int row = 0;
    for (std::size_t k = 0; k < net_.branches.size(); ++k) {
        const Branch& br = net_.branches[k];
        const int fi = net_.bus_index(br.from_bus);
        const int ti = net_.bus_index(br.to_bus);
        const Bus& bf = net_.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net_.buses[static_cast<std::size_t>(ti)];
        for (int p = 0; p < br.phases.size(); ++p) {
            const int r0 = row;
            if (bus_offset_[static_cast<std::size_t>(ti)] >= 0)
                add_complex(r0, bus_offset_[static_cast<std::size_t>(ti)] + 2 * bt.phases.index_of(br.phases.member(p)), 1.0);
            if (bus_offset_[static_cast<std::size_t>(fi)] >= 0)
                add_complex(r0, bus_offset_[static_cast<std::size_t>(fi)] + 2 * bf.phases.index_of(br.phases.member(p)), -1.0);
            for (int q = 0; q < br.phases.size(); ++q)
                add_complex(r0, branch_offset_[k] + 2 * q, br.z_series.at(p, q));
            row += 2;
        }
    }

    // Nodal current balance rows, per non-reference bus phase.
    std::vector<int> kcl_row(net_.buses.size() * 3, -1);
    for (std::size_t k = 0; k < net_.buses.size(); ++k) {
        if (bus_offset_[k] < 0) continue;
        for (int p = 0; p < net_.buses[k].phases.size(); ++p) {
            kcl_row[k * 3 + static_cast<std::size_t>(p)] = row;
            row += 2;
        }
    }

    for (std::size_t k = 0; k < net_.branches.size(); ++k) {
        const Branch& br = net_.branches[k];
        const int fi = net_.bus_index(br.from_bus);
        const int ti = net_.bus_index(br.to_bus);
        const Bus& bf = net_.buses[static_cast<std::size_t>(fi)];
        const Bus& bt = net_.buses[static_cast<std::size_t>(ti)];
        for (int p = 0; p < br.phases.size(); ++p) {
            const int rf = kcl_row[static_cast<std::size_t>(fi) * 3 +
                                   static_cast<std::size_t>(bf.phases.index_of(br.phases.member(p)))];
            const int rt = kcl_row[static_cast<std::size_t>(ti) * 3 +
                                   static_cast<std::size_t>(bt.phases.index_of(br.phases.member(p)))];
            if (rf >= 0) {
                add_complex(rf, branch_offset_[k] + 2 * p, 1.0);
                if (bus_offset_[static_cast<std::size_t>(fi)] >= 0)
                    for (int q = 0; q < br.phases.size(); ++q)
                        add_complex(rf,
                                    bus_offset_[static_cast<std::size_t>(fi)] +
                                        2 * bf.phases.index_of(br.phases.member(q)),
                                    br.y_sh_from.at(p, q));
            }
            if (rt >= 0) {
                add_complex(rt, branch_offset_[k] + 2 * p, -1.0);
                if (bus_offset_[static_cast<std::size_t>(ti)] >= 0)
                    for (int q = 0; q < br.phases.size(); ++q)
                        add_complex(rt,
                                    bus_offset_[static_cast<std::size_t>(ti)] +
                                        2 * bt.phases.index_of(br.phases.member(q)),
                                    br.y_sh_to.at(p, q));
            }
        }
    }

    for (const Shunt& sh : net_.shunts) {
        const int bi = net_.bus_index(sh.bus);
        if (bus_offset_[static_cast<std::size_t>(bi)] < 0) continue;
        const Bus& bus = net_.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < sh.phases.size(); ++p) {
            const int r0 = kcl_row[static_cast<std::size_t>(bi) * 3 +
                                   static_cast<std::size_t>(bus.phases.index_of(sh.phases.member(p)))];
            for (int q = 0; q < sh.phases.size(); ++q)
                add_complex(r0,
                            bus_offset_[static_cast<std::size_t>(bi)] + 2 * bus.phases.index_of(sh.phases.member(q)),
                            sh.y.at(p, q));
        }
    }

    // Unit current conj(S / V): rational in (e, f) = (Re V, Im V).
    for (std::size_t k = 0; k < net_.units.size(); ++k) {
        const Unit& u = net_.units[k];
        const int bi = net_.bus_index(u.bus);
        if (bus_offset_[static_cast<std::size_t>(bi)] < 0) continue;
        const Bus& bus = net_.buses[static_cast<std::size_t>(bi)];
        for (int p = 0; p < u.phases.size(); ++p) {
            const int slot = bus.phases.index_of(u.phases.member(p));
            const int r0 = kcl_row[static_cast<std::size_t>(bi) * 3 + static_cast<std::size_t>(slot)];
            const int col = bus_offset_[static_cast<std::size_t>(bi)] + 2 * slot;
            cx v = s.v[static_cast<std::size_t>(bi)][slot];
            double mag = std::abs(v);
            if (mag < kClampGuard) v = mag == 0.0 ? cx{kClampGuard, 0.0} : v * (kClampGuard / mag);
            const double e = v.real(), f = v.imag();
            const double d = e * e + f * f;
            const double ps = (*u.setpoint)[static_cast<std::size_t>(p)].real();
            const double qs = (*u.setpoint)[static_cast<std::size_t>(p)].imag();
            // I = (P e + Q f)/d + i (P f - Q e)/d
            const double ire = (ps * e + qs * f) / d;
            const double iim = (ps * f - qs * e) / d;
            j.at(r0, col) += ps / d - ire * 2.0 * e / d;
            j.at(r0, col + 1) += qs / d - ire * 2.0 * f / d;
            j.at(r0 + 1, col) += -qs / d - iim * 2.0 * e / d;
            j.at(r0 + 1, col + 1) += ps / d - iim * 2.0 * f / d;
        }
    }

    return j;
}

SolveResult solve_newton(const Network& net_in, const SolveOptions& opts) {
    if (opts.tol <= 0.0 || opts.max_iter < 1 || opts.damping <= 0.0 || opts.damping > 1.0)
        throw Error(ErrorKind::input, "bad solver options");
    const bool si = net_in.unit_system == UnitSystem::si;
    const Network net = si ? to_per_unit(net_in) : net_in;
    check_power_flow_ready(net);

    NewtonSystem sys(net);
    std::vector<double> x;
    if (!opts.flat_start && opts.initial)
        x = sys.pack(si ? state_to_per_unit(net_in, *opts.initial) : *opts.initial);
    else
        x = sys.flat_vector();

    SolveResult result;
    auto norm_inf = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    };

    std::vector<double> r = sys.residual(x);
    double rn = norm_inf(r);
    result.trace.residual_norms.push_back(rn);

    for (int iter = 0; iter < opts.max_iter && rn > opts.tol; ++iter) {
        Mat j = sys.jacobian(x);
        std::vector<double> dx = r;
        const int bad_pivot = lu_solve(std::move(j), dx);
        if (bad_pivot >= 0) {
            result.trace.reason = Termination::singular_jacobian;
            result.trace.detail = "singular Jacobian at pivot column " + std::to_string(bad_pivot);
            throw Error(ErrorKind::numerical, result.trace.detail);
        }

        // Full step, halved while the residual norm fails to decrease.
        double step = opts.damping;
        std::vector<double> x_next(x.size());
        std::vector<double> r_next;
        double rn_next = rn;
        for (int halving = 0; halving <= 4; ++halving) {
            for (std::size_t kk = 0; kk < x.size(); ++kk) x_next[kk] = x[kk] - step * dx[kk];
            r_next = sys.residual(x_next);
            rn_next = norm_inf(r_next);
            if (rn_next < rn || halving == 4) {
                if (halving > 0) ++result.trace.damped_steps;
                break;
            }
            step *= 0.5;
        }
        if (sys.last_eval_clamped()) result.trace.voltage_clamped = true;
        x = std::move(x_next);
        r = std::move(r_next);
        rn = rn_next;
        result.trace.residual_norms.push_back(rn);
    }

    result.converged = rn <= opts.tol;
    result.trace.reason = result.converged ? Termination::converged : Termination::max_iterations;
    if (!result.converged)
        result.trace.detail = "residual " + std::to_string(rn) + " above tolerance after " +
                              std::to_string(result.trace.iterations()) + " iterations";

    IVState pu_state = sys.unpack(x);
    if (si) {
        // Scale the per-unit solution back to the input system.
        for (std::size_t k = 0; k < net_in.buses.size(); ++k) {
            const double vb = net_in.bus_vbase(static_cast<int>(k));
            for (int p = 0; p < pu_state.v[k].size(); ++p) pu_state.v[k][p] *= vb;
        }
        for (std::size_t k = 0; k < net_in.branches.size(); ++k) {
            const double vb = net_in.bus_vbase(net_in.bus_index(net_in.branches[k].from_bus));
            const double ib = net_in.sbase / vb;
            for (int p = 0; p < pu_state.i_series[k].size(); ++p) pu_state.i_series[k][p] *= ib;
        }
        for (std::size_t k = 0; k < net_in.units.size(); ++k)
            for (int p = 0; p < pu_state.unit_s[k].size(); ++p) pu_state.unit_s[k][p] *= net_in.sbase;
    }
    result.state = std::move(pu_state);
    return result;
}

}  // namespace triflow
