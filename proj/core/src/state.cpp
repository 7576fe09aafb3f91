#include "triflow/state.hpp"

#include <cmath>

namespace triflow {

IVState IVState::sized_for(const Network& net) {
    IVState s;
    for (const Bus& b : net.buses) s.v.emplace_back(b.phases.size());
    for (const Branch& br : net.branches) s.i_series.emplace_back(br.phases.size());
    for (const Unit& u : net.units) s.unit_s.emplace_back(u.phases.size());
    return s;
}

const CMat* LiftedState::cross(int i, int j) const {
    auto it = w_cross.find({std::min(i, j), std::max(i, j)});
    if (it == w_cross.end()) return nullptr;
    return &it->second;
}

namespace {

std::vector<double> mags(const CVec& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (int k = 0; k < v.size(); ++k) out[static_cast<std::size_t>(k)] = std::abs(v[k]);
    return out;
}

std::vector<double> args(const CVec& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (int k = 0; k < v.size(); ++k) out[static_cast<std::size_t>(k)] = wrap_angle(std::arg(v[k]));
    return out;
}

/// Restricts a bus-sized vector to the branch phase subset.
CVec restrict_vec(const CVec& v, const PhaseSet& bus_ps, const PhaseSet& branch_ps) {
    CVec out(branch_ps.size());
    for (int k = 0; k < branch_ps.size(); ++k) {
        const Phase p = branch_ps.member(k);
        out[k] = v[bus_ps.index_of(p)];
    }
    return out;
}

}  // namespace

CVec branch_total_current(const Branch& b, const CVec& v_end, const CVec& i_series_directed,
                          bool from_side) {
    const CMat& ysh = from_side ? b.y_sh_from : b.y_sh_to;
    CVec i_dir = from_side ? i_series_directed : -i_series_directed;
    return i_dir + ysh * v_end;
}

CVec unit_current(const CVec& s, const CVec& v, double vmin_guard) {
    CVec out(s.size());
    for (int k = 0; k < s.size(); ++k) {
        const double mag = std::abs(v[k]);
        if (mag < vmin_guard) {
            if (std::abs(s[k]) > 0.0)
                throw Error(ErrorKind::numerical,
                            "voltage magnitude underflow while recovering a unit current");
            out[k] = 0.0;
            continue;
        }
        out[k] = std::conj(s[k] / v[k]);
    }
    return out;
}

PolarState iv_to_polar(const Network& net, const IVState& s) {
    PolarState out;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        out.vm.push_back(mags(s.v[k]));
        out.va.push_back(args(s.v[k]));
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const Bus& bf = net.buses[static_cast<std::size_t>(net.bus_index(br.from_bus))];
        const Bus& bt = net.buses[static_cast<std::size_t>(net.bus_index(br.to_bus))];
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.from_bus))], bf.phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.to_bus))], bt.phases, br.phases);
        const CVec i_from = branch_total_current(br, vf, s.i_series[k], true);
        const CVec i_to = branch_total_current(br, vt, s.i_series[k], false);
        std::vector<double> pf, qf, pt, qt;
        for (int p = 0; p < br.phases.size(); ++p) {
            const cx sf = vf[p] * std::conj(i_from[p]);
            const cx st = vt[p] * std::conj(i_to[p]);
            pf.push_back(sf.real());
            qf.push_back(sf.imag());
            pt.push_back(st.real());
            qt.push_back(st.imag());
        }
        out.branch_p_from.push_back(std::move(pf));
        out.branch_q_from.push_back(std::move(qf));
        out.branch_p_to.push_back(std::move(pt));
        out.branch_q_to.push_back(std::move(qt));
    }
    for (const CVec& su : s.unit_s) {
        std::vector<double> up, uq;
        for (int p = 0; p < su.size(); ++p) {
            up.push_back(su[p].real());
            uq.push_back(su[p].imag());
        }
        out.unit_p.push_back(std::move(up));
        out.unit_q.push_back(std::move(uq));
    }
    return out;
}

RectState iv_to_rect(const Network& net, const IVState& s) {
    PolarState polar = iv_to_polar(net, s);
    RectState out;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        std::vector<double> re, im;
        for (int p = 0; p < s.v[k].size(); ++p) {
            re.push_back(s.v[k][p].real());
            im.push_back(s.v[k][p].imag());
        }
        out.vre.push_back(std::move(re));
        out.vim.push_back(std::move(im));
    }
    out.branch_p_from = std::move(polar.branch_p_from);
    out.branch_q_from = std::move(polar.branch_q_from);
    out.branch_p_to = std::move(polar.branch_p_to);
    out.branch_q_to = std::move(polar.branch_q_to);
    out.unit_p = std::move(polar.unit_p);
    out.unit_q = std::move(polar.unit_q);
    return out;
}

PolarState polar_from_rect(const RectState& s) {
    PolarState out;
    for (std::size_t k = 0; k < s.vre.size(); ++k) {
        std::vector<double> vm, va;
        for (std::size_t p = 0; p < s.vre[k].size(); ++p) {
            const cx v{s.vre[k][p], s.vim[k][p]};
            vm.push_back(std::abs(v));
            va.push_back(wrap_angle(std::arg(v)));
        }
        out.vm.push_back(std::move(vm));
        out.va.push_back(std::move(va));
    }
    out.branch_p_from = s.branch_p_from;
    out.branch_q_from = s.branch_q_from;
    out.branch_p_to = s.branch_p_to;
    out.branch_q_to = s.branch_q_to;
    out.unit_p = s.unit_p;
    out.unit_q = s.unit_q;
    return out;
}

RectState rect_from_polar(const PolarState& s) {
    RectState out;
    for (std::size_t k = 0; k < s.vm.size(); ++k) {
        std::vector<double> re, im;
        for (std::size_t p = 0; p < s.vm[k].size(); ++p) {
            re.push_back(s.vm[k][p] * std::cos(s.va[k][p]));
            im.push_back(s.vm[k][p] * std::sin(s.va[k][p]));
        }
        out.vre.push_back(std::move(re));
        out.vim.push_back(std::move(im));
    }
    out.branch_p_from = s.branch_p_from;
    out.branch_q_from = s.branch_q_from;
    out.branch_p_to = s.branch_p_to;
    out.branch_q_to = s.branch_q_to;
    out.unit_p = s.unit_p;
    out.unit_q = s.unit_q;
    return out;
}

LiftedState lift(const Network& net, const IVState& s) {
    LiftedState out;
    for (std::size_t k = 0; k < net.buses.size(); ++k) out.w.push_back(Hermitian::from_outer(s.v[k]));

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const Bus& bf = net.buses[static_cast<std::size_t>(net.bus_index(br.from_bus))];
        const Bus& bt = net.buses[static_cast<std::size_t>(net.bus_index(br.to_bus))];
        const CVec vf = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.from_bus))], bf.phases, br.phases);
        const CVec vt = restrict_vec(s.v[static_cast<std::size_t>(net.bus_index(br.to_bus))], bt.phases, br.phases);
        const CVec& is = s.i_series[k];
        out.l_series.push_back(Hermitian::from_outer(is));
        out.s_series.push_back(outer(vf, is));
        out.s_total_from.push_back(outer(vf, branch_total_current(br, vf, is, true)));
        out.s_total_to.push_back(outer(vt, branch_total_current(br, vt, is, false)));
    }

    // Every bus pair, so both the radial pair blocks and the meshed
    // system block can be formed from one state.
    for (int i = 0; i < static_cast<int>(net.buses.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(net.buses.size()); ++j)
            out.w_cross[{i, j}] = outer(s.v[static_cast<std::size_t>(i)], s.v[static_cast<std::size_t>(j)]);

    for (const CVec& su : s.unit_s) {
        std::vector<double> up, uq;
        for (int p = 0; p < su.size(); ++p) {
            up.push_back(su[p].real());
            uq.push_back(su[p].imag());
        }
        out.unit_p.push_back(std::move(up));
        out.unit_q.push_back(std::move(uq));
    }
    return out;
}

IVState state_to_per_unit(const Network& si_net, const IVState& s) {
    IVState out = s;
    for (std::size_t k = 0; k < si_net.buses.size(); ++k) {
        const double vb = si_net.bus_vbase(static_cast<int>(k));
        for (int p = 0; p < out.v[k].size(); ++p) out.v[k][p] /= vb;
    }
    for (std::size_t k = 0; k < si_net.branches.size(); ++k) {
        const double vb = si_net.bus_vbase(si_net.bus_index(si_net.branches[k].from_bus));
        const double ib = si_net.sbase / vb;
        for (int p = 0; p < out.i_series[k].size(); ++p) out.i_series[k][p] /= ib;
    }
    for (std::size_t k = 0; k < si_net.units.size(); ++k)
        for (int p = 0; p < out.unit_s[k].size(); ++p) out.unit_s[k][p] /= si_net.sbase;
    return out;
}

LiftedState state_to_per_unit(const Network& si_net, const LiftedState& s) {
    LiftedState out = s;
    auto scale_herm = [](const Hermitian& h, double f) {
        Hermitian r(h.size());
        for (int i = 0; i < h.size(); ++i)
            for (int j = i; j < h.size(); ++j) r.set(i, j, h.at(i, j) * f);
        return r;
    };
    for (std::size_t k = 0; k < si_net.buses.size(); ++k) {
        const double vb = si_net.bus_vbase(static_cast<int>(k));
        out.w[k] = scale_herm(out.w[k], 1.0 / (vb * vb));
    }
    for (std::size_t k = 0; k < si_net.branches.size(); ++k) {
        const double vb = si_net.bus_vbase(si_net.bus_index(si_net.branches[k].from_bus));
        const double ib = si_net.sbase / vb;
        out.l_series[k] = scale_herm(out.l_series[k], 1.0 / (ib * ib));
        out.s_series[k] = out.s_series[k] * cx{1.0 / si_net.sbase, 0.0};
        out.s_total_from[k] = out.s_total_from[k] * cx{1.0 / si_net.sbase, 0.0};
        out.s_total_to[k] = out.s_total_to[k] * cx{1.0 / si_net.sbase, 0.0};
    }
    for (auto& [key, m] : out.w_cross) {
        const double vbi = si_net.bus_vbase(key.first);
        const double vbj = si_net.bus_vbase(key.second);
        m = m * cx{1.0 / (vbi * vbj), 0.0};
    }
    for (auto& vp : out.unit_p)
        for (double& x : vp) x /= si_net.sbase;
    for (auto& vq : out.unit_q)
        for (double& x : vq) x /= si_net.sbase;
    return out;
}

}  // namespace triflow
