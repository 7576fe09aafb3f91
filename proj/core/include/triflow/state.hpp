#pragma once

#include <map>
#include <vector>

#include "triflow/network.hpp"
#include "triflow/phasor.hpp"

namespace triflow {

/// Natural Kirchhoff variable space: complex bus voltages plus the
/// series current of every branch in its from -> to direction.
struct IVState {
    std::vector<CVec> v;         // per bus, sized by the bus phase set
    std::vector<CVec> i_series;  // per branch, from -> to
    std::vector<CVec> unit_s;    // per unit, per-phase complex power draw

    static IVState sized_for(const Network& net);
};

struct PolarState {
    std::vector<std::vector<double>> vm;  // per bus per phase
    std::vector<std::vector<double>> va;  // rad, wrapped into (-pi, pi]
    // Diagonal branch power flows, per branch per phase, both directions.
    std::vector<std::vector<double>> branch_p_from, branch_q_from;
    std::vector<std::vector<double>> branch_p_to, branch_q_to;
    std::vector<std::vector<double>> unit_p, unit_q;
};

struct RectState {
    std::vector<std::vector<double>> vre, vim;
    std::vector<std::vector<double>> branch_p_from, branch_q_from;
    std::vector<std::vector<double>> branch_p_to, branch_q_to;
    std::vector<std::vector<double>> unit_p, unit_q;
};

/// SDP variable space: outer products of the natural variables.
struct LiftedState {
    std::vector<Hermitian> w;        // per bus, V V^H
    std::vector<Hermitian> l_series; // per branch, I^s I^sH
    std::vector<CMat> s_series;      // per branch, V_from I^sH
    std::vector<CMat> s_total_from;  // per branch, V_from I_from^H
    std::vector<CMat> s_total_to;    // per branch, V_to I_to^H
    /// Voltage cross products V_i V_j^H keyed by bus index pair (i < j);
    /// filled for every pair so the meshed system block can be assembled.
    std::map<std::pair<int, int>, CMat> w_cross;
    std::vector<std::vector<double>> unit_p, unit_q;
    /// Hermitian symmetry defects observed when matrices were supplied
    /// externally; zero for states built by lifting.
    double w_defect = 0.0;
    double l_defect = 0.0;

    const CMat* cross(int i, int j) const;  // nullptr if absent; adjoints handled
};

/// Exact coordinate conversions (angles wrapped into (-pi, pi]).
PolarState iv_to_polar(const Network& net, const IVState& s);
RectState iv_to_rect(const Network& net, const IVState& s);
PolarState polar_from_rect(const RectState& s);
RectState rect_from_polar(const PolarState& s);

/// Lifts a natural state into the SDP variable space; every product
/// matrix is an exact outer product, so rank-1 residuals vanish.
LiftedState lift(const Network& net, const IVState& s);

/// Total current leaving `bus_end` of branch `b`: series + shunt share.
CVec branch_total_current(const Branch& b, const CVec& v_end, const CVec& i_series_directed,
                          bool from_side);

/// Per-phase unit current conj(S / V); throws Error(numerical) when a
/// voltage magnitude underflows vmin_guard while its power is nonzero.
CVec unit_current(const CVec& s, const CVec& v, double vmin_guard);

/// Scales a state between SI and per-unit to match `to_per_unit(net)`.
IVState state_to_per_unit(const Network& si_net, const IVState& s);
LiftedState state_to_per_unit(const Network& si_net, const LiftedState& s);

}  // namespace triflow
