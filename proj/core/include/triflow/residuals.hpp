#pragma once

#include <string>
#include <vector>

#include "triflow/network.hpp"
#include "triflow/state.hpp"

namespace triflow {

struct ResidualEntry {
    std::string id;
    double value = 0.0;
};

struct ResidualGroup {
    std::string name;
    std::vector<ResidualEntry> entries;
    double inf_norm() const;
};

struct ResidualReport {
    std::vector<ResidualGroup> groups;
    double inf_norm() const;
    const ResidualGroup* find(const std::string& name) const;
};

/// All evaluators report in per-unit regardless of the network's unit
/// system. Kirchhoff current/power balances are checked at non-reference
/// buses; reference buses carry the slack injection and are checked
/// against their fixed phasor instead.

/// Groups: ohm (voltage drop per branch), kcl (current balance), ref.
ResidualReport residual_iv(const Network& net, const IVState& s);

/// Groups: pf_p, pf_q (diagonal flows, both directions), kcl_p, kcl_q, ref.
/// Throws Error(input) on a zero-impedance branch (admittance form).
ResidualReport residual_polar(const Network& net, const PolarState& s);

/// Rectangular mirror of residual_polar.
ResidualReport residual_rect(const Network& net, const RectState& s);

/// Groups: pf_p, pf_q (full flow matrices), kcl_p, kcl_q, hermitian,
/// psd, rank (bus-pair blocks; one system block when meshed), ref.
/// Throws Error(input) on a zero-impedance branch.
ResidualReport residual_bim_lifted(const Network& net, const LiftedState& s);

/// Groups: balance_p/q, ohm_re (upper+diag), ohm_im (upper), link_p/q,
/// kcl_p/q, psd, rank (per-branch blocks), hermitian, ref.
/// Accepts zero-impedance branches (impedance form).
ResidualReport residual_bfm_lifted(const Network& net, const LiftedState& s);

}  // namespace triflow
