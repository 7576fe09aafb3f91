#pragma once

#include <string>

#include "triflow/feasibility.hpp"
#include "triflow/manifest.hpp"
#include "triflow/network.hpp"
#include "triflow/solver.hpp"
#include "triflow/state.hpp"

namespace triflow {

/// Solution files carry the per-unit state: per-bus rectangular and
/// polar voltages, per-branch series currents and diagonal end powers,
/// per-unit complex powers. 12 significant digits.
std::string write_solution(const Network& net, const IVState& state_in_net_units,
                           const SolveTrace& trace, bool converged, const RunManifest& manifest);

/// Reads a solution back into a per-unit IVState; throws Error(input)
/// when ids or dimensions do not match the network.
IVState read_solution(const std::string& text, const Network& net);

/// Lifted-state file with per-block rank / psd residual summaries.
std::string write_lifted_file(const Network& net, const LiftedState& pu_state,
                              const RunManifest& manifest);

/// Consistency + bound report serialization (deterministic payload).
std::string write_report(const ConsistencyReport& consistency, const RunManifest& manifest);

/// Strips "# generated ..." lines: the reproducible payload.
std::string reproducible_payload(const std::string& file_text);

}  // namespace triflow
