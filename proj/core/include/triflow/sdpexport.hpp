#pragma once

#include <map>
#include <string>
#include <vector>

#include "triflow/network.hpp"
#include "triflow/state.hpp"

namespace triflow {

enum class SdpObjective { min_total_injection, min_losses };

struct ConicVar {
    std::string symbol;      // w_re, w_im, ps, qs, l_re, l_im, wc_re, wc_im, unit_p, unit_q
    std::string entity;      // bus / branch / unit id
    std::string phase_pair;  // "ab", "a", ...
};

struct PsdEntry {
    int row = 0, col = 0;  // 0-based, row <= col
    int var = 0;
    double coeff = 0.0;
};

struct PsdBlockSpec {
    std::string name;
    int dim = 0;  // real embedding dimension
    std::vector<PsdEntry> entries;
};

struct LinearRow {
    std::string name;
    char relation = '=';  // '=' or '>' (meaning >=)
    double rhs = 0.0;
    std::vector<std::pair<int, double>> coeffs;  // sorted by variable
};

/// Linear conic problem over named scalar variables entering PSD blocks:
/// minimize c^T x subject to the linear rows and block PSD constraints.
struct ConicProblem {
    std::vector<ConicVar> vars;
    std::vector<PsdBlockSpec> blocks;
    std::vector<LinearRow> rows;
    std::vector<std::pair<int, double>> objective;

    int count_equalities() const;
    int count_inequalities() const;
    /// Flat index lookup; -1 when the triple is not a variable.
    int var_index(const std::string& symbol, const std::string& entity,
                  const std::string& phase_pair) const;
};

/// Branch-flow relaxation: variables (W, S^s both directions, L, unit
/// powers), rows (loss balance, squared Ohm, nodal power balance at
/// non-reference buses, reference pinning, unit rows, voltage / total
/// current / angle-difference bounds), one PSD block per branch plus an
/// explicit W block per leaf bus. Radial networks only.
ConicProblem build_bfm_sdp(const Network& net, SdpObjective objective);

/// Bus-injection relaxation: bus-pair blocks on radial networks, one
/// system-wide block (with cross variables for every bus pair) when
/// meshed. Rejects zero-impedance branches (admittance form).
ConicProblem build_bim_sdp(const Network& net, SdpObjective objective);

/// Sparse SDPA (.dat-s) text: comments carry the index map, linear rows
/// go into a trailing diagonal block (equalities as paired
/// inequalities). Byte-deterministic.
std::string write_sdpa(const ConicProblem& p);

/// The index-map sidecar, one "index symbol entity pair" line per
/// variable (1-based indices, matching the .dat-s columns).
std::string write_index_map(const ConicProblem& p);

/// Reader for the emitted dialect; used for round-trip checks and by
/// the independent row evaluator in the acceptance suite.
struct SdpaFile {
    int m = 0;
    std::vector<int> block_sizes;  // negative = diagonal block
    std::vector<double> c;
    struct Entry {
        int matno = 0, block = 0, row = 0, col = 0;  // 1-based as in the format
        double value = 0.0;
    };
    std::vector<Entry> entries;
};
SdpaFile parse_sdpa(const std::string& text);

/// Builds the flat variable vector of `p` from a lifted power-flow
/// state (per-unit), using the index map.
std::vector<double> conic_vector_from_lifted(const ConicProblem& p, const Network& pu_net,
                                             const LiftedState& s);

}  // namespace triflow
