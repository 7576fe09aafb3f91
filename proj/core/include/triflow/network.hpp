#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "triflow/phasor.hpp"

namespace triflow {

/// Error category used to map failures onto process exit codes.
enum class ErrorKind { input, numerical };

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

char phase_letter(Phase p);

/// Ordered subset of {a, b, c}; order fixed as a < b < c.
class PhaseSet {
  public:
    PhaseSet() = default;

    static PhaseSet abc();
    static PhaseSet single(Phase p);
    /// Parses strings like "abc", "b", "ac". Empty optional on anything else.
    static std::optional<PhaseSet> parse(std::string_view s);

    bool contains(Phase p) const { return (mask_ & bit(p)) != 0; }
    void add(Phase p) { mask_ |= bit(p); }
    int size() const;
    bool empty() const { return mask_ == 0; }
    bool subset_of(const PhaseSet& o) const { return (mask_ & ~o.mask_) == 0; }

    /// Position of p within the ordered members; -1 when absent.
    int index_of(Phase p) const;
    /// k-th member in a < b < c order.
    Phase member(int k) const;

    std::string str() const;
    bool operator==(const PhaseSet& o) const { return mask_ == o.mask_; }

  private:
    static std::uint8_t bit(Phase p) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(p)); }
    std::uint8_t mask_ = 0;
};

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct Bus {
    std::string id;
    PhaseSet phases;
    double vbase = 0.0;  // line-to-neutral volts; 0 means "use network default"
    std::vector<double> vmin;     // per phase
    std::vector<double> vmax;     // per phase
    std::vector<double> pad_min;  // per cyclic phase pair present (ab, bc, ca)
    std::vector<double> pad_max;
    bool is_reference = false;
    std::vector<cx> vref;  // per phase, present iff reference

    /// Cyclic pairs (a,b), (b,c), (c,a) with both phases present.
    std::vector<std::pair<Phase, Phase>> pad_pairs() const;
};

/// Two-port Pi-model branch: series impedance plus a shunt admittance
/// at each end, all full matrices over the branch phase set.
struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    PhaseSet phases;
    CMat z_series;   // ohm
    CMat y_sh_from;  // siemens
    CMat y_sh_to;    // siemens
    std::vector<double> i_rated;  // amps, per phase
    std::vector<double> s_rated;  // VA, per phase
    std::vector<double> vad_min;  // rad, per phase
    std::vector<double> vad_max;
};

/// Generalized load/generator/storage connection.
struct Unit {
    std::string id;
    std::string bus;
    PhaseSet phases;
    std::vector<double> p_min;
    std::vector<double> p_max;
    std::vector<double> q_min;
    std::vector<double> q_max;
    std::vector<double> i_rated;
    /// Fixed per-phase complex power draw; required for power-flow mode.
    std::optional<std::vector<cx>> setpoint;
};

struct Shunt {
    std::string id;
    std::string bus;
    PhaseSet phases;
    CMat y;  // siemens
    std::vector<double> i_rated;
};

enum class UnitSystem { si, per_unit };

struct Network {
    std::string name;
    UnitSystem unit_system = UnitSystem::si;
    double sbase = 1.0;      // VA
    double vbase = 1.0;      // default line-to-neutral volts for buses without their own
    double frequency = 50.0;  // Hz

    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Unit> units;
    std::vector<Shunt> shunts;

    int bus_index(const std::string& id) const;
    const Bus& bus(const std::string& id) const;
    double bus_vbase(int bus_idx) const;
    double bus_vbase(const Bus& b) const;

    /// Rebuilds the id -> index map; call after mutating `buses`.
    void rebuild_index();

    std::vector<int> reference_bus_indices() const;
    /// True when the undirected branch graph is cycle-free.
    bool is_radial() const;

  private:
    std::unordered_map<std::string, int> bus_lookup_;
};

struct ValidationDiagnostic {
    std::string path;  // e.g. "branch line1.z_series"
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationDiagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
    std::string to_text() const;
};

/// Structural and bound checks; diagnostics are data, never exceptions.
ValidationReport validate(const Network& net);

/// Applies default bounds where vectors are empty and wraps stored angles.
/// Parsers call this once after construction.
void apply_defaults(Network& net);

/// Per-phase connectivity: every (bus, phase) must reach a reference bus
/// phase through branch phase sets. Returns offending "bus.phase" paths.
std::vector<std::string> unreachable_phases(const Network& net);

CMat series_admittance(const Branch& b);

/// Nondimensionalizes: voltage by vbase, power by sbase, impedance by
/// vbase^2/sbase, admittance by its inverse, current by sbase/vbase.
Network to_per_unit(const Network& net);
Network from_per_unit(const Network& net);

}  // namespace triflow
