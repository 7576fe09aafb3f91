#pragma once

#include <optional>
#include <string>
#include <vector>

#include "triflow/network.hpp"
#include "triflow/state.hpp"

namespace triflow {

struct SolveOptions {
    double tol = 1e-10;   // residual inf-norm threshold, per unit
    int max_iter = 50;
    double damping = 1.0;  // initial step scale in (0, 1]
    bool flat_start = true;
    /// Warm start used when flat_start is off; in the unit system of
    /// the network handed to the solver.
    std::optional<IVState> initial;
};

enum class Termination { converged, max_iterations, singular_jacobian };

struct SolveTrace {
    std::vector<double> residual_norms;  // [0] is the initial residual
    Termination reason = Termination::converged;
    std::string detail;
    int damped_steps = 0;
    bool voltage_clamped = false;

    int iterations() const { return static_cast<int>(residual_norms.size()) - 1; }
};

struct SolveResult {
    IVState state;  // in the unit system of the input network
    SolveTrace trace;
    bool converged = false;
};

/// Newton-Raphson on the rectangular current-voltage system: unknowns
/// are the non-reference bus voltages and the branch series currents,
/// residuals the branch voltage drops and the nodal current balances.
/// Requires setpoints on every unit and at least one reference bus.
/// Throws Error(input) for structural problems (missing setpoints,
/// unreachable conductors) and Error(numerical) for a singular Jacobian.
SolveResult solve_newton(const Network& net, const SolveOptions& opts = {});

/// Backward/forward sweep for radial networks; shares no linear-algebra
/// path with the Newton solver. Throws Error(input) on meshed input.
SolveResult solve_sweep(const Network& net, const SolveOptions& opts = {});

/// The assembled Newton system over a per-unit network, exposed so the
/// analytic Jacobian can be checked against finite differences.
class NewtonSystem {
  public:
    explicit NewtonSystem(const Network& pu_net);

    int size() const { return size_; }
    std::vector<double> pack(const IVState& s) const;
    IVState unpack(const std::vector<double>& x) const;
    std::vector<double> flat_vector() const;

    std::vector<double> residual(const std::vector<double>& x) const;
    Mat jacobian(const std::vector<double>& x) const;

    bool last_eval_clamped() const { return clamped_; }

  private:
    const Network& net_;
    int size_ = 0;
    std::vector<int> bus_offset_;     // -1 for reference buses
    std::vector<int> branch_offset_;
    mutable bool clamped_ = false;

    friend SolveResult solve_newton(const Network&, const SolveOptions&);
};

}  // namespace triflow
