#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zklab/common.hpp"
#include "zklab/linalg.hpp"

namespace zklab {

// Pure state on num_qubits wires. Amplitudes are stored sparsely (index
// ascending, zeros dropped): the circuits in this project branch over a few
// classical paths plus small dense blocks, so the nonzero support stays tiny
// even when the wire count would make a dense vector impractical.
struct StateVector {
    int num_qubits = 0;
    std::vector<std::pair<u64, cplx>> amps;

    static StateVector basis(int num_qubits, u64 idx);
    double norm2() const;
    std::vector<cplx> dense() const;  // small states only
    void check_norm(double tol = 1e-10) const;
};

// Classical function table f: n1 bits -> n2 bits, applied as
// |x>|a> -> |x>|a xor f(x)>.
struct FunctionOracle {
    int n1 = 0, n2 = 0;
    std::vector<u64> table;  // size 2^n1

    void validate() const;
};

struct Step {
    enum class Kind { Gate1, CX, Unitary, Table, Permute, Prepare, Oracle };
    enum class Gate { H, X, Z, RY };

    Kind kind;
    Gate gate = Gate::H;
    double theta = 0.0;            // RY angle
    std::vector<int> wires;        // Gate1: 1 wire; CX: control, target
    std::vector<int> out_wires;    // Table, Oracle
    std::vector<u64> table;        // Table, Permute
    CMat matrix;                   // Unitary
    u64 prepare_count = 0;         // Prepare
    int oracle_id = 0;             // Oracle

    static Step gate1(Gate g, int wire, double theta = 0.0);
    static Step cx(int control, int target);
    static Step unitary(std::vector<int> wires, CMat u);
    static Step classical(std::vector<int> in, std::vector<int> out, std::vector<u64> tab);
    static Step permute(std::vector<int> wires, std::vector<u64> perm);
    static Step prepare_uniform(std::vector<int> wires, u64 count);
    static Step oracle(int oracle_id, std::vector<int> in, std::vector<int> out);
};

// A circuit with marked oracle slots and a hard query budget. Output registers
// list the classical message registers in protocol order; final_register holds
// the last (possibly quantum) message. Everything else is work space.
struct QueryAlgorithm {
    int num_qubits = 0;
    int query_budget = 0;
    std::vector<Step> steps;
    std::vector<std::vector<int>> output_registers;
    std::vector<int> final_register;
    std::optional<int> failure_wire;

    void validate(int qubit_cap = kDefaultQubitCap) const;
};

struct RunResult {
    StateVector state;
    int queries = 0;
};

void apply_oracle(StateVector& st, const FunctionOracle& f, std::span<const int> in_wires,
                  std::span<const int> out_wires);
void apply_step(StateVector& st, const Step& s, std::span<const FunctionOracle> oracles,
                int* query_count, int query_budget);

RunResult run_query_algorithm(const QueryAlgorithm& alg, std::span<const FunctionOracle> oracles,
                              int qubit_cap = kDefaultQubitCap);

// Projective measurement of the listed wires in the computational basis.
// Residual branches keep all wires; the measured ones hold the outcome.
struct OutcomeBranch {
    double prob = 0.0;
    StateVector residual;
};
struct OutcomeDistribution {
    std::map<u64, OutcomeBranch> entries;
    double total() const;
};

OutcomeDistribution measure(const StateVector& st, std::span<const int> wires);

struct DensityMatrix {
    int num_qubits = 0;
    CMat mat;

    static DensityMatrix from_state(const StateVector& st);
    static DensityMatrix basis(int num_qubits, u64 idx);
    double trace_real() const;
    // hermitian within 1e-10, eigenvalues >= -1e-8, trace within tol of expected
    void validate(double expected_trace = 1.0, double trace_tol = 1e-10) const;
};

// Partial trace down to the listed wires (in the given order).
DensityMatrix reduce_to_density(const StateVector& st, std::span<const int> keep_wires);

// Zero every matrix element between basis states that differ on `wires`.
// This is exactly what measuring those wires does to the ensemble average.
DensityMatrix dephase(const DensityMatrix& rho, std::span<const int> wires);

struct QuantumPredicate {
    CMat e;

    static QuantumPredicate diagonal(const std::vector<double>& d);
    // hermitian within 1e-10, eigenvalues in [-1e-8, 1 + 1e-8]
    void validate() const;
};

double predicate_accept(const QuantumPredicate& e, const DensityMatrix& rho);

DensityMatrix mix(const std::vector<std::pair<double, DensityMatrix>>& branches,
                  bool renormalize = false);

}  // namespace zklab
