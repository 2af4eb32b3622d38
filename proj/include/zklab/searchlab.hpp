#pragma once

#include "zklab/fieldhash.hpp"
#include "zklab/qcore.hpp"

namespace zklab {

// Preimage-search experiments over a uniformly random function F: n1 -> n2
// bits. Success means outputting a point whose F-value hits the target
// (a single beta, encoded as a constant table, or per-point targets beta_a).
struct SearchInstance {
    int n1 = 1, n2 = 1;
    int t = 0;  // query budget of the searcher
    std::vector<u64> beta_table;

    void validate() const;
    static SearchInstance single_target(int n1, int n2, int t, u64 beta);
};

// Exact optimum over adaptive classical strategies making t queries:
// 1 - (1 - 2^{-n2})^{t+1}. Needs t+1 distinct probe points.
double classical_optimal_search(int t, int n1, int n2);

// (t+1)/2^{n2}, the linear ceiling the optimum must stay under.
double classical_search_bound(int t, int n2);

// Independent cross-check: exact backward induction over every adaptive
// decision tree (query choices may depend on observed values, repeats
// allowed). Small parameters only.
double classical_adaptive_optimum(int t, int n1, int n2, u64 enum_limit = kDefaultEnumLimit);

// Amplitude amplification against a planted single-1 indicator on n2 bits,
// run as a counted-query circuit.
struct GroverResult {
    int t = 0, n2 = 0;
    double simulated = 0.0;    // probability of measuring the planted location
    double closed_form = 0.0;  // sin^2((2t+1) arcsin(2^{-n2/2}))
    double bound = 0.0;        // 10 t^2 / 2^{n2}, meaningful for t >= 1
    int queries = 0;
};

FunctionOracle planted_x_oracle(int n2, u64 planted);
QueryAlgorithm grover_circuit(int t, int n2);
GroverResult grover_search(int t, int n2, u64 planted = 0);

// Joint law of (measured output, oracle value at that output) under a uniform
// hash-family draw versus a uniform draw over all functions.
struct EquivalenceResult {
    double tv_distance = 0.0;
    u64 family_size = 0;
    u64 function_count = 0;
};

EquivalenceResult twise_equivalence_check(const QueryAlgorithm& alg, int n1, int n2, int degree,
                                          u64 enum_limit = kDefaultEnumLimit);

// Fixed circuits for the equivalence suite; `t` is the declared query count.
struct SearchTestAlg {
    std::string name;
    QueryAlgorithm alg;
    int n1 = 0, n2 = 0, t = 0;
};
std::vector<SearchTestAlg> equivalence_suite();

// Average of Pr[F(output) = beta_output] over every function F.
double quantum_search_success(const QueryAlgorithm& alg, const SearchInstance& inst,
                              u64 enum_limit = kDefaultEnumLimit);

// Reduction from target search to locating the single 1 of X: n2 -> 1 bit.
// Each F-query of the source algorithm becomes a compute/uncompute pair of
// X-queries around a relabeling G, so the X-count is exactly twice the
// F-count and the induced F is uniform when (G, Z, X) are.
QueryAlgorithm instrument_with_x_gadget(const QueryAlgorithm& alg, const SearchInstance& inst,
                                        const std::vector<u64>& g_table,
                                        const std::vector<u64>& z_table);

struct BRunResult {
    u64 location = 0;  // G(measured output)
    int x_queries = 0;
};
BRunResult algorithm_B(const QueryAlgorithm& alg, const SearchInstance& inst,
                       const FunctionOracle& x, RandomStream& rng);

struct BExactResult {
    double success_b = 0.0;         // Pr[X is 1 at G(output)], joint over (G, Z, X)
    double success_f = 0.0;         // Pr[F(output) = beta] for the induced F, same joint
    double success_uniform_f = 0.0; // direct average over all functions
    double max_pointwise_diff = 0.0;
    int max_x_queries = 0;
    u64 combos = 0;
};
BExactResult algorithm_B_exact(const QueryAlgorithm& alg, const SearchInstance& inst,
                               u64 enum_limit = kDefaultEnumLimit);

}  // namespace zklab
