#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "zklab/searchlab.hpp"

using namespace zklab;

TEST_CASE("classical optimum closed form at pinned points") {
    CHECK(classical_optimal_search(1, 3, 2) == doctest::Approx(7.0 / 16.0).epsilon(1e-14));
    CHECK(classical_optimal_search(2, 3, 2) == doctest::Approx(37.0 / 64.0).epsilon(1e-14));
    CHECK(classical_optimal_search(1, 3, 1) == doctest::Approx(3.0 / 4.0).epsilon(1e-14));
    CHECK(classical_optimal_search(3, 3, 4) == doctest::Approx(14911.0 / 65536.0).epsilon(1e-14));
    CHECK(classical_optimal_search(0, 3, 3) == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
    CHECK_THROWS_AS(classical_optimal_search(4, 2, 1), DomainError);
    CHECK_THROWS_AS(classical_optimal_search(-1, 2, 1), DomainError);
}

TEST_CASE("classical optimum stays under the linear ceiling") {
    for (int t = 0; t <= 4; ++t)
        for (int n2 = 1; n2 <= 6; ++n2) {
            double v = classical_optimal_search(t, 3, n2);
            CHECK(v <= classical_search_bound(t, n2) + 1e-15);
        }
}

TEST_CASE("decision-tree induction reproduces the closed form") {
    // exhaustive adaptive optimum, computed without the fresh-point argument
    CHECK(classical_adaptive_optimum(0, 2, 1) == doctest::Approx(classical_optimal_search(0, 2, 1)).epsilon(1e-14));
    CHECK(classical_adaptive_optimum(1, 2, 1) == doctest::Approx(classical_optimal_search(1, 2, 1)).epsilon(1e-14));
    CHECK(classical_adaptive_optimum(2, 2, 1) == doctest::Approx(classical_optimal_search(2, 2, 1)).epsilon(1e-14));
    CHECK(classical_adaptive_optimum(1, 2, 2) == doctest::Approx(classical_optimal_search(1, 2, 2)).epsilon(1e-14));
    CHECK(classical_adaptive_optimum(1, 1, 2) == doctest::Approx(classical_optimal_search(1, 1, 2)).epsilon(1e-14));
    CHECK_THROWS_AS(classical_adaptive_optimum(10, 2, 2), LimitError);
}

TEST_CASE("amplitude amplification hits the trig closed form") {
    GroverResult g;
    g = grover_search(1, 2);
    CHECK(g.simulated == doctest::Approx(1.0).epsilon(1e-11));
    g = grover_search(2, 4);
    CHECK(g.simulated == doctest::Approx(0.908447265625).epsilon(1e-11));
    g = grover_search(3, 4);
    CHECK(g.simulated == doctest::Approx(0.9613189697265625).epsilon(1e-11));
    g = grover_search(1, 1);
    CHECK(g.simulated == doctest::Approx(0.5).epsilon(1e-11));
    g = grover_search(2, 1);
    CHECK(g.simulated == doctest::Approx(0.5).epsilon(1e-11));
    g = grover_search(0, 3);
    CHECK(g.simulated == doctest::Approx(1.0 / 8.0).epsilon(1e-11));
    CHECK(g.queries == 0);
}

TEST_CASE("grover sweep: simulation equals formula, bound holds, planting is irrelevant") {
    for (int n2 = 1; n2 <= 4; ++n2)
        for (int t = 0; t <= 3; ++t) {
            GroverResult g = grover_search(t, n2, (u64{1} << n2) - 1);
            CHECK(g.simulated == doctest::Approx(g.closed_form).epsilon(1e-9));
            CHECK(g.queries == t);
            if (t >= 1) CHECK(g.simulated <= g.bound + 1e-12);
        }
}

TEST_CASE("grover circuit respects its query budget") {
    QueryAlgorithm alg = grover_circuit(2, 2);
    alg.query_budget = 1;
    std::vector<FunctionOracle> oracles{planted_x_oracle(2, 0)};
    CHECK_THROWS_AS(run_query_algorithm(alg, oracles), BudgetError);
}

TEST_CASE("family draw is indistinguishable from a truly random function") {
    for (const SearchTestAlg& s : equivalence_suite()) {
        EquivalenceResult r = twise_equivalence_check(s.alg, s.n1, s.n2, 2 * s.t + 1);
        CAPTURE(s.name);
        CHECK(r.tv_distance <= 1e-10);
        CHECK(r.function_count == 16);
    }
}

TEST_CASE("a merely 1-universal family is detectably wrong") {
    double worst = 0.0;
    for (const SearchTestAlg& s : equivalence_suite()) {
        EquivalenceResult r = twise_equivalence_check(s.alg, s.n1, s.n2, 1);
        worst = std::max(worst, r.tv_distance);
    }
    CHECK(worst > 1e-3);
}

TEST_CASE("equivalence check guards its enumeration") {
    QueryAlgorithm alg = equivalence_suite()[0].alg;
    CHECK_THROWS_AS(twise_equivalence_check(alg, 2, 1, 3, 8), LimitError);
    QueryAlgorithm wide;
    wide.num_qubits = 5;
    wide.output_registers = {{0, 1, 2, 3, 4}};
    CHECK_THROWS_AS(twise_equivalence_check(wide, 5, 1, 3), LimitError);
}

TEST_CASE("x gadget doubles the query count and reproduces the function oracle") {
    SearchInstance inst = SearchInstance::single_target(1, 1, 1, 0);
    QueryAlgorithm alg;
    alg.num_qubits = 2;
    alg.query_budget = 1;
    alg.steps = {Step::gate1(Step::Gate::H, 0), Step::oracle(0, {0}, {1}),
                 Step::cx(1, 0)};
    alg.output_registers = {{0}};

    BExactResult r = algorithm_B_exact(alg, inst);
    CHECK(r.max_x_queries == 2);
    CHECK(r.combos == 8);  // 4 G tables, 1 Z table, 2 X positions
    CHECK(r.max_pointwise_diff <= 1e-10);
    CHECK(r.success_b == doctest::Approx(r.success_f).epsilon(1e-12));
    CHECK(r.success_f == doctest::Approx(r.success_uniform_f).epsilon(1e-12));
}

TEST_CASE("reduction stays exact on a wider instance") {
    SearchInstance inst;
    inst.n1 = 1;
    inst.n2 = 2;
    inst.t = 1;
    inst.beta_table = {2, 1};  // per-point targets
    QueryAlgorithm alg;
    alg.num_qubits = 3;
    alg.query_budget = 1;
    alg.steps = {Step::gate1(Step::Gate::RY, 0, 0.9), Step::oracle(0, {0}, {1, 2}),
                 Step::cx(1, 0)};
    alg.output_registers = {{0}};
    BExactResult r = algorithm_B_exact(alg, inst);
    CHECK(r.max_x_queries == 2);
    CHECK(r.combos == 16 * 9 * 4);
    CHECK(r.max_pointwise_diff <= 1e-10);
    CHECK(r.success_f == doctest::Approx(r.success_uniform_f).epsilon(1e-12));
}

TEST_CASE("a zero-query searcher makes zero x queries and guesses blind") {
    SearchInstance inst = SearchInstance::single_target(1, 1, 0, 1);
    QueryAlgorithm alg;
    alg.num_qubits = 1;
    alg.query_budget = 0;
    alg.steps = {Step::gate1(Step::Gate::H, 0)};
    alg.output_registers = {{0}};
    BExactResult r = algorithm_B_exact(alg, inst);
    CHECK(r.max_x_queries == 0);
    CHECK(r.success_b == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.success_uniform_f == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("seeded single runs of the reduction are reproducible and validated") {
    SearchInstance inst = SearchInstance::single_target(1, 1, 1, 0);
    QueryAlgorithm alg;
    alg.num_qubits = 2;
    alg.query_budget = 1;
    alg.steps = {Step::gate1(Step::Gate::H, 0), Step::oracle(0, {0}, {1})};
    alg.output_registers = {{0}};
    FunctionOracle x = planted_x_oracle(1, 1);
    RandomStream r1(7), r2(7);
    BRunResult a = algorithm_B(alg, inst, x, r1);
    BRunResult b = algorithm_B(alg, inst, x, r2);
    CHECK(a.location == b.location);
    CHECK(a.x_queries == 2);
    FunctionOracle bad = planted_x_oracle(1, 0);
    bad.table = {1, 1};
    RandomStream r3(9);
    CHECK_THROWS_AS(algorithm_B(alg, inst, bad, r3), DomainError);
}

TEST_CASE("tuned single-query circuits respect the quadratic search ceiling") {
    SearchInstance inst = SearchInstance::single_target(2, 2, 1, 3);
    for (double a : {0.3, 0.9, 1.7, 2.6})
        for (double b : {0.0, 0.8, 2.1}) {
            QueryAlgorithm alg;
            alg.num_qubits = 4;
            alg.query_budget = 1;
            alg.steps = {Step::gate1(Step::Gate::RY, 0, a), Step::gate1(Step::Gate::RY, 1, b),
                         Step::oracle(0, {0, 1}, {2, 3}), Step::cx(2, 0), Step::cx(3, 1)};
            alg.output_registers = {{0, 1}};
            double succ = quantum_search_success(alg, inst, u64{1} << 24);
            CHECK(succ <= 10.0 * 1.0 / 4.0 + 1e-12);
            CHECK(succ <= 1.0 + 1e-12);
        }
}
