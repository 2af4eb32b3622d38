#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "zklab/extract.hpp"

using namespace zklab;

namespace {

Graph path3() { return graph_from_edges(3, {{0, 1}, {1, 2}}); }
Graph path3_relabeled() { return graph_from_edges(3, {{1, 2}, {0, 2}}); }
Graph triangle3() { return graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}}); }
Graph edge2() { return graph_from_edges(2, {{0, 1}}); }

ProtocolSpec blind_coin_spec() {
    ProtocolSpec s;
    s.shape = Shape::IP3;
    s.k = 1;
    s.message_bits = {2, 1};
    s.coin_bits = 2;
    s.final_bits = 2;
    s.ip3_response = Ip3Response::Const0;
    s.predicate = std::make_shared<BlindCoinPredicate>();
    s.eps_s = 0.25;
    s.validate();
    return s;
}

// direct average over the family, sharing nothing with the engine internals
double direct_hash_average(const GiInstance& gi, const QueryAlgorithm& sim, int degree) {
    HashFamily fam(gi.spec.message_bits[0], gi.spec.message_bits[1], degree);
    double sum = 0;
    for (u64 i = 0; i < fam.size(); ++i) {
        HashFunction h = fam.at(i);
        FunctionOracle oracle = as_function_oracle(gi.spec, Verifier::hash_arthur({h}), 0);
        QueryAlgorithm alg = sim;
        alg.query_budget = 1;
        RunResult r = run_query_algorithm(alg, {&oracle, 1});
        std::vector<int> wires = alg.output_registers[0];
        wires.insert(wires.end(), alg.final_register.begin(), alg.final_register.end());
        OutcomeDistribution dist = measure(r.state, wires);
        for (const auto& [outcome, branch] : dist.entries) {
            u64 alpha = outcome & ((u64{1} << gi.spec.message_bits[0]) - 1);
            u64 psi = outcome >> gi.spec.message_bits[0];
            u64 msgs[2] = {alpha, h.eval(alpha)};
            sum += branch.prob * gi.spec.predicate->diag_entry(msgs, psi);
        }
    }
    return sum / static_cast<double>(fam.size());
}

}  // namespace

TEST_CASE("witness simulator extracts the honest acceptance exactly") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ZResult zr = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1);
    CHECK(std::abs(zr.q - 1.0) < 1e-10);
    CHECK(std::abs(zr.joint.total_mass - 1.0) < 1e-9);
    CHECK(zr.joint.failure_mass == 0.0);
    CHECK_FALSE(zr.joint.monte_carlo);
    CHECK(zr.joint.samples == 512);

    double direct = direct_hash_average(gi, gi_witness_simulator(gi), 3);
    CHECK(std::abs(zr.q - direct) < 1e-10);

    double mass = 0;
    for (const auto& [tau, m] : zr.joint.transcript_marginal) mass += m;
    CHECK(std::abs(mass - 1.0) < 1e-9);
}

TEST_CASE("oracle-ignoring simulator sits at the sound cheating ceiling") {
    GiInstance gi = gi_instance(path3(), triangle3(), 1, Shape::QAM3);
    // commit to the left graph; the response only exists when the coin is 0
    std::vector<u64> msgs{gi.g0.adj};
    QueryAlgorithm sim = fixed_output_simulator(gi.spec, msgs, 0);
    DiagnosticsReport rep = run_extraction_diagnostics(gi.spec, sim, 0);

    CHECK(std::abs(rep.q - 0.5) < 1e-10);
    CHECK(rep.t == 1);  // bounds never divide by a zero budget
    REQUIRE(rep.round_stats.size() == 1);
    for (const auto& [a, s] : rep.round_stats[0].s_table) CHECK(std::abs(s - 0.5) < 1e-12);
    CHECK(std::abs(rep.round_stats[0].expected_s - 0.5) < 1e-12);
    CHECK(rep.round_stats[0].bound_holds);

    CHECK(std::abs(rep.cheat_prob - 0.5) < 1e-10);
    CHECK(std::abs(rep.cheat_closed_form - rep.cheat_prob) < 1e-10);
    REQUIRE(rep.optimal_cheat_value.has_value());
    CHECK(rep.cheat_prob <= *rep.optimal_cheat_value + 1e-10);
    CHECK(rep.chain.all_ok);
    CHECK(rep.good_mass_ok);

    ZResult zr = algorithm_Z(gi.spec, sim, 0);
    for (double d : {0.1, 0.25, 0.5}) {
        GoodSet g = good_set(zr.joint, d, 10.0);
        CHECK(g.mass >= 1.0 - d - 1e-10);
        CHECK(g.mass_ok);
    }
    CHECK_THROWS_AS(good_set(zr.joint, 0.0, 10.0), DomainError);
    CHECK_THROWS_AS(good_set(zr.joint, 1.5, 10.0), DomainError);
}

TEST_CASE("re-encoding probe spikes one row of the min-entropy table") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 2, Shape::QAM3);
    const u64 probe = 5;
    QueryAlgorithm sim = probe_reencode_simulator(gi.spec, probe);
    ZResult zr = algorithm_Z(gi.spec, sim, 1);
    MinEntropyStats st = min_entropy_stats(zr.joint, 10.0);

    CHECK(st.s_table.at(probe) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.beta_table.at(probe) == 0);
    CHECK(st.s_table.at(probe ^ 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(st.s_table.at(probe ^ 2) == doctest::Approx(0.25).epsilon(1e-12));
    // one pinned point, uniform everywhere else
    double expect = 0.25 * (2.0 - 0.25);
    CHECK(std::abs(st.expected_s - expect) < 1e-10);
    CHECK(st.bound == doctest::Approx(2.5));
    CHECK(st.bound_holds);
}

TEST_CASE("cheating prover replays the joint and both value routes agree") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ZResult zr = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1);
    TabulatedProver mstar = build_cheating_prover(zr.joint);
    double by_run = cheating_probability(mstar, gi.spec);
    double by_sum = cheating_probability_closed_form(mstar, gi.spec);
    CHECK(std::abs(by_run - 1.0) < 1e-10);
    CHECK(std::abs(by_run - by_sum) < 1e-10);

    // unreached conditions fall back to the zero message
    GiInstance hard = gi_instance(path3(), triangle3(), 1, Shape::QAM3);
    std::vector<u64> msgs{hard.g0.adj};
    ZResult fixed = algorithm_Z(hard.spec, fixed_output_simulator(hard.spec, msgs, 0), 0);
    TabulatedProver cheat = build_cheating_prover(fixed.joint);
    REQUIRE(cheat.rounds.size() == 1);
    CHECK(cheat.rounds[0].at(0).size() == 1);
    u64 other = hard.g1.adj;
    CHECK(cheat.finals.count(other) == 0);
    FinalMessage fb = cheat.final_message(hard.spec, other);
    REQUIRE(fb.classical_dist.size() == 1);
    CHECK(fb.classical_dist[0].first == 0);
    CHECK(fb.classical_dist[0].second == doctest::Approx(1.0));
}

TEST_CASE("perturbing the recorded responses never moves the acceptance") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ZOptions plain, flipped;
    flipped.perturb_b = true;
    ZResult a = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1, plain);
    ZResult b = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1, flipped);
    CHECK(std::abs(a.q - b.q) < 1e-12);
    CHECK(a.joint.transcript_marginal == b.joint.transcript_marginal);
    // the record visibly changed, the acceptance path never read it
    CHECK(a.joint.measured_agreement[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.joint.measured_agreement[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("shape, budget, and size violations are rejected up front") {
    GiInstance ip = gi_instance(edge2(), edge2(), 1, Shape::IP3);
    CHECK_THROWS_AS(algorithm_Z(ip.spec, gi_witness_simulator(ip), 1), ConfigError);

    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    CHECK_THROWS_AS(algorithm_Z(gi.spec, gi_witness_simulator(gi), 0), BudgetError);

    ProtocolSpec degenerate = gi.spec;
    degenerate.shape = Shape::QAM2K1;
    degenerate.k = 0;
    degenerate.message_bits.clear();
    CHECK_THROWS_AS(algorithm_Z_k(degenerate, gi_witness_simulator(gi), 1), ConfigError);

    GiInstance big = gi_instance(graph_from_edges(4, {{0, 1}, {1, 2}, {2, 3}}),
                                 graph_from_edges(4, {{0, 1}, {0, 2}, {2, 3}}), 2, Shape::QAM3);
    ZOptions exact;
    exact.mode = ZMode::Exact;
    exact.qubit_cap = 26;
    CHECK_THROWS_AS(algorithm_Z(big.spec, gi_witness_simulator(big), 1, exact), LimitError);
}

TEST_CASE("private-coin extraction covers echo and blind responses") {
    GiInstance gi = gi_instance(edge2(), edge2(), 1, Shape::IP3);
    DiagnosticsReport rep = run_extraction_diagnostics(gi.spec, gi_witness_simulator(gi), 1);
    CHECK(std::abs(rep.q - 1.0) < 1e-10);
    CHECK(std::abs(rep.cheat_prob - 1.0) < 1e-10);
    CHECK(std::abs(rep.cheat_prob - rep.cheat_closed_form) < 1e-10);
    CHECK(rep.chain.all_ok);
    bool pooling_seen = false;
    for (const auto& line : rep.chain.lines)
        if (line.name == "response_pooling_substitution") {
            pooling_seen = true;
            CHECK(std::abs(line.slack) < 1e-10);
        }
    CHECK(pooling_seen);

    ProtocolSpec blind = blind_coin_spec();
    std::vector<u64> msgs{1};
    QueryAlgorithm guesser = fixed_output_simulator(blind, msgs, 2);
    DiagnosticsReport brep = run_extraction_diagnostics(blind, guesser, 0);
    CHECK(std::abs(brep.q - 0.25) < 1e-10);
    CHECK(std::abs(brep.cheat_prob - 0.25) < 1e-10);
    REQUIRE(brep.optimal_cheat_value.has_value());
    CHECK(brep.cheat_prob <= *brep.optimal_cheat_value + 1e-10);
    CHECK(std::abs(brep.round_stats[0].expected_s - 0.25) < 1e-12);
    CHECK(brep.chain.all_ok);
}

TEST_CASE("coin-final factorization holds for real joints and fails for the broken one") {
    ProtocolSpec blind = blind_coin_spec();
    std::vector<u64> msgs{1};
    QueryAlgorithm guesser = fixed_output_simulator(blind, msgs, 2);
    Ip3FunctionJoint fj = build_ip3_function_joint(blind, guesser, 0);
    CHECK(fj.function_count == 256);
    CHECK(markov_network_check(fj) <= 1e-10);

    GiInstance gi = gi_instance(edge2(), edge2(), 1, Shape::IP3);
    Ip3FunctionJoint gj = build_ip3_function_joint(gi.spec, gi_witness_simulator(gi), 1);
    CHECK(gj.function_count == 4);
    CHECK(markov_network_check(gj) <= 1e-10);

    Ip3FunctionJoint broken = break_ip3_joint(fj);
    CHECK(markov_network_check(broken) > 0.1);

    Ip3FunctionJoint wrong_shape = fj;
    wrong_shape.spec = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3).spec;
    CHECK_THROWS_AS(markov_network_check(wrong_shape), ConfigError);
}

TEST_CASE("chain verdicts report failures instead of throwing") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ZResult zr = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1);
    TabulatedProver mstar = build_cheating_prover(zr.joint);
    ChainReport rep = verify_inequality_chain(zr.joint, mstar, 0.0, 0.5, 10.0);
    CHECK_FALSE(rep.all_ok);
    CHECK(rep.lines[0].name == "cheat_vs_good_restriction");
    CHECK(rep.lines[0].slack < -1e-10);
    int bad = 0;
    for (const auto& line : rep.lines)
        if (!line.ok) ++bad;
    CHECK(bad >= 1);
}

TEST_CASE("single-round reduction matches the three-message algorithm") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ProtocolSpec as_chain = gi.spec;
    as_chain.shape = Shape::QAM2K1;
    as_chain.validate();
    ZResult direct = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1);
    ZResult via_k = algorithm_Z_k(as_chain, gi_witness_simulator(gi), 1);
    CHECK(std::abs(direct.q - via_k.q) < 1e-12);
    CHECK(direct.joint.transcript_marginal == via_k.joint.transcript_marginal);

    TabulatedProver m1 = build_cheating_prover(direct.joint);
    TabulatedProver m2 = build_cheating_prover(via_k.joint);
    double c1 = cheating_probability(m1, gi.spec);
    double c2 = cheating_probability(m2, as_chain);
    CHECK(std::abs(c1 - c2) < 1e-12);
    ChainReport r1 = verify_inequality_chain(direct.joint, m1, c1, 0.25, 10.0);
    ChainReport r2 = verify_inequality_chain(via_k.joint, m2, c2, 0.25, 10.0);
    CHECK(std::abs(r1.final_lower_bound - r2.final_lower_bound) < 1e-12);
    CHECK(r1.all_ok);
    CHECK(r2.all_ok);
}

TEST_CASE("five-round toy extracts exactly over the product family") {
    SeqGiInstance inst = seq_gi_instance(edge2(), edge2());
    DiagnosticsReport rep = run_extraction_diagnostics(inst.spec, seq_gi_witness_simulator(inst), 2);
    CHECK_FALSE(rep.monte_carlo);
    CHECK(rep.samples == (u64{1} << 20));
    CHECK(std::abs(rep.q - 1.0) < 1e-10);
    CHECK(rep.good_intersection_mass >= 1.0 - 2 * rep.delta - 1e-10);
    CHECK(rep.chain.all_ok);
    CHECK(std::abs(rep.cheat_prob - rep.cheat_closed_form) < 1e-10);
    REQUIRE(rep.round_stats.size() == 2);
    CHECK(rep.round_stats[0].bound_holds);
    CHECK(rep.round_stats[1].bound_holds);
}

TEST_CASE("prefix hashing passes the per-round bound that last-message hashing breaks") {
    ProtocolSpec spec = regression_spec();
    ZOptions opts;
    opts.mc_samples = 2048;
    opts.seed = 7;
    opts.qubit_cap = 23;

    DiagnosticsReport full = run_extraction_diagnostics(spec, regression_adversary(true), 1, opts);
    CHECK(full.monte_carlo);
    REQUIRE(full.predictor_violation.size() == 2);
    CHECK(full.round_stats[1].bound == doctest::Approx(10.0 / 64.0));
    CHECK_FALSE(full.predictor_violation[1]);
    CHECK(full.predictor_lower_bound[1] < 10.0 / 64.0);

    ZOptions wrong = opts;
    wrong.wrong_mode_hash = true;
    DiagnosticsReport broken = run_extraction_diagnostics(spec, regression_adversary(false), 1, wrong);
    CHECK(broken.predictor_violation[1]);
    CHECK(broken.predictor_lower_bound[1] == doctest::Approx(1.0));
}

TEST_CASE("sampled runs agree with exact enumeration on degenerate statistics") {
    GiInstance gi = gi_instance(path3(), path3_relabeled(), 1, Shape::QAM3);
    ZOptions mc;
    mc.mode = ZMode::MonteCarlo;
    mc.mc_samples = 64;
    mc.seed = 11;
    ZResult sampled = algorithm_Z(gi.spec, gi_witness_simulator(gi), 1, mc);
    CHECK(sampled.joint.monte_carlo);
    CHECK(std::abs(sampled.q - 1.0) < 1e-12);
    CHECK(std::abs(sampled.joint.q_low3 - 1.0) < 1e-9);

    GiInstance hard = gi_instance(path3(), triangle3(), 1, Shape::QAM3);
    std::vector<u64> msgs{hard.g0.adj};
    QueryAlgorithm sim = fixed_output_simulator(hard.spec, msgs, 0);
    ZResult ex = algorithm_Z(hard.spec, sim, 0);
    ZOptions mc2 = mc;
    mc2.mc_samples = 512;
    ZResult mcr = algorithm_Z(hard.spec, sim, 0, mc2);
    CHECK(mcr.joint.q_low3 - 1e-12 <= ex.q);
    CHECK(ex.q <= mcr.joint.q_high3 + 1e-12);
}
