#pragma once

#include <set>

#include "zklab/protocols.hpp"

namespace zklab {

// How the averaging over hash tuples is carried out.
enum class ZMode {
    Auto,        // exact when the (product) family fits the limit, sampled otherwise
    Exact,       // enumerate; throw when over the limit
    MonteCarlo,  // always sample
};

struct ZOptions {
    double c = 10.0;                  // universal constant in the min-entropy bound
    std::optional<double> delta;      // default q/2 (q/(2k) for the k-round mode)
    u64 enum_limit = kDefaultEnumLimit;
    int qubit_cap = kDefaultQubitCap;
    ZMode mode = ZMode::Auto;
    u64 mc_samples = 4096;
    u64 seed = 1;
    bool perturb_b = false;           // flip recorded even-register bits; q must not move
    bool wrong_mode_hash = false;     // hash only the preceding message, not the prefix
};

// Aggregated exact law of (hash tuple, simulated transcript, final message)
// produced by running a simulator against hash verifiers. Everything the
// diagnostics need is folded in during the walk; per-tuple rows are not kept.
struct FinalAccum {
    double mass = 0.0;
    std::map<u64, double> dist;  // classical final value -> mass
    CMat rho;                    // quantum final accumulate (unnormalized)
};

struct PredictorRate {
    std::string name;  // "slice:<msg index>" or "const:<value>"
    double rate = 0.0;
    double low3 = 0.0, high3 = 1.0;  // 3 sigma interval in sampled mode
};

struct JointDistribution {
    Shape shape = Shape::QAM3;
    ProtocolSpec spec;
    int t = 1;            // query budget handed to the simulator
    int t_eff = 1;        // max(t, 1), used in every bound
    bool monte_carlo = false;
    u64 samples = 0;      // tuples averaged (exact mode: the product family size)
    bool wrong_mode_hash = false;

    std::vector<HashFamily> families;  // one per even round

    double total_mass = 0.0;    // should be 1
    double failure_mass = 0.0;  // branches with the failure wire set (rejected)
    double q = 0.0;             // acceptance of the extraction run
    double q_var = 0.0;         // across-tuple variance of per-tuple acceptance
    double q_low3 = 0.0, q_high3 = 1.0;

    // keyed by the packed 2k-message transcript with even messages recomputed
    // from the hashes (for IP3: packed (first message, response))
    std::map<u64, double> transcript_marginal;
    std::map<u64, double> transcript_accept;
    // same transcript but with the even registers as the simulator measured them
    std::map<u64, double> measured_marginal;
    // per even round: (packed preceding prefix << width) | hash value -> mass
    std::vector<std::map<u64, double>> round_h_joint;
    // per even round: mass where the recorded response equals the hash value
    std::vector<double> measured_agreement;
    // per prover round: packed prefix -> next odd message -> mass
    std::vector<std::map<u64, std::map<u64, double>>> round_cond;
    // packed 2k-message transcript -> final-message accumulate
    std::map<u64, FinalAccum> final_mix;
    // IP3 only: (first message << coin bits) | coins -> accepted mass
    std::map<u64, double> accept_coins;
    // per even round: best prefix-predictor agreement rates (regression probe)
    std::vector<std::vector<PredictorRate>> predictors;

    int even_rounds() const { return static_cast<int>(round_h_joint.size()); }
    int even_width(int round) const;
    int prefix_width(int round) const;
    // first-message marginal (round-0 prefix marginal)
    std::map<u64, double> a_marginal() const;
};

struct ZResult {
    double q = 0.0;
    JointDistribution joint;
};

// Three-message run: the simulator queries the hash verifier's response
// table once per budget unit; outcome registers are (first message, recorded
// response); acceptance is evaluated on (A, H(A), final).
ZResult algorithm_Z(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                    const ZOptions& opts = {});

// Private-coin three-message run: the hash picks the verifier's coins, the
// oracle answers with the verifier's response to them.
ZResult algorithm_Z_prime(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                          const ZOptions& opts = {});

// 2k+1-message run over the product of per-round prefix-hash families.
ZResult algorithm_Z_k(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                      const ZOptions& opts = {});

// Prover tables replaying the joint's conditionals against the honest
// verifier; zero-probability conditions fall back to the all-zero message.
TabulatedProver build_cheating_prover(const JointDistribution& joint);

// Acceptance of the built prover against the honest verifier, by protocol
// walk and by a direct closed-form sum; the two must agree.
double cheating_probability(const TabulatedProver& prover, const ProtocolSpec& spec);
double cheating_probability_closed_form(const TabulatedProver& prover, const ProtocolSpec& spec);

struct MinEntropyStats {
    std::map<u64, double> s_table;  // prefix -> max conditional hash-value mass
    std::map<u64, u64> beta_table;  // prefix -> smallest maximizing value
    double expected_s = 0.0;
    double bound = 0.0;  // c t_eff^2 / 2^{width}
    bool bound_holds = false;
    int width = 0;
};
MinEntropyStats min_entropy_stats(const JointDistribution& joint, double c, int round = 0);

struct GoodSet {
    double delta = 0.0;
    double threshold = 0.0;  // c t_eff^2 / (delta 2^{width})
    double mass = 0.0;
    std::set<u64> members;
    bool mass_ok = false;  // mass >= 1 - delta
};
GoodSet good_set(const JointDistribution& joint, double delta, double c, int round = 0);

struct ChainLine {
    std::string name;
    double lhs = 0.0, rhs = 0.0;
    double slack = 0.0;  // lhs - rhs, must be >= -1e-10
    bool ok = false;
};
struct ChainReport {
    std::vector<ChainLine> lines;
    bool all_ok = false;
    double final_lower_bound = 0.0;  // the chain's closing bound on the cheat value
};

ChainReport verify_inequality_chain(const JointDistribution& joint, const TabulatedProver& mstar,
                                    double cheat_prob, double delta, double c);

// Exact joint over every coin function F for the private-coin factorization
// check: conditioned on (first message, response), the coins and the final
// message must be independent.
struct Ip3FunctionJoint {
    ProtocolSpec spec;
    u64 function_count = 0;
    // (function code << n1 | alpha) -> (mass, final-value dist)
    std::map<u64, std::pair<double, std::map<u64, double>>> entries;
};
Ip3FunctionJoint build_ip3_function_joint(const ProtocolSpec& spec, const QueryAlgorithm& simulator,
                                          int t, u64 enum_limit = kDefaultEnumLimit,
                                          int qubit_cap = kDefaultQubitCap);
// Negative control: the final value is overwritten with the coins themselves.
Ip3FunctionJoint break_ip3_joint(const Ip3FunctionJoint& joint);
double markov_network_check(const Ip3FunctionJoint& joint);

struct DiagnosticsReport {
    Shape shape = Shape::QAM3;
    double q = 0.0;
    double c = 10.0;
    int t = 1;
    double delta = 0.0;
    bool delta_auto = true;
    bool monte_carlo = false;
    u64 samples = 0;
    double q_low3 = 0.0, q_high3 = 1.0;

    std::vector<MinEntropyStats> round_stats;  // one per even round
    std::vector<GoodSet> round_good;
    double good_intersection_mass = 0.0;
    bool good_mass_ok = false;

    double cheat_prob = 0.0;
    double cheat_closed_form = 0.0;
    std::optional<double> optimal_cheat_value;  // brute-force ceiling when enumerable
    ChainReport chain;

    // max over rounds of the best predictor rate (lower bound on expected s)
    std::vector<double> predictor_lower_bound;
    std::vector<bool> predictor_violation;  // lower bound beats the declared bound
};

// Full pipeline: run the matching extraction algorithm, build the cheating
// prover, compute both cheat values, min-entropy tables, good sets, and the
// inequality chain.
DiagnosticsReport run_extraction_diagnostics(const ProtocolSpec& spec,
                                             const QueryAlgorithm& simulator, int t,
                                             const ZOptions& opts = {});

}  // namespace zklab
