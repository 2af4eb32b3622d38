#pragma once

#include <memory>
#include <optional>

#include "zklab/fieldhash.hpp"
#include "zklab/qcore.hpp"

namespace zklab {

// ---- small graphs and permutations (at most 5 vertices) ----

struct Graph {
    int v = 0;
    u64 adj = 0;  // upper-triangle edge bits, pair_index order

    bool operator==(const Graph&) const = default;
};

int pair_index(int v, int i, int j);
int adj_bits(int v);
u64 factorial_small(int v);
int perm_bits(int v);  // bits needed to index S_v
const std::vector<std::vector<int>>& all_perms(int v);  // lexicographic
std::vector<int> compose_perms(const std::vector<int>& a, const std::vector<int>& b);  // a after b
Graph permuted_graph(const Graph& g, const std::vector<int>& perm);
Graph graph_from_edges(int v, const std::vector<std::pair<int, int>>& edges);
std::optional<std::vector<int>> find_isomorphism(const Graph& g0, const Graph& g1);

// ---- protocol specs ----

enum class Shape { QAM3, IP3, QAM2K1 };

// How the verifier's single IP3 response depends on its coins.
enum class Ip3Response {
    Echo,    // respond with the coins themselves
    Const0,  // respond 0; the coins only enter the final acceptance check
};

class Predicate;

struct ProtocolSpec {
    Shape shape = Shape::QAM3;
    int k = 1;
    std::vector<int> message_bits;  // classical messages 1..2k, prover speaks first
    int final_bits = 1;
    bool final_quantum = false;
    int coin_bits = 0;  // IP3 only
    Ip3Response ip3_response = Ip3Response::Echo;
    std::shared_ptr<const Predicate> predicate;
    double eps_c = 0.0, eps_s = 0.0;

    void validate() const;
    int num_classical_messages() const { return 2 * k; }
    // total bits of classical messages with index < upto
    int prefix_bits(int upto) const;
    u64 ip3_respond(u64 coins, u64 alpha) const;
};

u64 pack_messages(const ProtocolSpec& spec, std::span<const u64> msgs);
std::vector<u64> unpack_messages(const ProtocolSpec& spec, u64 packed, int count);

// Acceptance predicate over (classical messages, final message). For IP3 the
// classical message span is {coins, alpha}; for QAM shapes it is all 2k
// classical messages in protocol order.
class Predicate {
  public:
    virtual ~Predicate() = default;
    virtual bool diagonal() const { return true; }
    virtual double diag_entry(std::span<const u64> msgs, u64 final_value) const = 0;
    virtual QuantumPredicate matrix(std::span<const u64> msgs, int final_bits) const;
    virtual std::string type_name() const = 0;
};

class GiPredicate : public Predicate {
  public:
    GiPredicate(Graph g0, Graph g1, int copies);
    double diag_entry(std::span<const u64> msgs, u64 final_value) const override;
    std::string type_name() const override { return "gi"; }
    bool check_copy(u64 k_enc, u64 b, u64 psi) const;

    Graph g0, g1;
    int copies;
};

// Same check with the verifier message replaced by the coins (IP3 echo form).
class GiIp3Predicate : public Predicate {
  public:
    GiIp3Predicate(Graph g0, Graph g1, int copies);
    double diag_entry(std::span<const u64> msgs, u64 final_value) const override;
    std::string type_name() const override { return "gi_ip3"; }

    GiPredicate base;
};

// IP3 with a response that reveals nothing: accept iff the final message
// equals the hidden coins.
class BlindCoinPredicate : public Predicate {
  public:
    double diag_entry(std::span<const u64> msgs, u64 final_value) const override;
    std::string type_name() const override { return "blind_coin"; }
};

// Five-round toy: two sequential 2-vertex graph rounds sharing one
// commitment. msgs = {K, b1, psi1, b2}, final = psi2.
class SeqGiPredicate : public Predicate {
  public:
    SeqGiPredicate(Graph g0, Graph g1);
    double diag_entry(std::span<const u64> msgs, u64 final_value) const override;
    std::string type_name() const override { return "seq_gi"; }
    bool check_round(u64 k_enc, u64 b, u64 psi) const;

    Graph g0, g1;
};

// Accept iff one designated classical message is zero.
class MessageZeroPredicate : public Predicate {
  public:
    explicit MessageZeroPredicate(int msg_index) : msg_index(msg_index) {}
    double diag_entry(std::span<const u64> msgs, u64 final_value) const override;
    std::string type_name() const override { return "message_zero"; }

    int msg_index;
};

class AlwaysPredicate : public Predicate {
  public:
    double diag_entry(std::span<const u64>, u64) const override { return 1.0; }
    std::string type_name() const override { return "always"; }
};

// Dense final-message predicate looked up by packed classical messages.
class DenseTablePredicate : public Predicate {
  public:
    bool diagonal() const override { return false; }
    double diag_entry(std::span<const u64>, u64) const override;
    QuantumPredicate matrix(std::span<const u64> msgs, int final_bits) const override;
    std::string type_name() const override { return "dense_table"; }

    std::map<u64, CMat> table;  // packed msgs -> E
};

// ---- roles ----

struct FinalMessage {
    bool quantum = false;
    std::vector<std::pair<u64, double>> classical_dist;  // value -> prob
    DensityMatrix rho;
};

// Every prover strategy at this scale is a bundle of tables: one distribution
// per odd round keyed by the packed transcript so far, and a final-message
// table keyed by all 2k classical messages. Missing keys fall back to the
// all-zero message (or |0><0|) so the tables only need reachable prefixes.
struct TabulatedProver {
    std::vector<std::map<u64, std::vector<std::pair<u64, double>>>> rounds;  // k maps
    std::map<u64, FinalMessage> finals;
    // prefix-independent fallbacks, overriding the zero-message default
    std::vector<std::optional<std::vector<std::pair<u64, double>>>> round_defaults;
    std::optional<FinalMessage> final_default;

    void validate(const ProtocolSpec& spec) const;
    const std::vector<std::pair<u64, double>>& round_dist(int round_idx, u64 packed_prefix) const;
    FinalMessage final_message(const ProtocolSpec& spec, u64 packed_prefix) const;
};

TabulatedProver honest_gi_prover(const Graph& g0, const Graph& g1, int copies,
                                 const std::vector<int>& witness, Shape shape);
TabulatedProver fixed_transcript_prover(const ProtocolSpec& spec, std::span<const u64> odd_msgs,
                                        u64 final_value);
TabulatedProver honest_seq_gi_prover(const Graph& g0, const Graph& g1,
                                     const std::vector<int>& witness);

struct Verifier {
    enum class Kind { HonestArthur, HashArthur, HonestIP, HashIP };
    Kind kind = Kind::HonestArthur;
    std::vector<HashFunction> hashes;  // one per even round (HashArthur), one (HashIP)

    static Verifier honest_arthur() { return {Kind::HonestArthur, {}}; }
    static Verifier hash_arthur(std::vector<HashFunction> hs) { return {Kind::HashArthur, std::move(hs)}; }
    static Verifier honest_ip() { return {Kind::HonestIP, {}}; }
    static Verifier hash_ip(HashFunction h) { return {Kind::HashIP, {std::move(h)}}; }
};

struct VerifierResponse {
    bool uniform = false;  // honest Arthur: expand uniformly over the message width
    u64 value = 0;
};

// coins is consulted only by the honest IP verifier
VerifierResponse verifier_response(const ProtocolSpec& spec, const Verifier& v,
                                   std::span<const u64> msgs_so_far,
                                   std::optional<u64> coins = std::nullopt);

// Table form of a hash-backed verifier's round-i response (0-based even round).
// full_prefix=false hashes only the immediately preceding prover message,
// embedded at its transcript position; that variant exists as a negative
// control for the extraction diagnostics.
FunctionOracle as_function_oracle(const ProtocolSpec& spec, const Verifier& v, int even_round_idx,
                                  bool full_prefix = true);

// ---- protocol execution ----

struct TranscriptDistribution {
    // packed classical transcript (2k messages; plus final value when the
    // final message is classical) -> probability
    std::map<u64, double> classical;
    // for quantum-final specs: packed 2k messages -> (prob, final state accum)
    std::map<u64, std::pair<double, CMat>> quantum_finals;
    double acceptance = 0.0;
};

TranscriptDistribution run_protocol(const ProtocolSpec& spec, const TabulatedProver& prover,
                                    const Verifier& verifier);
// single seeded draw
struct SampledTranscript {
    std::vector<u64> msgs;
    u64 final_value = 0;
    u64 coins = 0;
    double accept_prob = 0.0;
};
SampledTranscript sample_protocol(const ProtocolSpec& spec, const TabulatedProver& prover,
                                  const Verifier& verifier, RandomStream& rng);

double optimal_cheat(const ProtocolSpec& spec, u64 state_limit = kDefaultEnumLimit);

ProtocolSpec parallel_compose(const ProtocolSpec& spec, int copies);

// ---- instances ----

struct GiInstance {
    ProtocolSpec spec;
    Graph g0, g1;
    int copies = 1;
    std::optional<std::vector<int>> witness;
};

GiInstance gi_instance(const Graph& g0, const Graph& g1, int copies, Shape shape);
QueryAlgorithm gi_witness_simulator(const GiInstance& gi);

// Zero-query simulator announcing fixed prover messages (verifier-round
// registers stay zero) and a fixed final value.
QueryAlgorithm fixed_output_simulator(const ProtocolSpec& spec, std::span<const u64> prover_msgs,
                                      u64 final_value);

// One-query probe: asks the verifier oracle at `probe_point` and folds the
// observed answer into the low bits of its first message. Its first message
// then pins the hash value at one point, which shows up as a spike in the
// conditional min-entropy table.
QueryAlgorithm probe_reencode_simulator(const ProtocolSpec& spec, u64 probe_point);

struct SeqGiInstance {
    ProtocolSpec spec;
    Graph g0, g1;
    std::optional<std::vector<int>> witness;
};

SeqGiInstance seq_gi_instance(const Graph& g0, const Graph& g1);
QueryAlgorithm seq_gi_witness_simulator(const SeqGiInstance& inst);

// Five-round spec whose second verifier message is wide; paired with a probe
// adversary that re-encodes what it learned, for the hashing-mode regression.
ProtocolSpec regression_spec();
QueryAlgorithm regression_adversary(bool full_prefix);

}  // namespace zklab
