#include "zklab/protocols.hpp"

#include <algorithm>
#include <cmath>

namespace zklab {

// ---- graphs and permutations ----

int pair_index(int v, int i, int j) {
    if (i > j) std::swap(i, j);
    if (i == j || j >= v || i < 0) throw DomainError("pair_index: bad vertex pair");
    // pairs (0,1), (0,2), ..., (0,v-1), (1,2), ...
    int idx = 0;
    for (int a = 0; a < i; ++a) idx += v - 1 - a;
    return idx + (j - i - 1);
}

int adj_bits(int v) { return v * (v - 1) / 2; }

u64 factorial_small(int v) {
    u64 f = 1;
    for (int i = 2; i <= v; ++i) f *= static_cast<u64>(i);
    return f;
}

int perm_bits(int v) {
    int b = 1;
    while ((u64{1} << b) < factorial_small(v)) ++b;
    return b;
}

const std::vector<std::vector<int>>& all_perms(int v) {
    static std::map<int, std::vector<std::vector<int>>> cache;
    auto it = cache.find(v);
    if (it != cache.end()) return it->second;
    if (v < 1 || v > 5) throw DomainError("all_perms: need 1 <= v <= 5");
    std::vector<int> p(static_cast<size_t>(v));
    for (int i = 0; i < v; ++i) p[static_cast<size_t>(i)] = i;
    std::vector<std::vector<int>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return cache.emplace(v, std::move(out)).first->second;
}

std::vector<int> compose_perms(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DomainError("compose_perms: size mismatch");
    std::vector<int> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[static_cast<size_t>(b[i])];
    return r;
}

Graph permuted_graph(const Graph& g, const std::vector<int>& perm) {
    Graph out{g.v, 0};
    for (int i = 0; i < g.v; ++i)
        for (int j = i + 1; j < g.v; ++j)
            if ((g.adj >> pair_index(g.v, i, j)) & 1)
                out.adj |= u64{1} << pair_index(g.v, perm[static_cast<size_t>(i)],
                                                perm[static_cast<size_t>(j)]);
    return out;
}

Graph graph_from_edges(int v, const std::vector<std::pair<int, int>>& edges) {
    if (v < 1 || v > 5) throw ConfigError("graph_from_edges: need 1 <= v <= 5");
    Graph g{v, 0};
    for (auto [i, j] : edges) g.adj |= u64{1} << pair_index(v, i, j);
    return g;
}

std::optional<std::vector<int>> find_isomorphism(const Graph& g0, const Graph& g1) {
    if (g0.v != g1.v) return std::nullopt;
    for (const auto& p : all_perms(g0.v))
        if (permuted_graph(g0, p) == g1) return p;
    return std::nullopt;
}

static u64 perm_index(int v, const std::vector<int>& p) {
    const auto& ps = all_perms(v);
    for (u64 i = 0; i < ps.size(); ++i)
        if (ps[i] == p) return i;
    throw DomainError("perm_index: not a permutation");
}

// ---- spec ----

void ProtocolSpec::validate() const {
    if (!predicate) throw ConfigError("ProtocolSpec: no predicate");
    if (k < 1) throw ConfigError("ProtocolSpec: need k >= 1");
    if (static_cast<int>(message_bits.size()) != 2 * k)
        throw ConfigError("ProtocolSpec: message count must be 2k");
    for (int b : message_bits)
        if (b < 1 || b > 16) throw ConfigError("ProtocolSpec: message width out of range");
    if (final_bits < 1 || final_bits > 16) throw ConfigError("ProtocolSpec: bad final width");
    if (final_quantum && final_bits > 12) throw ConfigError("ProtocolSpec: quantum final too wide");
    switch (shape) {
        case Shape::QAM3:
            if (k != 1) throw ConfigError("ProtocolSpec: three-message shape needs k=1");
            if (coin_bits != 0) throw ConfigError("ProtocolSpec: coins are an IP feature");
            break;
        case Shape::IP3:
            if (k != 1) throw ConfigError("ProtocolSpec: IP3 needs k=1");
            if (coin_bits < 1 || coin_bits > 16) throw ConfigError("ProtocolSpec: bad coin width");
            if (ip3_response == Ip3Response::Echo && message_bits[1] != coin_bits)
                throw ConfigError("ProtocolSpec: echo response needs n2 == coin bits");
            if (final_quantum) throw ConfigError("ProtocolSpec: IP final message is classical");
            break;
        case Shape::QAM2K1:
            if (coin_bits != 0) throw ConfigError("ProtocolSpec: coins are an IP feature");
            break;
    }
    if (prefix_bits(2 * k) + final_bits > 48) throw LimitError("ProtocolSpec: transcript too wide");
    if (eps_c + eps_s >= 2.0 / 3.0)
        throw ConfigError("ProtocolSpec: error bounds leave no completeness-soundness gap");
}

int ProtocolSpec::prefix_bits(int upto) const {
    if (upto < 0 || upto > 2 * k) throw DomainError("prefix_bits: bad message index");
    int b = 0;
    for (int i = 0; i < upto; ++i) b += message_bits[static_cast<size_t>(i)];
    return b;
}

u64 ProtocolSpec::ip3_respond(u64 coins, u64 alpha) const {
    if (shape != Shape::IP3) throw ConfigError("ip3_respond: not an IP spec");
    if (coins >> coin_bits) throw DomainError("ip3_respond: coins out of range");
    if (alpha >> message_bits[0]) throw DomainError("ip3_respond: message out of range");
    switch (ip3_response) {
        case Ip3Response::Echo: return coins;
        case Ip3Response::Const0: return 0;
    }
    return 0;
}

u64 pack_messages(const ProtocolSpec& spec, std::span<const u64> msgs) {
    if (static_cast<int>(msgs.size()) > spec.num_classical_messages())
        throw DomainError("pack_messages: too many messages");
    u64 packed = 0;
    int shift = 0;
    for (size_t i = 0; i < msgs.size(); ++i) {
        int w = spec.message_bits[i];
        if (msgs[i] >> w) throw DomainError("pack_messages: message out of range");
        packed |= msgs[i] << shift;
        shift += w;
    }
    return packed;
}

std::vector<u64> unpack_messages(const ProtocolSpec& spec, u64 packed, int count) {
    std::vector<u64> msgs(static_cast<size_t>(count));
    int shift = 0;
    for (int i = 0; i < count; ++i) {
        int w = spec.message_bits[static_cast<size_t>(i)];
        msgs[static_cast<size_t>(i)] = (packed >> shift) & ((u64{1} << w) - 1);
        shift += w;
    }
    return msgs;
}

// ---- predicates ----

QuantumPredicate Predicate::matrix(std::span<const u64> msgs, int final_bits) const {
    std::vector<double> d(u64{1} << final_bits);
    for (u64 c = 0; c < d.size(); ++c) d[c] = diag_entry(msgs, c);
    return QuantumPredicate::diagonal(d);
}

GiPredicate::GiPredicate(Graph g0_, Graph g1_, int copies_) : g0(g0_), g1(g1_), copies(copies_) {
    if (g0.v != g1.v || g0.v < 2 || g0.v > 5) throw ConfigError("GiPredicate: bad graphs");
    if (copies < 1 || copies > 4) throw ConfigError("GiPredicate: bad copy count");
}

bool GiPredicate::check_copy(u64 k_enc, u64 b, u64 psi) const {
    if (psi >= factorial_small(g0.v)) return false;
    const Graph& gb = b ? g1 : g0;
    return permuted_graph(gb, all_perms(g0.v)[psi]).adj == k_enc;
}

double GiPredicate::diag_entry(std::span<const u64> msgs, u64 final_value) const {
    u64 alpha = msgs[0], beta = msgs[1];
    int g = adj_bits(g0.v), p = perm_bits(g0.v);
    for (int j = 0; j < copies; ++j) {
        u64 kj = (alpha >> (j * g)) & ((u64{1} << g) - 1);
        u64 bj = (beta >> j) & 1;
        u64 pj = (final_value >> (j * p)) & ((u64{1} << p) - 1);
        if (!check_copy(kj, bj, pj)) return 0.0;
    }
    return 1.0;
}

GiIp3Predicate::GiIp3Predicate(Graph g0_, Graph g1_, int copies_) : base(g0_, g1_, copies_) {}

double GiIp3Predicate::diag_entry(std::span<const u64> msgs, u64 final_value) const {
    // msgs = {coins, alpha}; the echoed response plays the challenge role
    u64 reordered[2] = {msgs[1], msgs[0]};
    return base.diag_entry(reordered, final_value);
}

double BlindCoinPredicate::diag_entry(std::span<const u64> msgs, u64 final_value) const {
    return msgs[0] == final_value ? 1.0 : 0.0;
}

SeqGiPredicate::SeqGiPredicate(Graph g0_, Graph g1_) : g0(g0_), g1(g1_) {
    if (g0.v != 2 || g1.v != 2) throw ConfigError("SeqGiPredicate: needs 2-vertex graphs");
}

bool SeqGiPredicate::check_round(u64 k_enc, u64 b, u64 psi) const {
    if (psi >= 2) return false;
    const Graph& gb = b ? g1 : g0;
    return permuted_graph(gb, all_perms(2)[psi]).adj == k_enc;
}

double SeqGiPredicate::diag_entry(std::span<const u64> msgs, u64 final_value) const {
    // msgs = {K, b1, psi1, b2}, final = psi2; one commitment serves both rounds
    return check_round(msgs[0], msgs[1], msgs[2]) && check_round(msgs[0], msgs[3], final_value)
               ? 1.0
               : 0.0;
}

double MessageZeroPredicate::diag_entry(std::span<const u64> msgs, u64) const {
    return msgs[static_cast<size_t>(msg_index)] == 0 ? 1.0 : 0.0;
}

double DenseTablePredicate::diag_entry(std::span<const u64>, u64) const {
    throw ConfigError("dense predicate has no diagonal entries");
}

QuantumPredicate DenseTablePredicate::matrix(std::span<const u64> msgs, int final_bits) const {
    u64 key = 0;
    int shift = 0;
    for (u64 m : msgs) {
        key |= m << shift;
        shift += 16;
    }
    auto it = table.find(key);
    if (it == table.end()) {
        QuantumPredicate never;
        never.e = CMat(1 << final_bits, 1 << final_bits);
        return never;
    }
    QuantumPredicate p;
    p.e = it->second;
    return p;
}

// ---- prover ----

static const std::vector<std::pair<u64, double>> kZeroPoint{{0, 1.0}};

void TabulatedProver::validate(const ProtocolSpec& spec) const {
    if (static_cast<int>(rounds.size()) != spec.k)
        throw ConfigError("TabulatedProver: need one table per prover round");
    auto check_dist = [&](const std::vector<std::pair<u64, double>>& d, int width) {
        double total = 0;
        for (auto [v, p] : d) {
            if (v >> width) throw ConfigError("TabulatedProver: message out of range");
            if (p < -1e-12) throw ConfigError("TabulatedProver: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("TabulatedProver: distribution not normalized");
    };
    for (int r = 0; r < spec.k; ++r) {
        for (const auto& [key, d] : rounds[static_cast<size_t>(r)])
            check_dist(d, spec.message_bits[static_cast<size_t>(2 * r)]);
        if (static_cast<size_t>(r) < round_defaults.size() && round_defaults[static_cast<size_t>(r)])
            check_dist(*round_defaults[static_cast<size_t>(r)],
                       spec.message_bits[static_cast<size_t>(2 * r)]);
    }
    auto check_final = [&](const FinalMessage& fin) {
        if (fin.quantum != spec.final_quantum) throw ConfigError("TabulatedProver: final kind mismatch");
        if (fin.quantum) {
            fin.rho.validate(1.0, 1e-8);
            if (fin.rho.num_qubits != spec.final_bits)
                throw ConfigError("TabulatedProver: final width mismatch");
        } else {
            check_dist(fin.classical_dist, spec.final_bits);
        }
    };
    for (const auto& [key, fin] : finals) check_final(fin);
    if (final_default) check_final(*final_default);
}

const std::vector<std::pair<u64, double>>& TabulatedProver::round_dist(int round_idx,
                                                                       u64 packed_prefix) const {
    const auto& m = rounds[static_cast<size_t>(round_idx)];
    auto it = m.find(packed_prefix);
    if (it != m.end()) return it->second;
    if (static_cast<size_t>(round_idx) < round_defaults.size() &&
        round_defaults[static_cast<size_t>(round_idx)])
        return *round_defaults[static_cast<size_t>(round_idx)];
    return kZeroPoint;  // unreachable prefixes fall back to the zero message
}

FinalMessage TabulatedProver::final_message(const ProtocolSpec& spec, u64 packed_prefix) const {
    auto it = finals.find(packed_prefix);
    if (it != finals.end()) return it->second;
    if (final_default) return *final_default;
    FinalMessage f;
    f.quantum = spec.final_quantum;
    if (f.quantum)
        f.rho = DensityMatrix::basis(spec.final_bits, 0);
    else
        f.classical_dist = kZeroPoint;
    return f;
}

// ---- verifier ----

VerifierResponse verifier_response(const ProtocolSpec& spec, const Verifier& v,
                                   std::span<const u64> msgs_so_far, std::optional<u64> coins) {
    spec.validate();
    if (msgs_so_far.size() % 2 != 1 || static_cast<int>(msgs_so_far.size()) >= 2 * spec.k)
        throw ConfigError("verifier_response: it is not the verifier's turn");
    int idx = static_cast<int>(msgs_so_far.size());  // even message being produced
    int width = spec.message_bits[static_cast<size_t>(idx)];
    switch (v.kind) {
        case Verifier::Kind::HonestArthur:
            return {true, 0};
        case Verifier::Kind::HashArthur: {
            size_t hi = static_cast<size_t>(idx) / 2;
            if (hi >= v.hashes.size()) throw ConfigError("verifier_response: missing hash");
            const HashFunction& h = v.hashes[hi];
            if (h.n1 != spec.prefix_bits(idx) || h.n2 != width)
                throw ConfigError("verifier_response: hash widths do not fit this round");
            return {false, h.eval(pack_messages(spec, msgs_so_far))};
        }
        case Verifier::Kind::HonestIP: {
            if (spec.shape != Shape::IP3) throw ConfigError("verifier_response: not an IP spec");
            if (!coins) throw ConfigError("verifier_response: honest IP verifier needs coins");
            return {false, spec.ip3_respond(*coins, msgs_so_far[0])};
        }
        case Verifier::Kind::HashIP: {
            if (spec.shape != Shape::IP3) throw ConfigError("verifier_response: not an IP spec");
            const HashFunction& h = v.hashes.at(0);
            if (h.n1 != spec.message_bits[0] || h.n2 != spec.coin_bits)
                throw ConfigError("verifier_response: hash widths do not fit the coin space");
            return {false, spec.ip3_respond(h.eval(msgs_so_far[0]), msgs_so_far[0])};
        }
    }
    throw ConfigError("verifier_response: unknown verifier");
}

FunctionOracle as_function_oracle(const ProtocolSpec& spec, const Verifier& v, int even_round_idx,
                                  bool full_prefix) {
    spec.validate();
    int msg_idx = 2 * even_round_idx + 1;
    if (even_round_idx < 0 || msg_idx >= 2 * spec.k)
        throw ConfigError("as_function_oracle: no such verifier round");
    FunctionOracle f;
    switch (v.kind) {
        case Verifier::Kind::HonestArthur:
        case Verifier::Kind::HonestIP:
            throw ConfigError("as_function_oracle: an honest verifier is not oracle-representable");
        case Verifier::Kind::HashArthur: {
            size_t hi = static_cast<size_t>(even_round_idx);
            if (hi >= v.hashes.size()) throw ConfigError("as_function_oracle: missing hash");
            const HashFunction& h = v.hashes[hi];
            int n_full = spec.prefix_bits(msg_idx);
            if (h.n1 != n_full || h.n2 != spec.message_bits[static_cast<size_t>(msg_idx)])
                throw ConfigError("as_function_oracle: hash widths do not fit this round");
            if (full_prefix) {
                f.n1 = n_full;
                f.n2 = h.n2;
                for (u64 x = 0; x < (u64{1} << f.n1); ++x) f.table.push_back(h.eval(x));
            } else {
                // hash only the preceding prover message, held at its
                // transcript position with every other message zeroed
                int prev_w = spec.message_bits[static_cast<size_t>(msg_idx - 1)];
                int shift = spec.prefix_bits(msg_idx - 1);
                f.n1 = prev_w;
                f.n2 = h.n2;
                for (u64 z = 0; z < (u64{1} << f.n1); ++z) f.table.push_back(h.eval(z << shift));
            }
            return f;
        }
        case Verifier::Kind::HashIP: {
            if (spec.shape != Shape::IP3) throw ConfigError("as_function_oracle: not an IP spec");
            const HashFunction& h = v.hashes.at(0);
            if (h.n1 != spec.message_bits[0] || h.n2 != spec.coin_bits)
                throw ConfigError("as_function_oracle: hash widths do not fit the coin space");
            f.n1 = spec.message_bits[0];
            f.n2 = spec.message_bits[1];
            for (u64 a = 0; a < (u64{1} << f.n1); ++a)
                f.table.push_back(spec.ip3_respond(h.eval(a), a));
            return f;
        }
    }
    throw ConfigError("as_function_oracle: unknown verifier");
}

// ---- execution ----

namespace {

void walk_qam(const ProtocolSpec& spec, const TabulatedProver& prover, const Verifier& verifier,
              std::vector<u64>& msgs, double prob, TranscriptDistribution& out) {
    int i = static_cast<int>(msgs.size());
    if (i == 2 * spec.k) {
        u64 packed = pack_messages(spec, msgs);
        FinalMessage fin = prover.final_message(spec, packed);
        if (fin.quantum) {
            double acc = predicate_accept(spec.predicate->matrix(msgs, spec.final_bits), fin.rho);
            out.acceptance += prob * acc;
            auto& slot = out.quantum_finals[packed];
            if (slot.second.rows == 0) slot.second = CMat(fin.rho.mat.rows, fin.rho.mat.cols);
            slot.first += prob;
            for (size_t z = 0; z < slot.second.a.size(); ++z)
                slot.second.a[z] += prob * fin.rho.mat.a[z];
        } else {
            for (auto [c, pc] : fin.classical_dist) {
                if (pc <= 0) continue;
                out.classical[packed | (c << spec.prefix_bits(2 * spec.k))] += prob * pc;
                out.acceptance += prob * pc * spec.predicate->diag_entry(msgs, c);
            }
        }
        return;
    }
    if (i % 2 == 0) {
        u64 packed = pack_messages(spec, msgs);
        for (auto [m, p] : prover.round_dist(i / 2, packed)) {
            if (p <= 0) continue;
            msgs.push_back(m);
            walk_qam(spec, prover, verifier, msgs, prob * p, out);
            msgs.pop_back();
        }
    } else {
        VerifierResponse r = verifier_response(spec, verifier, msgs);
        if (r.uniform) {
            int w = spec.message_bits[static_cast<size_t>(i)];
            double p = 1.0 / static_cast<double>(u64{1} << w);
            for (u64 m = 0; m < (u64{1} << w); ++m) {
                msgs.push_back(m);
                walk_qam(spec, prover, verifier, msgs, prob * p, out);
                msgs.pop_back();
            }
        } else {
            msgs.push_back(r.value);
            walk_qam(spec, prover, verifier, msgs, prob, out);
            msgs.pop_back();
        }
    }
}

void run_ip3(const ProtocolSpec& spec, const TabulatedProver& prover, const Verifier& verifier,
             TranscriptDistribution& out) {
    bool honest = verifier.kind == Verifier::Kind::HonestIP;
    if (!honest && verifier.kind != Verifier::Kind::HashIP)
        throw ConfigError("run_protocol: IP spec needs an IP verifier");
    u64 ncoins = u64{1} << spec.coin_bits;
    for (auto [alpha, pa] : prover.round_dist(0, 0)) {
        if (pa <= 0) continue;
        auto coin_case = [&](u64 r, double pr) {
            u64 beta = spec.ip3_respond(r, alpha);
            std::vector<u64> msgs{alpha, beta};
            u64 packed = pack_messages(spec, msgs);
            FinalMessage fin = prover.final_message(spec, packed);
            u64 pred_msgs[2] = {r, alpha};
            for (auto [c, pc] : fin.classical_dist) {
                if (pc <= 0) continue;
                out.classical[packed | (c << spec.prefix_bits(2))] += pa * pr * pc;
                out.acceptance += pa * pr * pc * spec.predicate->diag_entry(pred_msgs, c);
            }
        };
        if (honest) {
            double pr = 1.0 / static_cast<double>(ncoins);
            for (u64 r = 0; r < ncoins; ++r) coin_case(r, pr);
        } else {
            const HashFunction& h = verifier.hashes.at(0);
            if (h.n1 != spec.message_bits[0] || h.n2 != spec.coin_bits)
                throw ConfigError("run_protocol: hash widths do not fit the coin space");
            coin_case(h.eval(alpha), 1.0);
        }
    }
}

}  // namespace

TranscriptDistribution run_protocol(const ProtocolSpec& spec, const TabulatedProver& prover,
                                    const Verifier& verifier) {
    spec.validate();
    prover.validate(spec);
    TranscriptDistribution out;
    if (spec.shape == Shape::IP3) {
        run_ip3(spec, prover, verifier, out);
    } else {
        if (verifier.kind != Verifier::Kind::HonestArthur && verifier.kind != Verifier::Kind::HashArthur)
            throw ConfigError("run_protocol: this shape needs an Arthur verifier");
        std::vector<u64> msgs;
        walk_qam(spec, prover, verifier, msgs, 1.0, out);
    }
    return out;
}

SampledTranscript sample_protocol(const ProtocolSpec& spec, const TabulatedProver& prover,
                                  const Verifier& verifier, RandomStream& rng) {
    spec.validate();
    prover.validate(spec);
    auto draw = [&](const std::vector<std::pair<u64, double>>& dist) {
        double x = rng.uniform01();
        double acc = 0;
        for (auto [v, p] : dist) {
            acc += p;
            if (x <= acc) return v;
        }
        return dist.back().first;
    };
    SampledTranscript t;
    if (spec.shape == Shape::IP3) {
        u64 alpha = draw(prover.round_dist(0, 0));
        u64 r = verifier.kind == Verifier::Kind::HonestIP ? rng.uniform(u64{1} << spec.coin_bits)
                                                          : verifier.hashes.at(0).eval(alpha);
        u64 beta = spec.ip3_respond(r, alpha);
        t.coins = r;
        t.msgs = {alpha, beta};
        FinalMessage fin = prover.final_message(spec, pack_messages(spec, t.msgs));
        t.final_value = draw(fin.classical_dist);
        u64 pred_msgs[2] = {r, alpha};
        t.accept_prob = spec.predicate->diag_entry(pred_msgs, t.final_value);
        return t;
    }
    for (int i = 0; i < 2 * spec.k; ++i) {
        if (i % 2 == 0) {
            t.msgs.push_back(draw(prover.round_dist(i / 2, pack_messages(spec, t.msgs))));
        } else {
            VerifierResponse r = verifier_response(spec, verifier, t.msgs);
            t.msgs.push_back(r.uniform ? rng.uniform(u64{1} << spec.message_bits[static_cast<size_t>(i)])
                                       : r.value);
        }
    }
    FinalMessage fin = prover.final_message(spec, pack_messages(spec, t.msgs));
    if (fin.quantum) {
        t.accept_prob = predicate_accept(spec.predicate->matrix(t.msgs, spec.final_bits), fin.rho);
    } else {
        t.final_value = draw(fin.classical_dist);
        t.accept_prob = spec.predicate->diag_entry(t.msgs, t.final_value);
    }
    return t;
}

// ---- optimal cheating value ----

namespace {

double cheat_rec(const ProtocolSpec& spec, std::vector<u64>& msgs) {
    int i = static_cast<int>(msgs.size());
    if (i == 2 * spec.k) {
        if (spec.final_quantum) return max_eigenvalue(spec.predicate->matrix(msgs, spec.final_bits).e);
        double best = 0;
        for (u64 c = 0; c < (u64{1} << spec.final_bits); ++c)
            best = std::max(best, spec.predicate->diag_entry(msgs, c));
        return best;
    }
    int w = spec.message_bits[static_cast<size_t>(i)];
    double agg = 0;
    for (u64 m = 0; m < (u64{1} << w); ++m) {
        msgs.push_back(m);
        double v = cheat_rec(spec, msgs);
        msgs.pop_back();
        if (i % 2 == 0)
            agg = std::max(agg, v);
        else
            agg += v / static_cast<double>(u64{1} << w);
    }
    return agg;
}

}  // namespace

double optimal_cheat(const ProtocolSpec& spec, u64 state_limit) {
    spec.validate();
    long double states = u64{1} << spec.final_bits;
    for (int b : spec.message_bits) states *= static_cast<double>(u64{1} << b);
    if (states > static_cast<long double>(state_limit))
        throw LimitError("optimal_cheat: transcript space exceeds the enumeration limit");
    if (spec.shape != Shape::IP3) {
        std::vector<u64> msgs;
        return cheat_rec(spec, msgs);
    }
    // After seeing the response, the cheater best-responds against the coin
    // posterior; the commitment maximizes the average over responses.
    u64 ncoins = u64{1} << spec.coin_bits;
    double best = 0;
    for (u64 alpha = 0; alpha < (u64{1} << spec.message_bits[0]); ++alpha) {
        std::map<u64, std::vector<u64>> by_beta;
        for (u64 r = 0; r < ncoins; ++r) by_beta[spec.ip3_respond(r, alpha)].push_back(r);
        double val = 0;
        for (auto& [beta, rs] : by_beta) {
            double best_c = 0;
            for (u64 c = 0; c < (u64{1} << spec.final_bits); ++c) {
                double s = 0;
                for (u64 r : rs) {
                    u64 pred_msgs[2] = {r, alpha};
                    s += spec.predicate->diag_entry(pred_msgs, c) / static_cast<double>(ncoins);
                }
                best_c = std::max(best_c, s);
            }
            val += best_c;
        }
        best = std::max(best, val);
    }
    return best;
}

// ---- parallel composition ----

namespace {

class ComposedPredicate : public Predicate {
  public:
    ComposedPredicate(std::shared_ptr<const Predicate> base, int copies, ProtocolSpec base_spec)
        : base_(std::move(base)), copies_(copies), base_spec_(std::move(base_spec)) {}

    bool diagonal() const override { return base_->diagonal(); }

    double diag_entry(std::span<const u64> msgs, u64 final_value) const override {
        double p = 1.0;
        for (int j = 0; j < copies_ && p > 0; ++j) {
            auto sliced = slice(msgs, j);
            p *= base_->diag_entry(sliced, slice_bits(final_value, base_spec_.final_bits, j));
        }
        return p;
    }

    QuantumPredicate matrix(std::span<const u64> msgs, int final_bits) const override {
        int bf = base_spec_.final_bits;
        std::vector<CMat> parts;
        for (int j = 0; j < copies_; ++j) {
            auto sliced = slice(msgs, j);
            parts.push_back(base_->matrix(sliced, bf).e);
        }
        u64 dim = u64{1} << final_bits;
        QuantumPredicate out;
        out.e = CMat(static_cast<int>(dim), static_cast<int>(dim));
        for (u64 r = 0; r < dim; ++r)
            for (u64 c = 0; c < dim; ++c) {
                cplx v = 1.0;
                for (int j = 0; j < copies_; ++j)
                    v *= parts[static_cast<size_t>(j)].at(
                        static_cast<int>(slice_bits(r, bf, j)), static_cast<int>(slice_bits(c, bf, j)));
                out.e.at(static_cast<int>(r), static_cast<int>(c)) = v;
            }
        return out;
    }

    std::string type_name() const override { return "composed"; }

  private:
    static u64 slice_bits(u64 v, int width, int j) { return (v >> (j * width)) & ((u64{1} << width) - 1); }

    std::vector<u64> slice(std::span<const u64> msgs, int j) const {
        std::vector<u64> out;
        if (base_spec_.shape == Shape::IP3) {
            out.push_back(slice_bits(msgs[0], base_spec_.coin_bits, j));
            out.push_back(slice_bits(msgs[1], base_spec_.message_bits[0], j));
        } else {
            for (size_t i = 0; i < base_spec_.message_bits.size(); ++i)
                out.push_back(slice_bits(msgs[i], base_spec_.message_bits[i], j));
        }
        return out;
    }

    std::shared_ptr<const Predicate> base_;
    int copies_;
    ProtocolSpec base_spec_;
};

}  // namespace

ProtocolSpec parallel_compose(const ProtocolSpec& spec, int copies) {
    spec.validate();
    if (spec.k != 1) throw ConfigError("parallel_compose: only single-round specs");
    if (copies < 1 || copies > 4) throw ConfigError("parallel_compose: bad copy count");
    ProtocolSpec out = spec;
    for (auto& b : out.message_bits) b *= copies;
    out.final_bits *= copies;
    out.coin_bits *= copies;
    out.eps_s = std::pow(spec.eps_s, copies);  // independent repetitions
    out.predicate = std::make_shared<ComposedPredicate>(spec.predicate, copies, spec);
    out.validate();
    return out;
}

// ---- GI instances ----

GiInstance gi_instance(const Graph& g0, const Graph& g1, int copies, Shape shape) {
    GiInstance inst;
    inst.g0 = g0;
    inst.g1 = g1;
    inst.copies = copies;
    inst.witness = find_isomorphism(g0, g1);
    ProtocolSpec& s = inst.spec;
    s.shape = shape;
    s.k = 1;
    s.message_bits = {copies * adj_bits(g0.v), copies};
    s.final_bits = copies * perm_bits(g0.v);
    s.final_quantum = false;
    s.eps_c = 0.0;
    s.eps_s = std::pow(0.5, copies);
    if (shape == Shape::IP3) {
        s.coin_bits = copies;
        s.ip3_response = Ip3Response::Echo;
        s.predicate = std::make_shared<GiIp3Predicate>(g0, g1, copies);
    } else if (shape == Shape::QAM3) {
        s.predicate = std::make_shared<GiPredicate>(g0, g1, copies);
    } else {
        throw ConfigError("gi_instance: shape must be three-message");
    }
    s.validate();
    return inst;
}

TabulatedProver honest_gi_prover(const Graph& g0, const Graph& g1, int copies,
                                 const std::vector<int>& witness, Shape shape) {
    (void)shape;  // the echo IP form shares the same tables
    if (permuted_graph(g0, witness) != g1) throw ConfigError("honest_gi_prover: witness is wrong");
    int v = g0.v;
    int g = adj_bits(v), p = perm_bits(v);
    u64 nperm = factorial_small(v);
    const auto& perms = all_perms(v);

    // per-copy commitment distribution and challenge fibers
    std::map<u64, double> k_dist;
    for (u64 pi = 0; pi < nperm; ++pi)
        k_dist[permuted_graph(g1, perms[pi]).adj] += 1.0 / static_cast<double>(nperm);
    GiPredicate check(g0, g1, copies);
    auto fiber = [&](u64 k_enc, u64 b) {
        std::vector<u64> f;
        for (u64 psi = 0; psi < nperm; ++psi)
            if (check.check_copy(k_enc, b, psi)) f.push_back(psi);
        return f;
    };

    TabulatedProver prover;
    prover.rounds.resize(1);
    // product over copies for the first message
    std::vector<std::pair<u64, double>> first{{0, 1.0}};
    for (int j = 0; j < copies; ++j) {
        std::vector<std::pair<u64, double>> next;
        for (auto [acc, pa] : first)
            for (auto [kj, pk] : k_dist) next.emplace_back(acc | (kj << (j * g)), pa * pk);
        first = std::move(next);
    }
    std::map<u64, double> merged;
    for (auto [v_, p_] : first) merged[v_] += p_;
    auto& fd = prover.rounds[0][0];
    for (auto [v_, p_] : merged) fd.emplace_back(v_, p_);

    // responses for every reachable commitment and every challenge
    ProtocolSpec packer;
    packer.k = 1;
    packer.message_bits = {copies * g, copies};
    for (auto [alpha, pa] : merged) {
        if (pa <= 0) continue;
        for (u64 beta = 0; beta < (u64{1} << copies); ++beta) {
            std::vector<std::pair<u64, double>> dist{{0, 1.0}};
            for (int j = 0; j < copies; ++j) {
                u64 kj = (alpha >> (j * g)) & ((u64{1} << g) - 1);
                auto f = fiber(kj, (beta >> j) & 1);
                if (f.empty()) throw ConfigError("honest_gi_prover: empty fiber on a reachable commitment");
                std::vector<std::pair<u64, double>> next;
                for (auto [acc, pd] : dist)
                    for (u64 psi : f)
                        next.emplace_back(acc | (psi << (j * p)), pd / static_cast<double>(f.size()));
                dist = std::move(next);
            }
            FinalMessage fin;
            fin.quantum = false;
            fin.classical_dist = std::move(dist);
            u64 msgs[2] = {alpha, beta};
            prover.finals[pack_messages(packer, msgs)] = std::move(fin);
        }
    }
    return prover;
}

TabulatedProver fixed_transcript_prover(const ProtocolSpec& spec, std::span<const u64> odd_msgs,
                                        u64 final_value) {
    if (static_cast<int>(odd_msgs.size()) != spec.k)
        throw ConfigError("fixed_transcript_prover: need one message per prover round");
    TabulatedProver prover;
    prover.rounds.resize(static_cast<size_t>(spec.k));
    prover.round_defaults.resize(static_cast<size_t>(spec.k));
    for (int r = 0; r < spec.k; ++r)
        prover.round_defaults[static_cast<size_t>(r)] =
            std::vector<std::pair<u64, double>>{{odd_msgs[static_cast<size_t>(r)], 1.0}};
    FinalMessage fin;
    fin.quantum = spec.final_quantum;
    if (fin.quantum)
        fin.rho = DensityMatrix::basis(spec.final_bits, final_value);
    else
        fin.classical_dist = {{final_value, 1.0}};
    prover.final_default = std::move(fin);
    return prover;
}

QueryAlgorithm gi_witness_simulator(const GiInstance& gi) {
    if (!gi.witness) throw ConfigError("gi_witness_simulator: no witness for this instance");
    int v = gi.g0.v;
    int p = perm_bits(v), g = adj_bits(v), c = gi.copies;
    u64 nperm = factorial_small(v);
    const auto& perms = all_perms(v);
    const std::vector<int>& sigma = *gi.witness;

    QueryAlgorithm alg;
    alg.num_qubits = c * (p + g) + c;
    alg.query_budget = 1;
    auto pwires = [&](int j) {
        std::vector<int> w;
        for (int i = 0; i < p; ++i) w.push_back(j * p + i);
        return w;
    };
    auto kwires = [&](int j) {
        std::vector<int> w;
        for (int i = 0; i < g; ++i) w.push_back(c * p + j * g + i);
        return w;
    };
    int bbase = c * (p + g);

    for (int j = 0; j < c; ++j) alg.steps.push_back(Step::prepare_uniform(pwires(j), nperm));
    std::vector<u64> commit_tab(u64{1} << p, 0);
    for (u64 pi = 0; pi < nperm; ++pi) commit_tab[pi] = permuted_graph(gi.g1, perms[pi]).adj;
    for (int j = 0; j < c; ++j) alg.steps.push_back(Step::classical(pwires(j), kwires(j), commit_tab));

    std::vector<int> all_k, all_p, bw;
    for (int j = 0; j < c; ++j) {
        auto kw = kwires(j);
        all_k.insert(all_k.end(), kw.begin(), kw.end());
        auto pw = pwires(j);
        all_p.insert(all_p.end(), pw.begin(), pw.end());
        bw.push_back(bbase + j);
    }
    alg.steps.push_back(Step::oracle(0, all_k, bw));

    // in place: pi -> pi when challenged on g1, pi composed with the witness
    // when challenged on g0
    std::vector<u64> resp_tab(u64{1} << (p + 1));
    for (u64 x = 0; x < resp_tab.size(); ++x) {
        u64 pi = x & ((u64{1} << p) - 1);
        u64 b = x >> p;
        if (pi >= nperm || b == 1)
            resp_tab[x] = x;
        else
            resp_tab[x] = perm_index(v, compose_perms(perms[pi], sigma));
    }
    for (int j = 0; j < c; ++j) {
        std::vector<int> w = pwires(j);
        w.push_back(bbase + j);
        alg.steps.push_back(Step::permute(w, resp_tab));
    }

    if (gi.spec.shape == Shape::QAM3)
        alg.output_registers = {all_k, bw};
    else
        alg.output_registers = {all_k};
    alg.final_register = all_p;
    return alg;
}

// ---- sequential toy ----

SeqGiInstance seq_gi_instance(const Graph& g0, const Graph& g1) {
    SeqGiInstance inst;
    inst.g0 = g0;
    inst.g1 = g1;
    inst.witness = find_isomorphism(g0, g1);
    ProtocolSpec& s = inst.spec;
    s.shape = Shape::QAM2K1;
    s.k = 2;
    s.message_bits = {1, 1, 1, 1};
    s.final_bits = 1;
    s.final_quantum = false;
    s.predicate = std::make_shared<SeqGiPredicate>(g0, g1);
    s.eps_c = 0.0;
    s.eps_s = 0.25;
    s.validate();
    return inst;
}

TabulatedProver honest_seq_gi_prover(const Graph& g0, const Graph& g1,
                                     const std::vector<int>& witness) {
    if (permuted_graph(g0, witness) != g1) throw ConfigError("honest_seq_gi_prover: witness is wrong");
    const auto& perms = all_perms(2);
    ProtocolSpec s;
    s.k = 2;
    s.message_bits = {1, 1, 1, 1};
    TabulatedProver prover;
    prover.rounds.resize(2);
    u64 k_enc = permuted_graph(g1, perms[0]).adj;  // both perms fix the edge bit
    prover.rounds[0][0] = {{k_enc, 1.0}};
    auto respond = [&](u64 pi, u64 b) {
        return b ? pi : perm_index(2, compose_perms(perms[pi], witness));
    };
    for (u64 b1 = 0; b1 < 2; ++b1) {
        // pi is uniform; psi1 = respond(pi, b1) is a bijection of pi
        u64 key = pack_messages(s, std::vector<u64>{k_enc, b1});
        prover.rounds[1][key] = {{respond(0, b1), 0.5}, {respond(1, b1), 0.5}};
        for (u64 psi1 = 0; psi1 < 2; ++psi1) {
            u64 pi = respond(0, b1) == psi1 ? 0 : 1;
            for (u64 b2 = 0; b2 < 2; ++b2) {
                FinalMessage fin;
                fin.classical_dist = {{respond(pi, b2), 1.0}};
                u64 fkey = pack_messages(s, std::vector<u64>{k_enc, b1, psi1, b2});
                prover.finals[fkey] = std::move(fin);
            }
        }
    }
    return prover;
}

QueryAlgorithm seq_gi_witness_simulator(const SeqGiInstance& inst) {
    if (!inst.witness) throw ConfigError("seq_gi_witness_simulator: no witness for this instance");
    const auto& perms = all_perms(2);
    const std::vector<int>& sigma = *inst.witness;
    // wires: 0 pi, 1 K, 2 b1, 3 psi1, 4 b2, 5 psi2
    QueryAlgorithm alg;
    alg.num_qubits = 6;
    alg.query_budget = 2;
    std::vector<u64> commit_tab{permuted_graph(inst.g1, perms[0]).adj,
                                permuted_graph(inst.g1, perms[1]).adj};
    std::vector<u64> resp_tab(4);
    for (u64 x = 0; x < 4; ++x) {
        u64 pi = x & 1, b = x >> 1;
        resp_tab[x] = b ? pi : perm_index(2, compose_perms(perms[pi], sigma));
    }
    alg.steps.push_back(Step::prepare_uniform({0}, 2));
    alg.steps.push_back(Step::classical({0}, {1}, commit_tab));
    alg.steps.push_back(Step::oracle(0, {1}, {2}));
    alg.steps.push_back(Step::classical({0, 2}, {3}, resp_tab));
    alg.steps.push_back(Step::oracle(1, {1, 2, 3}, {4}));
    alg.steps.push_back(Step::classical({0, 4}, {5}, resp_tab));
    alg.output_registers = {{1}, {2}, {3}, {4}};
    alg.final_register = {5};
    return alg;
}

// ---- regression toy ----

ProtocolSpec regression_spec() {
    ProtocolSpec s;
    s.shape = Shape::QAM2K1;
    s.k = 2;
    s.message_bits = {6, 1, 1, 6};
    s.final_bits = 1;
    s.final_quantum = false;
    s.predicate = std::make_shared<MessageZeroPredicate>(3);
    s.eps_c = 0.5;
    s.eps_s = 1.0 / 64.0;
    s.validate();
    return s;
}

QueryAlgorithm regression_adversary(bool full_prefix) {
    // Probes the second-round response oracle once, then re-encodes the
    // observed value as its own first message. Its own verifier-round
    // records (registers 2 and 4) are left zero.
    QueryAlgorithm alg;
    alg.num_qubits = 23;
    alg.query_budget = 1;
    std::vector<int> probe{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> obs{8, 9, 10, 11, 12, 13};
    std::vector<int> b2rec{16, 17, 18, 19, 20, 21};
    if (full_prefix) {
        // probe point differs from any transcript point in the third-message slot
        alg.steps.push_back(Step::gate1(Step::Gate::X, 7));
        alg.steps.push_back(Step::oracle(1, probe, obs));
    } else {
        alg.steps.push_back(Step::oracle(1, {0}, obs));
    }
    alg.output_registers = {obs, {15}, {14}, b2rec};
    alg.final_register = {22};
    return alg;
}

QueryAlgorithm fixed_output_simulator(const ProtocolSpec& spec, std::span<const u64> prover_msgs,
                                      u64 final_value) {
    spec.validate();
    int rounds = spec.shape == Shape::IP3 ? 1 : spec.k;
    if (static_cast<int>(prover_msgs.size()) != rounds)
        throw ConfigError("fixed_output_simulator: one message per prover round expected");
    QueryAlgorithm alg;
    alg.query_budget = 0;
    int next = 0;
    auto reg = [&](int width) {
        std::vector<int> r(static_cast<size_t>(width));
        for (int i = 0; i < width; ++i) r[static_cast<size_t>(i)] = next++;
        return r;
    };
    auto xor_const = [&](const std::vector<int>& wires, u64 v) {
        if (v == 0) return;
        u64 n = u64{1} << wires.size();
        if (v >= n) throw DomainError("fixed_output_simulator: message out of range");
        std::vector<u64> tab(n);
        for (u64 x = 0; x < n; ++x) tab[x] = x ^ v;
        alg.steps.push_back(Step::permute(wires, tab));
    };
    int nmsgs = spec.shape == Shape::IP3 ? 1 : 2 * spec.k;
    for (int i = 0; i < nmsgs; ++i) {
        auto r = reg(spec.message_bits[static_cast<size_t>(i)]);
        if (i % 2 == 0) xor_const(r, prover_msgs[static_cast<size_t>(i / 2)]);
        alg.output_registers.push_back(std::move(r));
    }
    alg.final_register = reg(spec.final_bits);
    xor_const(alg.final_register, final_value);
    alg.num_qubits = next;
    return alg;
}

QueryAlgorithm probe_reencode_simulator(const ProtocolSpec& spec, u64 probe_point) {
    spec.validate();
    if (spec.shape != Shape::QAM3)
        throw ConfigError("probe_reencode_simulator: three-message public-coin specs only");
    int n1 = spec.message_bits[0], n2 = spec.message_bits[1];
    if (n2 > n1) throw ConfigError("probe_reencode_simulator: response wider than first message");
    if (probe_point >> n1) throw DomainError("probe_reencode_simulator: probe out of range");
    QueryAlgorithm alg;
    alg.query_budget = 1;
    std::vector<int> a(static_cast<size_t>(n1)), b(static_cast<size_t>(n2)),
        scratch(static_cast<size_t>(n2)), fin(static_cast<size_t>(spec.final_bits));
    int next = 0;
    for (auto& w : a) w = next++;
    for (auto& w : b) w = next++;
    for (auto& w : scratch) w = next++;
    for (auto& w : fin) w = next++;
    alg.num_qubits = next;
    std::vector<u64> tab(u64{1} << n1);
    for (u64 x = 0; x < tab.size(); ++x) tab[x] = x ^ probe_point;
    alg.steps.push_back(Step::permute(a, tab));
    alg.steps.push_back(Step::oracle(0, a, scratch));
    for (int i = 0; i < n2; ++i)
        alg.steps.push_back(Step::cx(scratch[static_cast<size_t>(i)], a[static_cast<size_t>(i)]));
    alg.output_registers = {a, b};
    alg.final_register = fin;
    return alg;
}

}  // namespace zklab
