#include "zklab/extract.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace zklab {

namespace {

// weighted running mean / variance over tuples
struct Accum {
    double mean = 0.0, m2 = 0.0;
    u64 n = 0;
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double var_of_mean() const {
        if (n < 2) return 0.0;
        return m2 / static_cast<double>(n) / static_cast<double>(n);
    }
};

double pow2(int bits) { return std::ldexp(1.0, bits); }

u64 width_mask(int bits) { return bits >= 64 ? ~u64{0} : (u64{1} << bits) - 1; }

struct EngineSetup {
    ProtocolSpec spec;
    QueryAlgorithm alg;
    Shape shape;
    int rounds = 1;                  // even (hash) rounds
    std::vector<int> even_widths;    // hash output width per round
    std::vector<int> prefix_widths;  // hash input width per round
    std::vector<HashFamily> families;
};

EngineSetup make_setup(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                       Shape expected, const ZOptions& opts) {
    spec.validate();
    if (spec.shape != expected) throw ConfigError("extraction: spec shape does not match the algorithm");
    if (spec.shape == Shape::QAM2K1 && spec.k < 1)
        throw ConfigError("extraction: degenerate round count");
    if (t < 0) throw DomainError("extraction: negative query budget");
    EngineSetup s;
    s.spec = spec;
    s.alg = simulator;
    s.shape = spec.shape;
    s.alg.query_budget = t;
    s.alg.validate(opts.qubit_cap);

    if (static_cast<int>(s.alg.final_register.size()) != spec.final_bits)
        throw ConfigError("extraction: final register width mismatch");
    int t_eff = std::max(t, 1);
    int degree = 2 * t_eff + 1;
    if (spec.shape == Shape::IP3) {
        s.rounds = 1;
        s.even_widths = {spec.coin_bits};
        s.prefix_widths = {spec.message_bits[0]};
        if (s.alg.output_registers.size() != 1)
            throw ConfigError("extraction: IP simulator must expose one message register");
        if (static_cast<int>(s.alg.output_registers[0].size()) != spec.message_bits[0])
            throw ConfigError("extraction: message register width mismatch");
    } else {
        s.rounds = spec.k;
        if (static_cast<int>(s.alg.output_registers.size()) != 2 * spec.k)
            throw ConfigError("extraction: simulator must expose every classical message register");
        for (int i = 0; i < 2 * spec.k; ++i)
            if (static_cast<int>(s.alg.output_registers[static_cast<size_t>(i)].size()) !=
                spec.message_bits[static_cast<size_t>(i)])
                throw ConfigError("extraction: message register width mismatch");
        for (int r = 0; r < s.rounds; ++r) {
            s.even_widths.push_back(spec.message_bits[static_cast<size_t>(2 * r + 1)]);
            s.prefix_widths.push_back(spec.prefix_bits(2 * r + 1));
        }
    }
    for (int r = 0; r < s.rounds; ++r)
        s.families.emplace_back(s.prefix_widths[static_cast<size_t>(r)],
                                s.even_widths[static_cast<size_t>(r)], degree);
    return s;
}

// total tuple count if every family fits, 0 otherwise
u64 tuple_space(const EngineSetup& s, u64 limit) {
    u64 prod = 1;
    for (const auto& f : s.families) {
        if (!f.size_fits()) return 0;
        u64 sz = f.size();
        if (prod > limit / sz + 1) return 0;
        prod *= sz;
        if (prod > limit) return 0;
    }
    return prod;
}

std::vector<FunctionOracle> tuple_oracles(const EngineSetup& s,
                                          const std::vector<HashFunction>& tuple,
                                          bool wrong_mode) {
    std::vector<FunctionOracle> out;
    if (s.shape == Shape::IP3) {
        out.push_back(as_function_oracle(s.spec, Verifier::hash_ip(tuple[0]), 0));
    } else {
        Verifier v = Verifier::hash_arthur(tuple);
        for (int r = 0; r < s.rounds; ++r) out.push_back(as_function_oracle(s.spec, v, r, !wrong_mode));
    }
    return out;
}

struct PredictorSet {
    // one entry per predictor: slice index (>=0) or constant (encoded as -1, value)
    std::vector<std::string> names;
    std::vector<int> slice_idx;  // -1 for constants
    std::vector<u64> const_val;
};

PredictorSet make_predictors(const EngineSetup& s, int round) {
    PredictorSet p;
    int msgs_before = s.shape == Shape::IP3 ? 1 : 2 * round + 1;
    for (int j = 0; j < msgs_before; ++j) {
        p.names.push_back("slice:" + std::to_string(j));
        p.slice_idx.push_back(j);
        p.const_val.push_back(0);
    }
    int w = s.even_widths[static_cast<size_t>(round)];
    if (w <= 8) {
        for (u64 b = 0; b < (u64{1} << w); ++b) {
            p.names.push_back("const:" + std::to_string(b));
            p.slice_idx.push_back(-1);
            p.const_val.push_back(b);
        }
    }
    return p;
}

// everything folded out of one simulator run against one hash tuple
struct TupleStats {
    double accept = 0.0;
    std::vector<std::vector<double>> pred_agree;
};

void fold_tuple(const EngineSetup& s, const std::vector<HashFunction>& tuple, double w,
                const ZOptions& opts, const std::vector<PredictorSet>& preds,
                JointDistribution& jd, TupleStats& ts) {
    auto oracles = tuple_oracles(s, tuple, opts.wrong_mode_hash);
    RunResult run = run_query_algorithm(s.alg, oracles, opts.qubit_cap);

    const ProtocolSpec& spec = s.spec;
    bool cl_final = !spec.final_quantum;
    std::vector<int> wires;
    std::vector<int> reg_width;
    for (const auto& reg : s.alg.output_registers) {
        wires.insert(wires.end(), reg.begin(), reg.end());
        reg_width.push_back(static_cast<int>(reg.size()));
    }
    int final_off = static_cast<int>(wires.size());
    if (cl_final) wires.insert(wires.end(), s.alg.final_register.begin(), s.alg.final_register.end());
    int fail_off = static_cast<int>(wires.size());
    if (s.alg.failure_wire) wires.push_back(*s.alg.failure_wire);

    OutcomeDistribution dist = measure(run.state, wires);
    ts.accept = 0.0;
    ts.pred_agree.assign(preds.size(), {});
    for (size_t r = 0; r < preds.size(); ++r)
        ts.pred_agree[r].assign(preds[r].names.size(), 0.0);

    int nmsgs = s.shape == Shape::IP3 ? 2 : 2 * spec.k;
    std::vector<u64> msgs(static_cast<size_t>(nmsgs));
    for (const auto& [outcome, branch] : dist.entries) {
        double p = branch.prob;
        if (p <= 0) continue;
        double wp = w * p;
        bool failed = s.alg.failure_wire && ((outcome >> fail_off) & 1);

        // decode measured registers
        int off = 0;
        std::vector<u64> meas;
        for (int rw : reg_width) {
            meas.push_back((outcome >> off) & width_mask(rw));
            off += rw;
        }
        u64 cval = cl_final ? (outcome >> final_off) & width_mask(spec.final_bits) : 0;
        if (opts.perturb_b && s.shape != Shape::IP3)
            for (int r = 0; r < s.rounds; ++r) meas[static_cast<size_t>(2 * r + 1)] ^= 1;

        u64 coins = 0;
        if (s.shape == Shape::IP3) {
            u64 alpha = meas[0];
            coins = tuple[0].eval(alpha);
            msgs[0] = alpha;
            msgs[1] = spec.ip3_respond(coins, alpha);
        } else {
            for (int i = 0; i < nmsgs; ++i) msgs[static_cast<size_t>(i)] = meas[static_cast<size_t>(i)];
            u64 prefix = 0;
            int pb = 0;
            for (int i = 0; i < nmsgs; ++i) {
                int mw = spec.message_bits[static_cast<size_t>(i)];
                if (i % 2 == 1) {
                    int r = i / 2;
                    u64 point = opts.wrong_mode_hash
                                    ? msgs[static_cast<size_t>(i - 1)]
                                          << spec.prefix_bits(i - 1)
                                    : prefix;
                    msgs[static_cast<size_t>(i)] = tuple[static_cast<size_t>(r)].eval(point);
                }
                prefix |= msgs[static_cast<size_t>(i)] << pb;
                pb += mw;
            }
        }

        // transcript with recomputed verifier messages
        u64 tau = 0;
        int pb = 0;
        for (int i = 0; i < nmsgs; ++i) {
            tau |= msgs[static_cast<size_t>(i)] << pb;
            pb += spec.message_bits[static_cast<size_t>(i)];
        }
        u64 meas_key = 0;
        pb = 0;
        for (int i = 0; i < nmsgs && s.shape != Shape::IP3; ++i) {
            meas_key |= meas[static_cast<size_t>(i)] << pb;
            pb += spec.message_bits[static_cast<size_t>(i)];
        }
        if (s.shape == Shape::IP3) meas_key = tau;

        double acc = 0.0;
        DensityMatrix rho;
        if (failed) {
            acc = 0.0;
        } else if (cl_final) {
            if (s.shape == Shape::IP3) {
                u64 pm[2] = {coins, msgs[0]};
                acc = spec.predicate->diag_entry(pm, cval);
            } else {
                acc = spec.predicate->diag_entry(msgs, cval);
            }
        } else {
            rho = reduce_to_density(branch.residual, s.alg.final_register);
            acc = predicate_accept(spec.predicate->matrix(msgs, spec.final_bits), rho);
        }

        jd.total_mass += wp;
        if (failed) jd.failure_mass += wp;
        jd.transcript_marginal[tau] += wp;
        if (acc > 0) jd.transcript_accept[tau] += wp * acc;
        jd.measured_marginal[meas_key] += wp;
        ts.accept += p * acc;

        auto& fa = jd.final_mix[tau];
        fa.mass += wp;
        if (cl_final) {
            fa.dist[failed ? 0 : cval] += wp;
        } else {
            int dim = 1 << spec.final_bits;
            if (fa.rho.rows == 0) fa.rho = CMat(dim, dim);
            if (failed) {
                fa.rho.at(0, 0) += wp;  // replay a rejected run as the zero state
            } else {
                for (size_t z = 0; z < fa.rho.a.size(); ++z) fa.rho.a[z] += wp * rho.mat.a[z];
            }
        }

        if (s.shape == Shape::IP3) {
            u64 alpha = msgs[0];
            u64 ckey = (alpha << spec.coin_bits) | coins;
            jd.round_h_joint[0][ckey] += wp;
            if (acc > 0) jd.accept_coins[ckey] += wp * acc;
            jd.round_cond[0][0][alpha] += wp;
            for (size_t g = 0; g < preds[0].names.size(); ++g) {
                u64 guess = preds[0].slice_idx[g] >= 0 ? alpha : preds[0].const_val[g];
                if (guess == coins) ts.pred_agree[0][g] += p;
            }
        } else {
            u64 prefix = 0;
            pb = 0;
            for (int i = 0; i < nmsgs; ++i) {
                int mw = spec.message_bits[static_cast<size_t>(i)];
                if (i % 2 == 0) {
                    jd.round_cond[static_cast<size_t>(i / 2)][prefix][msgs[static_cast<size_t>(i)]] += wp;
                } else {
                    int r = i / 2;
                    u64 val = msgs[static_cast<size_t>(i)];
                    jd.round_h_joint[static_cast<size_t>(r)][(prefix << mw) | val] += wp;
                    if (meas[static_cast<size_t>(i)] == val)
                        jd.measured_agreement[static_cast<size_t>(r)] += wp;
                    const auto& ps = preds[static_cast<size_t>(r)];
                    for (size_t g = 0; g < ps.names.size(); ++g) {
                        u64 guess;
                        if (ps.slice_idx[g] >= 0) {
                            int j = ps.slice_idx[g];
                            int lo = spec.prefix_bits(j);
                            guess = (prefix >> lo) & width_mask(spec.message_bits[static_cast<size_t>(j)]);
                        } else {
                            guess = ps.const_val[g];
                        }
                        if (guess == val) ts.pred_agree[static_cast<size_t>(r)][g] += p;
                    }
                }
                prefix |= msgs[static_cast<size_t>(i)] << pb;
                pb += mw;
            }
        }
    }
}

ZResult run_engine(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t, Shape expected,
                   const ZOptions& opts) {
    EngineSetup s = make_setup(spec, simulator, t, expected, opts);

    JointDistribution jd;
    jd.shape = spec.shape;
    jd.spec = spec;
    jd.t = t;
    jd.t_eff = std::max(t, 1);
    jd.wrong_mode_hash = opts.wrong_mode_hash;
    jd.families = s.families;
    jd.round_h_joint.resize(static_cast<size_t>(s.rounds));
    jd.measured_agreement.assign(static_cast<size_t>(s.rounds), 0.0);
    jd.round_cond.resize(static_cast<size_t>(spec.shape == Shape::IP3 ? 1 : spec.k));

    std::vector<PredictorSet> preds;
    for (int r = 0; r < s.rounds; ++r) preds.push_back(make_predictors(s, r));

    u64 space = tuple_space(s, opts.enum_limit);
    bool exact;
    switch (opts.mode) {
        case ZMode::Exact:
            if (space == 0) throw LimitError("extraction: hash tuple space exceeds the enumeration limit");
            exact = true;
            break;
        case ZMode::MonteCarlo:
            exact = false;
            break;
        default:
            exact = space != 0;
    }

    Accum q_acc;
    std::vector<std::vector<Accum>> pred_acc(preds.size());
    for (size_t r = 0; r < preds.size(); ++r) pred_acc[r].resize(preds[r].names.size());
    TupleStats ts;

    if (exact) {
        jd.monte_carlo = false;
        jd.samples = space;
        double w = 1.0 / static_cast<double>(space);
        std::vector<HashFunction> tuple(s.families.size(), s.families[0].at(0));
        std::function<void(size_t)> walk = [&](size_t r) {
            if (r == s.families.size()) {
                fold_tuple(s, tuple, w, opts, preds, jd, ts);
                q_acc.add(ts.accept);
                for (size_t i = 0; i < preds.size(); ++i)
                    for (size_t g = 0; g < preds[i].names.size(); ++g)
                        pred_acc[i][g].add(ts.pred_agree[i][g]);
                return;
            }
            u64 sz = s.families[r].size();
            for (u64 idx = 0; idx < sz; ++idx) {
                tuple[r] = s.families[r].at(idx);
                walk(r + 1);
            }
        };
        walk(0);
    } else {
        jd.monte_carlo = true;
        jd.samples = opts.mc_samples;
        if (jd.samples == 0) throw DomainError("extraction: sample count must be positive");
        RandomStream root(opts.seed);
        RandomStream rng = root.fork("hash-tuples");
        double w = 1.0 / static_cast<double>(jd.samples);
        std::vector<HashFunction> tuple;
        for (u64 i = 0; i < jd.samples; ++i) {
            tuple.clear();
            for (const auto& f : s.families) tuple.push_back(f.sample(rng));
            fold_tuple(s, tuple, w, opts, preds, jd, ts);
            q_acc.add(ts.accept);
            for (size_t r = 0; r < preds.size(); ++r)
                for (size_t g = 0; g < preds[r].names.size(); ++g)
                    pred_acc[r][g].add(ts.pred_agree[r][g]);
        }
    }

    jd.q = q_acc.mean;
    jd.q_var = q_acc.var_of_mean();
    double sd = std::sqrt(jd.q_var);
    jd.q_low3 = exact ? jd.q : std::max(0.0, jd.q - 3 * sd);
    jd.q_high3 = exact ? jd.q : std::min(1.0, jd.q + 3 * sd);

    jd.predictors.resize(preds.size());
    for (size_t r = 0; r < preds.size(); ++r) {
        for (size_t g = 0; g < preds[r].names.size(); ++g) {
            PredictorRate pr;
            pr.name = preds[r].names[g];
            pr.rate = pred_acc[r][g].mean;
            double psd = std::sqrt(pred_acc[r][g].var_of_mean());
            pr.low3 = exact ? pr.rate : std::max(0.0, pr.rate - 3 * psd);
            pr.high3 = exact ? pr.rate : std::min(1.0, pr.rate + 3 * psd);
            jd.predictors[r].push_back(std::move(pr));
        }
        std::stable_sort(jd.predictors[r].begin(), jd.predictors[r].end(),
                         [](const PredictorRate& a, const PredictorRate& b) { return a.rate > b.rate; });
    }
    return {jd.q, std::move(jd)};
}

}  // namespace

int JointDistribution::even_width(int round) const {
    if (shape == Shape::IP3) return spec.coin_bits;
    return spec.message_bits[static_cast<size_t>(2 * round + 1)];
}

int JointDistribution::prefix_width(int round) const {
    if (shape == Shape::IP3) return spec.message_bits[0];
    return spec.prefix_bits(2 * round + 1);
}

std::map<u64, double> JointDistribution::a_marginal() const {
    std::map<u64, double> out;
    auto it = round_cond[0].find(0);
    if (it != round_cond[0].end()) out = it->second;
    return out;
}

ZResult algorithm_Z(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                    const ZOptions& opts) {
    return run_engine(spec, simulator, t, Shape::QAM3, opts);
}

ZResult algorithm_Z_prime(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                          const ZOptions& opts) {
    return run_engine(spec, simulator, t, Shape::IP3, opts);
}

ZResult algorithm_Z_k(const ProtocolSpec& spec, const QueryAlgorithm& simulator, int t,
                      const ZOptions& opts) {
    return run_engine(spec, simulator, t, Shape::QAM2K1, opts);
}

TabulatedProver build_cheating_prover(const JointDistribution& jd) {
    TabulatedProver p;
    int k = jd.shape == Shape::IP3 ? 1 : jd.spec.k;
    p.rounds.resize(static_cast<size_t>(k));
    for (int r = 0; r < k; ++r) {
        for (const auto& [prefix, dmap] : jd.round_cond[static_cast<size_t>(r)]) {
            double total = 0;
            for (const auto& [v, m] : dmap) total += m;
            if (total <= 0) continue;
            auto& dist = p.rounds[static_cast<size_t>(r)][prefix];
            for (const auto& [v, m] : dmap)
                if (m > 0) dist.emplace_back(v, m / total);
        }
    }
    for (const auto& [tau, fa] : jd.final_mix) {
        if (fa.mass <= 0) continue;
        FinalMessage fm;
        if (jd.spec.final_quantum && fa.rho.rows > 0) {
            fm.quantum = true;
            fm.rho.num_qubits = jd.spec.final_bits;
            fm.rho.mat = fa.rho;
            for (auto& z : fm.rho.mat.a) z /= fa.mass;
        } else {
            for (const auto& [c, m] : fa.dist)
                if (m > 0) fm.classical_dist.emplace_back(c, m / fa.mass);
        }
        p.finals[tau] = std::move(fm);
    }
    p.validate(jd.spec);
    return p;
}

double cheating_probability(const TabulatedProver& prover, const ProtocolSpec& spec) {
    Verifier v = spec.shape == Shape::IP3 ? Verifier::honest_ip() : Verifier::honest_arthur();
    return run_protocol(spec, prover, v).acceptance;
}

namespace {

double final_accept(const ProtocolSpec& spec, const TabulatedProver& prover,
                    std::span<const u64> pred_msgs, u64 packed) {
    FinalMessage fm = prover.final_message(spec, packed);
    if (fm.quantum)
        return predicate_accept(spec.predicate->matrix(pred_msgs, spec.final_bits), fm.rho);
    double acc = 0;
    for (auto [c, pc] : fm.classical_dist)
        if (pc > 0) acc += pc * spec.predicate->diag_entry(pred_msgs, c);
    return acc;
}

double closed_form_qam(const ProtocolSpec& spec, const TabulatedProver& prover,
                       std::vector<u64>& msgs, u64 packed, int pb) {
    int i = static_cast<int>(msgs.size());
    if (i == 2 * spec.k) return final_accept(spec, prover, msgs, packed);
    int w = spec.message_bits[static_cast<size_t>(i)];
    double out = 0;
    if (i % 2 == 0) {
        for (auto [m, pm] : prover.round_dist(i / 2, packed)) {
            if (pm <= 0) continue;
            msgs.push_back(m);
            out += pm * closed_form_qam(spec, prover, msgs, packed | (m << pb), pb + w);
            msgs.pop_back();
        }
    } else {
        double pu = 1.0 / pow2(w);
        for (u64 m = 0; m < (u64{1} << w); ++m) {
            msgs.push_back(m);
            out += pu * closed_form_qam(spec, prover, msgs, packed | (m << pb), pb + w);
            msgs.pop_back();
        }
    }
    return out;
}

}  // namespace

double cheating_probability_closed_form(const TabulatedProver& prover, const ProtocolSpec& spec) {
    if (spec.shape == Shape::IP3) {
        double out = 0;
        u64 ncoins = u64{1} << spec.coin_bits;
        for (auto [alpha, pa] : prover.round_dist(0, 0)) {
            if (pa <= 0) continue;
            for (u64 r = 0; r < ncoins; ++r) {
                u64 beta = spec.ip3_respond(r, alpha);
                u64 packed = alpha | (beta << spec.message_bits[0]);
                u64 pm[2] = {r, alpha};
                out += pa / static_cast<double>(ncoins) * final_accept(spec, prover, pm, packed);
            }
        }
        return out;
    }
    std::vector<u64> msgs;
    return closed_form_qam(spec, prover, msgs, 0, 0);
}

MinEntropyStats min_entropy_stats(const JointDistribution& jd, double c, int round) {
    if (round < 0 || round >= jd.even_rounds()) throw DomainError("min_entropy_stats: bad round");
    MinEntropyStats st;
    st.width = jd.even_width(round);
    u64 mask = width_mask(st.width);
    std::map<u64, std::map<u64, double>> by_prefix;
    for (const auto& [key, m] : jd.round_h_joint[static_cast<size_t>(round)])
        by_prefix[key >> st.width][key & mask] += m;
    double total = 0, acc = 0;
    for (const auto& [prefix, vals] : by_prefix) {
        double pm = 0, best = 0;
        u64 best_v = 0;
        for (const auto& [v, m] : vals) {
            pm += m;
            if (m > best) {
                best = m;
                best_v = v;
            }
        }
        if (pm <= 0) continue;
        st.s_table[prefix] = best / pm;
        st.beta_table[prefix] = best_v;
        total += pm;
        acc += pm * (best / pm);
    }
    if (total > 0) st.expected_s = acc / total;
    st.bound = c * jd.t_eff * jd.t_eff / pow2(st.width);
    st.bound_holds = st.expected_s <= st.bound + 1e-10;
    return st;
}

GoodSet good_set(const JointDistribution& jd, double delta, double c, int round) {
    if (!(delta > 0.0) || delta > 1.0) throw DomainError("good_set: delta must lie in (0, 1]");
    MinEntropyStats st = min_entropy_stats(jd, c, round);
    GoodSet g;
    g.delta = delta;
    g.threshold = c * jd.t_eff * jd.t_eff / (delta * pow2(st.width));
    std::map<u64, double> prefix_mass;
    double total = 0;
    for (const auto& [key, m] : jd.round_h_joint[static_cast<size_t>(round)]) {
        prefix_mass[key >> st.width] += m;
        total += m;
    }
    for (const auto& [prefix, s] : st.s_table) {
        if (s <= g.threshold + 1e-12) {
            g.members.insert(prefix);
            g.mass += prefix_mass[prefix];
        }
    }
    if (total > 0) g.mass /= total;
    g.mass_ok = g.mass >= 1.0 - delta - 1e-10;
    return g;
}

namespace {

void push_line(ChainReport& rep, const std::string& name, double lhs, double rhs) {
    ChainLine l{name, lhs, rhs, lhs - rhs, lhs - rhs >= -1e-10};
    rep.lines.push_back(std::move(l));
}

}  // namespace

ChainReport verify_inequality_chain(const JointDistribution& jd, const TabulatedProver& mstar,
                                    double cheat_prob, double delta, double c) {
    const ProtocolSpec& spec = jd.spec;
    double tt = c * jd.t_eff * jd.t_eff;
    double total = jd.total_mass > 0 ? jd.total_mass : 1.0;
    ChainReport rep;
    int k = jd.shape == Shape::IP3 ? 1 : spec.k;

    std::vector<GoodSet> goods;
    for (int r = 0; r < jd.even_rounds(); ++r) goods.push_back(good_set(jd, delta, c, r));

    if (jd.shape == Shape::QAM3 || jd.shape == Shape::IP3) {
        const GoodSet& good = goods[0];
        int w = jd.even_width(0);
        double pu = 1.0 / pow2(w);
        std::map<u64, double> amarg = jd.a_marginal();
        double atotal = 0;
        for (const auto& [a, m] : amarg) atotal += m;

        double g1 = 0, g2_pool = 0, g2_true = 0;
        for (const auto& [alpha, am] : amarg) {
            if (!good.members.count(alpha) || am <= 0) continue;
            double pa = am / atotal;
            for (u64 v = 0; v < (u64{1} << w); ++v) {
                double acc;
                if (jd.shape == Shape::IP3) {
                    u64 beta = spec.ip3_respond(v, alpha);
                    u64 packed = alpha | (beta << spec.message_bits[0]);
                    u64 pm[2] = {v, alpha};
                    acc = final_accept(spec, mstar, pm, packed);
                } else {
                    u64 packed = alpha | (v << spec.message_bits[0]);
                    u64 pm[2] = {alpha, v};
                    acc = final_accept(spec, mstar, pm, packed);
                }
                g1 += pa * pu * acc;
                u64 hkey = jd.shape == Shape::IP3 ? (alpha << spec.coin_bits) | v
                                                  : ((alpha << w) | v);
                auto it = jd.round_h_joint[0].find(hkey);
                if (it != jd.round_h_joint[0].end() && it->second > 0)
                    g2_pool += it->second / total * acc;
            }
        }
        if (jd.shape == Shape::IP3) {
            for (const auto& [key, m] : jd.accept_coins)
                if (good.members.count(key >> spec.coin_bits)) g2_true += m / total;
        } else {
            for (const auto& [tau, m] : jd.transcript_accept)
                if (good.members.count(tau & width_mask(spec.message_bits[0]))) g2_true += m / total;
        }

        push_line(rep, "cheat_vs_good_restriction", cheat_prob, g1);
        push_line(rep, "uniform_vs_hash_weight", g1, delta / tt * g2_pool);
        if (jd.shape == Shape::IP3)
            push_line(rep, "response_pooling_substitution", g2_pool, g2_true);
        push_line(rep, "good_accept_mass", jd.shape == Shape::IP3 ? g2_true : g2_pool, jd.q - delta);
        push_line(rep, "good_set_mass", good.mass, 1.0 - delta);
        rep.final_lower_bound = delta / tt * (jd.q - delta);
        push_line(rep, "combined_lower_bound", cheat_prob, rep.final_lower_bound);
        if (std::abs(delta - jd.q / 2) < 1e-12)
            push_line(rep, "closing_bound", cheat_prob, jd.q * jd.q / (4 * tt));
    } else {
        // all-round good restriction over the transcript space
        double im = 0;
        std::vector<u64> pw, ew;
        for (int r = 0; r < k; ++r) {
            pw.push_back(static_cast<u64>(jd.prefix_width(r)));
            ew.push_back(static_cast<u64>(jd.even_width(r)));
        }
        auto all_good = [&](u64 tau) {
            for (int r = 0; r < k; ++r)
                if (!goods[static_cast<size_t>(r)].members.count(tau & width_mask(static_cast<int>(pw[static_cast<size_t>(r)]))))
                    return false;
            return true;
        };
        for (const auto& [tau, m] : jd.transcript_marginal)
            if (all_good(tau)) im += m / total;

        double ga = 0;
        std::vector<u64> msgs;
        std::function<void(u64, int, double)> walk = [&](u64 packed, int pb, double weight) {
            int i = static_cast<int>(msgs.size());
            if (i == 2 * k) {
                ga += weight * final_accept(spec, mstar, msgs, packed);
                return;
            }
            int w = spec.message_bits[static_cast<size_t>(i)];
            if (i % 2 == 0) {
                for (auto [m, pm] : mstar.round_dist(i / 2, packed)) {
                    if (pm <= 0) continue;
                    msgs.push_back(m);
                    walk(packed | (m << pb), pb + w, weight * pm);
                    msgs.pop_back();
                }
            } else {
                int r = i / 2;
                for (u64 v = 0; v < (u64{1} << w); ++v) {
                    u64 next = packed | (v << pb);
                    // prune on the prefix through this verifier round
                    if (!goods[static_cast<size_t>(r)].members.count(packed)) continue;
                    msgs.push_back(v);
                    walk(next, pb + w, weight / pow2(w));
                    msgs.pop_back();
                }
            }
        };
        walk(0, 0, 1.0);

        double gb = 0;
        for (const auto& [tau, m] : jd.transcript_accept)
            if (all_good(tau)) gb += m / total;

        double factor = std::pow(delta / tt, k);
        push_line(rep, "cheat_vs_good_restriction", cheat_prob, ga);
        push_line(rep, "uniform_vs_hash_weight", ga, factor * gb);
        push_line(rep, "good_accept_mass", gb, jd.q - k * delta);
        push_line(rep, "good_set_mass", im, 1.0 - k * delta);
        rep.final_lower_bound = factor * (jd.q - k * delta);
        push_line(rep, "combined_lower_bound", cheat_prob, rep.final_lower_bound);
        if (std::abs(delta - jd.q / (2 * k)) < 1e-12)
            push_line(rep, "closing_bound", cheat_prob,
                      std::pow(jd.q / (2 * k * tt), k) * (jd.q / 2));
    }

    rep.all_ok = std::all_of(rep.lines.begin(), rep.lines.end(),
                             [](const ChainLine& l) { return l.ok; });
    return rep;
}

Ip3FunctionJoint build_ip3_function_joint(const ProtocolSpec& spec, const QueryAlgorithm& simulator,
                                          int t, u64 enum_limit, int qubit_cap) {
    spec.validate();
    if (spec.shape != Shape::IP3)
        throw ConfigError("function joint: private-coin three-message specs only");
    int n1 = spec.message_bits[0], nc = spec.coin_bits;
    u64 npoints = u64{1} << n1;
    u64 bits = static_cast<u64>(nc) * npoints;
    if (bits + static_cast<u64>(n1) >= 63 || (u64{1} << bits) > enum_limit)
        throw LimitError("function joint: coin-function space exceeds the enumeration limit");

    QueryAlgorithm alg = simulator;
    alg.query_budget = t;
    alg.validate(qubit_cap);
    if (alg.output_registers.size() != 1 ||
        static_cast<int>(alg.output_registers[0].size()) != n1)
        throw ConfigError("function joint: IP simulator must expose one message register");

    Ip3FunctionJoint out;
    out.spec = spec;
    out.function_count = u64{1} << bits;
    double w = 1.0 / static_cast<double>(out.function_count);
    u64 cmask = width_mask(nc);

    std::vector<int> wires = alg.output_registers[0];
    wires.insert(wires.end(), alg.final_register.begin(), alg.final_register.end());
    int fail_off = static_cast<int>(wires.size());
    if (alg.failure_wire) wires.push_back(*alg.failure_wire);

    for (u64 code = 0; code < out.function_count; ++code) {
        FunctionOracle f;
        f.n1 = n1;
        f.n2 = spec.message_bits[1];
        for (u64 a = 0; a < npoints; ++a)
            f.table.push_back(spec.ip3_respond((code >> (a * static_cast<u64>(nc))) & cmask, a));
        RunResult run = run_query_algorithm(alg, {&f, 1}, qubit_cap);
        OutcomeDistribution dist = measure(run.state, wires);
        for (const auto& [outcome, branch] : dist.entries) {
            if (branch.prob <= 0) continue;
            bool failed = alg.failure_wire && ((outcome >> fail_off) & 1);
            u64 alpha = outcome & width_mask(n1);
            u64 cval = failed ? 0 : (outcome >> n1) & width_mask(spec.final_bits);
            auto& slot = out.entries[(code << n1) | alpha];
            slot.first += w * branch.prob;
            slot.second[cval] += w * branch.prob;
        }
    }
    return out;
}

Ip3FunctionJoint break_ip3_joint(const Ip3FunctionJoint& joint) {
    Ip3FunctionJoint out = joint;
    int n1 = joint.spec.message_bits[0];
    u64 cmask = width_mask(joint.spec.coin_bits);
    u64 fmask = width_mask(joint.spec.final_bits);
    for (auto& [key, slot] : out.entries) {
        u64 alpha = key & width_mask(n1);
        u64 code = key >> n1;
        u64 fval = (code >> (alpha * static_cast<u64>(joint.spec.coin_bits))) & cmask;
        slot.second.clear();
        slot.second[fval & fmask] = slot.first;
    }
    return out;
}

double markov_network_check(const Ip3FunctionJoint& joint) {
    const ProtocolSpec& spec = joint.spec;
    if (spec.shape != Shape::IP3)
        throw ConfigError("factorization check: private-coin three-message joints only");
    int n1 = spec.message_bits[0], nc = spec.coin_bits;
    u64 cmask = width_mask(nc);

    // group by (alpha, response); inside each group check coins x final
    struct Group {
        double mass = 0;
        std::map<u64, double> fv, cv;
        std::map<std::pair<u64, u64>, double> both;
    };
    std::map<std::pair<u64, u64>, Group> groups;
    for (const auto& [key, slot] : joint.entries) {
        u64 alpha = key & width_mask(n1);
        u64 code = key >> n1;
        u64 fval = (code >> (alpha * static_cast<u64>(nc))) & cmask;
        u64 beta = spec.ip3_respond(fval, alpha);
        Group& g = groups[{alpha, beta}];
        for (const auto& [c, m] : slot.second) {
            if (m <= 0) continue;
            g.mass += m;
            g.fv[fval] += m;
            g.cv[c] += m;
            g.both[{fval, c}] += m;
        }
    }
    double worst = 0;
    for (const auto& [key, g] : groups) {
        if (g.mass <= 0) continue;
        double l1 = 0;
        for (const auto& [fv, fm] : g.fv)
            for (const auto& [cv, cm] : g.cv) {
                auto it = g.both.find({fv, cv});
                double j = it == g.both.end() ? 0.0 : it->second;
                l1 += std::abs(j / g.mass - (fm / g.mass) * (cm / g.mass));
            }
        worst = std::max(worst, l1);
    }
    return worst;
}

DiagnosticsReport run_extraction_diagnostics(const ProtocolSpec& spec,
                                             const QueryAlgorithm& simulator, int t,
                                             const ZOptions& opts) {
    ZResult zr;
    switch (spec.shape) {
        case Shape::QAM3: zr = algorithm_Z(spec, simulator, t, opts); break;
        case Shape::IP3: zr = algorithm_Z_prime(spec, simulator, t, opts); break;
        case Shape::QAM2K1: zr = algorithm_Z_k(spec, simulator, t, opts); break;
    }
    const JointDistribution& jd = zr.joint;
    int k = jd.even_rounds();

    DiagnosticsReport rep;
    rep.shape = spec.shape;
    rep.q = zr.q;
    rep.c = opts.c;
    rep.t = jd.t_eff;
    rep.monte_carlo = jd.monte_carlo;
    rep.samples = jd.samples;
    rep.q_low3 = jd.q_low3;
    rep.q_high3 = jd.q_high3;
    rep.delta_auto = !opts.delta.has_value();
    if (opts.delta) {
        rep.delta = *opts.delta;
    } else {
        double d = spec.shape == Shape::QAM2K1 ? zr.q / (2 * k) : zr.q / 2;
        rep.delta = d > 0 ? d : 0.5;
    }

    for (int r = 0; r < k; ++r) {
        rep.round_stats.push_back(min_entropy_stats(jd, opts.c, r));
        rep.round_good.push_back(good_set(jd, rep.delta, opts.c, r));
    }

    double total = jd.total_mass > 0 ? jd.total_mass : 1.0;
    if (spec.shape == Shape::QAM2K1) {
        double im = 0;
        for (const auto& [tau, m] : jd.transcript_marginal) {
            bool ok = true;
            for (int r = 0; r < k && ok; ++r)
                ok = rep.round_good[static_cast<size_t>(r)].members.count(
                         tau & width_mask(jd.prefix_width(r))) > 0;
            if (ok) im += m / total;
        }
        rep.good_intersection_mass = im;
        rep.good_mass_ok = im >= 1.0 - k * rep.delta - 1e-10;
    } else {
        rep.good_intersection_mass = rep.round_good[0].mass;
        rep.good_mass_ok = rep.round_good[0].mass_ok;
    }

    TabulatedProver mstar = build_cheating_prover(jd);
    rep.cheat_prob = cheating_probability(mstar, spec);
    rep.cheat_closed_form = cheating_probability_closed_form(mstar, spec);
    try {
        rep.optimal_cheat_value = optimal_cheat(spec, opts.enum_limit);
    } catch (const LimitError&) {
        rep.optimal_cheat_value = std::nullopt;
    }
    rep.chain = verify_inequality_chain(jd, mstar, rep.cheat_prob, rep.delta, opts.c);

    for (int r = 0; r < k; ++r) {
        double best = 0, best_low = 0;
        for (const auto& pr : jd.predictors[static_cast<size_t>(r)])
            if (pr.rate > best) {
                best = pr.rate;
                best_low = pr.low3;
            }
        rep.predictor_lower_bound.push_back(best);
        rep.predictor_violation.push_back(best_low > rep.round_stats[static_cast<size_t>(r)].bound + 1e-10);
    }
    return rep;
}

}  // namespace zklab
