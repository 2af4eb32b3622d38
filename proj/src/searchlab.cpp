#include "zklab/searchlab.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace zklab {

void SearchInstance::validate() const {
    if (n1 < 1 || n1 > 16 || n2 < 1 || n2 > 16) throw ConfigError("SearchInstance: bad widths");
    if (t < 0) throw ConfigError("SearchInstance: negative budget");
    if (beta_table.size() != (u64{1} << n1)) throw ConfigError("SearchInstance: target table size");
    for (u64 b : beta_table)
        if (b >> n2) throw ConfigError("SearchInstance: target out of range");
}

SearchInstance SearchInstance::single_target(int n1, int n2, int t, u64 beta) {
    SearchInstance s;
    s.n1 = n1;
    s.n2 = n2;
    s.t = t;
    s.beta_table.assign(u64{1} << n1, beta);
    s.validate();
    return s;
}

double classical_optimal_search(int t, int n1, int n2) {
    if (t < 0 || n1 < 1 || n2 < 1) throw DomainError("classical_optimal_search: bad parameters");
    if (static_cast<u64>(t) >= (u64{1} << n1))
        throw DomainError("classical_optimal_search: not enough distinct probe points");
    double miss = 1.0 - std::ldexp(1.0, -n2);
    return 1.0 - std::pow(miss, t + 1);
}

double classical_search_bound(int t, int n2) {
    return static_cast<double>(t + 1) * std::ldexp(1.0, -n2);
}

namespace {

// history: queried point -> observed value; target is 0 by symmetry
double adaptive_rec(int left, int n1, int n2, std::map<u64, u64>& hist) {
    u64 npoints = u64{1} << n1;
    double guess_fresh = std::ldexp(1.0, -n2);
    if (left == 0) {
        double best = 0.0;
        bool fresh_exists = hist.size() < npoints;
        for (auto& [pt, val] : hist)
            if (val == 0) best = 1.0;
        if (best < 1.0 && fresh_exists) best = guess_fresh;
        return best;
    }
    double best = 0.0;
    for (u64 q = 0; q < npoints; ++q) {
        auto it = hist.find(q);
        double val;
        if (it != hist.end()) {
            val = adaptive_rec(left - 1, n1, n2, hist);  // repeat reveals nothing new
        } else {
            val = 0.0;
            for (u64 v = 0; v < (u64{1} << n2); ++v) {
                hist.emplace(q, v);
                val += guess_fresh * adaptive_rec(left - 1, n1, n2, hist);
                hist.erase(q);
            }
        }
        best = std::max(best, val);
    }
    return best;
}

}  // namespace

double classical_adaptive_optimum(int t, int n1, int n2, u64 enum_limit) {
    if (t < 0 || n1 < 1 || n2 < 1) throw DomainError("classical_adaptive_optimum: bad parameters");
    long double branches = 1.0L;
    for (int i = 0; i < t; ++i) branches *= std::ldexp(1.0L, n1 + n2);
    if (branches > static_cast<long double>(enum_limit))
        throw LimitError("classical_adaptive_optimum: decision tree too large");
    std::map<u64, u64> hist;
    return adaptive_rec(t, n1, n2, hist);
}

FunctionOracle planted_x_oracle(int n2, u64 planted) {
    if (n2 < 1 || n2 > 16) throw ConfigError("planted_x_oracle: bad width");
    if (planted >> n2) throw DomainError("planted_x_oracle: planted location out of range");
    FunctionOracle x;
    x.n1 = n2;
    x.n2 = 1;
    x.table.assign(u64{1} << n2, 0);
    x.table[planted] = 1;
    return x;
}

QueryAlgorithm grover_circuit(int t, int n2) {
    if (t < 0) throw DomainError("grover_circuit: negative iteration count");
    if (n2 < 1 || n2 > 10) throw ConfigError("grover_circuit: width out of range");
    QueryAlgorithm alg;
    alg.num_qubits = n2 + 1;
    alg.query_budget = t;
    std::vector<int> search;
    for (int i = 0; i < n2; ++i) search.push_back(i);
    int anc = n2;
    alg.steps.push_back(Step::gate1(Step::Gate::X, anc));
    alg.steps.push_back(Step::gate1(Step::Gate::H, anc));
    for (int i = 0; i < n2; ++i) alg.steps.push_back(Step::gate1(Step::Gate::H, i));
    int dim = 1 << n2;
    CMat diffusion(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            diffusion.at(i, j) = 2.0 / dim - (i == j ? 1.0 : 0.0);
    for (int it = 0; it < t; ++it) {
        alg.steps.push_back(Step::oracle(0, search, {anc}));
        alg.steps.push_back(Step::unitary(search, diffusion));
    }
    alg.output_registers = {search};
    return alg;
}

GroverResult grover_search(int t, int n2, u64 planted) {
    GroverResult res;
    res.t = t;
    res.n2 = n2;
    QueryAlgorithm alg = grover_circuit(t, n2);
    std::vector<FunctionOracle> oracles{planted_x_oracle(n2, planted)};
    RunResult run = run_query_algorithm(alg, oracles);
    res.queries = run.queries;
    OutcomeDistribution dist = measure(run.state, alg.output_registers[0]);
    auto it = dist.entries.find(planted);
    res.simulated = it == dist.entries.end() ? 0.0 : it->second.prob;
    double theta = std::asin(std::sqrt(std::ldexp(1.0, -n2)));
    double s = std::sin((2.0 * t + 1.0) * theta);
    res.closed_form = s * s;
    res.bound = 10.0 * t * t * std::ldexp(1.0, -n2);
    return res;
}

EquivalenceResult twise_equivalence_check(const QueryAlgorithm& alg, int n1, int n2, int degree,
                                          u64 enum_limit) {
    alg.validate();
    if (alg.output_registers.empty() ||
        static_cast<int>(alg.output_registers[0].size()) != n1)
        throw ConfigError("twise_equivalence_check: output register width must be n1");
    int table_bits = n2 * (1 << n1);
    if (table_bits > 24)
        throw LimitError("twise_equivalence_check: all-functions side needs n2 * 2^{n1} <= 24");
    u64 nfun = u64{1} << table_bits;
    if (nfun > enum_limit) throw LimitError("twise_equivalence_check: function space over the limit");
    HashFamily fam(n1, n2, degree);
    fam.check_enumerable(enum_limit);

    auto joint_for = [&](const FunctionOracle& f, double weight, std::map<u64, double>& joint) {
        std::vector<FunctionOracle> oracles{f};
        RunResult run = run_query_algorithm(alg, oracles);
        OutcomeDistribution dist = measure(run.state, alg.output_registers[0]);
        for (const auto& [a, branch] : dist.entries)
            joint[(a << n2) | f.table[a]] += weight * branch.prob;
    };

    std::map<u64, double> family_joint, function_joint;
    double wf = 1.0 / static_cast<double>(fam.size());
    for (u64 i = 0; i < fam.size(); ++i) {
        HashFunction h = fam.at(i);
        FunctionOracle f;
        f.n1 = n1;
        f.n2 = n2;
        for (u64 a = 0; a < (u64{1} << n1); ++a) f.table.push_back(h.eval(a));
        joint_for(f, wf, family_joint);
    }
    double wg = 1.0 / static_cast<double>(nfun);
    u64 vmask = (u64{1} << n2) - 1;
    for (u64 code = 0; code < nfun; ++code) {
        FunctionOracle f;
        f.n1 = n1;
        f.n2 = n2;
        for (u64 a = 0; a < (u64{1} << n1); ++a) f.table.push_back((code >> (a * n2)) & vmask);
        joint_for(f, wg, function_joint);
    }

    EquivalenceResult res;
    res.family_size = fam.size();
    res.function_count = nfun;
    std::map<u64, double> keys = family_joint;
    for (auto [k, v] : function_joint) keys.emplace(k, 0.0);
    double tv = 0.0;
    for (auto& [k, unused] : keys) {
        auto a = family_joint.find(k);
        auto b = function_joint.find(k);
        tv += std::abs((a == family_joint.end() ? 0.0 : a->second) -
                       (b == function_joint.end() ? 0.0 : b->second));
    }
    res.tv_distance = 0.5 * tv;
    return res;
}

std::vector<SearchTestAlg> equivalence_suite() {
    std::vector<SearchTestAlg> suite;

    {
        // no queries: output register in uniform superposition
        SearchTestAlg s;
        s.name = "prep_only";
        s.n1 = 2;
        s.n2 = 1;
        s.t = 0;
        s.alg.num_qubits = 2;
        s.alg.query_budget = 0;
        s.alg.steps = {Step::gate1(Step::Gate::H, 0), Step::gate1(Step::Gate::H, 1)};
        s.alg.output_registers = {{0, 1}};
        suite.push_back(std::move(s));
    }
    {
        // one query at a superposed point, answer folded back into the output
        SearchTestAlg s;
        s.name = "one_query_fold";
        s.n1 = 2;
        s.n2 = 1;
        s.t = 1;
        s.alg.num_qubits = 3;
        s.alg.query_budget = 1;
        s.alg.steps = {Step::gate1(Step::Gate::H, 0), Step::gate1(Step::Gate::H, 1),
                       Step::oracle(0, {0, 1}, {2}), Step::cx(2, 0),
                       Step::gate1(Step::Gate::RY, 1, 0.7)};
        s.alg.output_registers = {{0, 1}};
        suite.push_back(std::move(s));
    }
    {
        // two queries with an intervening rotation; output depends on both answers
        SearchTestAlg s;
        s.name = "two_query_adaptive";
        s.n1 = 2;
        s.n2 = 1;
        s.t = 2;
        s.alg.num_qubits = 4;
        s.alg.query_budget = 2;
        s.alg.steps = {Step::gate1(Step::Gate::H, 0),  Step::oracle(0, {0, 1}, {2}),
                       Step::cx(2, 1),                 Step::gate1(Step::Gate::RY, 0, 1.1),
                       Step::oracle(0, {0, 1}, {3}),   Step::cx(3, 0),
                       Step::gate1(Step::Gate::Z, 1)};
        s.alg.output_registers = {{0, 1}};
        suite.push_back(std::move(s));
    }
    return suite;
}

double quantum_search_success(const QueryAlgorithm& alg, const SearchInstance& inst,
                              u64 enum_limit) {
    alg.validate();
    inst.validate();
    if (alg.output_registers.empty() ||
        static_cast<int>(alg.output_registers[0].size()) != inst.n1)
        throw ConfigError("quantum_search_success: output register width must be n1");
    int table_bits = inst.n2 * (1 << inst.n1);
    if (table_bits > 24 || (u64{1} << table_bits) > enum_limit)
        throw LimitError("quantum_search_success: function space over the limit");
    u64 nfun = u64{1} << table_bits;
    u64 vmask = (u64{1} << inst.n2) - 1;
    double total = 0.0;
    for (u64 code = 0; code < nfun; ++code) {
        FunctionOracle f;
        f.n1 = inst.n1;
        f.n2 = inst.n2;
        for (u64 a = 0; a < (u64{1} << inst.n1); ++a) f.table.push_back((code >> (a * inst.n2)) & vmask);
        std::vector<FunctionOracle> oracles{f};
        RunResult run = run_query_algorithm(alg, oracles);
        OutcomeDistribution dist = measure(run.state, alg.output_registers[0]);
        for (const auto& [a, branch] : dist.entries)
            if (f.table[a] == inst.beta_table[a]) total += branch.prob;
    }
    return total / static_cast<double>(nfun);
}

QueryAlgorithm instrument_with_x_gadget(const QueryAlgorithm& alg, const SearchInstance& inst,
                                        const std::vector<u64>& g_table,
                                        const std::vector<u64>& z_table) {
    alg.validate();
    inst.validate();
    u64 npoints = u64{1} << inst.n1;
    if (g_table.size() != npoints || z_table.size() != npoints)
        throw ConfigError("instrument_with_x_gadget: table sizes");
    for (u64 a = 0; a < npoints; ++a) {
        if (g_table[a] >> inst.n2 || z_table[a] >> inst.n2)
            throw ConfigError("instrument_with_x_gadget: table value out of range");
        if (z_table[a] == inst.beta_table[a])
            throw ConfigError("instrument_with_x_gadget: decoy must differ from the target");
    }
    QueryAlgorithm out;
    out.num_qubits = alg.num_qubits + inst.n2 + 1;
    out.query_budget = 2 * alg.query_budget;
    out.output_registers = alg.output_registers;
    out.final_register = alg.final_register;
    out.failure_wire = alg.failure_wire;
    std::vector<int> g_scratch;
    for (int i = 0; i < inst.n2; ++i) g_scratch.push_back(alg.num_qubits + i);
    int xbit = alg.num_qubits + inst.n2;

    // select table over (alpha, xbit): target when the X probe fired, decoy otherwise
    std::vector<u64> select(npoints << 1);
    for (u64 a = 0; a < npoints; ++a) {
        select[a] = z_table[a];
        select[a | npoints] = inst.beta_table[a];
    }

    for (const Step& s : alg.steps) {
        if (s.kind != Step::Kind::Oracle) {
            out.steps.push_back(s);
            continue;
        }
        if (static_cast<int>(s.wires.size()) != inst.n1 ||
            static_cast<int>(s.out_wires.size()) != inst.n2)
            throw ConfigError("instrument_with_x_gadget: oracle width mismatch");
        std::vector<int> sel_in = s.wires;
        sel_in.push_back(xbit);
        out.steps.push_back(Step::classical(s.wires, g_scratch, g_table));
        out.steps.push_back(Step::oracle(0, g_scratch, {xbit}));
        out.steps.push_back(Step::classical(sel_in, s.out_wires, select));
        out.steps.push_back(Step::oracle(0, g_scratch, {xbit}));
        out.steps.push_back(Step::classical(s.wires, g_scratch, g_table));
    }
    return out;
}

BRunResult algorithm_B(const QueryAlgorithm& alg, const SearchInstance& inst,
                       const FunctionOracle& x, RandomStream& rng) {
    x.validate();
    if (x.n1 != inst.n2 || x.n2 != 1) throw ConfigError("algorithm_B: X width mismatch");
    int ones = 0;
    for (u64 v : x.table) ones += static_cast<int>(v);
    if (ones != 1) throw DomainError("algorithm_B: X must have exactly one 1");

    u64 npoints = u64{1} << inst.n1;
    u64 nvals = u64{1} << inst.n2;
    std::vector<u64> g_table(npoints), z_table(npoints);
    for (u64 a = 0; a < npoints; ++a) {
        g_table[a] = rng.uniform(nvals);
        u64 z = rng.uniform(nvals - 1);
        z_table[a] = z >= inst.beta_table[a] ? z + 1 : z;
    }
    QueryAlgorithm inst_alg = instrument_with_x_gadget(alg, inst, g_table, z_table);
    std::vector<FunctionOracle> oracles{x};
    RunResult run = run_query_algorithm(inst_alg, oracles);
    OutcomeDistribution dist = measure(run.state, inst_alg.output_registers.at(0));
    double roll = rng.uniform01();
    double acc = 0.0;
    u64 outcome = dist.entries.rbegin()->first;
    for (const auto& [a, branch] : dist.entries) {
        acc += branch.prob;
        if (roll <= acc) {
            outcome = a;
            break;
        }
    }
    return {g_table[outcome], run.queries};
}

BExactResult algorithm_B_exact(const QueryAlgorithm& alg, const SearchInstance& inst,
                               u64 enum_limit) {
    alg.validate();
    inst.validate();
    u64 npoints = u64{1} << inst.n1;
    u64 nvals = u64{1} << inst.n2;
    long double combos = static_cast<long double>(nvals);  // X positions
    for (u64 a = 0; a < npoints; ++a) combos *= static_cast<long double>(nvals) * (nvals - 1);
    if (combos > static_cast<long double>(enum_limit))
        throw LimitError("algorithm_B_exact: joint (G, Z, X) space over the limit");

    BExactResult res;
    std::vector<u64> g_table(npoints), z_table(npoints);
    double weight = 1.0 / static_cast<double>(combos);

    // mixed-radix walk over G and Z jointly, then X positions
    std::vector<u64> digits(2 * npoints, 0);
    bool done = false;
    while (!done) {
        for (u64 a = 0; a < npoints; ++a) {
            g_table[a] = digits[2 * a];
            u64 z = digits[2 * a + 1];
            z_table[a] = z >= inst.beta_table[a] ? z + 1 : z;
        }
        QueryAlgorithm inst_alg = instrument_with_x_gadget(alg, inst, g_table, z_table);
        for (u64 xpos = 0; xpos < nvals; ++xpos) {
            std::vector<FunctionOracle> xo{planted_x_oracle(inst.n2, xpos)};
            RunResult brun = run_query_algorithm(inst_alg, xo);
            res.max_x_queries = std::max(res.max_x_queries, brun.queries);
            OutcomeDistribution bdist = measure(brun.state, inst_alg.output_registers.at(0));
            double b_succ = 0.0;
            for (const auto& [a, branch] : bdist.entries)
                if (g_table[a] == xpos) b_succ += branch.prob;

            FunctionOracle f;
            f.n1 = inst.n1;
            f.n2 = inst.n2;
            for (u64 a = 0; a < npoints; ++a)
                f.table.push_back(g_table[a] == xpos ? inst.beta_table[a] : z_table[a]);
            std::vector<FunctionOracle> fo{f};
            RunResult frun = run_query_algorithm(alg, fo);
            OutcomeDistribution fdist = measure(frun.state, alg.output_registers.at(0));
            double f_succ = 0.0;
            for (const auto& [a, branch] : fdist.entries)
                if (f.table[a] == inst.beta_table[a]) f_succ += branch.prob;

            res.success_b += weight * b_succ;
            res.success_f += weight * f_succ;
            res.max_pointwise_diff = std::max(res.max_pointwise_diff, std::abs(b_succ - f_succ));
            ++res.combos;
        }
        // advance digits: even slots radix nvals, odd slots radix nvals-1
        size_t i = 0;
        for (; i < digits.size(); ++i) {
            u64 radix = i % 2 == 0 ? nvals : nvals - 1;
            if (++digits[i] < radix) break;
            digits[i] = 0;
        }
        done = i == digits.size();
    }
    res.success_uniform_f = quantum_search_success(alg, inst, enum_limit);
    return res;
}

}  // namespace zklab
