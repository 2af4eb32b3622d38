#include "zklab/qcore.hpp"

#include <algorithm>
#include <cmath>

namespace zklab {

namespace {

constexpr double kAmpCutoff = 1e-15;

void sort_amps(std::vector<std::pair<u64, cplx>>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

void check_wires(std::span<const int> wires, int num_qubits, const char* what) {
    u64 seen = 0;
    for (int w : wires) {
        if (w < 0 || w >= num_qubits) throw ConfigError(std::string(what) + ": wire out of range");
        if ((seen >> w) & 1) throw ConfigError(std::string(what) + ": duplicate wire");
        seen |= u64{1} << w;
    }
}

void check_disjoint(std::span<const int> a, std::span<const int> b, const char* what) {
    u64 ma = mask_of(a);
    if (ma & mask_of(b)) throw ConfigError(std::string(what) + ": operand registers overlap");
}

}  // namespace

StateVector StateVector::basis(int num_qubits, u64 idx) {
    if (num_qubits < 0 || (num_qubits < 64 && (idx >> num_qubits)))
        throw DomainError("StateVector::basis: index out of range");
    StateVector st;
    st.num_qubits = num_qubits;
    st.amps.emplace_back(idx, cplx{1.0, 0.0});
    return st;
}

double StateVector::norm2() const {
    double n = 0;
    for (const auto& [i, a] : amps) n += std::norm(a);
    return n;
}

std::vector<cplx> StateVector::dense() const {
    if (num_qubits > 24) throw LimitError("StateVector::dense: state too wide");
    std::vector<cplx> v(u64{1} << num_qubits);
    for (const auto& [i, a] : amps) v[i] = a;
    return v;
}

void StateVector::check_norm(double tol) const {
    if (std::abs(norm2() - 1.0) > tol) throw DomainError("StateVector: not normalized");
}

void FunctionOracle::validate() const {
    if (n1 < 1 || n2 < 1) throw ConfigError("FunctionOracle: widths must be positive");
    if (table.size() != (u64{1} << n1)) throw ConfigError("FunctionOracle: table size mismatch");
    for (u64 v : table)
        if (v >> n2) throw ConfigError("FunctionOracle: value wider than n2 bits");
}

Step Step::gate1(Gate g, int wire, double theta) {
    Step s;
    s.kind = Kind::Gate1;
    s.gate = g;
    s.theta = theta;
    s.wires = {wire};
    return s;
}

Step Step::cx(int control, int target) {
    Step s;
    s.kind = Kind::CX;
    s.wires = {control, target};
    return s;
}

Step Step::unitary(std::vector<int> wires, CMat u) {
    Step s;
    s.kind = Kind::Unitary;
    s.wires = std::move(wires);
    s.matrix = std::move(u);
    return s;
}

Step Step::classical(std::vector<int> in, std::vector<int> out, std::vector<u64> tab) {
    Step s;
    s.kind = Kind::Table;
    s.wires = std::move(in);
    s.out_wires = std::move(out);
    s.table = std::move(tab);
    return s;
}

Step Step::permute(std::vector<int> wires, std::vector<u64> perm) {
    Step s;
    s.kind = Kind::Permute;
    s.wires = std::move(wires);
    s.table = std::move(perm);
    return s;
}

Step Step::prepare_uniform(std::vector<int> wires, u64 count) {
    Step s;
    s.kind = Kind::Prepare;
    s.wires = std::move(wires);
    s.prepare_count = count;
    return s;
}

Step Step::oracle(int oracle_id, std::vector<int> in, std::vector<int> out) {
    Step s;
    s.kind = Kind::Oracle;
    s.oracle_id = oracle_id;
    s.wires = std::move(in);
    s.out_wires = std::move(out);
    return s;
}

namespace {

void validate_step(const Step& s, int num_qubits) {
    switch (s.kind) {
        case Step::Kind::Gate1:
            if (s.wires.size() != 1) throw ConfigError("gate: need exactly one wire");
            check_wires(s.wires, num_qubits, "gate");
            break;
        case Step::Kind::CX:
            if (s.wires.size() != 2) throw ConfigError("cx: need control and target");
            check_wires(s.wires, num_qubits, "cx");
            break;
        case Step::Kind::Unitary: {
            check_wires(s.wires, num_qubits, "unitary");
            int dim = 1 << s.wires.size();
            if (s.matrix.rows != dim || s.matrix.cols != dim)
                throw ConfigError("unitary: matrix shape does not match wires");
            if (s.wires.size() > 12) throw LimitError("unitary: more than 12 wires");
            if (!mat_is_unitary(s.matrix, 1e-10)) throw ConfigError("unitary: matrix not unitary");
            break;
        }
        case Step::Kind::Table: {
            check_wires(s.wires, num_qubits, "table");
            check_wires(s.out_wires, num_qubits, "table");
            check_disjoint(s.wires, s.out_wires, "table");
            if (s.table.size() != (u64{1} << s.wires.size()))
                throw ConfigError("table: size mismatch with input wires");
            for (u64 v : s.table)
                if (v >> s.out_wires.size()) throw ConfigError("table: value too wide");
            break;
        }
        case Step::Kind::Permute: {
            check_wires(s.wires, num_qubits, "permute");
            u64 n = u64{1} << s.wires.size();
            if (s.table.size() != n) throw ConfigError("permute: size mismatch");
            std::vector<bool> seen(n, false);
            for (u64 v : s.table) {
                if (v >= n || seen[v]) throw ConfigError("permute: table is not a bijection");
                seen[v] = true;
            }
            break;
        }
        case Step::Kind::Prepare: {
            check_wires(s.wires, num_qubits, "prepare");
            if (s.wires.size() > 12) throw LimitError("prepare: more than 12 wires");
            u64 n = u64{1} << s.wires.size();
            if (s.prepare_count < 1 || s.prepare_count > n)
                throw ConfigError("prepare: count out of range");
            break;
        }
        case Step::Kind::Oracle:
            check_wires(s.wires, num_qubits, "oracle");
            check_wires(s.out_wires, num_qubits, "oracle");
            check_disjoint(s.wires, s.out_wires, "oracle");
            if (s.oracle_id < 0) throw ConfigError("oracle: bad oracle id");
            break;
    }
}

void apply_dense(StateVector& st, std::span<const int> wires, const CMat& u) {
    // group support by the untouched wires, multiply each block
    u64 wmask = mask_of(wires);
    std::vector<std::pair<u64, cplx>> out;
    std::vector<std::pair<u64, size_t>> keyed(st.amps.size());
    for (size_t i = 0; i < st.amps.size(); ++i) keyed[i] = {st.amps[i].first & ~wmask, i};
    std::sort(keyed.begin(), keyed.end());
    u64 dim = u64{1} << wires.size();
    std::vector<cplx> vin(dim), vout(dim);
    size_t i = 0;
    while (i < keyed.size()) {
        size_t j = i;
        u64 rest = keyed[i].first;
        std::fill(vin.begin(), vin.end(), cplx{});
        while (j < keyed.size() && keyed[j].first == rest) {
            const auto& [idx, amp] = st.amps[keyed[j].second];
            vin[gather_bits(idx, wires)] = amp;
            ++j;
        }
        for (u64 r = 0; r < dim; ++r) {
            cplx acc{};
            for (u64 c = 0; c < dim; ++c) acc += u.at(static_cast<int>(r), static_cast<int>(c)) * vin[c];
            vout[r] = acc;
        }
        for (u64 r = 0; r < dim; ++r)
            if (std::abs(vout[r]) > kAmpCutoff) out.emplace_back(rest | scatter_bits(r, wires), vout[r]);
        i = j;
    }
    sort_amps(out);
    st.amps = std::move(out);
}

CMat gate1_matrix(Step::Gate g, double theta) {
    CMat m(2, 2);
    switch (g) {
        case Step::Gate::H:
            m.at(0, 0) = m.at(0, 1) = m.at(1, 0) = M_SQRT1_2;
            m.at(1, 1) = -M_SQRT1_2;
            break;
        case Step::Gate::X:
            m.at(0, 1) = m.at(1, 0) = 1.0;
            break;
        case Step::Gate::Z:
            m.at(0, 0) = 1.0;
            m.at(1, 1) = -1.0;
            break;
        case Step::Gate::RY:
            m.at(0, 0) = std::cos(theta / 2);
            m.at(0, 1) = -std::sin(theta / 2);
            m.at(1, 0) = std::sin(theta / 2);
            m.at(1, 1) = std::cos(theta / 2);
            break;
    }
    return m;
}

CMat prepare_matrix(u64 dim, u64 count) {
    // Householder reflection sending |0> to the uniform superposition over
    // the first `count` basis states
    std::vector<double> v(dim, 0.0);
    double amp = 1.0 / std::sqrt(static_cast<double>(count));
    for (u64 i = 0; i < count; ++i) v[i] = amp;
    std::vector<double> w(dim);
    for (u64 i = 0; i < dim; ++i) w[i] = v[i] - (i == 0 ? 1.0 : 0.0);
    double wn = 0;
    for (double x : w) wn += x * x;
    CMat u = CMat::identity(static_cast<int>(dim));
    if (wn < 1e-30) return u;  // count == 1
    for (u64 i = 0; i < dim; ++i)
        for (u64 j = 0; j < dim; ++j)
            u.at(static_cast<int>(i), static_cast<int>(j)) -= 2.0 * w[i] * w[j] / wn;
    return u;
}

void apply_xor_table(StateVector& st, std::span<const int> in_wires,
                     std::span<const int> out_wires, std::span<const u64> table) {
    for (auto& [idx, amp] : st.amps) {
        u64 x = gather_bits(idx, in_wires);
        idx ^= scatter_bits(table[x], out_wires);
    }
    sort_amps(st.amps);
}

}  // namespace

void apply_oracle(StateVector& st, const FunctionOracle& f, std::span<const int> in_wires,
                  std::span<const int> out_wires) {
    f.validate();
    if (static_cast<int>(in_wires.size()) != f.n1 || static_cast<int>(out_wires.size()) != f.n2)
        throw ConfigError("apply_oracle: register widths do not match the oracle");
    check_wires(in_wires, st.num_qubits, "oracle");
    check_wires(out_wires, st.num_qubits, "oracle");
    check_disjoint(in_wires, out_wires, "oracle");
    apply_xor_table(st, in_wires, out_wires, f.table);
}

void apply_step(StateVector& st, const Step& s, std::span<const FunctionOracle> oracles,
                int* query_count, int query_budget) {
    validate_step(s, st.num_qubits);
    switch (s.kind) {
        case Step::Kind::Gate1:
            apply_dense(st, s.wires, gate1_matrix(s.gate, s.theta));
            break;
        case Step::Kind::CX: {
            u64 cmask = u64{1} << s.wires[0];
            u64 tmask = u64{1} << s.wires[1];
            for (auto& [idx, amp] : st.amps)
                if (idx & cmask) idx ^= tmask;
            sort_amps(st.amps);
            break;
        }
        case Step::Kind::Unitary:
            apply_dense(st, s.wires, s.matrix);
            break;
        case Step::Kind::Table:
            apply_xor_table(st, s.wires, s.out_wires, s.table);
            break;
        case Step::Kind::Permute: {
            u64 wmask = mask_of(s.wires);
            for (auto& [idx, amp] : st.amps) {
                u64 x = gather_bits(idx, s.wires);
                idx = (idx & ~wmask) | scatter_bits(s.table[x], s.wires);
            }
            sort_amps(st.amps);
            break;
        }
        case Step::Kind::Prepare:
            apply_dense(st, s.wires, prepare_matrix(u64{1} << s.wires.size(), s.prepare_count));
            break;
        case Step::Kind::Oracle: {
            if (s.oracle_id >= static_cast<int>(oracles.size()))
                throw ConfigError("oracle step: no oracle bound to this slot");
            if (*query_count + 1 > query_budget)
                throw BudgetError("query budget of " + std::to_string(query_budget) + " exceeded");
            ++*query_count;
            apply_oracle(st, oracles[static_cast<size_t>(s.oracle_id)], s.wires, s.out_wires);
            break;
        }
    }
}

void QueryAlgorithm::validate(int qubit_cap) const {
    if (num_qubits < 1) throw ConfigError("QueryAlgorithm: no qubits");
    if (num_qubits > qubit_cap)
        throw LimitError("QueryAlgorithm: " + std::to_string(num_qubits) +
                         " qubits over the cap of " + std::to_string(qubit_cap));
    if (query_budget < 0) throw ConfigError("QueryAlgorithm: negative query budget");
    for (const Step& s : steps) validate_step(s, num_qubits);
    u64 used = 0;
    for (const auto& reg : output_registers) {
        check_wires(reg, num_qubits, "output register");
        if (used & mask_of(reg)) throw ConfigError("output registers overlap");
        used |= mask_of(reg);
    }
    check_wires(final_register, num_qubits, "final register");
    if (used & mask_of(final_register)) throw ConfigError("final register overlaps another output");
    used |= mask_of(final_register);
    if (failure_wire) {
        int w = *failure_wire;
        if (w < 0 || w >= num_qubits) throw ConfigError("failure wire out of range");
        if ((used >> w) & 1) throw ConfigError("failure wire overlaps an output register");
    }
}

RunResult run_query_algorithm(const QueryAlgorithm& alg, std::span<const FunctionOracle> oracles,
                              int qubit_cap) {
    alg.validate(qubit_cap);
    RunResult r;
    r.state = StateVector::basis(alg.num_qubits, 0);
    for (const Step& s : alg.steps)
        apply_step(r.state, s, oracles, &r.queries, alg.query_budget);
    return r;
}

double OutcomeDistribution::total() const {
    double t = 0;
    for (const auto& [o, b] : entries) t += b.prob;
    return t;
}

OutcomeDistribution measure(const StateVector& st, std::span<const int> wires) {
    check_wires(wires, st.num_qubits, "measure");
    OutcomeDistribution dist;
    for (const auto& [idx, amp] : st.amps) {
        u64 o = gather_bits(idx, wires);
        auto& br = dist.entries[o];
        br.prob += std::norm(amp);
        br.residual.num_qubits = st.num_qubits;
        br.residual.amps.emplace_back(idx, amp);
    }
    for (auto& [o, br] : dist.entries) {
        double s = 1.0 / std::sqrt(br.prob);
        for (auto& [idx, amp] : br.residual.amps) amp *= s;
    }
    return dist;
}

DensityMatrix DensityMatrix::from_state(const StateVector& st) {
    std::vector<int> all(static_cast<size_t>(st.num_qubits));
    for (int i = 0; i < st.num_qubits; ++i) all[static_cast<size_t>(i)] = i;
    return reduce_to_density(st, all);
}

DensityMatrix DensityMatrix::basis(int num_qubits, u64 idx) {
    return from_state(StateVector::basis(num_qubits, idx));
}

double DensityMatrix::trace_real() const { return mat_trace(mat).real(); }

void DensityMatrix::validate(double expected_trace, double trace_tol) const {
    if (mat.rows != mat.cols || mat.rows != (1 << num_qubits))
        throw ConfigError("DensityMatrix: shape mismatch");
    if (!mat_is_hermitian(mat, 1e-10)) throw DomainError("DensityMatrix: not hermitian");
    if (std::abs(trace_real() - expected_trace) > trace_tol)
        throw DomainError("DensityMatrix: trace off");
    if (min_eigenvalue(mat) < -1e-8) throw DomainError("DensityMatrix: negative eigenvalue");
}

DensityMatrix reduce_to_density(const StateVector& st, std::span<const int> keep_wires) {
    check_wires(keep_wires, st.num_qubits, "reduce");
    if (keep_wires.size() > 12) throw LimitError("reduce: kept register too wide");
    u64 kmask = mask_of(keep_wires);
    DensityMatrix rho;
    rho.num_qubits = static_cast<int>(keep_wires.size());
    rho.mat = CMat(1 << keep_wires.size(), 1 << keep_wires.size());
    std::vector<std::pair<u64, size_t>> keyed(st.amps.size());
    for (size_t i = 0; i < st.amps.size(); ++i) keyed[i] = {st.amps[i].first & ~kmask, i};
    std::sort(keyed.begin(), keyed.end());
    size_t i = 0;
    while (i < keyed.size()) {
        size_t j = i;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
        for (size_t p = i; p < j; ++p)
            for (size_t q = i; q < j; ++q) {
                const auto& [ip, ap] = st.amps[keyed[p].second];
                const auto& [iq, aq] = st.amps[keyed[q].second];
                rho.mat.at(static_cast<int>(gather_bits(ip, keep_wires)),
                           static_cast<int>(gather_bits(iq, keep_wires))) += ap * std::conj(aq);
            }
        i = j;
    }
    return rho;
}

DensityMatrix dephase(const DensityMatrix& rho, std::span<const int> wires) {
    u64 wmask = mask_of(wires);
    DensityMatrix out = rho;
    for (int i = 0; i < out.mat.rows; ++i)
        for (int j = 0; j < out.mat.cols; ++j)
            if ((static_cast<u64>(i) & wmask) != (static_cast<u64>(j) & wmask))
                out.mat.at(i, j) = 0;
    return out;
}

QuantumPredicate QuantumPredicate::diagonal(const std::vector<double>& d) {
    QuantumPredicate p;
    p.e = CMat(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) p.e.at(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return p;
}

void QuantumPredicate::validate() const {
    if (e.rows != e.cols) throw ConfigError("QuantumPredicate: not square");
    if (!mat_is_hermitian(e, 1e-10)) throw DomainError("QuantumPredicate: not hermitian");
    auto ev = hermitian_eigenvalues(e);
    if (ev.front() < -1e-8 || ev.back() > 1.0 + 1e-8)
        throw DomainError("QuantumPredicate: eigenvalue outside [0, 1]");
}

double predicate_accept(const QuantumPredicate& e, const DensityMatrix& rho) {
    if (e.e.rows != rho.mat.rows) throw ConfigError("predicate_accept: dimension mismatch");
    double p = mat_trace(mat_mul(e.e, rho.mat)).real();
    if (p < -1e-8 || p > 1.0 + 1e-8) throw DomainError("predicate_accept: probability out of range");
    return std::clamp(p, 0.0, 1.0);
}

DensityMatrix mix(const std::vector<std::pair<double, DensityMatrix>>& branches, bool renormalize) {
    if (branches.empty()) throw ConfigError("mix: nothing to mix");
    double total = 0;
    DensityMatrix out;
    out.num_qubits = branches.front().second.num_qubits;
    out.mat = CMat(branches.front().second.mat.rows, branches.front().second.mat.cols);
    for (const auto& [w, rho] : branches) {
        if (w < -1e-12) throw DomainError("mix: negative weight");
        if (rho.mat.rows != out.mat.rows) throw ConfigError("mix: dimension mismatch");
        total += w;
        for (size_t i = 0; i < out.mat.a.size(); ++i) out.mat.a[i] += w * rho.mat.a[i];
    }
    if (renormalize) {
        if (total <= 0) throw DomainError("mix: total weight not positive");
        for (auto& v : out.mat.a) v /= total;
    }
    return out;
}

}  // namespace zklab
