#include "zklab/fieldhash.hpp"

#include <memory>

namespace zklab {

namespace {

constexpr std::array<u64, 17> kModuli = {
    0,        // unused
    0x3,      // x + 1
    0x7,      // x^2 + x + 1
    0xB,      // x^3 + x + 1
    0x13,     // x^4 + x + 1
    0x25,     // x^5 + x^2 + 1
    0x43,     // x^6 + x + 1
    0x83,     // x^7 + x + 1
    0x11B,    // x^8 + x^4 + x^3 + x + 1
    0x203,    // x^9 + x + 1
    0x409,    // x^10 + x^3 + 1
    0x805,    // x^11 + x^2 + 1
    0x1009,   // x^12 + x^3 + 1
    0x201B,   // x^13 + x^4 + x^3 + x + 1
    0x4021,   // x^14 + x^5 + 1
    0x8003,   // x^15 + x + 1
    0x1002B,  // x^16 + x^5 + x^3 + x + 1
};

}  // namespace

u64 irreducible_modulus(int m) {
    if (m < 1 || m > 16) throw DomainError("irreducible_modulus: need 1 <= m <= 16");
    return kModuli[static_cast<size_t>(m)];
}

u64 GF::clmul_mod(u64 a, u64 b, u64 modulus, int m) {
    u64 r = 0;
    for (int i = 0; b >> i; ++i)
        if ((b >> i) & 1) r ^= a << i;
    for (int d = 2 * m - 2; d >= m; --d)
        if ((r >> d) & 1) r ^= modulus << (d - m);
    return r;
}

GF::GF(int m) : m_(m), modulus_(irreducible_modulus(m)) {
    if (m <= 12) {
        u64 n = u64{1} << m;
        // find a generator of the multiplicative group by direct order check
        u64 g = 0;
        for (u64 cand = 2 % n == 0 ? 1 : 2; cand < n && g == 0; ++cand) {
            u64 v = 1;
            u64 ord = 0;
            do {
                v = clmul_mod(v, cand, modulus_, m);
                ++ord;
            } while (v != 1 && ord <= n);
            if (ord == n - 1) g = cand;
        }
        if (g == 0 && n == 2) g = 1;
        if (g == 0) throw DomainError("GF: no generator found");
        logt_.assign(n, 0);
        expt_.assign(2 * n, 0);
        u64 v = 1;
        for (u64 i = 0; i < n - 1; ++i) {
            expt_[i] = static_cast<std::uint32_t>(v);
            logt_[v] = static_cast<std::uint32_t>(i);
            v = clmul_mod(v, g, modulus_, m);
        }
        for (u64 i = 0; i < n - 1; ++i) expt_[n - 1 + i] = expt_[i];
        tables_ = true;
    }
}

u64 GF::mul(u64 a, u64 b) const {
    u64 n = u64{1} << m_;
    if (a >= n || b >= n) throw DomainError("GF::mul: element out of range");
    if (a == 0 || b == 0) return 0;
    if (tables_) return expt_[logt_[a] + logt_[b]];
    return clmul_mod(a, b, modulus_, m_);
}

u64 GF::pow(u64 a, u64 e) const {
    u64 r = 1;
    u64 base = a;
    while (e) {
        if (e & 1) r = mul(r, base);
        base = mul(base, base);
        e >>= 1;
    }
    return r;
}

u64 GF::inv(u64 a) const {
    if (a == 0) throw DomainError("GF::inv: zero has no inverse");
    return pow(a, order() - 1);
}

const GF& field(int m) {
    static std::array<std::unique_ptr<GF>, 17> cache;
    if (m < 1 || m > 16) throw DomainError("field: need 1 <= m <= 16");
    auto& slot = cache[static_cast<size_t>(m)];
    if (!slot) slot = std::make_unique<GF>(m);
    return *slot;
}

void HashFunction::validate() const {
    if (m < 1 || m > 16) throw ConfigError("HashFunction: need 1 <= m <= 16");
    if (n1 < 1 || n2 < 1 || n1 > m || n2 > m) throw ConfigError("HashFunction: need 1 <= n1, n2 <= m");
    if (m != std::max(n1, n2)) throw ConfigError("HashFunction: m must equal max(n1, n2)");
    if (coefficients.empty()) throw ConfigError("HashFunction: no coefficients");
    for (u64 c : coefficients)
        if (c >> m) throw ConfigError("HashFunction: coefficient out of field range");
}

u64 HashFunction::eval(u64 alpha) const {
    if (alpha >> n1) throw DomainError("HashFunction::eval: input wider than n1 bits");
    const GF& f = field(m);
    u64 acc = 0;
    for (size_t j = coefficients.size(); j-- > 0;) acc = f.mul(acc, alpha) ^ coefficients[j];
    return acc & ((u64{1} << n2) - 1);
}

HashFamily::HashFamily(int n1_, int n2_, int t_) : n1(n1_), n2(n2_), t(t_), m(std::max(n1_, n2_)) {
    if (n1 < 1 || n2 < 1) throw ConfigError("HashFamily: message widths must be positive");
    if (m > 16) throw ConfigError("HashFamily: max(n1, n2) must be <= 16");
    if (t < 1) throw ConfigError("HashFamily: need t >= 1");
}

u64 HashFamily::size() const {
    if (!size_fits()) throw LimitError("HashFamily::size: 2^(m t) does not fit in 63 bits");
    return u64{1} << (m * t);
}

HashFunction HashFamily::at(u64 index) const {
    if (!size_fits() || index >= size()) throw DomainError("HashFamily::at: index out of range");
    HashFunction h;
    h.m = m;
    h.n1 = n1;
    h.n2 = n2;
    h.coefficients.resize(static_cast<size_t>(t));
    u64 mask = (u64{1} << m) - 1;
    // index order = lexicographic order of (c_0, ..., c_{t-1})
    for (int j = 0; j < t; ++j)
        h.coefficients[static_cast<size_t>(j)] = (index >> (m * (t - 1 - j))) & mask;
    return h;
}

u64 HashFamily::index_of(const HashFunction& h) const {
    if (h.m != m || h.n1 != n1 || h.n2 != n2 || static_cast<int>(h.coefficients.size()) != t)
        throw ConfigError("HashFamily::index_of: degree mismatch with family");
    u64 idx = 0;
    for (int j = 0; j < t; ++j) idx |= h.coefficients[static_cast<size_t>(j)] << (m * (t - 1 - j));
    return idx;
}

HashFunction HashFamily::sample(RandomStream& rng) const {
    HashFunction h;
    h.m = m;
    h.n1 = n1;
    h.n2 = n2;
    h.coefficients.resize(static_cast<size_t>(t));
    for (auto& c : h.coefficients) c = rng.uniform(u64{1} << m);
    return h;
}

void HashFamily::check_enumerable(u64 limit) const {
    if (!size_fits() || size() > limit)
        throw LimitError("hash family of size 2^" + std::to_string(m * t) +
                         " exceeds enumeration limit " + std::to_string(limit));
}

namespace {

// Per-function value tables keep audit cost at |family| * 2^n1 evaluations.
std::vector<std::vector<u64>> family_tables(const HashFamily& fam, u64 enum_limit, u64 eval_budget,
                                            u64* evals) {
    fam.check_enumerable(enum_limit);
    u64 fs = fam.size();
    u64 points = u64{1} << fam.n1;
    if (fs * points > eval_budget)
        throw LimitError("hash audit would need " + std::to_string(fs * points) +
                         " evaluations, over the budget of " + std::to_string(eval_budget));
    std::vector<std::vector<u64>> tabs(fs);
    for (u64 i = 0; i < fs; ++i) {
        HashFunction h = fam.at(i);
        tabs[i].resize(points);
        for (u64 a = 0; a < points; ++a) tabs[i][a] = h.eval(a);
    }
    *evals += fs * points;
    return tabs;
}

}  // namespace

UniformityAuditResult point_uniformity_audit(const HashFamily& fam, u64 enum_limit,
                                             u64 eval_budget) {
    UniformityAuditResult res;
    auto tabs = family_tables(fam, enum_limit, eval_budget, &res.evaluations);
    u64 points = u64{1} << fam.n1;
    u64 buckets = u64{1} << fam.n2;
    u64 expect = fam.size() / buckets;
    for (u64 a = 0; a < points; ++a) {
        std::vector<u64> count(buckets, 0);
        for (const auto& tab : tabs) ++count[tab[a]];
        for (u64 c : count) {
            u64 dev = c > expect ? c - expect : expect - c;
            res.max_count_deviation = std::max(res.max_count_deviation, dev);
        }
        ++res.points_checked;
    }
    return res;
}

TupleAuditResult t_universality_audit(const HashFamily& fam, int tuple_len, u64 enum_limit,
                                      u64 eval_budget) {
    if (tuple_len < 1) throw ConfigError("t_universality_audit: tuple_len must be positive");
    if (tuple_len != fam.t)
        throw ConfigError("t_universality_audit: tuple length degree mismatch with family");
    u64 points = u64{1} << fam.n1;
    if (static_cast<u64>(tuple_len) > points)
        throw ConfigError("t_universality_audit: tuple longer than the input space");
    if (static_cast<u64>(fam.n2) * tuple_len > 30)
        throw LimitError("t_universality_audit: joint output space too large");

    TupleAuditResult res;
    auto tabs = family_tables(fam, enum_limit, eval_budget, &res.evaluations);
    u64 joint = u64{1} << (fam.n2 * tuple_len);
    u64 expect = fam.size() / joint;

    std::vector<u64> tuple(static_cast<size_t>(tuple_len), 0);
    std::vector<u64> count(joint);
    auto count_tuple = [&]() {
        std::fill(count.begin(), count.end(), 0);
        for (const auto& tab : tabs) {
            u64 out = 0;
            for (int j = 0; j < tuple_len; ++j)
                out |= tab[tuple[static_cast<size_t>(j)]] << (fam.n2 * j);
            ++count[out];
        }
        for (u64 c : count) {
            u64 dev = c > expect ? c - expect : expect - c;
            res.max_count_deviation = std::max(res.max_count_deviation, dev);
        }
        ++res.tuples_checked;
    };
    // ordered tuples of distinct input points
    auto rec = [&](auto&& self, int k) -> void {
        if (k == tuple_len) {
            count_tuple();
            return;
        }
        for (u64 a = 0; a < points; ++a) {
            bool dup = false;
            for (int i = 0; i < k; ++i)
                if (tuple[static_cast<size_t>(i)] == a) dup = true;
            if (dup) continue;
            tuple[static_cast<size_t>(k)] = a;
            self(self, k + 1);
        }
    };
    rec(rec, 0);
    return res;
}

}  // namespace zklab
