#pragma once

#include <array>
#include <vector>

#include "zklab/common.hpp"

namespace zklab {

// Modulus used for GF(2^m): the least-weight, then lexicographically least,
// monic irreducible polynomial of degree m with nonzero constant term.
u64 irreducible_modulus(int m);

// Arithmetic context for GF(2^m), 1 <= m <= 16. Elements are the integers
// below 2^m read as polynomial bit vectors. Log/antilog tables back the
// multiply for m <= 12; above that a shift-and-xor product is used directly.
class GF {
  public:
    explicit GF(int m);

    int m() const { return m_; }
    u64 modulus() const { return modulus_; }
    u64 order() const { return (u64{1} << m_) - 1; }

    u64 add(u64 a, u64 b) const { return a ^ b; }
    u64 mul(u64 a, u64 b) const;
    u64 pow(u64 a, u64 e) const;
    u64 inv(u64 a) const;

    // product in GF(2)[x] followed by reduction, no table use
    static u64 clmul_mod(u64 a, u64 b, u64 modulus, int m);

  private:
    int m_;
    u64 modulus_;
    bool tables_ = false;
    std::vector<std::uint32_t> logt_, expt_;
};

// Shared per-degree contexts (constructed on first use; single threaded).
const GF& field(int m);

// Polynomial hash h(a) = low n2 bits of sum c_j a^j over GF(2^m).
// The input is zero-padded from n1 bits into the field.
struct HashFunction {
    int m = 1;
    int n1 = 1;
    int n2 = 1;
    std::vector<u64> coefficients;  // c_0 .. c_{t-1}

    u64 eval(u64 alpha) const;
    void validate() const;
};

// The family of all degree < t polynomial hashes from n1 bits to n2 bits
// over GF(2^m) with m = max(n1, n2). Functions are indexed so that index
// order is lexicographic order of the coefficient tuple (c_0, ..., c_{t-1}).
struct HashFamily {
    int n1, n2, t, m;

    HashFamily(int n1_, int n2_, int t_);

    bool size_fits() const { return m * t < 63; }
    u64 size() const;
    HashFunction at(u64 index) const;
    u64 index_of(const HashFunction& h) const;
    HashFunction sample(RandomStream& rng) const;

    // throws LimitError when the family cannot be walked within `limit`
    void check_enumerable(u64 limit) const;
};

struct UniformityAuditResult {
    u64 points_checked = 0;
    u64 max_count_deviation = 0;  // vs the exact uniform count, should be 0
    u64 evaluations = 0;
    bool pass() const { return max_count_deviation == 0; }
};

struct TupleAuditResult {
    u64 tuples_checked = 0;
    u64 max_count_deviation = 0;
    u64 evaluations = 0;
    bool pass() const { return max_count_deviation == 0; }
};

// Exhaustive count of h(a) over the whole family, per input point.
UniformityAuditResult point_uniformity_audit(const HashFamily& fam, u64 enum_limit,
                                             u64 eval_budget = 10'000'000);

// Exhaustive joint-output count over every ordered tuple of `tuple_len`
// distinct inputs. Uniform joint counts across the family at every tuple is
// the defining property being audited.
TupleAuditResult t_universality_audit(const HashFamily& fam, int tuple_len, u64 enum_limit,
                                      u64 eval_budget = 10'000'000);

}  // namespace zklab
