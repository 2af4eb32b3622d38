#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace zklab {

using cplx = std::complex<double>;
using u64 = std::uint64_t;

// Bad parameters or malformed input files. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Values outside the declared domain of an operation. Exit code 2.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Enumeration larger than the configured limit. Exit code 3.
struct LimitError : std::runtime_error {
    explicit LimitError(const std::string& msg) : std::runtime_error(msg) {}
};

// A circuit tried to make more oracle queries than its declared budget. Exit code 3.
struct BudgetError : LimitError {
    explicit BudgetError(const std::string& msg) : LimitError(msg) {}
};

inline constexpr u64 kDefaultEnumLimit = u64{1} << 20;
inline constexpr int kDefaultQubitCap = 20;

// FNV-1a, used for run digests and for deriving per-task RNG seeds.
inline u64 fnv1a64(std::span<const unsigned char> data, u64 h = 1469598103934665603ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline u64 fnv1a64_str(std::string_view s, u64 h = 1469598103934665603ULL) {
    return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()}, h);
}

// One seeded generator per run; sub-tasks fork their own stream by label so
// that adding or reordering one experiment does not shift the draws of another.
class RandomStream {
  public:
    explicit RandomStream(u64 seed) : base_seed_(seed), eng_(seed) {}

    RandomStream fork(std::string_view label) const {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(base_seed_ >> (8 * i));
        u64 h = fnv1a64({buf, 8});
        h = fnv1a64_str(label, h);
        return RandomStream(h);
    }

    u64 seed() const { return base_seed_; }

    // uniform integer in [0, n)
    u64 uniform(u64 n) {
        if (n == 0) throw DomainError("uniform: n must be positive");
        std::uniform_int_distribution<u64> d(0, n - 1);
        return d(eng_);
    }

    double uniform01() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        return d(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    u64 base_seed_;
    std::mt19937_64 eng_;
};

// Gather the bits of idx at positions wires[0], wires[1], ... into a compact
// value whose bit j comes from wire j. scatter_bits is the inverse embedding.
inline u64 gather_bits(u64 idx, std::span<const int> wires) {
    u64 v = 0;
    for (size_t j = 0; j < wires.size(); ++j)
        v |= ((idx >> wires[j]) & 1u) << j;
    return v;
}

inline u64 scatter_bits(u64 v, std::span<const int> wires) {
    u64 idx = 0;
    for (size_t j = 0; j < wires.size(); ++j)
        idx |= ((v >> j) & 1u) << wires[j];
    return idx;
}

inline u64 mask_of(std::span<const int> wires) {
    u64 m = 0;
    for (int w : wires) m |= u64{1} << w;
    return m;
}

}  // namespace zklab
