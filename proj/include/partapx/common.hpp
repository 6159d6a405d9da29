#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace partapx {

using Value = std::uint64_t;
using Wide = unsigned __int128;

// Sentinel for "no cap" in windowed operations.
inline constexpr Value kUnbounded = std::numeric_limits<Value>::max();

// Raised when an input exceeds the configured resource limits (CLI exit 3).
class limit_error : public std::runtime_error {
public:
    explicit limit_error(const std::string& what) : std::runtime_error(what) {}
};

inline Value checked_add(Value a, Value b) {
    Value r = a + b;
    if (r < a) throw std::overflow_error("u64 addition overflow");
    return r;
}

inline Value checked_mul(Value a, Value b) {
    if (a != 0 && b > std::numeric_limits<Value>::max() / a)
        throw std::overflow_error("u64 multiplication overflow");
    return a * b;
}

inline Value narrow_u128(Wide x, const char* what = "value") {
    if (x > Wide(std::numeric_limits<Value>::max()))
        throw std::overflow_error(std::string("u64 overflow in ") + what);
    return Value(x);
}

inline int floor_log2(Value x) {
    return 63 - std::countl_zero(x | 1);
}

inline int ceil_log2(Value x) {
    if (x <= 1) return 0;
    return 64 - std::countl_zero(x - 1);
}

inline Value ceil_div(Value a, Value b) { return a / b + (a % b != 0); }

inline Wide ceil_div_wide(Wide a, Wide b) { return a / b + (a % b != 0); }

// FNV-1a, used for input digests in reports.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

// Deterministic generator for test/bench instance synthesis.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // uniform in [lo, hi], inclusive
    std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
        return lo + next() % (hi - lo + 1);
    }
};

}  // namespace partapx
