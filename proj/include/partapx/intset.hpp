#pragma once

// Exact integer-set primitives: construction, interval restriction, rational
// scaling, and exact sumset computation with an output cap.  Sets are sorted
// vectors of distinct u64 values; all operations are pure.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "partapx/common.hpp"

namespace partapx {

struct IntegerSet {
    std::vector<Value> v;  // strictly increasing

    IntegerSet() = default;
    explicit IntegerSet(std::vector<Value> sorted_unique) : v(std::move(sorted_unique)) {}

    bool empty() const { return v.empty(); }
    std::size_t size() const { return v.size(); }
    Value min() const { return v.front(); }
    Value max() const { return v.back(); }
    bool contains(Value x) const {
        return std::binary_search(v.begin(), v.end(), x);
    }
    Wide sum() const {
        Wide s = 0;
        for (Value x : v) s += x;
        return s;
    }
    bool operator==(const IntegerSet& o) const { return v == o.v; }
};

inline IntegerSet make_set(const std::vector<std::int64_t>& values) {
    std::vector<Value> out;
    out.reserve(values.size());
    for (std::int64_t x : values) {
        if (x < 0) throw std::invalid_argument("make_set: negative value");
        out.push_back(Value(x));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return IntegerSet(std::move(out));
}

inline IntegerSet make_set_u(std::vector<Value> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return IntegerSet(std::move(values));
}

// S[w,v] = {s in S : w <= s <= v}
inline IntegerSet restrict(const IntegerSet& s, Value w, Value v) {
    if (w > v) throw std::invalid_argument("restrict: w > v");
    auto lo = std::lower_bound(s.v.begin(), s.v.end(), w);
    auto hi = std::upper_bound(lo, s.v.end(), v);
    return IntegerSet(std::vector<Value>(lo, hi));
}

// Each element x maps to floor(x * den / num).
inline IntegerSet scale_floor(const IntegerSet& s, Value num, Value den) {
    if (num < 1 || den < 1) throw std::invalid_argument("scale_floor: num, den must be >= 1");
    std::vector<Value> out;
    out.reserve(s.size());
    for (Value x : s.v) out.push_back(narrow_u128(Wide(x) * den / num, "scale_floor"));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return IntegerSet(std::move(out));
}

namespace detail {

// NTT over Z/p with p = 15 * 2^27 + 1; supports transforms up to 2^27.
// Used only as a boolean convolution: coefficient counts never reach p,
// so a nonzero residue is exact membership.
inline constexpr std::uint64_t kNttMod = 2013265921ull;
inline constexpr std::uint64_t kNttRoot = 31ull;
inline constexpr std::size_t kNttMaxSize = std::size_t(1) << 27;

inline std::uint64_t pow_mod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1;
    b %= m;
    while (e) {
        if (e & 1) r = r * b % m;
        b = b * b % m;
        e >>= 1;
    }
    return r;
}

inline void ntt(std::vector<std::uint64_t>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        std::uint64_t w = pow_mod(kNttRoot, (kNttMod - 1) / len, kNttMod);
        if (inverse) w = pow_mod(w, kNttMod - 2, kNttMod);
        for (std::size_t i = 0; i < n; i += len) {
            std::uint64_t wn = 1;
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::uint64_t u = a[i + k];
                std::uint64_t t = a[i + k + len / 2] * wn % kNttMod;
                a[i + k] = u + t < kNttMod ? u + t : u + t - kNttMod;
                a[i + k + len / 2] = u >= t ? u - t : u + kNttMod - t;
                wn = wn * w % kNttMod;
            }
        }
    }
    if (inverse) {
        std::uint64_t inv_n = pow_mod(n, kNttMod - 2, kNttMod);
        for (auto& x : a) x = x * inv_n % kNttMod;
    }
}

}  // namespace detail

struct SumsetCounters {
    std::uint64_t sumset_calls = 0;
    std::uint64_t merge_path = 0;
    std::uint64_t bitset_path = 0;
    std::uint64_t ntt_path = 0;
    std::uint64_t max_ntt_size = 0;
    void absorb(const SumsetCounters& o) {
        sumset_calls += o.sumset_calls;
        merge_path += o.merge_path;
        bitset_path += o.bitset_path;
        ntt_path += o.ntt_path;
        max_ntt_size = std::max(max_ntt_size, o.max_ntt_size);
    }
};

namespace detail {

inline std::vector<Value> sumset_merge(const IntegerSet& a, const IntegerSet& b, Value cap) {
    std::vector<Value> out;
    out.reserve(a.size() * b.size());
    for (Value x : a.v) {
        if (x > cap) break;
        for (Value y : b.v) {
            Value s = x + y;  // no overflow: caller guarantees max+max fits
            if (s > cap) break;
            out.push_back(s);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Dense boolean convolution over the value window via word-parallel shifts.
inline std::vector<Value> sumset_bitset(const IntegerSet& a, const IntegerSet& b, Value cap) {
    const IntegerSet& big = a.size() >= b.size() ? a : b;
    const IntegerSet& small = a.size() >= b.size() ? b : a;
    const Value base = big.min() + small.min();
    const Value top = std::min(cap, big.max() + small.max());
    const std::size_t width = std::size_t(top - base) + 1;
    const std::size_t words = (width + 63) / 64;
    std::vector<std::uint64_t> occ(words, 0), acc(words, 0);
    for (Value x : big.v) {
        Value off = x - big.min();
        if (base + off > top) break;
        occ[off >> 6] |= 1ull << (off & 63);
    }
    for (Value y : small.v) {
        Value sh = y - small.min();
        if (sh >= width) break;
        const std::size_t word_sh = sh >> 6;
        const unsigned bit_sh = unsigned(sh & 63);
        if (bit_sh == 0) {
            for (std::size_t i = words; i-- > word_sh;) acc[i] |= occ[i - word_sh];
        } else {
            for (std::size_t i = words; i-- > word_sh;) {
                std::uint64_t lo = occ[i - word_sh] << bit_sh;
                std::uint64_t hi = i - word_sh > 0 ? occ[i - word_sh - 1] >> (64 - bit_sh) : 0;
                acc[i] |= lo | hi;
            }
        }
    }
    std::vector<Value> out;
    for (std::size_t i = 0; i < words; ++i) {
        std::uint64_t w = acc[i];
        while (w) {
            unsigned bit = unsigned(std::countr_zero(w));
            Value val = base + (Value(i) << 6) + bit;
            if (val <= top) out.push_back(val);
            w &= w - 1;
        }
    }
    return out;
}

inline std::vector<Value> sumset_ntt(const IntegerSet& a, const IntegerSet& b, Value cap,
                                     SumsetCounters* ctr) {
    const Value base_a = a.min(), base_b = b.min();
    const Value base = base_a + base_b;
    const Value top = std::min(cap, a.max() + b.max());
    const std::size_t width = std::size_t(top - base) + 1;
    std::size_t n = 1;
    while (n < 2 * width) n <<= 1;
    if (n > kNttMaxSize) throw limit_error("sumset: convolution window exceeds NTT capacity");
    if (ctr) {
        ctr->ntt_path++;
        ctr->max_ntt_size = std::max<std::uint64_t>(ctr->max_ntt_size, n);
    }
    std::vector<std::uint64_t> fa(n, 0), fb(n, 0);
    for (Value x : a.v)
        if (x - base_a < width) fa[std::size_t(x - base_a)] = 1;
    for (Value y : b.v)
        if (y - base_b < width) fb[std::size_t(y - base_b)] = 1;
    ntt(fa, false);
    ntt(fb, false);
    for (std::size_t i = 0; i < n; ++i) fa[i] = fa[i] * fb[i] % kNttMod;
    ntt(fa, true);
    std::vector<Value> out;
    for (std::size_t i = 0; i < width; ++i)
        if (fa[i]) out.push_back(base + i);
    return out;
}

}  // namespace detail

struct SumsetOptions {
    std::size_t merge_threshold = 4096;       // |A|*|B| at or below: sort-merge path
    std::size_t bitset_width_cap = 1u << 21;  // dense word-shift path up to this window
    std::size_t merge_pairs_cap = 1u << 26;   // hard cap for the quadratic fallback
};

// Exact (A+B)[0,cap].  Engine choice: sort-merge for small products, dense
// word-parallel shifts for narrow value windows, NTT convolution otherwise.
inline IntegerSet sumset(const IntegerSet& a, const IntegerSet& b, Value cap = kUnbounded,
                         SumsetCounters* ctr = nullptr, const SumsetOptions& opt = {}) {
    if (a.empty() || b.empty()) throw std::invalid_argument("sumset: empty operand");
    if (ctr) ctr->sumset_calls++;
    checked_add(a.max(), b.max());
    if (a.min() + b.min() > cap) return IntegerSet{};
    const std::size_t pairs = a.size() * b.size();
    if (pairs <= opt.merge_threshold) {
        if (ctr) ctr->merge_path++;
        return IntegerSet(detail::sumset_merge(a, b, cap));
    }
    const Value top = std::min(cap, a.max() + b.max());
    const Wide width = Wide(top) - (a.min() + b.min()) + 1;
    if (width <= opt.bitset_width_cap) {
        if (ctr) ctr->bitset_path++;
        return IntegerSet(detail::sumset_bitset(a, b, cap));
    }
    if (width <= detail::kNttMaxSize / 2)
        return IntegerSet(detail::sumset_ntt(a, b, cap, ctr));
    if (pairs <= opt.merge_pairs_cap) {
        if (ctr) ctr->merge_path++;
        return IntegerSet(detail::sumset_merge(a, b, cap));
    }
    throw limit_error("sumset: operands too large for every engine");
}

// Exact ((A+B) u A u B)[0,cap].
inline IntegerSet oplus(const IntegerSet& a, const IntegerSet& b, Value cap = kUnbounded,
                        SumsetCounters* ctr = nullptr, const SumsetOptions& opt = {}) {
    IntegerSet s = sumset(a, b, cap, ctr, opt);
    std::vector<Value> out;
    out.reserve(s.size() + a.size() + b.size());
    std::merge(s.v.begin(), s.v.end(), a.v.begin(), a.v.end(), std::back_inserter(out));
    std::vector<Value> out2;
    out2.reserve(out.size() + b.size());
    std::merge(out.begin(), out.end(), b.v.begin(), b.v.end(), std::back_inserter(out2));
    out2.erase(std::unique(out2.begin(), out2.end()), out2.end());
    while (!out2.empty() && out2.back() > cap) out2.pop_back();
    return IntegerSet(std::move(out2));
}

}  // namespace partapx
