#pragma once

// Ground-truth computations and approximation checkers: bit-parallel subset-sum
// DP, exhaustive enumeration for small n, exact Partition optimum with witness,
// and literal two-clause checkers for factor / additive approximation.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "partapx/common.hpp"
#include "partapx/intset.hpp"

namespace partapx {

struct OracleLimits {
    // DP table cap in bits; spec pins test use to caps <= 1e7.
    std::uint64_t max_cells = std::uint64_t(1) << 31;
};

namespace detail {

inline std::vector<std::uint64_t> subset_sum_words(const std::vector<Value>& items,
                                                   std::uint64_t cells) {
    const std::size_t words = std::size_t((cells + 63) / 64);
    std::vector<std::uint64_t> dp(words, 0);
    dp[0] = 1;
    for (Value x : items) {
        if (x >= cells) continue;
        const std::size_t word_sh = std::size_t(x >> 6);
        const unsigned bit_sh = unsigned(x & 63);
        if (bit_sh == 0) {
            for (std::size_t i = words; i-- > word_sh;) dp[i] |= dp[i - word_sh];
        } else {
            for (std::size_t i = words; i-- > word_sh;) {
                std::uint64_t lo = dp[i - word_sh] << bit_sh;
                std::uint64_t hi = i - word_sh > 0 ? dp[i - word_sh - 1] >> (64 - bit_sh) : 0;
                dp[i] |= lo | hi;
            }
        }
    }
    return dp;
}

}  // namespace detail

// Exact S_X ∩ [0, cap] via shift-or DP.
inline IntegerSet exact_subset_sums(const std::vector<Value>& items, Value cap = kUnbounded,
                                    const OracleLimits& lim = {}) {
    Wide total = 0;
    for (Value x : items) total += x;
    Wide cells_w = (total < Wide(cap) ? total : Wide(cap)) + 1;
    if (cells_w > lim.max_cells)
        throw limit_error("exact_subset_sums: cap exceeds configured memory budget");
    const std::uint64_t cells = std::uint64_t(cells_w);
    auto dp = detail::subset_sum_words(items, cells);
    std::vector<Value> out;
    for (std::size_t i = 0; i < dp.size(); ++i) {
        std::uint64_t w = dp[i];
        while (w) {
            unsigned bit = unsigned(std::countr_zero(w));
            Value val = (Value(i) << 6) + bit;
            if (val < cells) out.push_back(val);
            w &= w - 1;
        }
    }
    return IntegerSet(std::move(out));
}

struct PartitionOpt {
    Value value = 0;
    std::vector<std::size_t> witness;
};

// Exhaustive optimum for n <= 24; validates the DP path in tests.
inline PartitionOpt exact_partition_opt_exhaustive(const std::vector<Value>& items) {
    if (items.size() > 24) throw limit_error("exhaustive oracle limited to n <= 24");
    PartitionOpt best;
    Wide total = 0;
    for (Value x : items) total += x;
    const Wide half = total / 2;
    const std::size_t n = items.size();
    std::uint32_t best_mask = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        Wide s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) s += items[i];
        if (s <= half && s > best.value) {
            best.value = Value(s);
            best_mask = mask;
            if (Wide(best.value) == half) break;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (best_mask & (1u << i)) best.witness.push_back(i);
    return best;
}

// Exact Partition optimum: max subset sum <= floor(sum/2), with witness.
// Checkpointed bitset DP; exhaustive fallback when the table would not fit.
inline PartitionOpt exact_partition_opt(const std::vector<Value>& items,
                                        const OracleLimits& lim = {}) {
    PartitionOpt best;
    if (items.empty()) return best;
    Wide total = 0;
    for (Value x : items) total += x;
    const Wide half = total / 2;
    const Wide cells_w = half + 1;
    if (cells_w > lim.max_cells) {
        if (items.size() <= 24) return exact_partition_opt_exhaustive(items);
        throw limit_error("exact_partition_opt: instance too large for exact mode");
    }
    const std::uint64_t cells = std::uint64_t(cells_w);
    const std::size_t words = std::size_t((cells + 63) / 64);

    // Checkpoint every stride items; re-derive inside a stride when backtracking.
    const std::size_t stride = 32;
    std::vector<std::vector<std::uint64_t>> checkpoints;
    std::vector<std::uint64_t> dp(words, 0);
    dp[0] = 1;
    auto apply = [&](std::vector<std::uint64_t>& t, Value x) {
        if (x >= cells) return;
        const std::size_t word_sh = std::size_t(x >> 6);
        const unsigned bit_sh = unsigned(x & 63);
        if (bit_sh == 0) {
            for (std::size_t i = words; i-- > word_sh;) t[i] |= t[i - word_sh];
        } else {
            for (std::size_t i = words; i-- > word_sh;) {
                std::uint64_t lo = t[i - word_sh] << bit_sh;
                std::uint64_t hi = i - word_sh > 0 ? t[i - word_sh - 1] >> (64 - bit_sh) : 0;
                t[i] |= lo | hi;
            }
        }
    };
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (k % stride == 0) checkpoints.push_back(dp);
        apply(dp, items[k]);
    }
    auto test = [&](const std::vector<std::uint64_t>& t, std::uint64_t s) {
        return (t[std::size_t(s >> 6)] >> (s & 63)) & 1;
    };
    std::uint64_t target = cells - 1;
    while (!test(dp, target)) --target;
    best.value = target;

    // Backtrack: item j is forced into the witness exactly when the prefix
    // table without it cannot reach the remaining sum.
    std::uint64_t remaining = target;
    for (std::size_t j = items.size(); j-- > 0 && remaining > 0;) {
        const std::size_t cp = j / stride;
        std::vector<std::uint64_t> t = checkpoints[cp];
        for (std::size_t i = cp * stride; i < j; ++i) apply(t, items[i]);
        if (!test(t, remaining)) {
            best.witness.push_back(j);
            remaining -= items[j];
        }
    }
    std::sort(best.witness.begin(), best.witness.end());
    return best;
}

// --- approximation checkers ---------------------------------------------

struct ApproxSpec {
    enum class Mode { kFactor, kAdditive } mode = Mode::kAdditive;
    // factor mode keeps (keep_num/keep_den) = 1 - mu; requires mu <= 1/2 checks upstream
    Value keep_num = 1, keep_den = 1;
    Value delta = 0;
    Value w = 0, v = kUnbounded;

    static ApproxSpec factor(Value keep_num, Value keep_den, Value w = 0, Value v = kUnbounded) {
        ApproxSpec s;
        s.mode = Mode::kFactor;
        s.keep_num = keep_num;
        s.keep_den = keep_den;
        s.w = w;
        s.v = v;
        return s;
    }
    static ApproxSpec additive(Value delta, Value w = 0, Value v = kUnbounded) {
        ApproxSpec s;
        s.mode = Mode::kAdditive;
        s.delta = delta;
        s.w = w;
        s.v = v;
        return s;
    }
};

struct CheckResult {
    bool ok = true;
    int clause = 0;          // 1 or 2 when violated
    Value violator = 0;      // the element without a partner
    std::string to_string() const {
        if (ok) return "ok";
        return "clause (" + std::string(clause == 1 ? "i" : "ii") + ") violated at " +
               std::to_string(violator);
    }
};

// Literal check of the two approximation clauses.  Clause (i) quantifies over
// S[w,v]; clause (ii) over all of the approximation.
inline CheckResult check_approx(const IntegerSet& approx, const IntegerSet& exact,
                                const ApproxSpec& spec) {
    CheckResult r;
    auto has_in = [](const IntegerSet& s, Value lo, Value hi) {
        if (lo > hi) return false;
        auto it = std::lower_bound(s.v.begin(), s.v.end(), lo);
        return it != s.v.end() && *it <= hi;
    };
    for (Value s : exact.v) {
        if (s < spec.w || s > spec.v) continue;
        Value lo, hi;
        if (spec.mode == ApproxSpec::Mode::kFactor) {
            lo = narrow_u128(ceil_div_wide(Wide(s) * spec.keep_num, spec.keep_den), "check");
            hi = s;
        } else {
            lo = s > spec.delta ? s - spec.delta : 0;
            hi = s > kUnbounded - spec.delta ? kUnbounded : s + spec.delta;
        }
        if (!has_in(approx, lo, hi)) {
            r.ok = false;
            r.clause = 1;
            r.violator = s;
            return r;
        }
    }
    for (Value t : approx.v) {
        Value lo, hi;
        if (spec.mode == ApproxSpec::Mode::kFactor) {
            lo = t;
            hi = spec.keep_num == 0
                     ? kUnbounded
                     : narrow_u128(std::min(Wide(kUnbounded), Wide(t) * spec.keep_den / spec.keep_num),
                                   "check");
        } else {
            lo = t > spec.delta ? t - spec.delta : 0;
            hi = t > kUnbounded - spec.delta ? kUnbounded : t + spec.delta;
        }
        if (!has_in(exact, lo, hi)) {
            r.ok = false;
            r.clause = 2;
            r.violator = t;
            return r;
        }
    }
    return r;
}

}  // namespace partapx
