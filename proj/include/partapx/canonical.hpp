#pragma once

// mu-canonical sets: dyadic-window granularity keyed to an integer reciprocal
// precision U (= 1/mu).  Window i >= 1 is [2^i*U, 2^{i+1}*U) and holds only
// multiples of 2^i; window 0 is [0, 2U) and is unconstrained.  Provides the
// rounding map, the approximate sumset operator, validators, and recovery of
// a witness pair for any element of an approximate sumset.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "partapx/common.hpp"
#include "partapx/intset.hpp"

namespace partapx {

struct Precision {
    Value U;
    explicit Precision(Value u) : U(u) {
        if (u < 2) throw std::invalid_argument("Precision: U must be >= 2");
    }
};

inline int segment_of(Value x, Value U) {
    if (x < 2 * U) return 0;
    return floor_log2(x / U);
}

struct MuCanonicalSet {
    IntegerSet base;
    Value U = 2;
    bool complete = false;
    int top_level = 0;

    bool empty() const { return base.empty(); }
    std::size_t size() const { return base.size(); }
    Value max() const { return base.max(); }
    Value min() const { return base.min(); }
};

inline bool validate(const MuCanonicalSet& s) {
    for (Value x : s.base.v) {
        int i = segment_of(x, s.U);
        if (i > 0 && (x & ((Value(1) << i) - 1)) != 0) return false;
    }
    return true;
}

inline bool validate_complete(const MuCanonicalSet& s) {
    if (!validate(s) || s.empty()) return false;
    int h = segment_of(s.max(), s.U);
    for (int i = 1; i <= h; ++i) {
        Value lo = (Value(1) << i) * s.U;
        auto it = std::lower_bound(s.base.v.begin(), s.base.v.end(), lo);
        if (it == s.base.v.end() || segment_of(*it, s.U) != i) return false;
    }
    return true;
}

namespace detail {

inline MuCanonicalSet finish_canonical(std::vector<Value> sorted_unique, Value U, bool complete) {
    MuCanonicalSet out;
    out.base = IntegerSet(std::move(sorted_unique));
    out.U = U;
    out.complete = complete;
    out.top_level = out.empty() ? 0 : segment_of(out.base.max(), U);
    return out;
}

}  // namespace detail

// Rounds each element of segment i down to a multiple of 2^i.  Elements below
// 2U pass through.  Output approximates the input with factor 1 - 1/U.
inline MuCanonicalSet round_to_canonical(const IntegerSet& s, Precision p) {
    if (s.empty()) throw std::invalid_argument("round_to_canonical: empty set");
    std::vector<Value> out;
    out.reserve(s.size());
    for (Value x : s.v) {
        int i = segment_of(x, p.U);
        out.push_back(i == 0 ? x : x & ~((Value(1) << i) - 1));
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return detail::finish_canonical(std::move(out), p.U, false);
}

// Drops everything above cap.  Trimming from the top preserves completeness
// with respect to the new maximum.
inline MuCanonicalSet restrict_canonical(MuCanonicalSet s, Value cap) {
    while (!s.base.v.empty() && s.base.v.back() > cap) s.base.v.pop_back();
    s.top_level = s.empty() ? 0 : segment_of(s.base.max(), s.U);
    return s;
}

namespace detail {

struct SegRange {
    int seg;
    std::size_t lo, hi;  // index range within the sorted base
};

inline std::vector<SegRange> segment_ranges(const IntegerSet& s, Value U) {
    std::vector<SegRange> out;
    std::size_t i = 0;
    while (i < s.v.size()) {
        int seg = segment_of(s.v[i], U);
        std::size_t j = i + 1;
        while (j < s.v.size() && segment_of(s.v[j], U) == seg) ++j;
        out.push_back({seg, i, j});
        i = j;
    }
    return out;
}

}  // namespace detail

// Algorithm: per segment pair (i,j), shift both sides to the coarser grid
// 2^max(i,j) (the shift floors the finer side, which is the required round
// down), take the exact windowed sumset, re-canonicalize the upper half,
// and union with A and B.  Output approximates A (+) B with factor 1 - 2/U.
inline MuCanonicalSet oplus_mu(const MuCanonicalSet& a, const MuCanonicalSet& b,
                               Value cap = kUnbounded, SumsetCounters* ctr = nullptr) {
    if (a.U != b.U) throw std::invalid_argument("oplus_mu: precision mismatch");
    if (a.empty() || b.empty()) throw std::invalid_argument("oplus_mu: empty operand");
    const Value U = a.U;
    auto segs_a = detail::segment_ranges(a.base, U);
    auto segs_b = detail::segment_ranges(b.base, U);

    std::vector<Value> acc;
    acc.reserve(a.size() + b.size());
    for (Value x : a.base.v)
        if (x <= cap) acc.push_back(x);
    for (Value x : b.base.v)
        if (x <= cap) acc.push_back(x);

    std::vector<Value> lhs, rhs;
    for (const auto& sa : segs_a) {
        for (const auto& sb : segs_b) {
            const int k = std::max(sa.seg, sb.seg);
            const Value shifted_cap = cap >> k;
            lhs.clear();
            rhs.clear();
            for (std::size_t i = sa.lo; i < sa.hi; ++i) lhs.push_back(a.base.v[i] >> k);
            for (std::size_t i = sb.lo; i < sb.hi; ++i) rhs.push_back(b.base.v[i] >> k);
            lhs.erase(std::unique(lhs.begin(), lhs.end()), lhs.end());
            rhs.erase(std::unique(rhs.begin(), rhs.end()), rhs.end());
            if (lhs.front() + rhs.front() > shifted_cap) continue;
            IntegerSet ss = sumset(IntegerSet(lhs), IntegerSet(rhs), shifted_cap, ctr);
            // shifted sums live in [0, 4U); the [2U, 4U) part belongs to the
            // next window up and rounds to even
            Value prev = kUnbounded;
            for (Value sv : ss.v) {
                Value canon = sv >= 2 * U ? sv & ~Value(1) : sv;
                Value v = canon << k;
                if (v != prev && v <= cap) {
                    acc.push_back(v);
                    prev = v;
                }
            }
        }
    }
    std::sort(acc.begin(), acc.end());
    acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
    return detail::finish_canonical(std::move(acc), U, a.complete && b.complete);
}

// Finds a in A u {0}, b in B u {0} with (1 - 2/U)(a+b) <= s <= a+b, by the
// four-case search over segments istar-1 and istar.  Cost
// O(|A| log|A| + |B| log|B|).
inline std::pair<Value, Value> recover_pair(const MuCanonicalSet& a, const MuCanonicalSet& b,
                                            Value s) {
    if (a.U != b.U) throw std::invalid_argument("recover_pair: precision mismatch");
    const Value U = a.U;
    if (a.base.contains(s)) return {s, 0};
    if (b.base.contains(s)) return {0, s};
    const int istar = segment_of(s, U);

    // one directed case: x from xs-segment k, y rounded down to grid 2^k
    auto directed = [&](const IntegerSet& xs, const IntegerSet& ys, int k,
                        Value target) -> std::optional<std::pair<Value, Value>> {
        const Value grid = Value(1) << k;
        const Value seg_lo = k == 0 ? 0 : grid * U;
        const Value seg_hi = (k == 0 ? 2 * U : 2 * grid * U);  // exclusive
        const Value y_limit = 2 * grid * U;                    // y must sit in a segment <= k
        auto x_lo = std::lower_bound(xs.v.begin(), xs.v.end(), seg_lo);
        for (auto it = x_lo; it != xs.v.end() && *it < seg_hi; ++it) {
            Value x = *it;
            if (x > target) break;
            Value ylo = target - x;
            auto yit = std::lower_bound(ys.v.begin(), ys.v.end(), ylo);
            if (yit == ys.v.end()) continue;
            Value y = *yit;
            if (y < ylo + grid && y < y_limit && (y >> k) == (ylo >> k)) return {{x, y}};
        }
        return std::nullopt;
    };

    for (int k : {istar, istar - 1}) {
        if (k < 0) continue;
        std::vector<Value> targets = {s};
        if (k == istar - 1) targets.push_back(s + (Value(1) << (istar - 1)));
        for (Value t : targets) {
            if (auto r = directed(a.base, b.base, k, t)) return *r;
            if (auto r = directed(b.base, a.base, k, t)) return {r->second, r->first};
        }
    }
    throw std::invalid_argument("recover_pair: element not in product");
}

}  // namespace partapx
