#pragma once

// Partition front end: the reduction from (1-eps)-approximate Partition to
// reduced-problem instances and back.  Stages: trivial-case filter, tiny
// element merging, dyadic magnitude windows over an exact rational unit
// G = sum/(2 E'), per-(alpha,beta) subproblem fan-out into solve_rp, additive
// combination across magnitude families on a budget-derived grid, upper-half
// mirroring, answer selection, and index back-mapping onto the original
// multiset.  The internal precision E' = K*E is chosen per instance as the
// smallest power-of-two multiple whose audited stage-error total fits within
// sum/(8E).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "partapx/canonical.hpp"
#include "partapx/common.hpp"
#include "partapx/intset.hpp"
#include "partapx/oracle.hpp"
#include "partapx/reduced.hpp"

namespace partapx {

struct PartitionInstance {
    std::vector<Value> values;
    Value epsilon_inv = 2;  // E; epsilon = 1/E
};

struct PartitionConfig {
    Value c_num = 1, c_den = 1;
    int threads = 1;
    bool collect_timings = false;
    Value max_k = Value(1) << 24;
    Value max_e_prime = Value(1) << 40;
    std::size_t max_n = std::size_t(1) << 20;
    std::uint64_t combine_cells_cap = std::uint64_t(1) << 26;
    std::uint64_t fallback_dp_cells = std::uint64_t(1) << 26;
    std::uint64_t max_alpha_source = std::uint64_t(1) << 25;
    std::uint64_t or_fold_budget = std::uint64_t(1) << 33;  // word-ops per fold
    RpConfig rp;
};

struct StageError {
    std::string stage;
    Value bound;
};

struct PartitionSolution {
    std::vector<std::size_t> subset_indices;
    Value achieved_sum = 0;
    Value opt_factor_num = 1, opt_factor_den = 1;  // guarantee (E-1)/E
    std::vector<StageError> error_budget_report;
    Value budget_total = 0;
    Value budget_limit = 0;
    // introspection
    bool trivial = false;
    bool exact_fallback = false;
    Value k_multiplier = 0;
    Value e_prime = 0;
    std::uint64_t alpha_count = 0;
    std::uint64_t window_count = 0;
    std::uint64_t windows_exact = 0;
    std::uint64_t windows_skipped = 0;
    std::uint64_t early_stops = 0;
    std::uint64_t combine_cells = 0;
    SumsetCounters counters;
    std::vector<std::pair<std::string, std::uint64_t>> stage_ms;
};

// --- standalone reduction operations (also used by tests) -----------------

// Exact when max(X) >= 3/4 * sum(X): the optimum is everything but one max.
inline std::optional<PartitionSolution> trivial_case(const PartitionInstance& inst) {
    if (inst.values.empty()) {
        PartitionSolution s;
        s.trivial = true;
        return s;
    }
    Wide total = 0;
    Value mx = 0;
    std::size_t mx_idx = 0;
    for (std::size_t i = 0; i < inst.values.size(); ++i) {
        total += inst.values[i];
        if (inst.values[i] > mx) {
            mx = inst.values[i];
            mx_idx = i;
        }
    }
    if (Wide(4) * mx < Wide(3) * total) return std::nullopt;
    PartitionSolution s;
    s.trivial = true;
    s.opt_factor_num = 1;
    s.opt_factor_den = 1;
    Wide sum = 0;
    for (std::size_t i = 0; i < inst.values.size(); ++i) {
        if (i == mx_idx) continue;
        s.subset_indices.push_back(i);
        sum += inst.values[i];
    }
    s.achieved_sum = narrow_u128(sum, "trivial case sum");
    return s;
}

struct MergeResult {
    std::vector<Value> items;                       // transformed multiset X'
    std::vector<std::int64_t> origin;               // >=0 original index, <0 ~(group index)
    std::vector<std::vector<std::size_t>> groups;   // tiny groups, original indices
    std::vector<std::size_t> dropped;               // remainder group Z_0
};

// Packs every element below G = t/E' into groups with sums in [G, 2G);
// a remainder below G is dropped.  G is the exact rational g_num/g_den.
inline MergeResult merge_tiny(const std::vector<Value>& values,
                              const std::vector<std::size_t>& index, Wide g_num, Wide g_den) {
    MergeResult out;
    std::vector<std::size_t> tiny;
    for (std::size_t idx : index) {
        if (Wide(values[idx]) * g_den < g_num)
            tiny.push_back(idx);
        else {
            out.items.push_back(values[idx]);
            out.origin.push_back(std::int64_t(idx));
        }
    }
    std::stable_sort(tiny.begin(), tiny.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::size_t> group;
    Wide group_sum = 0;
    for (std::size_t idx : tiny) {
        group.push_back(idx);
        group_sum += values[idx];
        if (group_sum * g_den >= g_num) {  // sum reached G: close the group
            out.items.push_back(narrow_u128(group_sum, "tiny group"));
            out.origin.push_back(~std::int64_t(out.groups.size()));
            out.groups.push_back(std::move(group));
            group.clear();
            group_sum = 0;
        }
    }
    out.dropped = std::move(group);
    return out;
}

// x -> floor(x * E^2 / t) with t = t_num/t_den carried exactly.
inline std::vector<Value> scale_round(const std::vector<Value>& values, Value e, Wide t_num,
                                      Wide t_den) {
    std::vector<Value> out;
    out.reserve(values.size());
    for (Value x : values)
        out.push_back(narrow_u128(Wide(x) * e * e * t_den / t_num, "scale_round"));
    return out;
}

// Disjoint cover by the dyadic windows [alpha*E, 2*alpha*E).
inline std::vector<std::pair<Value, std::vector<Value>>> partition_by_magnitude(
    const std::vector<Value>& scaled, Value e) {
    std::vector<std::pair<Value, std::vector<Value>>> out;
    for (Value x : scaled) {
        if (x < e) throw std::invalid_argument("partition_by_magnitude: element below E");
        Value alpha = Value(1) << floor_log2(x / e);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& p) { return p.first == alpha; });
        if (it == out.end()) {
            out.push_back({alpha, {x}});
        } else {
            it->second.push_back(x);
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

// {sigma - s : s in S}
inline IntegerSet mirror_upper(const IntegerSet& s, Value sigma) {
    std::vector<Value> out;
    out.reserve(s.size());
    for (auto it = s.v.rbegin(); it != s.v.rend(); ++it) {
        if (*it > sigma) throw std::invalid_argument("mirror_upper: element above sigma");
        out.push_back(sigma - *it);
    }
    return IntegerSet(std::move(out));
}

// Approximates (A_1 + ... + A_l)[0, u] with additive error <= u/E by rounding
// every element down to multiples of delta = max(1, u/(2*l*E)) and folding
// exact capped sumsets on the delta-grid.  Each set is taken with 0 adjoined.
inline IntegerSet combine_additive(const std::vector<IntegerSet>& sets, Value u, Value e) {
    if (sets.empty()) throw std::invalid_argument("combine_additive: no sets");
    const Value l = Value(sets.size());
    const Value delta = std::max<Value>(1, u / (2 * l * e));
    const std::size_t cells = std::size_t(u / delta) + 1;
    std::vector<std::uint64_t> prefix((cells + 63) / 64, 0);
    prefix[0] = 1;
    for (const auto& s : sets) {
        std::vector<std::size_t> shifts{0};
        for (Value x : s.v)
            if (x <= u) shifts.push_back(std::size_t(x / delta));
        std::sort(shifts.begin(), shifts.end());
        shifts.erase(std::unique(shifts.begin(), shifts.end()), shifts.end());
        std::vector<std::uint64_t> next(prefix.size(), 0);
        const std::size_t words = prefix.size();
        for (std::size_t sh : shifts) {
            const std::size_t word_sh = sh >> 6;
            const unsigned bit_sh = unsigned(sh & 63);
            if (bit_sh == 0) {
                for (std::size_t i = words; i-- > word_sh;) next[i] |= prefix[i - word_sh];
            } else {
                for (std::size_t i = words; i-- > word_sh;) {
                    std::uint64_t lo = prefix[i - word_sh] << bit_sh;
                    std::uint64_t hi =
                        i - word_sh > 0 ? prefix[i - word_sh - 1] >> (64 - bit_sh) : 0;
                    next[i] |= lo | hi;
                }
            }
        }
        prefix = std::move(next);
    }
    std::vector<Value> out;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        std::uint64_t w = prefix[i];
        while (w) {
            unsigned bit = unsigned(std::countr_zero(w));
            std::size_t cell = (i << 6) + bit;
            if (cell < cells) out.push_back(Value(cell) * delta);
            w &= w - 1;
        }
    }
    return IntegerSet(std::move(out));
}

}  // namespace partapx

#include "partapx/pipeline_impl.hpp"
