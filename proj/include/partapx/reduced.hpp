#pragma once

// Solver for the reduced problem RP(mu,m): approximate the subset sums of a
// multiset confined to [U, 2U) on the window [m*U, 2m*U], via a binary
// combination tree of approximate sumsets with early termination once a
// level's total size crosses the configured threshold, plus full witness
// recovery by descending the retained tree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "partapx/canonical.hpp"
#include "partapx/common.hpp"
#include "partapx/intset.hpp"

namespace partapx {

struct RpInstance {
    std::vector<Value> items;  // each in [U, 2U)
    Value U = 2;
    Value m = 1;
    Value c_num = 1, c_den = 1;  // early-termination constant c
};

struct RpConfig {
    bool force_tree = false;  // test hook: bypass the exact shortcuts
    std::uint64_t exact_dp_cells = std::uint64_t(1) << 18;
    std::uint64_t exact_dp_budget = std::uint64_t(1) << 26;   // word-ops
    std::uint64_t small_u_cells_cap = std::uint64_t(1) << 26;
    std::uint64_t max_level_elements = std::uint64_t(1) << 25;
    std::uint64_t max_tree_elements = std::uint64_t(1) << 26;
    SumsetCounters* counters = nullptr;
};

// Instance sums below 4mU get a clamped guarantee interval (see RpResult);
// below 2mU the window is unreachable and the instance is rejected.
inline void validate_rp(const RpInstance& inst) {
    if (inst.U < 2) throw std::invalid_argument("RpInstance: U must be >= 2");
    if (inst.m < 1) throw std::invalid_argument("RpInstance: m must be >= 1");
    if (inst.c_num < 1 || inst.c_den < 1) throw std::invalid_argument("RpInstance: bad constant c");
    if (inst.items.empty()) throw std::invalid_argument("RpInstance: empty item list");
    Wide sum = 0;
    for (Value x : inst.items) {
        if (x < inst.U || x >= 2 * inst.U)
            throw std::invalid_argument("RpInstance: item outside [U, 2U)");
        sum += x;
    }
    if (sum < Wide(2) * inst.m * inst.U)
        throw std::invalid_argument("RpInstance: total below 2mU, window unreachable");
}

// Explicit additive bound: ceil(2 * (1 - (1 - 2/U)^levels) * 2mU).
inline Value rp_error_bound(Value u_prec, Value m, int levels) {
    if (levels <= 0) return 0;
    const Value window_hi = narrow_u128(Wide(2) * m * u_prec, "rp bound");
    long double keep = std::pow(1.0L - 2.0L / (long double)u_prec, (long double)levels);
    long double raw = 2.0L * (1.0L - keep) * (long double)window_hi;
    Value eb = raw >= (long double)window_hi ? window_hi : Value(std::ceil(raw));
    return eb;
}

// Mirrors the shortcut decision inside solve_rp so callers can price a window
// before solving it.
inline bool rp_takes_exact_path(std::size_t n, Value u_prec, Value m, const RpConfig& cfg) {
    if (cfg.force_tree) return false;
    const Wide cells_w = Wide(2) * m * u_prec + 1;
    if (cells_w > Wide(std::numeric_limits<std::uint64_t>::max())) return false;
    const std::uint64_t cells = std::uint64_t(cells_w);
    const bool small_u = u_prec <= Value(8) * std::max(1, floor_log2(Value(n))) &&
                         cells <= cfg.small_u_cells_cap;
    const bool dp_affordable =
        cells <= cfg.exact_dp_cells &&
        (Wide(u_prec) * std::max(1, ceil_log2(Value(n) + 1)) * ((cells + 63) / 64)) <=
            cfg.exact_dp_budget;
    return small_u || dp_affordable;
}

// K(h) = ceil(128 c n h U log2(U) / m), the element-count threshold that ends
// a level early.
inline Wide threshold_elements(const RpInstance& inst, int h) {
    Wide k = Wide(128) * inst.c_num * inst.items.size();
    k *= Wide(h) * inst.U * Value(std::max(1, ceil_log2(inst.U)));
    return ceil_div_wide(k, Wide(inst.c_den) * inst.m);
}

struct TreeNode {
    MuCanonicalSet set;
    std::int32_t left = -1, right = -1;  // indices into the previous level
    enum class Kind : std::uint8_t { kLeaf, kOplus, kFallback, kCarry } kind = Kind::kLeaf;
    std::uint32_t item = 0;  // leaf only
};

struct SumsetTree {
    std::vector<std::vector<TreeNode>> levels;  // levels[0] holds the leaves
};

struct LevelResult {
    std::vector<MuCanonicalSet> sets;
    std::optional<std::size_t> stop_index;  // last index computed via oplus_mu
    std::vector<bool> is_fallback;
};

namespace detail {

inline MuCanonicalSet fallback_set(const MuCanonicalSet& a, const MuCanonicalSet& b, Value cap) {
    // Base on the child with the larger max so the new top element sits at
    // most one window above it, keeping the result complete.
    const MuCanonicalSet& big = a.max() >= b.max() ? a : b;
    Value msum = checked_add(a.max(), b.max());
    std::vector<Value> v = big.base.v;
    while (!v.empty() && v.back() > cap) v.pop_back();
    if (msum <= cap) {
        int seg = segment_of(msum, big.U);
        Value rounded = seg == 0 ? msum : msum & ~((Value(1) << seg) - 1);
        auto it = std::lower_bound(v.begin(), v.end(), rounded);
        if (it == v.end() || *it != rounded) v.insert(it, rounded);
    }
    return finish_canonical(std::move(v), big.U, a.complete && b.complete);
}

inline LevelResult build_level(const std::vector<MuCanonicalSet>& nodes, const RpInstance& inst,
                               int h, Value cap, bool use_threshold, const RpConfig& cfg) {
    if (nodes.size() % 2 != 0)
        throw std::invalid_argument("compute_level: node count must be even");
    const std::size_t pairs = nodes.size() / 2;
    const Wide threshold = threshold_elements(inst, h);
    LevelResult out;
    out.sets.reserve(pairs);
    out.is_fallback.assign(pairs, false);
    Wide running = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
        if (nodes[2 * i].U != nodes[2 * i + 1].U || nodes[2 * i].U != inst.U)
            throw std::invalid_argument("compute_level: precision mismatch among nodes");
        if (!out.stop_index) {
            MuCanonicalSet b = oplus_mu(nodes[2 * i], nodes[2 * i + 1], cap, cfg.counters);
            running += b.size();
            out.sets.push_back(std::move(b));
            if (running > cfg.max_level_elements)
                throw limit_error("solve_rp: level size exceeds configured memory budget");
            if (use_threshold && running >= threshold) out.stop_index = i;
        } else {
            out.sets.push_back(fallback_set(nodes[2 * i], nodes[2 * i + 1], cap));
            out.is_fallback[i] = true;
        }
    }
    return out;
}

}  // namespace detail

// Lemma-shaped entry points: compute B_i = A_{2i-1} (+)_mu A_{2i} left to
// right, stopping once the running size reaches K(h).
inline LevelResult compute_level(const std::vector<MuCanonicalSet>& nodes, const RpInstance& inst,
                                 int h, const RpConfig& cfg = {}) {
    LevelResult r = detail::build_level(nodes, inst, h, kUnbounded, true, cfg);
    if (r.stop_index) r.sets.resize(*r.stop_index + 1);  // the prefix I = [1, i']
    return r;
}

inline LevelResult compute_level_with_fallback(const std::vector<MuCanonicalSet>& nodes,
                                               const RpInstance& inst, int h,
                                               const RpConfig& cfg = {}) {
    return detail::build_level(nodes, inst, h, kUnbounded, true, cfg);
}

struct RpResult {
    IntegerSet approx_set;  // root set restricted to [0, 2mU]
    Value error_bound = 0;
    Value coverage_lo = 0;   // interval on which the additive guarantee holds
    Value coverage_hi = 0;
    bool early_stop_taken = false;
    bool exact = false;
    SumsetTree tree;  // empty on the exact path

    // exact-path recovery data
    std::vector<Value> items_copy;
    std::uint64_t cells = 0;
};

namespace detail {

struct PseudoItem {
    Value weight;
    std::uint32_t distinct_idx;
    std::uint32_t copies;
};

// Bounded-knapsack bitset DP over distinct values with binary-split counts.
// When `parent` is given, records per cell the pseudo-item that first set it,
// which makes the witness backtrack a plain pointer walk.
inline std::vector<std::uint64_t> rp_exact_words(const std::vector<Value>& items,
                                                 std::uint64_t cells,
                                                 std::vector<PseudoItem>* trace,
                                                 std::vector<std::uint16_t>* parent = nullptr) {
    std::vector<Value> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t words = std::size_t((cells + 63) / 64);
    std::vector<std::uint64_t> dp(words, 0);
    dp[0] = 1;
    if (parent) parent->assign(std::size_t(cells), 0xffff);
    std::uint16_t step = 0;
    auto apply = [&](Value x) {
        if (x < cells) {
            const std::size_t word_sh = std::size_t(x >> 6);
            const unsigned bit_sh = unsigned(x & 63);
            // descending scan reads pre-pass words only: each item used at most once
            for (std::size_t i = words; i-- > word_sh;) {
                std::uint64_t shifted;
                if (bit_sh == 0) {
                    shifted = dp[i - word_sh];
                } else {
                    std::uint64_t lo = dp[i - word_sh] << bit_sh;
                    std::uint64_t hi = i - word_sh > 0 ? dp[i - word_sh - 1] >> (64 - bit_sh) : 0;
                    shifted = lo | hi;
                }
                std::uint64_t fresh = shifted & ~dp[i];
                dp[i] |= shifted;
                if (parent) {
                    while (fresh) {
                        unsigned bit = unsigned(std::countr_zero(fresh));
                        std::size_t cell = (i << 6) + bit;
                        if (cell < cells) (*parent)[cell] = step;
                        fresh &= fresh - 1;
                    }
                }
            }
        }
        ++step;
    };
    std::uint32_t distinct_idx = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        std::uint64_t count = j - i;
        for (std::uint64_t chunk = 1; count > 0; chunk <<= 1) {
            std::uint64_t take = std::min<std::uint64_t>(chunk, count);
            count -= take;
            Value w = checked_mul(sorted[i], take);
            if (trace) trace->push_back({w, distinct_idx, std::uint32_t(take)});
            apply(w);
        }
        ++distinct_idx;
        i = j;
    }
    return dp;
}

inline IntegerSet words_to_set(const std::vector<std::uint64_t>& dp, std::uint64_t cells) {
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

}  // namespace detail

inline RpResult solve_rp(const RpInstance& inst, const RpConfig& cfg = {}) {
    validate_rp(inst);
    const std::size_t n = inst.items.size();
    const Value window_hi = narrow_u128(Wide(2) * inst.m * inst.U, "rp window");
    Wide total = 0;
    for (Value x : inst.items) total += x;

    RpResult res;
    res.coverage_lo = narrow_u128(Wide(inst.m) * inst.U, "rp window");
    res.coverage_hi = window_hi;

    // Exact direct path: mandatory for small U, optional when the distinct
    // value DP is cheaper than the tree would be.
    const std::uint64_t cells = window_hi + 1;
    if (rp_takes_exact_path(n, inst.U, inst.m, cfg)) {
        res.exact = true;
        res.error_bound = 0;
        res.coverage_lo = 0;
        res.items_copy = inst.items;
        res.cells = cells;
        auto dp = detail::rp_exact_words(inst.items, cells, nullptr);
        res.approx_set = detail::words_to_set(dp, cells);
        return res;
    }

    // Tree path.
    const Value cap = narrow_u128(Wide(2) * inst.m * inst.U + 2 * inst.U, "rp cap");
    SumsetTree tree;
    tree.levels.emplace_back();
    tree.levels[0].reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        TreeNode leaf;
        leaf.set = detail::finish_canonical({inst.items[i]}, inst.U, true);
        leaf.kind = TreeNode::Kind::kLeaf;
        leaf.item = std::uint32_t(i);
        tree.levels[0].push_back(std::move(leaf));
    }
    Wide tree_elements = n;
    bool any_stop = false;
    int h = 0;
    while (tree.levels.back().size() > 1) {
        ++h;
        const auto& prev = tree.levels.back();
        const std::size_t pairs = prev.size() / 2;
        const bool carry = prev.size() % 2 != 0;
        std::vector<MuCanonicalSet> operands;
        operands.reserve(2 * pairs);
        for (std::size_t i = 0; i < 2 * pairs; ++i) operands.push_back(prev[i].set);
        const bool use_threshold = pairs >= std::size_t(24) * h;
        LevelResult lr = detail::build_level(operands, inst, h, cap, use_threshold, cfg);
        if (lr.stop_index) any_stop = true;

        std::vector<TreeNode> level;
        level.reserve(pairs + carry);
        for (std::size_t i = 0; i < pairs; ++i) {
            TreeNode node;
            node.set = std::move(lr.sets[i]);
            node.left = std::int32_t(2 * i);
            node.right = std::int32_t(2 * i + 1);
            node.kind = lr.is_fallback[i] ? TreeNode::Kind::kFallback : TreeNode::Kind::kOplus;
            tree_elements += node.set.size();
            level.push_back(std::move(node));
        }
        if (carry) {
            TreeNode node;
            node.set = prev.back().set;
            node.left = std::int32_t(prev.size() - 1);
            node.kind = TreeNode::Kind::kCarry;
            tree_elements += node.set.size();
            level.push_back(std::move(node));
        }
        if (tree_elements > cfg.max_tree_elements)
            throw limit_error("solve_rp: tree exceeds configured memory budget");
        tree.levels.push_back(std::move(level));
    }

    const int levels_count = int(tree.levels.size()) - 1;
    res.approx_set = restrict(tree.levels.back()[0].set.base, 0, window_hi);
    res.early_stop_taken = any_stop;
    if (any_stop)
        res.coverage_hi = std::min<Value>(window_hi, Value(total / 2));
    res.error_bound = rp_error_bound(inst.U, inst.m, levels_count);
    res.tree = std::move(tree);
    return res;
}

// Descends the retained tree (or re-runs the exact DP) to turn an element of
// approx_set into item indices Y with s <= sum(Y) <= s + error_bound.
inline std::vector<std::size_t> recover_subset(const RpResult& res, Value s) {
    if (!res.approx_set.contains(s))
        throw std::invalid_argument("recover_subset: value not in approx_set");
    std::vector<std::size_t> out;
    if (res.exact) {
        std::vector<detail::PseudoItem> trace;
        std::vector<std::uint16_t> parent;
        detail::rp_exact_words(res.items_copy, res.cells, &trace, &parent);
        if (trace.size() >= 0xffff) throw limit_error("recover_subset: too many pseudo-items");
        std::vector<std::size_t> order(res.items_copy.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return res.items_copy[a] < res.items_copy[b];
        });
        std::vector<std::size_t> first_pos;  // distinct index -> first sorted position
        for (std::size_t i = 0; i < order.size(); ++i)
            if (i == 0 || res.items_copy[order[i]] != res.items_copy[order[i - 1]])
                first_pos.push_back(i);
        std::vector<std::uint32_t> used_copies(first_pos.size(), 0);
        Value remaining = s;
        while (remaining > 0) {
            std::uint16_t step = parent[std::size_t(remaining)];
            if (step == 0xffff) throw std::invalid_argument("recover_subset: unreachable value");
            const auto& pi = trace[step];
            used_copies[pi.distinct_idx] += pi.copies;
            remaining -= pi.weight;
        }
        for (std::size_t d = 0; d < used_copies.size(); ++d)
            for (std::uint32_t c = 0; c < used_copies[d]; ++c)
                out.push_back(order[first_pos[d] + c]);
        std::sort(out.begin(), out.end());
        return out;
    }

    // tree descent
    struct Frame {
        int level;
        int index;
        Value value;
    };
    std::vector<Frame> stack{{int(res.tree.levels.size()) - 1, 0, s}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.value == 0) continue;
        const TreeNode& node = res.tree.levels[f.level][f.index];
        switch (node.kind) {
            case TreeNode::Kind::kLeaf:
                out.push_back(node.item);
                break;
            case TreeNode::Kind::kCarry:
                stack.push_back({f.level - 1, node.left, f.value});
                break;
            case TreeNode::Kind::kOplus: {
                const auto& l = res.tree.levels[f.level - 1][node.left].set;
                const auto& r = res.tree.levels[f.level - 1][node.right].set;
                auto [a, b] = recover_pair(l, r, f.value);
                if (a > 0) stack.push_back({f.level - 1, node.left, a});
                if (b > 0) stack.push_back({f.level - 1, node.right, b});
                break;
            }
            case TreeNode::Kind::kFallback: {
                const auto& l = res.tree.levels[f.level - 1][node.left].set;
                const auto& r = res.tree.levels[f.level - 1][node.right].set;
                const MuCanonicalSet& base = l.max() >= r.max() ? l : r;
                if (base.base.contains(f.value)) {
                    stack.push_back({f.level - 1, l.max() >= r.max() ? node.left : node.right,
                                     f.value});
                } else {
                    stack.push_back({f.level - 1, node.left, l.max()});
                    stack.push_back({f.level - 1, node.right, r.max()});
                }
                break;
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace partapx
