#pragma once

// Implementation core for solve_partition.  Included at the end of
// pipeline.hpp; not a public header.

#include <exception>

namespace partapx {

namespace detail {

struct PlanWindow {
    Value beta = 0;  // U = beta
    Value m = 0;
    bool skipped = false;
    bool predicted_exact = false;
    Value ledger = 0;  // additive contribution, original units
};

struct PlanAlpha {
    int k = 0;
    Value alpha = 1;
    std::vector<std::uint32_t> members;  // indices into merged items
    Value sum_alpha = 0;
    std::vector<PlanWindow> windows;
    Value delta_alpha = 0;
};

struct Plan {
    Value e = 0, e_prime = 0, k_mult = 0;
    Wide g_num = 0, g_den = 0;  // window unit G = g_num / g_den = sum/(2E')
    MergeResult merged;
    std::vector<PlanAlpha> alphas;
    Value u_threshold = 0;
    Value delta_g = 1;
    std::uint64_t cells = 0;
    std::vector<StageError> ledger;
    Value budget_total = 0;
    Value budget_limit = 0;
    bool feasible = false;
    std::string reason;
};

inline Value ceil_times_g(Wide mult, const Plan& p) {
    return narrow_u128(ceil_div_wide(mult * p.g_num, p.g_den), "ledger");
}

// x -> floor(x * m * g_den / g_num): the per-window rescale into [U, 2U).
inline Value window_scale(Value x, Value m, const Plan& p) {
    return narrow_u128(Wide(x) * m * p.g_den / p.g_num, "window scale");
}

// s -> floor(s * g_num / (m * g_den)): back from RP units.
inline Value window_unscale(Value s, Value m, const Plan& p) {
    return narrow_u128(Wide(s) * p.g_num / (Wide(m) * p.g_den), "window unscale");
}

inline Plan build_plan(const std::vector<Value>& values,
                       const std::vector<std::size_t>& working_sorted, Wide total, Value e,
                       Value k_mult, const PartitionConfig& cfg) {
    Plan p;
    p.e = e;
    p.k_mult = k_mult;
    p.e_prime = checked_mul(k_mult, e);
    p.g_num = total;
    p.g_den = Wide(2) * p.e_prime;
    p.budget_limit = Value(total / (Wide(8) * e));
    p.u_threshold = Value(total * (Wide(4) * e + 1) / (Wide(8) * e));

    p.merged = merge_tiny(values, working_sorted, p.g_num, p.g_den);
    const Value ceil_g = ceil_times_g(1, p);
    Value total_err = 0;
    auto add = [&](std::string stage, Value bound) {
        p.ledger.push_back({std::move(stage), bound});
        total_err = checked_add(total_err, bound);
    };
    add("tiny_merge", ceil_times_g(2, p));

    // bucket by dyadic magnitude: alpha = 2^k with 2^k * G <= x < 2^{k+1} * G
    std::vector<std::vector<std::uint32_t>> buckets(64);
    for (std::size_t i = 0; i < p.merged.items.size(); ++i) {
        const Wide lhs = Wide(p.merged.items[i]) * p.g_den;
        int k = 0;
        while (k < 63 && (p.g_num << (k + 1)) <= lhs) ++k;
        buckets[std::size_t(k)].push_back(std::uint32_t(i));
    }
    for (int k = 0; k < 64; ++k) {
        if (buckets[std::size_t(k)].empty()) continue;
        PlanAlpha a;
        a.k = k;
        a.alpha = Value(1) << k;
        a.members = std::move(buckets[std::size_t(k)]);
        Wide sum_alpha = 0;
        for (auto idx : a.members) sum_alpha += p.merged.items[idx];
        a.sum_alpha = narrow_u128(sum_alpha, "alpha sum");
        const std::size_t n_a = a.members.size();
        const int levels = ceil_log2(Value(n_a));
        Value worst = 0;
        for (Value beta = 2 * a.alpha;; beta = checked_mul(beta, 2)) {
            if (Wide(2) * beta * p.g_num > sum_alpha * p.g_den) break;  // beta*G > sum/2
            PlanWindow w;
            w.beta = beta;
            w.m = beta / a.alpha;
            const Wide window_floor = Wide(2) * w.m * beta;  // 2mU
            if (n_a < 2 * w.m) {
                Wide scaled_sum = 0;
                for (auto idx : a.members) scaled_sum += window_scale(p.merged.items[idx], w.m, p);
                if (scaled_sum < window_floor) {
                    w.skipped = true;
                    a.windows.push_back(w);
                    continue;
                }
            }
            w.predicted_exact = rp_takes_exact_path(n_a, beta, w.m, cfg.rp);
            Value werr = checked_add(2 * ceil_g, 2);  // window rescale + unscale floors
            if (!w.predicted_exact) {
                Value eb = rp_error_bound(beta, w.m, levels);
                werr = checked_add(
                    werr, narrow_u128(ceil_div_wide(Wide(eb) * p.g_num, Wide(w.m) * p.g_den),
                                      "window ledger"));
            }
            w.ledger = werr;
            worst = std::max(worst, werr);
            a.windows.push_back(w);
        }
        a.delta_alpha = a.windows.empty() ? 0 : checked_add(worst, checked_add(2 * ceil_g, 2));
        if (a.delta_alpha > 0) add("alpha_2^" + std::to_string(k), a.delta_alpha);
        p.alphas.push_back(std::move(a));
    }

    const Value l = std::max<Value>(1, p.alphas.size());
    p.delta_g = std::max<Value>(1, Value(total / (Wide(32) * e * l)));
    p.cells = p.u_threshold / p.delta_g + 1;
    if (p.cells > cfg.combine_cells_cap) {
        p.reason = "combine grid exceeds cell cap";
        return p;
    }
    add("combine_grid", checked_mul(2 * l, p.delta_g));
    add("selection", 2 * p.delta_g);
    p.budget_total = total_err;
    p.feasible = Wide(total_err) * 8 * e <= total;
    if (!p.feasible) p.reason = "stage error total exceeds eps*sum/8";
    return p;
}

template <typename F>
inline void parallel_for(std::size_t count, int threads, F&& f) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min<std::size_t>(std::size_t(threads), count);
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

struct Bitset {
    std::vector<std::uint64_t> w;
    std::uint64_t bits = 0;
    explicit Bitset(std::uint64_t n = 0) : w((n + 63) / 64, 0), bits(n) {}
    void set(std::uint64_t i) { w[std::size_t(i >> 6)] |= 1ull << (i & 63); }
    bool test(std::uint64_t i) const { return (w[std::size_t(i >> 6)] >> (i & 63)) & 1; }
};

inline void fold_or(const Bitset& prefix, const std::vector<std::uint64_t>& shifts, Bitset& out) {
    const std::size_t words = prefix.w.size();
    for (std::uint64_t sh : shifts) {
        if (sh >= prefix.bits) continue;
        const std::size_t word_sh = std::size_t(sh >> 6);
        const unsigned bit_sh = unsigned(sh & 63);
        if (bit_sh == 0) {
            for (std::size_t i = words; i-- > word_sh;) out.w[i] |= prefix.w[i - word_sh];
        } else {
            for (std::size_t i = words; i-- > word_sh;) {
                std::uint64_t lo = prefix.w[i - word_sh] << bit_sh;
                std::uint64_t hi = i - word_sh > 0 ? prefix.w[i - word_sh - 1] >> (64 - bit_sh) : 0;
                out.w[i] |= lo | hi;
            }
        }
    }
}

inline void fold_ntt(const Bitset& prefix, const std::vector<std::uint64_t>& shifts, Bitset& out,
                     SumsetCounters* ctr) {
    const std::uint64_t n = prefix.bits;
    std::size_t size = 1;
    while (size < 2 * n) size <<= 1;
    std::vector<std::uint64_t> fa(size, 0), fb(size, 0);
    for (std::uint64_t i = 0; i < n; ++i)
        if (prefix.test(i)) fa[std::size_t(i)] = 1;
    for (std::uint64_t sh : shifts)
        if (sh < n) fb[std::size_t(sh)] = 1;
    ntt(fa, false);
    ntt(fb, false);
    for (std::size_t i = 0; i < size; ++i) fa[i] = fa[i] * fb[i] % kNttMod;
    ntt(fa, true);
    for (std::uint64_t i = 0; i < n; ++i)
        if (fa[std::size_t(i)]) out.set(i);
    if (ctr) {
        ctr->ntt_path++;
        ctr->max_ntt_size = std::max<std::uint64_t>(ctr->max_ntt_size, size);
    }
}

struct AlphaCells {
    std::vector<std::uint64_t> cell;   // ascending unique
    std::vector<std::uint32_t> piece;  // 0 low, 1 low-mirror, 2+2w window, 3+2w window-mirror
    std::vector<Value> inner;          // value (low pieces) or RP element (window pieces)
};

}  // namespace detail

inline PartitionSolution solve_partition(const PartitionInstance& inst,
                                         const PartitionConfig& cfg = {}) {
    using Clock = std::chrono::steady_clock;
    auto ms_since = [](Clock::time_point t0) {
        return std::uint64_t(
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count());
    };

    if (inst.epsilon_inv < 2) throw std::invalid_argument("solve_partition: E must be >= 2");
    if (inst.values.size() > cfg.max_n) throw limit_error("solve_partition: n exceeds limit");
    Wide total = 0;
    for (Value x : inst.values) {
        if (x == 0) throw std::invalid_argument("solve_partition: values must be positive");
        total += x;
    }
    if (total > Wide(std::numeric_limits<Value>::max()))
        throw limit_error("solve_partition: total sum overflows 64 bits");
    const Value e = inst.epsilon_inv;

    if (auto t = trivial_case(inst)) {
        t->opt_factor_num = e - 1;
        t->opt_factor_den = e;
        t->budget_limit = Value(total / (Wide(8) * e));
        return *t;
    }

    // Elements above sum/2 cannot join any feasible subset; at most one exists.
    std::vector<std::size_t> working;
    working.reserve(inst.values.size());
    for (std::size_t i = 0; i < inst.values.size(); ++i)
        if (Wide(2) * inst.values[i] <= total) working.push_back(i);
    std::stable_sort(working.begin(), working.end(), [&](std::size_t a, std::size_t b) {
        return inst.values[a] < inst.values[b];
    });

    auto t_audit = Clock::now();
    detail::Plan plan;
    for (Value k = 1; k <= cfg.max_k; k *= 2) {
        if (checked_mul(k, e) > cfg.max_e_prime) break;
        plan = detail::build_plan(inst.values, working, total, e, k, cfg);
        if (plan.feasible) break;
        if (plan.cells > cfg.combine_cells_cap) break;  // not fixable by K
    }
    PartitionSolution sol;
    sol.opt_factor_num = e - 1;
    sol.opt_factor_den = e;
    if (!plan.feasible) {
        // The audited budget cannot be met at any precision: the instance is
        // small relative to E, so exact DP is the honest path.
        if (total / 2 + 1 <= cfg.fallback_dp_cells) {
            OracleLimits lim;
            lim.max_cells = cfg.fallback_dp_cells;
            PartitionOpt opt = exact_partition_opt(inst.values, lim);
            sol.subset_indices = opt.witness;
            sol.achieved_sum = opt.value;
            sol.exact_fallback = true;
            sol.budget_limit = Value(total / (Wide(8) * e));
            sol.stage_ms.emplace_back("audit", ms_since(t_audit));
            return sol;
        }
        throw limit_error("solve_partition: error budget unreachable (" + plan.reason + ")");
    }
    sol.k_multiplier = plan.k_mult;
    sol.e_prime = plan.e_prime;
    sol.error_budget_report = plan.ledger;
    sol.budget_total = plan.budget_total;
    sol.budget_limit = plan.budget_limit;
    sol.alpha_count = plan.alphas.size();
    sol.combine_cells = plan.cells;
    sol.stage_ms.emplace_back("audit", ms_since(t_audit));

    // --- solve all (alpha, beta) windows, possibly in parallel -------------
    auto t_windows = Clock::now();
    struct Task {
        std::size_t alpha_idx;
        std::size_t window_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t ai = 0; ai < plan.alphas.size(); ++ai)
        for (std::size_t wi = 0; wi < plan.alphas[ai].windows.size(); ++wi)
            if (!plan.alphas[ai].windows[wi].skipped) tasks.push_back({ai, wi});
    sol.window_count = tasks.size();
    sol.windows_skipped = 0;
    for (const auto& a : plan.alphas)
        for (const auto& w : a.windows) sol.windows_skipped += w.skipped ? 1 : 0;

    std::vector<RpResult> solved(tasks.size());
    std::vector<SumsetCounters> task_counters(tasks.size());
    detail::parallel_for(tasks.size(), cfg.threads, [&](std::size_t ti) {
        const auto& alpha = plan.alphas[tasks[ti].alpha_idx];
        const auto& win = alpha.windows[tasks[ti].window_idx];
        RpInstance ri;
        ri.U = win.beta;
        ri.m = win.m;
        ri.c_num = cfg.c_num;
        ri.c_den = cfg.c_den;
        ri.items.reserve(alpha.members.size());
        for (auto idx : alpha.members)
            ri.items.push_back(detail::window_scale(plan.merged.items[idx], win.m, plan));
        RpConfig rc = cfg.rp;
        rc.counters = &task_counters[ti];
        solved[ti] = solve_rp(ri, rc);
    });
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        sol.counters.absorb(task_counters[ti]);
        if (solved[ti].early_stop_taken) sol.early_stops++;
        if (solved[ti].exact) sol.windows_exact++;
    }
    // window index -> position in `solved`
    std::vector<std::vector<std::int32_t>> slot(plan.alphas.size());
    for (std::size_t ai = 0; ai < plan.alphas.size(); ++ai)
        slot[ai].assign(plan.alphas[ai].windows.size(), -1);
    for (std::size_t ti = 0; ti < tasks.size(); ++ti)
        slot[tasks[ti].alpha_idx][tasks[ti].window_idx] = std::int32_t(ti);
    sol.stage_ms.emplace_back("windows", ms_since(t_windows));

    // --- per-alpha cell sets and the fold across alphas --------------------
    auto t_combine = Clock::now();
    const Value dg = plan.delta_g;
    std::vector<detail::AlphaCells> alpha_cells(plan.alphas.size());
    for (std::size_t ai = 0; ai < plan.alphas.size(); ++ai) {
        const auto& alpha = plan.alphas[ai];
        struct Entry {
            std::uint64_t cell;
            std::uint32_t piece;
            Value inner;
        };
        std::vector<Entry> entries;
        auto push = [&](Value v, std::uint32_t piece, Value inner) {
            if (v > plan.u_threshold) return;
            entries.push_back({v / dg, piece, inner});
        };
        push(0, 0, 0);
        for (auto idx : alpha.members) push(plan.merged.items[idx], 0, plan.merged.items[idx]);
        push(alpha.sum_alpha, 1, 0);
        for (auto idx : alpha.members)
            push(alpha.sum_alpha - plan.merged.items[idx], 1, plan.merged.items[idx]);
        for (std::size_t wi = 0; wi < alpha.windows.size(); ++wi) {
            if (slot[ai][wi] < 0) continue;
            const auto& win = alpha.windows[wi];
            const RpResult& rp = solved[std::size_t(slot[ai][wi])];
            for (Value s : rp.approx_set.v) {
                Value v = detail::window_unscale(s, win.m, plan);
                if (v > alpha.sum_alpha) continue;
                push(v, std::uint32_t(2 + 2 * wi), s);
                push(alpha.sum_alpha - v, std::uint32_t(3 + 2 * wi), s);
            }
            if (entries.size() > cfg.max_alpha_source)
                throw limit_error("solve_partition: per-alpha candidate set exceeds limit");
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.cell < b.cell; });
        auto& ac = alpha_cells[ai];
        for (const auto& en : entries) {
            if (!ac.cell.empty() && ac.cell.back() == en.cell) continue;
            ac.cell.push_back(en.cell);
            ac.piece.push_back(en.piece);
            ac.inner.push_back(en.inner);
        }
    }

    std::vector<detail::Bitset> prefixes;
    prefixes.reserve(plan.alphas.size() + 1);
    prefixes.emplace_back(plan.cells);
    prefixes[0].set(0);
    for (std::size_t ai = 0; ai < plan.alphas.size(); ++ai) {
        detail::Bitset next(plan.cells);
        const auto& shifts = alpha_cells[ai].cell;
        const std::uint64_t or_cost = std::uint64_t(shifts.size()) * prefixes.back().w.size();
        std::size_t ntt_size = 1;
        while (ntt_size < 2 * plan.cells) ntt_size <<= 1;
        const std::uint64_t ntt_cost =
            3ull * ntt_size * std::uint64_t(std::max(1, ceil_log2(Value(ntt_size))));
        if (or_cost <= ntt_cost || ntt_size > detail::kNttMaxSize) {
            if (or_cost > cfg.or_fold_budget)
                throw limit_error("solve_partition: combine fold exceeds budget");
            detail::fold_or(prefixes.back(), shifts, next);
        } else {
            detail::fold_ntt(prefixes.back(), shifts, next, &sol.counters);
        }
        prefixes.push_back(std::move(next));
    }
    sol.stage_ms.emplace_back("combine", ms_since(t_combine));

    // --- selection and recovery --------------------------------------------
    auto t_recover = Clock::now();
    const detail::Bitset& final_set = prefixes.back();
    std::uint64_t best_cell = 0;
    for (std::size_t i = final_set.w.size(); i-- > 0;) {
        if (final_set.w[i]) {
            best_cell = (std::uint64_t(i) << 6) + 63 - std::countl_zero(final_set.w[i]);
            break;
        }
    }

    std::vector<std::size_t> chosen;  // indices into merged items
    std::uint64_t cell = best_cell;
    for (std::size_t ai = plan.alphas.size(); ai-- > 0;) {
        const auto& ac = alpha_cells[ai];
        const auto& prev = prefixes[ai];
        auto it = std::upper_bound(ac.cell.begin(), ac.cell.end(), cell);
        std::size_t pick = std::size_t(-1);
        while (it != ac.cell.begin()) {
            --it;
            if (prev.test(cell - *it)) {
                pick = std::size_t(it - ac.cell.begin());
                break;
            }
        }
        if (pick == std::size_t(-1))
            throw std::logic_error("solve_partition: combine backtrack failed");
        cell -= ac.cell[pick];

        const auto& alpha = plan.alphas[ai];
        const std::uint32_t piece = ac.piece[pick];
        const Value inner = ac.inner[pick];
        auto add_member = [&](std::size_t pos) { chosen.push_back(alpha.members[pos]); };
        if (piece == 0) {
            if (inner != 0) {
                for (std::size_t pos = 0; pos < alpha.members.size(); ++pos)
                    if (plan.merged.items[alpha.members[pos]] == inner) {
                        add_member(pos);
                        break;
                    }
            }
        } else if (piece == 1) {
            bool removed = inner == 0;
            for (std::size_t pos = 0; pos < alpha.members.size(); ++pos) {
                if (!removed && plan.merged.items[alpha.members[pos]] == inner) {
                    removed = true;
                    continue;
                }
                add_member(pos);
            }
        } else {
            const std::size_t wi = (piece - 2) / 2;
            const bool mirrored = (piece & 1) != 0;
            const RpResult& rp = solved[std::size_t(slot[ai][wi])];
            std::vector<std::size_t> part =
                inner == 0 ? std::vector<std::size_t>{} : recover_subset(rp, inner);
            if (!mirrored) {
                for (std::size_t pos : part) add_member(pos);
            } else {
                std::vector<bool> in_part(alpha.members.size(), false);
                for (std::size_t pos : part) in_part[pos] = true;
                for (std::size_t pos = 0; pos < alpha.members.size(); ++pos)
                    if (!in_part[pos]) add_member(pos);
            }
        }
    }

    // merged items -> original indices
    std::vector<std::size_t> indices;
    for (std::size_t mi : chosen) {
        std::int64_t origin = plan.merged.origin[mi];
        if (origin >= 0) {
            indices.push_back(std::size_t(origin));
        } else {
            for (std::size_t oi : plan.merged.groups[std::size_t(~origin)]) indices.push_back(oi);
        }
    }
    Wide achieved = 0;
    for (std::size_t i : indices) achieved += inst.values[i];
    if (achieved * 2 > total) {
        std::sort(indices.begin(), indices.end());
        std::vector<std::size_t> complement;
        complement.reserve(inst.values.size() - indices.size());
        std::size_t p = 0;
        for (std::size_t i = 0; i < inst.values.size(); ++i) {
            if (p < indices.size() && indices[p] == i) {
                ++p;
            } else {
                complement.push_back(i);
            }
        }
        indices = std::move(complement);
        achieved = total - achieved;
    }
    std::sort(indices.begin(), indices.end());
    sol.subset_indices = std::move(indices);
    sol.achieved_sum = narrow_u128(achieved, "achieved sum");
    sol.stage_ms.emplace_back("recover", ms_since(t_recover));
    return sol;
}

}  // namespace partapx
