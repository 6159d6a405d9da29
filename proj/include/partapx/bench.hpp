#pragma once

// Benchmark harness: seeded instance synthesis and (n, E) sweeps reporting
// wall time with a per-stage breakdown as CSV rows.  Generation is seeded and
// reproducible; the solver itself is seedless.

#include <chrono>
#include <sstream>
#include <string>
#include <vector>

#include "partapx/common.hpp"
#include "partapx/pipeline.hpp"

namespace partapx {

inline std::vector<Value> generate_values(std::size_t n, Value lo, Value hi, std::uint64_t seed) {
    if (lo < 1 || hi < lo) throw std::invalid_argument("generate_values: bad range");
    SplitMix64 rng(seed);
    std::vector<Value> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(rng.range(lo, hi));
    return out;
}

struct BenchRow {
    std::size_t n = 0;
    Value e = 2;
    std::uint64_t wall_ms = 0;
    std::uint64_t audit_ms = 0, windows_ms = 0, combine_ms = 0, recover_ms = 0;
    Value achieved = 0;
    Value k = 0;
    std::uint64_t window_count = 0;
    std::uint64_t early_stops = 0;
};

inline BenchRow bench_one(std::size_t n, Value e, Value lo, Value hi, std::uint64_t seed,
                          const PartitionConfig& cfg) {
    PartitionInstance inst;
    inst.values = generate_values(n, lo, hi, seed);
    inst.epsilon_inv = e;
    auto t0 = std::chrono::steady_clock::now();
    PartitionSolution sol = solve_partition(inst, cfg);
    auto t1 = std::chrono::steady_clock::now();
    BenchRow row;
    row.n = n;
    row.e = e;
    row.wall_ms =
        std::uint64_t(std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
    for (const auto& [stage, ms] : sol.stage_ms) {
        if (stage == "audit") row.audit_ms = ms;
        if (stage == "windows") row.windows_ms = ms;
        if (stage == "combine") row.combine_ms = ms;
        if (stage == "recover") row.recover_ms = ms;
    }
    row.achieved = sol.achieved_sum;
    row.k = sol.k_multiplier;
    row.window_count = sol.window_count;
    row.early_stops = sol.early_stops;
    return row;
}

inline std::string bench_csv_header() {
    return "n,E,wall_ms,audit_ms,windows_ms,combine_ms,recover_ms,achieved,K,windows,early_stops";
}

inline std::string bench_csv_row(const BenchRow& r) {
    std::ostringstream out;
    out << r.n << ',' << r.e << ',' << r.wall_ms << ',' << r.audit_ms << ',' << r.windows_ms << ','
        << r.combine_ms << ',' << r.recover_ms << ',' << r.achieved << ',' << r.k << ','
        << r.window_count << ',' << r.early_stops;
    return out.str();
}

}  // namespace partapx
