#pragma once

// Machine-readable run reports.  JSON output uses insertion-ordered keys and
// no floating point, so identical runs serialize byte-identically; wall times
// are included only on request since they are inherently nondeterministic.

#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "partapx/common.hpp"
#include "partapx/pipeline.hpp"

namespace partapx {

struct ReportOptions {
    bool timings = false;
    std::string format = "json";  // json | tsv
};

inline nlohmann::ordered_json report_json(const PartitionInstance& inst,
                                          const PartitionSolution& sol, std::uint64_t digest,
                                          const PartitionConfig& cfg,
                                          std::optional<Value> oracle_opt,
                                          const ReportOptions& opt) {
    nlohmann::ordered_json j;
    Wide total = 0;
    for (Value x : inst.values) total += x;
    char digest_hex[17];
    std::snprintf(digest_hex, sizeof digest_hex, "%016llx", (unsigned long long)digest);
    j["input"] = {{"digest", std::string(digest_hex)},
                  {"n", inst.values.size()},
                  {"sum", narrow_u128(total, "report")}};
    j["epsilon"] = {{"one_over", inst.epsilon_inv}};
    j["config"] = {{"threads", cfg.threads},
                   {"constant_c",
                    std::to_string(cfg.c_num) + "/" + std::to_string(cfg.c_den)}};
    j["result"] = {{"achieved_sum", sol.achieved_sum},
                   {"subset_size", sol.subset_indices.size()},
                   {"subset_indices", sol.subset_indices},
                   {"trivial_case", sol.trivial},
                   {"exact_fallback", sol.exact_fallback}};
    if (oracle_opt) j["result"]["optimal"] = *oracle_opt;
    nlohmann::ordered_json budget = nlohmann::ordered_json::array();
    for (const auto& st : sol.error_budget_report)
        budget.push_back({{"stage", st.stage}, {"bound", st.bound}});
    j["guarantee"] = {{"factor_num", sol.opt_factor_num},
                      {"factor_den", sol.opt_factor_den},
                      {"budget", budget},
                      {"budget_total", sol.budget_total},
                      {"budget_limit", sol.budget_limit}};
    j["internals"] = {{"k_multiplier", sol.k_multiplier},
                      {"e_prime", sol.e_prime},
                      {"alpha_count", sol.alpha_count},
                      {"window_count", sol.window_count},
                      {"windows_exact", sol.windows_exact},
                      {"windows_skipped", sol.windows_skipped},
                      {"early_stops", sol.early_stops},
                      {"combine_cells", sol.combine_cells},
                      {"sumset_calls", sol.counters.sumset_calls},
                      {"sumset_merge", sol.counters.merge_path},
                      {"sumset_bitset", sol.counters.bitset_path},
                      {"sumset_ntt", sol.counters.ntt_path},
                      {"max_ntt_size", sol.counters.max_ntt_size}};
    if (opt.timings) {
        nlohmann::ordered_json t;
        for (const auto& [stage, ms] : sol.stage_ms) t[stage] = ms;
        j["timings_ms"] = t;
    }
    return j;
}

inline std::string report_tsv(const nlohmann::ordered_json& j) {
    std::ostringstream out;
    std::function<void(const std::string&, const nlohmann::ordered_json&)> walk =
        [&](const std::string& prefix, const nlohmann::ordered_json& node) {
            if (node.is_object()) {
                for (auto it = node.begin(); it != node.end(); ++it)
                    walk(prefix.empty() ? it.key() : prefix + "." + it.key(), it.value());
            } else if (node.is_array()) {
                std::ostringstream cell;
                for (std::size_t i = 0; i < node.size(); ++i) {
                    if (i) cell << ' ';
                    if (node[i].is_object())
                        cell << node[i].dump();
                    else
                        cell << node[i].dump();
                }
                out << prefix << '\t' << cell.str() << '\n';
            } else {
                out << prefix << '\t' << node.dump() << '\n';
            }
        };
    walk("", j);
    return out.str();
}

inline std::string render_report(const PartitionInstance& inst, const PartitionSolution& sol,
                                 std::uint64_t digest, const PartitionConfig& cfg,
                                 std::optional<Value> oracle_opt, const ReportOptions& opt) {
    auto j = report_json(inst, sol, digest, cfg, oracle_opt, opt);
    if (opt.format == "tsv") return report_tsv(j);
    return j.dump(2) + "\n";
}

}  // namespace partapx
