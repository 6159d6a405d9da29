// Batch front end: instance ingestion, solver invocation, machine-readable
// reports, an exact-oracle mode, a benchmark harness, and a quick selftest.
//
// Exit codes: 0 success, 2 malformed input, 3 overflow or resource limits.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "partapx/bench.hpp"
#include "partapx/oracle.hpp"
#include "partapx/pipeline.hpp"
#include "partapx/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitLimits = 3;

struct ParsedInput {
    std::vector<partapx::Value> values;
    std::uint64_t digest = 0;
};

ParsedInput read_instance(const std::string& path) {
    std::string raw;
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        raw = ss.str();
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot open input file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        raw = ss.str();
    }
    ParsedInput out;
    out.digest = partapx::fnv1a64(raw.data(), raw.size());
    std::istringstream in(raw);
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        try {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(tok, &pos);
            if (pos != tok.size() || v == 0)
                throw std::invalid_argument("bad token");
            out.values.push_back(partapx::Value(v));
        } catch (...) {
            throw std::invalid_argument("malformed value token: " + tok);
        }
    }
    return out;
}

partapx::Value parse_epsilon(const std::string& text) {
    auto slash = text.find('/');
    if (slash != std::string::npos) {
        unsigned long long num = std::stoull(text.substr(0, slash));
        unsigned long long den = std::stoull(text.substr(slash + 1));
        if (num != 1 || den < 2) throw std::invalid_argument("epsilon must be 1/E with E >= 2");
        return partapx::Value(den);
    }
    double eps = std::stod(text);
    if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("epsilon must be in (0, 1/2]");
    double e = std::ceil(1.0 / eps - 1e-9);
    return partapx::Value(e);
}

void parse_constant_c(const std::string& text, partapx::Value& num, partapx::Value& den) {
    auto slash = text.find('/');
    if (slash == std::string::npos) {
        num = std::stoull(text);
        den = 1;
    } else {
        num = std::stoull(text.substr(0, slash));
        den = std::stoull(text.substr(slash + 1));
    }
    if (num < 1 || den < 1) throw std::invalid_argument("constant-c must be a positive rational");
}

void apply_limits(const std::string& text, partapx::PartitionConfig& cfg) {
    std::istringstream in(text);
    std::string kv;
    while (std::getline(in, kv, ',')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad --limits entry: " + kv);
        std::string key = kv.substr(0, eq);
        std::uint64_t val = std::stoull(kv.substr(eq + 1));
        if (key == "max_n")
            cfg.max_n = val;
        else if (key == "combine_cells")
            cfg.combine_cells_cap = val;
        else if (key == "fallback_dp_cells")
            cfg.fallback_dp_cells = val;
        else if (key == "max_e_prime")
            cfg.max_e_prime = val;
        else if (key == "max_k")
            cfg.max_k = val;
        else
            throw std::invalid_argument("unknown limit key: " + key);
    }
}

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot open output file: " + path);
    out << text;
}

std::vector<std::uint64_t> parse_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoull(tok));
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

int run_selftest();

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic (1-eps)-approximation engine for Partition"};
    app.require_subcommand(1);

    std::string eps_text, input_path, output_path, format = "json", c_text, limits_text;
    int threads = 1;
    bool timings = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--input,-i", input_path, "instance file (- for stdin)")->required();
        cmd->add_option("--output,-o", output_path, "output file (default stdout)");
        cmd->add_option("--format", format, "json|tsv")->envname("PARTAPX_FORMAT");
        cmd->add_option("--threads", threads, "worker threads")->envname("PARTAPX_THREADS");
        cmd->add_option("--constant-c", c_text, "early-termination constant (int or num/den)")
            ->envname("PARTAPX_CONSTANT_C");
        cmd->add_option("--limits", limits_text, "comma list key=value resource overrides")
            ->envname("PARTAPX_LIMITS");
        cmd->add_flag("--timings", timings, "include wall times in the report");
    };

    CLI::App* solve = app.add_subcommand("solve", "approximate an instance");
    solve->add_option("--epsilon,-e", eps_text, "target eps (decimal or 1/E)")->required();
    add_common(solve);
    bool with_oracle = false;
    solve->add_flag("--oracle", with_oracle, "also compute the exact optimum (small instances)");

    CLI::App* oracle = app.add_subcommand("oracle", "exact optimum for a small instance");
    add_common(oracle);

    CLI::App* bench = app.add_subcommand("bench", "scaling sweep, CSV output");
    std::string n_list = "100000", e_list = "1000", out_csv;
    std::uint64_t seed = 1, vmin = 1000000000ull, vmax = 1000400000ull;
    bench->add_option("--n-list", n_list, "comma list of instance sizes");
    bench->add_option("--e-list", e_list, "comma list of E values");
    bench->add_option("--vmin", vmin, "value range lower bound");
    bench->add_option("--vmax", vmax, "value range upper bound");
    bench->add_option("--seed", seed, "generator seed");
    bench->add_option("--output,-o", out_csv, "CSV output file (default stdout)");
    bench->add_option("--threads", threads, "worker threads")->envname("PARTAPX_THREADS");
    bench->add_option("--constant-c", c_text, "early-termination constant")
        ->envname("PARTAPX_CONSTANT_C");
    bench->add_option("--limits", limits_text, "resource overrides")->envname("PARTAPX_LIMITS");

    CLI::App* selftest = app.add_subcommand("selftest", "quick internal consistency checks");
    (void)selftest;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitBadInput;
    }

    try {
        partapx::PartitionConfig cfg;
        cfg.threads = threads;
        cfg.collect_timings = timings;
        if (!c_text.empty()) parse_constant_c(c_text, cfg.c_num, cfg.c_den);
        if (!limits_text.empty()) apply_limits(limits_text, cfg);

        if (solve->parsed()) {
            ParsedInput in = read_instance(input_path);
            partapx::PartitionInstance inst{in.values, parse_epsilon(eps_text)};
            partapx::PartitionSolution sol = partapx::solve_partition(inst, cfg);
            std::optional<partapx::Value> opt;
            if (with_oracle) opt = partapx::exact_partition_opt(in.values).value;
            partapx::ReportOptions ropt{timings, format};
            write_out(output_path, partapx::render_report(inst, sol, in.digest, cfg, opt, ropt));
            return kExitOk;
        }
        if (oracle->parsed()) {
            ParsedInput in = read_instance(input_path);
            partapx::PartitionOpt opt = partapx::exact_partition_opt(in.values);
            nlohmann::ordered_json j;
            partapx::Wide total = 0;
            for (auto v : in.values) total += v;
            char digest_hex[17];
            std::snprintf(digest_hex, sizeof digest_hex, "%016llx",
                          (unsigned long long)in.digest);
            j["input"] = {{"digest", std::string(digest_hex)},
                          {"n", in.values.size()},
                          {"sum", partapx::narrow_u128(total, "report")}};
            j["optimal"] = opt.value;
            j["witness"] = opt.witness;
            std::string text =
                format == "tsv" ? partapx::report_tsv(j) : j.dump(2) + "\n";
            write_out(output_path, text);
            return kExitOk;
        }
        if (bench->parsed()) {
            std::ostringstream csv;
            csv << partapx::bench_csv_header() << '\n';
            for (auto n : parse_list(n_list)) {
                for (auto e : parse_list(e_list)) {
                    auto row = partapx::bench_one(std::size_t(n), partapx::Value(e), vmin, vmax,
                                                  seed, cfg);
                    csv << partapx::bench_csv_row(row) << '\n';
                }
            }
            write_out(out_csv, csv.str());
            return kExitOk;
        }
        if (selftest->parsed()) return run_selftest();
    } catch (const partapx::limit_error& e) {
        std::cerr << "limit: " << e.what() << "\n";
        return kExitLimits;
    } catch (const std::overflow_error& e) {
        std::cerr << "overflow: " << e.what() << "\n";
        return kExitLimits;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return kExitOk;
}

namespace {

int run_selftest() {
    using namespace partapx;
    SplitMix64 rng(42);
    // exact sumset vs brute force
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<Value> av, bv;
        for (int i = 0; i < 12; ++i) av.push_back(rng.range(0, 500));
        for (int i = 0; i < 12; ++i) bv.push_back(rng.range(0, 500));
        IntegerSet a = make_set_u(av), b = make_set_u(bv);
        IntegerSet s = sumset(a, b);
        for (Value x : a.v)
            for (Value y : b.v)
                if (!s.contains(x + y)) {
                    std::cerr << "selftest: sumset miss\n";
                    return 1;
                }
    }
    // oplus_mu factor contract on random canonical pairs
    for (int iter = 0; iter < 200; ++iter) {
        Value u = Value(1) << rng.range(1, 5);
        std::vector<Value> av, bv;
        for (int i = 0; i < 20; ++i) av.push_back(rng.range(1, 16 * u));
        for (int i = 0; i < 20; ++i) bv.push_back(rng.range(1, 16 * u));
        MuCanonicalSet a = round_to_canonical(make_set_u(av), Precision(u));
        MuCanonicalSet b = round_to_canonical(make_set_u(bv), Precision(u));
        MuCanonicalSet s = oplus_mu(a, b);
        IntegerSet exact = oplus(a.base, b.base);
        auto chk = check_approx(s.base, exact, ApproxSpec::factor(u - 2, u));
        if (!chk.ok) {
            std::cerr << "selftest: oplus_mu " << chk.to_string() << "\n";
            return 1;
        }
    }
    // end to end vs the oracle
    for (int iter = 0; iter < 50; ++iter) {
        PartitionInstance inst;
        std::size_t n = 1 + rng.range(0, 11);
        for (std::size_t i = 0; i < n; ++i) inst.values.push_back(rng.range(1, 4000));
        inst.epsilon_inv = 10;
        PartitionSolution sol = solve_partition(inst);
        Value opt = exact_partition_opt(inst.values).value;
        if (!(Wide(sol.achieved_sum) * inst.epsilon_inv >=
                  Wide(opt) * (inst.epsilon_inv - 1) &&
              sol.achieved_sum <= opt)) {
            std::cerr << "selftest: guarantee violated\n";
            return 1;
        }
    }
    std::cout << "selftest: ok\n";
    return 0;
}

}  // namespace
