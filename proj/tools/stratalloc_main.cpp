// Command-line front end: builds atomic strata from CSV frames, seeds and
// optimises stratifications per domain, evaluates or brute-forces partitions,
// tunes annealer hyperparameters and compares runs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stratalloc/annealer.hpp"
#include "stratalloc/frame.hpp"
#include "stratalloc/io.hpp"
#include "stratalloc/oracle.hpp"
#include "stratalloc/runner.hpp"
#include "stratalloc/seeding.hpp"
#include "stratalloc/tuner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitDomainFailure = 3;

namespace fs = std::filesystem;
using namespace stratalloc;

struct ProblemSource {
    std::string strata_dir;
    std::string config_path;
    std::string csv_override;

    void add_options(CLI::App* cmd, bool strata_only = false) {
        cmd->add_option("--strata", strata_dir, "Directory of strata_*.json files from build-strata");
        if (!strata_only) {
            cmd->add_option("--config", config_path, "Frame configuration JSON (columns, bins, CV bounds)");
            cmd->add_option("--csv", csv_override, "CSV frame path, overriding the config's entry");
        }
    }

    std::vector<DomainProblem> load(std::uint64_t seed) const {
        if (!strata_dir.empty()) return io::read_strata_dir(strata_dir);
        if (config_path.empty()) throw InputError("expected --strata or --config");
        io::FrameConfig config = io::read_frame_config(config_path);
        const std::string csv_path = csv_override.empty() ? config.csv_path : csv_override;
        if (csv_path.empty()) throw InputError("no CSV path: set \"csv\" in the config or pass --csv");
        const auto records = load_frame(csv_path, config.schema);
        return build_atomic_strata(records, config.schema, seed);
    }
};

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw InputError("--out directory required");
    fs::create_directories(dir);
}

void write_run_outputs(const std::string& out_dir, const std::vector<DomainProblem>& problems,
                       const RunReport& report) {
    write_report((fs::path(out_dir) / "report.csv").string(), report);
    write_timings((fs::path(out_dir) / "timings.csv").string(), report);

    std::vector<std::pair<const DomainProblem*, const std::vector<int>*>> entries;
    nlohmann::json allocations = nlohmann::json::array();
    for (std::size_t d = 0; d < problems.size(); ++d) {
        const auto& result = report.domains[d];
        if (!result.error.empty()) continue;
        entries.emplace_back(&problems[d], &result.labels);
        allocations.push_back(io::allocation_to_json(problems[d], result.evaluation));
        io::write_trace((fs::path(out_dir) / ("trace_" + io::slug(result.domain) + ".csv")).string(), result.trace);
    }
    io::write_partition((fs::path(out_dir) / "partition.csv").string(), entries);
    io::save_json((fs::path(out_dir) / "allocation.json").string(),
                  nlohmann::json{{"total_cost", report.total_cost}, {"domains", std::move(allocations)}});

    if (report.failures > 0) {
        nlohmann::json failures = nlohmann::json::array();
        for (const auto& d : report.domains) {
            if (!d.error.empty()) failures.push_back({{"domain", d.domain}, {"error", d.error}});
        }
        io::save_json((fs::path(out_dir) / "failures.json").string(), failures);
    }
}

int cmd_build_strata(const ProblemSource& source, std::uint64_t seed, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(seed);
    std::size_t atoms = 0;
    for (const auto& p : problems) {
        io::write_domain_strata(out_dir, p);
        atoms += p.size();
        std::cout << "domain " << p.domain << ": " << p.size() << " atomic strata\n";
    }
    std::cout << problems.size() << " domains, " << atoms << " atomic strata total\n";
    return kExitOk;
}

int cmd_seed(const ProblemSource& source, std::uint64_t seed, const SeedOptions& base_options,
             const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(seed);
    std::vector<std::vector<int>> labels(problems.size());
    double total = 0.0;
    for (std::size_t d = 0; d < problems.size(); ++d) {
        SeedOptions options = base_options;
        options.seed = splitmix64(domain_seed(seed, d));
        const SeedResult result = kmeans_solution(problems[d], options);
        labels[d] = result.labels;
        total += result.cost;
        std::cout << "domain " << problems[d].domain << ": k=" << result.clusters
                  << " cost=" << io::format_double(result.cost) << "\n";
    }
    std::vector<std::pair<const DomainProblem*, const std::vector<int>*>> entries;
    for (std::size_t d = 0; d < problems.size(); ++d) entries.emplace_back(&problems[d], &labels[d]);
    io::write_partition((fs::path(out_dir) / "partition.csv").string(), entries);
    std::cout << "total seeded cost " << io::format_double(total) << "\n";
    return kExitOk;
}

int cmd_optimize(const ProblemSource& source, RunOptions options, const std::string& init_path,
                 const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(options.sa.seed);
    if (!init_path.empty()) options.initial = io::read_partition(init_path, problems);

    const RunReport report = run_optimize(problems, options);
    write_run_outputs(out_dir, problems, report);

    for (const auto& d : report.domains) {
        if (!d.error.empty()) {
            std::cout << "domain " << d.domain << ": FAILED (" << d.error << ")\n";
            continue;
        }
        std::cout << "domain " << d.domain << ": H=" << d.strata << " n=" << io::format_double(d.cost)
                  << " evaluated=" << d.trace.solutions_evaluated << " (" << io::format_double(d.seconds)
                  << "s)\n";
    }
    std::cout << "total sample size " << io::format_double(report.total_cost) << ", N_SAAsol "
              << report.n_saasol << "\n";
    return report.failures > 0 ? kExitDomainFailure : kExitOk;
}

int cmd_evaluate(const ProblemSource& source, const std::string& partition_path, bool clamp,
                 std::uint64_t seed, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(seed);
    const auto partitions = io::read_partition(partition_path, problems);

    nlohmann::json allocations = nlohmann::json::array();
    double total = 0.0;
    for (const auto& p : problems) {
        EvalOptions options;
        options.clamp = clamp;
        const Evaluation ev = evaluate(partitions.at(p.domain), p, options);
        total += ev.cost;
        allocations.push_back(io::allocation_to_json(p, ev));
        std::cout << "domain " << p.domain << ": cost=" << io::format_double(ev.cost)
                  << (ev.allocation.converged ? "" : " (allocation not converged)") << "\n";
    }
    io::save_json((fs::path(out_dir) / "allocation.json").string(),
                  nlohmann::json{{"total_cost", total}, {"domains", std::move(allocations)}});
    std::cout << "total cost " << io::format_double(total) << "\n";
    return kExitOk;
}

int cmd_brute_force(const ProblemSource& source, std::uint64_t seed, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(seed);
    nlohmann::json out = nlohmann::json::array();
    double total = 0.0;
    for (const auto& p : problems) {
        const BruteForceResult result = brute_force_optimum(p);
        total += result.cost;
        nlohmann::json entry{{"domain", p.domain},
                             {"optimal_cost", result.cost},
                             {"partitions_evaluated", result.partitions_evaluated},
                             {"tie_count", result.tie_count},
                             {"optimal_partitions", result.partitions}};
        out.push_back(std::move(entry));
        std::cout << "domain " << p.domain << ": optimum " << io::format_double(result.cost) << " over "
                  << result.partitions_evaluated << " partitions (" << result.tie_count << " argmin)\n";
    }
    io::save_json((fs::path(out_dir) / "optimum.json").string(),
                  nlohmann::json{{"total_optimal_cost", total}, {"domains", std::move(out)}});
    return kExitOk;
}

int cmd_tune(const ProblemSource& source, const std::string& ranges_path, const SaConfig& base,
             std::uint64_t seed, int workers, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    const auto problems = source.load(seed);
    const io::TuneSpec spec = io::read_tune_spec(ranges_path);

    const TuneResult result = tune(problems, spec.ranges, spec.budget, base, seed, workers);
    io::write_tune_trace((fs::path(out_dir) / "tune_trace.csv").string(), result.trace);
    io::save_json((fs::path(out_dir) / "best_config.json").string(), io::sa_config_to_json(result.best));

    double total_seconds = 0.0;
    for (const auto& rec : result.trace) total_seconds += rec.seconds;
    std::cout << result.trace.size() << " configurations evaluated in " << io::format_double(total_seconds)
              << "s\nbest cost " << io::format_double(result.best_cost) << " with maxit=" << result.best.maxit
              << " J=" << result.best.sequence_length << " t_max=" << io::format_double(result.best.t_max)
              << " dc=" << io::format_double(result.best.decrement)
              << " l_max_pct=" << io::format_double(result.best.l_max_pct)
              << " p_new=" << io::format_double(result.best.p_new) << "\n";
    return kExitOk;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out_path) {
    const auto rows = compare_runs(read_run_summary(dir_a), read_run_summary(dir_b));
    if (out_path.empty()) {
        write_compare(std::cout, rows);
    } else {
        std::ofstream out(out_path);
        if (!out) throw InputError("cannot write file: " + out_path);
        write_compare(out, rows);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint stratification and sample allocation via simulated annealing"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    int workers = 0;
    std::string out_dir;

    // build-strata
    auto* build = app.add_subcommand("build-strata", "Cross-classify a frame into per-domain atomic strata");
    ProblemSource build_source;
    build_source.add_options(build);
    build->add_option("--seed", seed, "Root seed (drives k-means binning)");
    build->add_option("--out", out_dir, "Output directory")->required();

    // seed
    auto* seed_cmd = app.add_subcommand("seed", "K-means initial stratification per domain");
    ProblemSource seed_source;
    seed_source.add_options(seed_cmd);
    SeedOptions seed_options;
    seed_cmd->add_option("--seed", seed, "Root seed");
    seed_cmd->add_option("--k-min", seed_options.k_min, "Smallest cluster count to try");
    seed_cmd->add_option("--k-max", seed_options.k_max, "Largest cluster count to try");
    seed_cmd->add_option("--restarts", seed_options.restarts, "K-means restarts per cluster count");
    seed_cmd->add_option("--out", out_dir, "Output directory")->required();

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Simulated-annealing search over all domains");
    ProblemSource optimize_source;
    optimize_source.add_options(optimize);
    std::string sa_path, init_path;
    RunOptions run_options;
    optimize->add_option("--sa", sa_path, "Annealer configuration JSON");
    optimize->add_option("--init", init_path, "Initial partition CSV (default: k-means seeding)");
    optimize->add_option("--seed", seed, "Root seed");
    optimize->add_option("--workers", workers, "Concurrent domain runs (default: cores - 1)");
    optimize->add_flag("--strict-decay", run_options.sa.strict_decay,
                       "Decay q with floor() so it always reaches 1");
    optimize->add_flag("--clamp-allocation", run_options.clamp,
                       "Clamp reported allocations into [min_units, N_h]");
    optimize->add_option("--min-units", run_options.min_units, "Lower clamp bound (with --clamp-allocation)");
    optimize->add_option("--out", out_dir, "Output directory")->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a partition file with the Bethel allocator");
    ProblemSource evaluate_source;
    evaluate_source.add_options(evaluate_cmd);
    std::string partition_path;
    bool clamp_eval = false;
    evaluate_cmd->add_option("--partition", partition_path, "Partition CSV")->required();
    evaluate_cmd->add_flag("--clamp-allocation", clamp_eval, "Clamp allocations into [min_units, N_h]");
    evaluate_cmd->add_option("--seed", seed, "Root seed (only used when building strata from --config)");
    evaluate_cmd->add_option("--out", out_dir, "Output directory")->required();

    // brute-force
    auto* brute = app.add_subcommand("brute-force", "Enumerate all partitions (small domains only)");
    ProblemSource brute_source;
    brute_source.add_options(brute);
    brute->add_option("--seed", seed, "Root seed (only used when building strata from --config)");
    brute->add_option("--out", out_dir, "Output directory")->required();

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Hyperparameter search (LHS design + local proposals)");
    ProblemSource tune_source;
    tune_source.add_options(tune_cmd);
    std::string ranges_path, tune_sa_path;
    tune_cmd->add_option("--ranges", ranges_path, "Ranges JSON (see README)")->required();
    tune_cmd->add_option("--sa", tune_sa_path, "Base annealer configuration JSON for untuned fields");
    tune_cmd->add_option("--seed", seed, "Root seed");
    tune_cmd->add_option("--workers", workers, "Concurrent domain runs inside each evaluation");
    tune_cmd->add_option("--out", out_dir, "Output directory")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Ratio table (run A / run B) from two output directories");
    std::string dir_a, dir_b, compare_out;
    compare->add_option("dir_a", dir_a, "First run directory")->required();
    compare->add_option("dir_b", dir_b, "Second run directory")->required();
    compare->add_option("--out", compare_out, "Write the table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (build->parsed()) return cmd_build_strata(build_source, seed, out_dir);
        if (seed_cmd->parsed()) return cmd_seed(seed_source, seed, seed_options, out_dir);
        if (optimize->parsed()) {
            if (!sa_path.empty()) {
                const bool strict = run_options.sa.strict_decay;
                run_options.sa = io::read_sa_config(sa_path);
                run_options.sa.strict_decay = strict;
            }
            run_options.sa.seed = seed;
            run_options.workers = workers;
            return cmd_optimize(optimize_source, std::move(run_options), init_path, out_dir);
        }
        if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate_source, partition_path, clamp_eval, seed, out_dir);
        if (brute->parsed()) return cmd_brute_force(brute_source, seed, out_dir);
        if (tune_cmd->parsed()) {
            SaConfig base;
            if (!tune_sa_path.empty()) base = io::read_sa_config(tune_sa_path);
            return cmd_tune(tune_source, ranges_path, base, seed, workers, out_dir);
        }
        if (compare->parsed()) return cmd_compare(dir_a, dir_b, compare_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
