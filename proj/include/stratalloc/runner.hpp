#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratalloc/annealer.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/io.hpp"
#include "stratalloc/parallel.hpp"
#include "stratalloc/rng.hpp"
#include "stratalloc/seeding.hpp"

namespace stratalloc {

struct RunOptions {
    SaConfig sa;        // sa.seed is the root seed; per-domain streams derive from it
    int workers = 0;    // 0 = hardware concurrency - 1
    SeedOptions seeding;  // used when no initial partition is supplied
    std::map<std::string, std::vector<int>> initial;  // optional per-domain initial labels
    bool clamp = false;
    double min_units = 2.0;
};

struct DomainRunResult {
    std::string domain;
    std::size_t atoms = 0;
    int strata = 0;
    double cost = 0.0;
    std::vector<int> labels;
    Evaluation evaluation;         // cold re-evaluation of the returned solution
    std::vector<double> cv;
    AnnealTrace trace;
    double seconds = 0.0;
    std::string error;             // nonempty when the domain failed
};

struct RunReport {
    std::vector<DomainRunResult> domains;
    double total_cost = 0.0;
    std::int64_t solutions_evaluated = 0;
    std::int64_t n_saasol = 0;  // D * maxit * J
    std::uint64_t root_seed = 0;
    int failures = 0;
};

// Optimises every domain independently: k-means seed (or the supplied initial
// partition), one annealing run, then a cold re-evaluation of the best
// solution for reporting. Domains run concurrently; each uses its own RNG
// stream derived from the root seed and the domain index, so results do not
// depend on the worker count.
inline RunReport run_optimize(const std::vector<DomainProblem>& problems, const RunOptions& options) {
    options.sa.validate();
    RunReport report;
    report.root_seed = options.sa.seed;
    report.domains.resize(problems.size());
    report.n_saasol = static_cast<std::int64_t>(problems.size()) * options.sa.maxit * options.sa.sequence_length;

    const int workers = options.workers > 0 ? options.workers : default_workers();
    parallel_for_indexed(problems.size(), workers, [&](std::size_t d) {
        const DomainProblem& problem = problems[d];
        DomainRunResult& out = report.domains[d];
        out.domain = problem.domain;
        out.atoms = problem.size();
        const auto started = std::chrono::steady_clock::now();
        try {
            std::vector<int> initial;
            if (const auto it = options.initial.find(problem.domain); it != options.initial.end()) {
                check_labels(it->second, problem.size());
                initial = it->second;
            } else {
                SeedOptions seeding = options.seeding;
                seeding.seed = splitmix64(domain_seed(options.sa.seed, d));
                initial = kmeans_solution(problem, seeding).labels;
            }

            SaConfig config = options.sa;
            config.seed = domain_seed(options.sa.seed, d);
            AnnealResult annealed = anneal(problem, initial, config);

            EvalOptions eval_options;
            eval_options.clamp = options.clamp;
            eval_options.min_units = options.min_units;
            out.evaluation = evaluate(annealed.best_labels, problem, eval_options);
            out.cv = achieved_cv(out.evaluation.allocation, out.evaluation.summaries, problem.totals);
            out.labels = std::move(annealed.best_labels);
            out.strata = stratum_count(out.labels);
            out.cost = out.evaluation.cost;
            out.trace = std::move(annealed.trace);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    });

    for (const auto& d : report.domains) {
        if (!d.error.empty()) {
            report.failures += 1;
            continue;
        }
        report.total_cost += d.cost;
        report.solutions_evaluated += d.trace.solutions_evaluated;
    }
    return report;
}

// The deterministic part of the run report: everything except wall times,
// byte-stable across reruns with the same seed and worker count.
inline void write_report(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << "# root_seed=" << report.root_seed << "\n";
    out << "# n_saasol=" << report.n_saasol << "\n";
    out << "domain,atomic_strata,strata,sample_size,solutions_evaluated\n";
    for (const auto& d : report.domains) {
        if (!d.error.empty()) continue;
        out << csv::escape(d.domain) << ',' << d.atoms << ',' << d.strata << ',' << io::format_double(d.cost)
            << ',' << d.trace.solutions_evaluated << '\n';
    }
    out << "TOTAL,,," << io::format_double(report.total_cost) << ',' << report.solutions_evaluated << '\n';
}

// Wall times live in their own file so the report proper stays byte-stable.
inline void write_timings(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << "domain,seconds\n";
    double total = 0.0;
    for (const auto& d : report.domains) {
        if (!d.error.empty()) continue;
        out << csv::escape(d.domain) << ',' << io::format_double(d.seconds) << '\n';
        total += d.seconds;
    }
    out << "TOTAL," << io::format_double(total) << '\n';
}

struct RunSummary {
    std::map<std::string, double> sample_by_domain;
    double total_sample = 0.0;
    double total_seconds = 0.0;
    double total_tuning_seconds = 0.0;  // equals total_seconds when the dir has no tune trace
};

// Reads report.csv/timings.csv (and tune_trace.csv when present) from an
// output directory produced by `optimize` or `tune`.
inline RunSummary read_run_summary(const std::string& dir) {
    namespace fs = std::filesystem;
    RunSummary summary;
    const std::string report_path = (fs::path(dir) / "report.csv").string();
    {
        std::ifstream in(report_path);
        if (!in) throw InputError("cannot open " + report_path);
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!header_seen) {
                header_seen = true;
                continue;
            }
            const auto fields = csv::parse_line(line);
            if (fields.size() < 4) throw InputError(report_path + ": malformed row '" + line + "'");
            if (fields[0] == "TOTAL") {
                summary.total_sample = std::stod(fields[3]);
            } else {
                summary.sample_by_domain[fields[0]] = std::stod(fields[3]);
            }
        }
    }
    const std::string timings_path = (fs::path(dir) / "timings.csv").string();
    if (std::ifstream in(timings_path); in) {
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = csv::parse_line(line);
            if (fields.size() >= 2 && fields[0] == "TOTAL") summary.total_seconds = std::stod(fields[1]);
        }
    }
    summary.total_tuning_seconds = summary.total_seconds;
    const std::string tune_path = (fs::path(dir) / "tune_trace.csv").string();
    if (std::ifstream in(tune_path); in) {
        std::string line;
        std::getline(in, line);  // header
        double total = 0.0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = csv::parse_line(line);
            if (!fields.empty()) total += std::stod(fields.back());
        }
        summary.total_tuning_seconds = total;
    }
    return summary;
}

struct CompareRow {
    std::string domain;  // "TOTAL" for the aggregate row
    double sample_ratio = 0.0;
    std::optional<double> time_ratio;
    std::optional<double> total_time_ratio;
};

// Ratio table A/B, one row per domain plus a TOTAL row carrying the
// execution-time and total-execution-time ratios.
inline std::vector<CompareRow> compare_runs(const RunSummary& a, const RunSummary& b) {
    std::string missing;
    for (const auto& [domain, _] : a.sample_by_domain) {
        if (!b.sample_by_domain.count(domain)) missing += " " + domain;
    }
    for (const auto& [domain, _] : b.sample_by_domain) {
        if (!a.sample_by_domain.count(domain)) missing += " " + domain;
    }
    if (!missing.empty()) throw InputError("runs cover different domains:" + missing);

    std::vector<CompareRow> rows;
    for (const auto& [domain, sample] : a.sample_by_domain) {
        CompareRow row;
        row.domain = domain;
        row.sample_ratio = sample / b.sample_by_domain.at(domain);
        rows.push_back(row);
    }
    CompareRow total;
    total.domain = "TOTAL";
    total.sample_ratio = a.total_sample / b.total_sample;
    if (a.total_seconds > 0.0 && b.total_seconds > 0.0) total.time_ratio = a.total_seconds / b.total_seconds;
    if (a.total_tuning_seconds > 0.0 && b.total_tuning_seconds > 0.0) {
        total.total_time_ratio = a.total_tuning_seconds / b.total_tuning_seconds;
    }
    rows.push_back(total);
    return rows;
}

inline void write_compare(std::ostream& out, const std::vector<CompareRow>& rows) {
    out << "domain,sample_ratio,time_ratio,total_time_ratio\n";
    char buf[32];
    const auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    for (const auto& row : rows) {
        out << csv::escape(row.domain) << ',' << fmt(row.sample_ratio) << ','
            << (row.time_ratio ? fmt(*row.time_ratio) : std::string()) << ','
            << (row.total_time_ratio ? fmt(*row.total_time_ratio) : std::string()) << '\n';
    }
}

}  // namespace stratalloc
