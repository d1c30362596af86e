#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stratalloc/common.hpp"
#include "stratalloc/csv.hpp"
#include "stratalloc/kmeans.hpp"
#include "stratalloc/rng.hpp"

namespace stratalloc {

// Auxiliary (stratification) column. bins > 0 marks a continuous column that
// gets k-means binned into that many classes before cross-classification.
struct AuxColumn {
    std::string name;
    int bins = 0;
};

struct FrameSchema {
    std::vector<std::string> target_columns;  // the G survey variables
    std::vector<AuxColumn> aux_columns;
    std::string domain_column;
    std::vector<double> epsilon;   // CV upper bound per target
    bool sample_variance = false;  // divide by N-1 instead of N when pooling

    void validate() const {
        if (target_columns.empty()) throw InputError("schema: at least one target column required");
        if (aux_columns.empty()) throw InputError("schema: at least one auxiliary column required");
        if (domain_column.empty()) throw InputError("schema: domain column required");
        for (const auto& t : target_columns) {
            if (t == domain_column) throw InputError("schema: domain column '" + domain_column + "' also listed as target");
        }
        for (const auto& a : aux_columns) {
            if (a.name == domain_column) throw InputError("schema: domain column '" + domain_column + "' also listed as auxiliary");
            if (a.bins < 0) throw InputError("schema: negative bin count for column '" + a.name + "'");
        }
        if (epsilon.size() != target_columns.size()) throw InputError("schema: need one CV bound per target");
        for (double e : epsilon) {
            if (!(e > 0.0)) throw InputError("schema: CV bounds must be positive");
        }
    }
};

struct FrameRecord {
    std::string domain;
    std::vector<std::string> aux_values;  // raw cell text; binned columns hold the numeric text
    std::vector<double> targets;
};

// One cell of the auxiliary cross-classification, reduced to sufficient
// statistics per target: count, sum, sum of squares.
struct AtomicStratum {
    std::vector<std::string> key;  // one label per auxiliary column
    std::string domain;
    std::int64_t count = 0;
    std::vector<double> sums;
    std::vector<double> sumsq;

    double mean(std::size_t g) const { return sums[g] / static_cast<double>(count); }

    double variance(std::size_t g, bool sample = false) const {
        const double n = static_cast<double>(count);
        const double m = sums[g] / n;
        double s2;
        if (sample) {
            s2 = count > 1 ? (sumsq[g] - sums[g] * m) / (n - 1.0) : 0.0;
        } else {
            s2 = sumsq[g] / n - m * m;
        }
        return std::max(0.0, s2);
    }

    void validate(std::size_t targets) const {
        if (count < 1) throw InputError("atomic stratum: count must be >= 1");
        if (sums.size() != targets || sumsq.size() != targets) throw InputError("atomic stratum: statistic arity mismatch");
        for (std::size_t g = 0; g < targets; ++g) {
            if (!std::isfinite(sums[g]) || !std::isfinite(sumsq[g])) throw InputError("atomic stratum: non-finite statistics");
            const double lower = sums[g] * sums[g] / static_cast<double>(count);
            const double tol = 1e-9 * std::max(1.0, std::abs(lower));
            if (sumsq[g] < lower - tol) throw InputError("atomic stratum: negative variance for target " + std::to_string(g));
        }
    }
};

// Everything one domain's optimisation needs: its atomic strata (sorted by
// key), the precision constraints and the frame totals per target.
struct DomainProblem {
    std::string domain;
    std::vector<AtomicStratum> atoms;
    std::vector<std::string> target_names;
    std::vector<std::string> aux_names;
    std::vector<double> epsilon;
    std::vector<double> totals;
    bool sample_variance = false;

    std::size_t size() const { return atoms.size(); }
    std::size_t target_count() const { return epsilon.size(); }

    void validate() const {
        if (atoms.empty()) throw InputError("domain '" + domain + "': no atomic strata");
        if (epsilon.empty()) throw InputError("domain '" + domain + "': no precision constraints");
        if (totals.size() != epsilon.size()) throw InputError("domain '" + domain + "': totals arity mismatch");
        for (double e : epsilon) {
            if (!(e > 0.0)) throw InputError("domain '" + domain + "': CV bounds must be positive");
        }
        for (const auto& a : atoms) {
            a.validate(epsilon.size());
            if (a.domain != domain) throw InputError("domain '" + domain + "': atomic stratum from domain '" + a.domain + "'");
        }
    }
};

namespace detail {

inline double parse_target(const std::string& text, const std::string& column, std::size_t lineno) {
    std::string trimmed = text;
    const auto b = trimmed.find_first_not_of(" \t");
    const auto e = trimmed.find_last_not_of(" \t");
    trimmed = b == std::string::npos ? std::string() : trimmed.substr(b, e - b + 1);
    if (trimmed.empty()) {
        throw InputError("line " + std::to_string(lineno) + ": missing value in column '" + column + "'");
    }
    const char* begin = trimmed.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + trimmed.size() || !std::isfinite(v)) {
        throw InputError("line " + std::to_string(lineno) + ": cannot parse '" + trimmed + "' in column '" + column + "' as a number");
    }
    return v;
}

}  // namespace detail

// Reads a CSV frame against the schema. Any missing/non-numeric target (or
// binned auxiliary) cell fails the load with the offending line number;
// silently zero-filling would corrupt the variances downstream.
inline std::vector<FrameRecord> load_frame(const std::string& path, const FrameSchema& schema) {
    schema.validate();
    const csv::Table table = csv::read_file(path);

    const int domain_col = table.column(schema.domain_column);
    if (domain_col < 0) throw InputError(path + ": missing domain column '" + schema.domain_column + "'");
    std::vector<int> target_cols;
    for (const auto& t : schema.target_columns) {
        const int c = table.column(t);
        if (c < 0) throw InputError(path + ": missing target column '" + t + "'");
        target_cols.push_back(c);
    }
    std::vector<int> aux_cols;
    for (const auto& a : schema.aux_columns) {
        const int c = table.column(a.name);
        if (c < 0) throw InputError(path + ": missing auxiliary column '" + a.name + "'");
        aux_cols.push_back(c);
    }

    std::vector<FrameRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t lineno = r + 2;  // header is line 1
        FrameRecord rec;
        rec.domain = row[domain_col];
        rec.targets.reserve(target_cols.size());
        for (std::size_t g = 0; g < target_cols.size(); ++g) {
            rec.targets.push_back(detail::parse_target(row[target_cols[g]], schema.target_columns[g], lineno));
        }
        rec.aux_values.reserve(aux_cols.size());
        for (std::size_t a = 0; a < aux_cols.size(); ++a) {
            if (schema.aux_columns[a].bins > 0) {
                detail::parse_target(row[aux_cols[a]], schema.aux_columns[a].name, lineno);
            }
            rec.aux_values.push_back(row[aux_cols[a]]);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// 1-D k-means binning of a continuous column. Labels are 0-based cluster
// indices ordered by cluster centre, so label 0 holds the smallest values.
// Identical values always land in the same cluster.
inline std::vector<int> bin_continuous(const std::vector<double>& values, int k, std::uint64_t seed) {
    if (k < 1) throw InputError("bin_continuous: k must be >= 1");
    std::vector<double> unique = values;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (static_cast<std::size_t>(k) > unique.size()) {
        throw InputError("bin_continuous: k=" + std::to_string(k) + " exceeds " + std::to_string(unique.size()) + " distinct values");
    }

    std::vector<std::vector<double>> points;
    points.reserve(unique.size());
    std::vector<double> weights(unique.size(), 0.0);
    std::map<double, std::size_t> index;
    for (std::size_t i = 0; i < unique.size(); ++i) {
        points.push_back({unique[i]});
        index[unique[i]] = i;
    }
    for (double v : values) weights[index[v]] += 1.0;

    Rng rng(seed);
    const KmeansResult result = kmeans(points, weights, k, 10, rng);

    // Re-rank cluster ids by centre so the labelling is canonical.
    std::vector<int> order(result.centers.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return result.centers[a][0] < result.centers[b][0]; });
    std::vector<int> rank(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);

    std::vector<int> labels;
    labels.reserve(values.size());
    for (double v : values) labels.push_back(rank[result.labels[index[v]]]);
    return labels;
}

// Cross-classifies the auxiliary columns (binning continuous ones first) and
// accumulates per-cell sufficient statistics, split by domain. Only observed
// cells are materialised. Domains come back sorted by label, atomic strata
// sorted by key.
inline std::vector<DomainProblem> build_atomic_strata(const std::vector<FrameRecord>& records,
                                                      const FrameSchema& schema,
                                                      std::uint64_t seed = 0) {
    schema.validate();
    if (records.empty()) throw InputError("build_atomic_strata: no records");
    const std::size_t targets = schema.target_columns.size();

    // Bin each continuous auxiliary over the whole frame, not per domain.
    std::vector<std::vector<std::string>> aux_labels(schema.aux_columns.size());
    for (std::size_t a = 0; a < schema.aux_columns.size(); ++a) {
        auto& out = aux_labels[a];
        out.reserve(records.size());
        if (schema.aux_columns[a].bins > 0) {
            std::vector<double> values;
            values.reserve(records.size());
            for (const auto& rec : records) values.push_back(std::strtod(rec.aux_values[a].c_str(), nullptr));
            const auto bins = bin_continuous(values, schema.aux_columns[a].bins, splitmix64(seed ^ (a + 1)));
            for (int b : bins) out.push_back(std::to_string(b + 1));
        } else {
            for (const auto& rec : records) out.push_back(rec.aux_values[a]);
        }
    }

    std::map<std::string, std::map<std::vector<std::string>, AtomicStratum>> cells;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        std::vector<std::string> key;
        key.reserve(schema.aux_columns.size());
        for (std::size_t a = 0; a < schema.aux_columns.size(); ++a) key.push_back(aux_labels[a][r]);

        auto& cell = cells[rec.domain][key];
        if (cell.count == 0) {
            cell.key = key;
            cell.domain = rec.domain;
            cell.sums.assign(targets, 0.0);
            cell.sumsq.assign(targets, 0.0);
        }
        cell.count += 1;
        for (std::size_t g = 0; g < targets; ++g) {
            cell.sums[g] += rec.targets[g];
            cell.sumsq[g] += rec.targets[g] * rec.targets[g];
        }
    }

    std::vector<DomainProblem> problems;
    problems.reserve(cells.size());
    for (auto& [domain, strata] : cells) {
        DomainProblem p;
        p.domain = domain;
        p.target_names = schema.target_columns;
        for (const auto& a : schema.aux_columns) p.aux_names.push_back(a.name);
        p.epsilon = schema.epsilon;
        p.sample_variance = schema.sample_variance;
        p.totals.assign(targets, 0.0);
        p.atoms.reserve(strata.size());
        for (auto& [key, cell] : strata) {
            for (std::size_t g = 0; g < targets; ++g) p.totals[g] += cell.sums[g];
            p.atoms.push_back(std::move(cell));
        }
        p.validate();
        problems.push_back(std::move(p));
    }
    return problems;
}

}  // namespace stratalloc
