#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stratalloc/annealer.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/frame.hpp"
#include "stratalloc/parallel.hpp"
#include "stratalloc/rng.hpp"
#include "stratalloc/seeding.hpp"

namespace stratalloc {

// One tunable hyperparameter: either a continuous interval or a discrete
// grid lower, lower+increment, ..., upper.
struct ParamRange {
    std::string name;
    bool discrete = false;
    double lower = 0.0;
    double upper = 0.0;
    double increment = 0.0;

    void validate() const {
        if (name.empty()) throw InputError("param range: missing name");
        if (!(lower <= upper)) throw InputError("param range '" + name + "': lower must be <= upper");
        if (discrete) {
            if (!(increment > 0.0)) throw InputError("param range '" + name + "': increment must be positive");
            const double span = (upper - lower) / increment;
            if (std::abs(span - std::round(span)) > 1e-9) {
                throw InputError("param range '" + name + "': increment does not divide the span");
            }
        }
    }

    std::size_t grid_size() const {
        return discrete ? static_cast<std::size_t>(std::llround((upper - lower) / increment)) + 1 : 0;
    }

    double grid_value(std::size_t index) const { return lower + static_cast<double>(index) * increment; }

    double snap(double value) const {
        value = std::clamp(value, lower, upper);
        if (!discrete) return value;
        const auto idx = static_cast<std::size_t>(std::llround((value - lower) / increment));
        return grid_value(std::min(idx, grid_size() - 1));
    }
};

struct TuneBudget {
    int n_initial = 10;
    int n_iterations = 10;

    void validate() const {
        if (n_initial < 1 || n_iterations < 1) throw InputError("tune budget: both counts must be >= 1");
    }
};

// Latin hypercube design over the ranges: per dimension the n samples occupy
// the n equal-width bins exactly once, uniformly within their bin; discrete
// dimensions snap the bin draw onto their grid.
inline std::vector<std::vector<double>> lhs_design(const std::vector<ParamRange>& ranges, int n, Rng& rng) {
    if (n < 1) throw InputError("lhs_design: need at least one sample");
    for (const auto& r : ranges) r.validate();
    std::vector<std::vector<double>> samples(n, std::vector<double>(ranges.size(), 0.0));
    for (std::size_t d = 0; d < ranges.size(); ++d) {
        std::vector<int> bins(n);
        for (int i = 0; i < n; ++i) bins[i] = i;
        for (int i = 0; i < n - 1; ++i) {
            std::swap(bins[i], bins[i + rng.below(static_cast<std::uint64_t>(n - i))]);
        }
        const ParamRange& r = ranges[d];
        for (int i = 0; i < n; ++i) {
            const double u = (static_cast<double>(bins[i]) + rng.uniform()) / static_cast<double>(n);
            if (r.discrete) {
                const std::size_t grid = r.grid_size();
                auto idx = static_cast<std::size_t>(u * static_cast<double>(grid));
                idx = std::min(idx, grid - 1);
                samples[i][d] = r.grid_value(idx);
            } else {
                samples[i][d] = r.lower + u * (r.upper - r.lower);
            }
        }
    }
    return samples;
}

struct TuneRecord {
    SaConfig config;
    double cost = 0.0;
    double seconds = 0.0;
};

struct TuneResult {
    SaConfig best;
    double best_cost = 0.0;
    std::vector<TuneRecord> trace;
};

namespace detail {

inline SaConfig config_from_values(const SaConfig& base, const std::vector<ParamRange>& ranges,
                                   const std::vector<double>& values) {
    SaConfig config = base;
    for (std::size_t d = 0; d < ranges.size(); ++d) {
        const std::string& name = ranges[d].name;
        const double v = values[d];
        if (name == "maxit") config.maxit = static_cast<int>(std::llround(v));
        else if (name == "J") config.sequence_length = static_cast<int>(std::llround(v));
        else if (name == "t_max") config.t_max = std::max(v, config.t_min);  // range may reach down to 0
        else if (name == "dc") config.decrement = v;
        else if (name == "l_max_pct") config.l_max_pct = v;
        else if (name == "p_new") config.p_new = v;
        else throw InputError("unknown hyperparameter '" + name + "' (expected maxit, J, t_max, dc, l_max_pct, p_new)");
    }
    config.validate();
    return config;
}

}  // namespace detail

// Hyperparameter search: an LHS initial design, then local random proposals
// around the incumbent best. Every configuration is scored by full annealing
// runs over all domains (total sample size); a failed run scores +infinity.
// Each domain's initial solution comes from k-means once, shared by every
// configuration.
inline TuneResult tune(const std::vector<DomainProblem>& problems, const std::vector<ParamRange>& ranges,
                       const TuneBudget& budget, const SaConfig& base, std::uint64_t seed,
                       int workers = 1) {
    budget.validate();
    if (problems.empty()) throw InputError("tune: no domains");
    Rng rng(splitmix64(seed));

    std::vector<std::vector<int>> initials(problems.size());
    parallel_for_indexed(problems.size(), workers, [&](std::size_t d) {
        SeedOptions opts;
        opts.seed = splitmix64(domain_seed(seed, d));
        initials[d] = kmeans_solution(problems[d], opts).labels;
    });

    const auto score = [&](const SaConfig& config) -> double {
        std::vector<double> costs(problems.size(), 0.0);
        parallel_for_indexed(problems.size(), workers, [&](std::size_t d) {
            SaConfig run = config;
            run.seed = domain_seed(seed, d);
            costs[d] = anneal(problems[d], initials[d], run).best_cost;
        });
        double total = 0.0;
        for (double c : costs) total += c;
        return total;
    };

    TuneResult result;
    result.best_cost = std::numeric_limits<double>::infinity();
    std::vector<double> best_values(ranges.size(), 0.0);

    const auto record = [&](const std::vector<double>& values) {
        TuneRecord rec;
        rec.config = detail::config_from_values(base, ranges, values);
        const auto started = std::chrono::steady_clock::now();
        try {
            rec.cost = score(rec.config);
        } catch (const std::exception&) {
            rec.cost = std::numeric_limits<double>::infinity();
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (rec.cost < result.best_cost) {
            result.best_cost = rec.cost;
            result.best = rec.config;
            best_values = values;
        }
        result.trace.push_back(std::move(rec));
    };

    for (const auto& values : lhs_design(ranges, budget.n_initial, rng)) record(values);

    for (int it = 0; it < budget.n_iterations; ++it) {
        std::vector<double> values = best_values;
        for (std::size_t d = 0; d < ranges.size(); ++d) {
            if (rng.uniform() < 0.5) continue;  // keep the incumbent coordinate
            const double window = 0.2 * (ranges[d].upper - ranges[d].lower);
            values[d] = ranges[d].snap(values[d] + (2.0 * rng.uniform() - 1.0) * window);
        }
        record(values);
    }
    return result;
}

}  // namespace stratalloc
