#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratalloc/common.hpp"
#include "stratalloc/frame.hpp"

namespace stratalloc {

// Stratum labels are 1-based and contiguous throughout: a partition of L
// atomic strata into H strata is a length-L vector with values in 1..H and
// every value present. Stratum h lives at index h-1 in summary arrays.

inline constexpr double kBethelEpsilon = 1e-11;
inline constexpr int kBethelMaxIter = 200;

struct StratumSummary {
    std::int64_t population = 0;         // N_h
    std::vector<double> mean;            // per target
    std::vector<double> variance;        // per target, >= 0
    std::vector<std::int32_t> members;   // atomic-stratum indices, ascending
};

// The transformed constraint coefficients: xi[h][g] makes each CV constraint
// linear in 1/n_h.
struct XiMatrix {
    std::size_t strata = 0;
    std::size_t targets = 0;
    std::vector<double> values;        // row-major, strata x targets
    std::vector<double> denominators;  // per target

    double at(std::size_t h, std::size_t g) const { return values[h * targets + g]; }
};

struct Allocation {
    std::vector<double> stratum_n;  // continuous sample size per stratum
    double total = 0.0;             // sum of stratum_n
    std::vector<double> alphas;     // normalised Lagrange weights, sum to 1
    int iterations = 0;
    bool converged = false;
};

inline void check_labels(const std::vector<int>& labels, std::size_t expected_size) {
    if (labels.size() != expected_size) {
        throw InputError("partition has " + std::to_string(labels.size()) + " labels, expected " + std::to_string(expected_size));
    }
    int max_label = 0;
    for (int l : labels) {
        if (l < 1) throw InputError("stratum labels must be >= 1");
        max_label = std::max(max_label, l);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_label), false);
    for (int l : labels) seen[l - 1] = true;
    for (int h = 0; h < max_label; ++h) {
        if (!seen[h]) throw InputError("stratum labels not contiguous: label " + std::to_string(h + 1) + " missing");
    }
}

inline int stratum_count(const std::vector<int>& labels) {
    int h = 0;
    for (int l : labels) h = std::max(h, l);
    return h;
}

// Builds a stratum summary from its member atomic strata. Members must be
// ascending: the summation order is part of the cache contract (rebuilding a
// stratum reproduces it bit for bit).
inline StratumSummary summarize_stratum(const std::vector<AtomicStratum>& atoms,
                                        std::vector<std::int32_t> members, bool sample_variance) {
    if (members.empty()) throw std::logic_error("empty stratum: labels must be relabeled before pooling");
    const std::size_t targets = atoms[members[0]].sums.size();
    StratumSummary s;
    s.members = std::move(members);
    std::vector<double> sums(targets, 0.0), sumsq(targets, 0.0);
    for (std::int32_t id : s.members) {
        const AtomicStratum& a = atoms[id];
        s.population += a.count;
        for (std::size_t g = 0; g < targets; ++g) {
            sums[g] += a.sums[g];
            sumsq[g] += a.sumsq[g];
        }
    }
    const double n = static_cast<double>(s.population);
    s.mean.resize(targets);
    s.variance.resize(targets);
    for (std::size_t g = 0; g < targets; ++g) {
        const double m = sums[g] / n;
        s.mean[g] = m;
        double v;
        if (sample_variance) {
            v = s.population > 1 ? (sumsq[g] - sums[g] * m) / (n - 1.0) : 0.0;
        } else {
            v = sumsq[g] / n - m * m;
        }
        s.variance[g] = std::max(0.0, v);  // clamp numerical noise
    }
    return s;
}

// Pools atomic strata into per-stratum summaries for a full partition.
inline std::vector<StratumSummary> pool_summaries(const std::vector<AtomicStratum>& atoms,
                                                  const std::vector<int>& labels,
                                                  bool sample_variance = false) {
    check_labels(labels, atoms.size());
    const int strata = stratum_count(labels);
    std::vector<std::vector<std::int32_t>> members(strata);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[labels[i] - 1].push_back(static_cast<std::int32_t>(i));
    }
    std::vector<StratumSummary> out;
    out.reserve(strata);
    for (int h = 0; h < strata; ++h) {
        out.push_back(summarize_stratum(atoms, std::move(members[h]), sample_variance));
    }
    return out;
}

// xi[h][g] = N_h^2 S^2_hg / (T_g^2 eps_g^2 + sum_h N_h S^2_hg). The expected
// total is taken as the frame total, so the denominator uses its square.
inline XiMatrix compute_xi(const std::vector<const StratumSummary*>& summaries,
                           const std::vector<double>& epsilon, const std::vector<double>& totals) {
    const std::size_t strata = summaries.size();
    const std::size_t targets = epsilon.size();
    if (totals.size() != targets) throw InputError("compute_xi: totals arity mismatch");
    XiMatrix xi;
    xi.strata = strata;
    xi.targets = targets;
    xi.values.assign(strata * targets, 0.0);
    xi.denominators.assign(targets, 0.0);
    for (std::size_t g = 0; g < targets; ++g) {
        if (!(epsilon[g] > 0.0)) throw InputError("compute_xi: CV bounds must be positive");
        double pooled = 0.0;
        for (const auto* s : summaries) pooled += static_cast<double>(s->population) * s->variance[g];
        xi.denominators[g] = totals[g] * totals[g] * epsilon[g] * epsilon[g] + pooled;
    }
    for (std::size_t h = 0; h < strata; ++h) {
        const double pop = static_cast<double>(summaries[h]->population);
        for (std::size_t g = 0; g < targets; ++g) {
            const double d = xi.denominators[g];
            xi.values[h * targets + g] = d > 0.0 ? pop * pop * summaries[h]->variance[g] / d : 0.0;
        }
    }
    return xi;
}

inline XiMatrix compute_xi(const std::vector<StratumSummary>& summaries,
                           const std::vector<double>& epsilon, const std::vector<double>& totals) {
    std::vector<const StratumSummary*> view;
    view.reserve(summaries.size());
    for (const auto& s : summaries) view.push_back(&s);
    return compute_xi(view, epsilon, totals);
}

// Bethel-Chromy fixed point. From the current weights alpha the closed form
// gives n_h = sqrt(sum_g alpha_g xi_hg / c_h) * sum_h' sqrt(c_h' sum_g
// alpha_g xi_h'g); alpha is then rescaled by the squared slack of each
// constraint and renormalised, until the largest alpha step drops below
// eps_conv or max_iter is hit. Strata with zero weighted xi get n_h = 0.
inline Allocation bethel_allocate(const XiMatrix& xi, std::vector<double> alpha0 = {},
                                  double eps_conv = kBethelEpsilon, int max_iter = kBethelMaxIter,
                                  const std::vector<double>& stratum_costs = {}) {
    const std::size_t strata = xi.strata;
    const std::size_t targets = xi.targets;
    if (!stratum_costs.empty() && stratum_costs.size() != strata) {
        throw InputError("bethel_allocate: stratum cost arity mismatch");
    }
    const auto cost_of = [&](std::size_t h) { return stratum_costs.empty() ? 1.0 : stratum_costs[h]; };

    Allocation out;
    out.stratum_n.assign(strata, 0.0);
    if (alpha0.empty()) {
        out.alphas.assign(targets, 1.0 / static_cast<double>(targets));
    } else {
        if (alpha0.size() != targets) throw InputError("bethel_allocate: alpha warm start arity mismatch");
        double total = 0.0;
        for (double a : alpha0) {
            if (a < 0.0 || !std::isfinite(a)) throw InputError("bethel_allocate: alpha warm start must be nonnegative");
            total += a;
        }
        if (total <= 0.0) {
            out.alphas.assign(targets, 1.0 / static_cast<double>(targets));
        } else {
            out.alphas = std::move(alpha0);
            for (double& a : out.alphas) a /= total;
        }
    }

    bool any_positive = false;
    for (double v : xi.values) {
        if (v > 0.0) {
            any_positive = true;
            break;
        }
    }
    if (!any_positive) {
        out.converged = true;  // nothing to sample for variance
        return out;
    }

    std::vector<double> weighted(strata, 0.0);
    const auto compute_n = [&](const std::vector<double>& alpha) {
        for (std::size_t h = 0; h < strata; ++h) {
            double a = 0.0;
            for (std::size_t g = 0; g < targets; ++g) a += alpha[g] * xi.at(h, g);
            weighted[h] = a;
        }
        double den2 = 0.0;
        for (std::size_t h = 0; h < strata; ++h) {
            if (weighted[h] > 0.0) den2 += std::sqrt(cost_of(h) * weighted[h]);
        }
        for (std::size_t h = 0; h < strata; ++h) {
            out.stratum_n[h] = weighted[h] > 0.0 ? std::sqrt(weighted[h] / cost_of(h)) * den2 : 0.0;
        }
    };

    std::vector<double> next(targets, 0.0);
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        compute_n(out.alphas);
        double scale = 0.0;
        for (std::size_t g = 0; g < targets; ++g) {
            double slack = 0.0;
            for (std::size_t h = 0; h < strata; ++h) {
                if (out.stratum_n[h] > 0.0) slack += xi.at(h, g) / out.stratum_n[h];
            }
            next[g] = out.alphas[g] * slack * slack;
            scale += next[g];
        }
        double diff = 0.0;
        for (std::size_t g = 0; g < targets; ++g) {
            next[g] = scale > 0.0 ? next[g] / scale : 1.0 / static_cast<double>(targets);
            diff = std::max(diff, std::abs(next[g] - out.alphas[g]));
            out.alphas[g] = next[g];
        }
        if (diff < eps_conv) {
            out.converged = true;
            break;
        }
    }
    if (out.iterations > max_iter) out.iterations = max_iter;

    compute_n(out.alphas);
    out.total = 0.0;
    for (double n : out.stratum_n) out.total += n;
    return out;
}

// Achieved coefficient of variation per target under the allocation, using
// the finite-population-corrected variance of the estimated total. A stratum
// with n_h = 0 but positive variance makes the target infeasible (infinite
// CV).
inline std::vector<double> achieved_cv(const Allocation& alloc,
                                       const std::vector<StratumSummary>& summaries,
                                       const std::vector<double>& totals) {
    const std::size_t targets = totals.size();
    std::vector<double> cv(targets, 0.0);
    for (std::size_t g = 0; g < targets; ++g) {
        double var = 0.0;
        bool infeasible = false;
        for (std::size_t h = 0; h < summaries.size(); ++h) {
            const double s2 = summaries[h].variance[g];
            const double n = alloc.stratum_n[h];
            if (n <= 0.0) {
                if (s2 > 0.0) infeasible = true;
                continue;
            }
            const double pop = static_cast<double>(summaries[h].population);
            var += pop * pop * (1.0 - n / pop) * s2 / n;
        }
        if (infeasible) {
            cv[g] = std::numeric_limits<double>::infinity();
        } else if (totals[g] != 0.0) {
            cv[g] = std::sqrt(std::max(0.0, var)) / std::abs(totals[g]);
        } else {
            cv[g] = var > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
    }
    return cv;
}

struct EvalOptions {
    std::vector<double> alpha0;          // warm start; empty = uniform
    std::vector<double> stratum_costs;   // per-stratum unit costs; empty = 1
    bool clamp = false;                  // clamp n_h into [min_units, N_h]
    double min_units = 2.0;
    double eps_conv = kBethelEpsilon;
    int max_iter = kBethelMaxIter;
};

struct Evaluation {
    double cost = 0.0;  // sum of c_h n_h (unit costs by default)
    Allocation allocation;
    std::vector<StratumSummary> summaries;
};

inline void clamp_allocation(Allocation& alloc, const std::vector<StratumSummary>& summaries,
                             double min_units) {
    for (std::size_t h = 0; h < alloc.stratum_n.size(); ++h) {
        const double pop = static_cast<double>(summaries[h].population);
        alloc.stratum_n[h] = std::min(std::max(alloc.stratum_n[h], std::min(min_units, pop)), pop);
    }
    alloc.total = 0.0;
    for (double n : alloc.stratum_n) alloc.total += n;
}

// Full evaluation of a partition: pool, transform, allocate.
inline Evaluation evaluate(const std::vector<int>& labels, const DomainProblem& problem,
                           const EvalOptions& options = {}) {
    Evaluation ev;
    ev.summaries = pool_summaries(problem.atoms, labels, problem.sample_variance);
    const XiMatrix xi = compute_xi(ev.summaries, problem.epsilon, problem.totals);
    ev.allocation = bethel_allocate(xi, options.alpha0, options.eps_conv, options.max_iter, options.stratum_costs);
    if (options.clamp) clamp_allocation(ev.allocation, ev.summaries, options.min_units);
    if (options.stratum_costs.empty()) {
        ev.cost = ev.allocation.total;
    } else {
        ev.cost = 0.0;
        for (std::size_t h = 0; h < ev.allocation.stratum_n.size(); ++h) {
            ev.cost += options.stratum_costs[h] * ev.allocation.stratum_n[h];
        }
    }
    return ev;
}

}  // namespace stratalloc
