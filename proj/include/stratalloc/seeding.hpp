#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "stratalloc/allocation.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/frame.hpp"
#include "stratalloc/kmeans.hpp"
#include "stratalloc/rng.hpp"

namespace stratalloc {

struct SeedResult {
    std::vector<int> labels;
    double cost = 0.0;
    int clusters = 0;
    std::vector<std::pair<int, double>> sweep;  // (k, evaluated cost) per candidate
};

struct SeedOptions {
    int k_min = 2;
    int k_max = 25;  // clamped to L
    int restarts = 10;
    std::uint64_t seed = 0;
};

// Initial solution by clustering atomic strata on their standardised target
// means and keeping the cluster count whose partition allocates the smallest
// sample. Targets with zero spread across atomic strata are dropped from the
// feature space (they cannot separate anything).
inline SeedResult kmeans_solution(const DomainProblem& problem, const SeedOptions& options = {}) {
    const std::size_t atoms = problem.size();
    const std::size_t targets = problem.target_count();
    if (options.k_min < 1 || options.k_min > options.k_max) {
        throw InputError("kmeans_solution: need 1 <= k_min <= k_max");
    }
    const int k_min = std::min<int>(options.k_min, static_cast<int>(atoms));
    const int k_max = std::min<int>(options.k_max, static_cast<int>(atoms));

    // Standardised feature matrix: one row per atomic stratum.
    std::vector<double> mean(targets, 0.0), sd(targets, 0.0);
    for (const auto& a : problem.atoms) {
        for (std::size_t g = 0; g < targets; ++g) mean[g] += a.mean(g);
    }
    for (std::size_t g = 0; g < targets; ++g) mean[g] /= static_cast<double>(atoms);
    for (const auto& a : problem.atoms) {
        for (std::size_t g = 0; g < targets; ++g) {
            const double d = a.mean(g) - mean[g];
            sd[g] += d * d;
        }
    }
    std::vector<std::size_t> kept;
    for (std::size_t g = 0; g < targets; ++g) {
        sd[g] = std::sqrt(sd[g] / static_cast<double>(atoms));
        if (sd[g] > 0.0) {
            kept.push_back(g);
        } else {
            std::cerr << "kmeans_solution: target " << g + 1 << " has zero spread across atomic strata; dropped from clustering\n";
        }
    }

    SeedResult best;
    if (kept.empty() || atoms == 1) {
        // Nothing to separate: a single stratum is as good as any partition.
        best.labels.assign(atoms, 1);
        best.clusters = 1;
        best.cost = evaluate(best.labels, problem).cost;
        best.sweep.emplace_back(1, best.cost);
        return best;
    }

    std::vector<std::vector<double>> features(atoms, std::vector<double>(kept.size(), 0.0));
    for (std::size_t i = 0; i < atoms; ++i) {
        for (std::size_t f = 0; f < kept.size(); ++f) {
            features[i][f] = (problem.atoms[i].mean(kept[f]) - mean[kept[f]]) / sd[kept[f]];
        }
    }
    const std::vector<double> weights(atoms, 1.0);

    Rng rng(options.seed);
    best.cost = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        const KmeansResult clustering = kmeans(features, weights, k, options.restarts, rng);
        // Canonical labelling: clusters renumbered 1..k in order of first appearance.
        std::vector<int> remap(k, 0);
        std::vector<int> labels(atoms, 0);
        int next_label = 0;
        for (std::size_t i = 0; i < atoms; ++i) {
            int& slot = remap[clustering.labels[i]];
            if (slot == 0) slot = ++next_label;
            labels[i] = slot;
        }
        const double cost = evaluate(labels, problem).cost;
        best.sweep.emplace_back(k, cost);
        if (cost < best.cost) {
            best.cost = cost;
            best.labels = std::move(labels);
            best.clusters = next_label;
        }
    }
    return best;
}

}  // namespace stratalloc
