#pragma once

// Synthetic domain problems for tests: random atomic strata with plausible
// sufficient statistics, optionally drawn around a few latent cluster centres
// so that stratification has structure worth finding.

#include <cstdint>
#include <string>
#include <vector>

#include "stratalloc/frame.hpp"
#include "stratalloc/rng.hpp"

namespace testsupport {

struct SyntheticSpec {
    int atoms = 6;
    int targets = 1;
    double epsilon = 0.05;
    int latent_clusters = 3;  // 0 = fully uniform means
    std::uint64_t seed = 1;
};

inline stratalloc::DomainProblem make_problem(const SyntheticSpec& spec) {
    stratalloc::Rng rng(stratalloc::splitmix64(spec.seed));
    stratalloc::DomainProblem problem;
    problem.domain = "synthetic-" + std::to_string(spec.seed);
    problem.sample_variance = false;
    for (int g = 0; g < spec.targets; ++g) {
        problem.target_names.push_back("y" + std::to_string(g + 1));
        problem.epsilon.push_back(spec.epsilon);
    }

    std::vector<std::vector<double>> centres;
    for (int c = 0; c < spec.latent_clusters; ++c) {
        std::vector<double> centre;
        for (int g = 0; g < spec.targets; ++g) centre.push_back(10.0 + 100.0 * rng.uniform());
        centres.push_back(std::move(centre));
    }

    problem.totals.assign(spec.targets, 0.0);
    for (int i = 0; i < spec.atoms; ++i) {
        stratalloc::AtomicStratum atom;
        atom.key = {std::to_string(i + 1)};
        atom.domain = problem.domain;
        atom.count = 20 + static_cast<std::int64_t>(rng.below(181));
        const double n = static_cast<double>(atom.count);
        for (int g = 0; g < spec.targets; ++g) {
            double mean;
            if (spec.latent_clusters > 0) {
                const auto& centre = centres[rng.below(centres.size())];
                mean = centre[g] * (0.9 + 0.2 * rng.uniform());
            } else {
                mean = 10.0 + 100.0 * rng.uniform();
            }
            const double sd = (0.05 + 0.35 * rng.uniform()) * mean;
            atom.sums.push_back(n * mean);
            atom.sumsq.push_back(n * (sd * sd + mean * mean));
            problem.totals[g] += atom.sums.back();
        }
        problem.atoms.push_back(std::move(atom));
    }
    problem.validate();
    return problem;
}

// Random labels over at most max_strata strata, renumbered contiguously in
// first-appearance order.
inline std::vector<int> random_labels(std::size_t atoms, int max_strata, stratalloc::Rng& rng) {
    std::vector<int> raw(atoms);
    for (auto& l : raw) l = static_cast<int>(rng.below(max_strata));
    std::vector<int> remap(max_strata, 0);
    std::vector<int> labels(atoms);
    int next = 0;
    for (std::size_t i = 0; i < atoms; ++i) {
        if (remap[raw[i]] == 0) remap[raw[i]] = ++next;
        labels[i] = remap[raw[i]];
    }
    return labels;
}

}  // namespace testsupport
