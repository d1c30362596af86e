#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stratalloc/allocation.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/frame.hpp"

namespace stratalloc {

// Bell(12) = 4,213,597 partitions: the largest instance worth enumerating.
inline constexpr int kMaxEnumerableAtoms = 12;

// Iterates every set partition of n items exactly once, as restricted growth
// strings: labels[0] = 1 and labels[i] <= 1 + max(labels[0..i-1]).
//
//   PartitionEnumerator e(n);
//   while (e.next()) { use(e.labels()); }
class PartitionEnumerator {
  public:
    explicit PartitionEnumerator(int n) : n_(n) {
        if (n < 1) throw InputError("partition enumeration: need at least one item");
        if (n > kMaxEnumerableAtoms) {
            throw InputError("partition enumeration capped at " + std::to_string(kMaxEnumerableAtoms) +
                             " items (Bell numbers grow too fast); got " + std::to_string(n));
        }
        labels_.assign(n_, 1);
        prefix_max_.assign(n_, 1);
    }

    const std::vector<int>& labels() const { return labels_; }

    bool next() {
        if (!started_) {
            started_ = true;
            return true;  // all-ones string
        }
        // Find the rightmost position that can still be incremented.
        for (int i = n_ - 1; i >= 1; --i) {
            if (labels_[i] <= prefix_max_[i - 1]) {
                labels_[i] += 1;
                prefix_max_[i] = std::max(prefix_max_[i - 1], labels_[i]);
                for (int j = i + 1; j < n_; ++j) {
                    labels_[j] = 1;
                    prefix_max_[j] = prefix_max_[j - 1];
                }
                return true;
            }
        }
        return false;
    }

  private:
    int n_;
    bool started_ = false;
    std::vector<int> labels_;
    std::vector<int> prefix_max_;
};

struct BruteForceResult {
    double cost = 0.0;
    std::vector<std::vector<int>> partitions;  // argmin partitions, up to kMaxReportedTies
    std::int64_t tie_count = 0;                // total argmin partitions found
    std::int64_t partitions_evaluated = 0;
};

inline constexpr std::int64_t kMaxReportedTies = 1000;

// Exact optimum by exhausting every stratification. Argmin ties (within 1e-9
// relative of the optimum) are all counted; the first kMaxReportedTies are
// materialised.
inline BruteForceResult brute_force_optimum(const DomainProblem& problem,
                                            const EvalOptions& options = {}) {
    const int n = static_cast<int>(problem.size());
    PartitionEnumerator e(n);
    BruteForceResult best;
    best.cost = std::numeric_limits<double>::infinity();
    const auto band = [](double cost) { return 1e-9 * std::max(1.0, std::abs(cost)); };

    // Aligned with tie_costs; an empty vector marks a tie beyond the
    // materialisation cap.
    std::vector<double> tie_costs;
    std::vector<std::vector<int>> tie_labels;
    std::int64_t materialised = 0;
    while (e.next()) {
        best.partitions_evaluated += 1;
        const double cost = evaluate(e.labels(), problem, options).cost;
        if (cost < best.cost) {
            best.cost = cost;
            // Earlier near-ties may fall outside the tighter band.
            std::size_t kept = 0;
            materialised = 0;
            for (std::size_t i = 0; i < tie_costs.size(); ++i) {
                if (tie_costs[i] <= best.cost + band(best.cost)) {
                    tie_costs[kept] = tie_costs[i];
                    tie_labels[kept] = std::move(tie_labels[i]);
                    if (!tie_labels[kept].empty()) ++materialised;
                    ++kept;
                }
            }
            tie_costs.resize(kept);
            tie_labels.resize(kept);
        }
        if (cost <= best.cost + band(best.cost)) {
            tie_costs.push_back(cost);
            if (materialised < kMaxReportedTies) {
                tie_labels.push_back(e.labels());
                ++materialised;
            } else {
                tie_labels.emplace_back();
            }
        }
    }
    best.tie_count = static_cast<std::int64_t>(tie_costs.size());
    best.partitions.reserve(static_cast<std::size_t>(materialised));
    for (auto& l : tie_labels) {
        if (!l.empty()) best.partitions.push_back(std::move(l));
    }
    return best;
}

}  // namespace stratalloc
