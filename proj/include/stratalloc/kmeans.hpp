#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "stratalloc/common.hpp"
#include "stratalloc/rng.hpp"

namespace stratalloc {

struct KmeansResult {
    std::vector<int> labels;                   // 0-based cluster per point
    std::vector<std::vector<double>> centers;  // k x dim
    double inertia = 0.0;                      // weighted within-cluster sum of squares
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

// Lloyd iterations from given initial centers. Ties in assignment go to the
// lowest cluster index; empty clusters are repaired by claiming the farthest
// point of the largest cluster.
inline KmeansResult lloyd(const std::vector<std::vector<double>>& points,
                          const std::vector<double>& weights,
                          std::vector<std::vector<double>> centers, int max_iter = 100) {
    const std::size_t n = points.size();
    const std::size_t k = centers.size();
    const std::size_t dim = points[0].size();
    std::vector<int> labels(n, 0);

    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t p = 0; p < n; ++p) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(points[p], centers[c]);
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            if (labels[p] != best_c) {
                labels[p] = best_c;
                changed = true;
            }
        }

        std::vector<std::size_t> counts(k, 0);
        for (std::size_t p = 0; p < n; ++p) counts[labels[p]]++;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t largest = 0;
            for (std::size_t c2 = 1; c2 < k; ++c2) {
                if (counts[c2] > counts[largest]) largest = c2;
            }
            double far = -1.0;
            std::size_t far_p = 0;
            for (std::size_t p = 0; p < n; ++p) {
                if (static_cast<std::size_t>(labels[p]) != largest) continue;
                const double d = sq_dist(points[p], centers[largest]);
                if (d > far) {
                    far = d;
                    far_p = p;
                }
            }
            labels[far_p] = static_cast<int>(c);
            counts[largest]--;
            counts[c]++;
            changed = true;
        }

        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<double> wsum(k, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
            const double w = weights[p];
            wsum[labels[p]] += w;
            for (std::size_t d = 0; d < dim; ++d) next[labels[p]][d] += w * points[p][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t d = 0; d < dim; ++d) next[c][d] /= wsum[c];
        }
        centers = std::move(next);
        if (!changed && iter > 0) break;
    }

    double inertia = 0.0;
    for (std::size_t p = 0; p < n; ++p) inertia += weights[p] * sq_dist(points[p], centers[labels[p]]);
    return {std::move(labels), std::move(centers), inertia};
}

}  // namespace detail

// Weighted Lloyd's k-means with farthest-point seeding: the first center is a
// random point, every further center is the point farthest from the centers
// chosen so far (ties to the lowest index). Best inertia over `restarts`
// restarts wins; deterministic given the rng state.
inline KmeansResult kmeans(const std::vector<std::vector<double>>& points,
                           const std::vector<double>& weights, int k, int restarts, Rng& rng) {
    const std::size_t n = points.size();
    if (n == 0) throw InputError("k-means: no points");
    if (k < 1) throw InputError("k-means: k must be >= 1");
    if (static_cast<std::size_t>(k) > n) throw InputError("k-means: k exceeds number of points");
    if (weights.size() != n) throw InputError("k-means: weights size mismatch");

    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        std::vector<std::vector<double>> centers;
        centers.push_back(points[rng.below(n)]);
        std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
        while (centers.size() < static_cast<std::size_t>(k)) {
            for (std::size_t p = 0; p < n; ++p) {
                nearest[p] = std::min(nearest[p], detail::sq_dist(points[p], centers.back()));
            }
            std::size_t far_p = 0;
            double far = -1.0;
            for (std::size_t p = 0; p < n; ++p) {
                if (nearest[p] > far) {
                    far = nearest[p];
                    far_p = p;
                }
            }
            centers.push_back(points[far_p]);
        }
        KmeansResult run = detail::lloyd(points, weights, std::move(centers));
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

}  // namespace stratalloc
