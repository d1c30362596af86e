#include <catch2/catch_amalgamated.hpp>

#include "stratalloc/seeding.hpp"
#include "support/synthetic.hpp"

using namespace stratalloc;
using Catch::Matchers::WithinRel;

namespace {

DomainProblem four_atoms_two_groups() {
    DomainProblem p;
    p.domain = "d";
    p.target_names = {"y"};
    p.epsilon = {0.1};
    p.totals = {0.0};
    const double means[4] = {0.0, 0.0, 10.0, 10.0};
    for (int i = 0; i < 4; ++i) {
        AtomicStratum a;
        a.key = {std::to_string(i + 1)};
        a.domain = "d";
        a.count = 10;
        a.sums = {10.0 * means[i]};
        a.sumsq = {10.0 * (1.0 + means[i] * means[i])};  // S2 = 1
        p.totals[0] += a.sums[0];
        p.atoms.push_back(std::move(a));
    }
    return p;
}

}  // namespace

TEST_CASE("kmeans seeding separates two obvious groups", "[seeding]") {
    const auto p = four_atoms_two_groups();
    SeedOptions options;
    options.k_min = 2;
    options.k_max = 2;
    options.seed = 4;
    const auto result = kmeans_solution(p, options);
    CHECK(result.clusters == 2);
    CHECK(result.labels[0] == result.labels[1]);
    CHECK(result.labels[2] == result.labels[3]);
    CHECK(result.labels[0] != result.labels[2]);
    CHECK(result.labels[0] == 1);  // contiguous, first-appearance order
}

TEST_CASE("k bounds collapse to single stratum or singletons", "[seeding]") {
    const auto p = four_atoms_two_groups();

    SECTION("k = 1") {
        SeedOptions options;
        options.k_min = 1;
        options.k_max = 1;
        const auto result = kmeans_solution(p, options);
        CHECK(result.labels == std::vector<int>{1, 1, 1, 1});
        CHECK_THAT(result.cost, WithinRel(evaluate({1, 1, 1, 1}, p).cost, 1e-12));
    }
    SECTION("k = L gives singleton strata") {
        SeedOptions options;
        options.k_min = 4;
        options.k_max = 4;
        const auto result = kmeans_solution(p, options);
        CHECK(result.clusters == 4);
        CHECK_THAT(result.cost, WithinRel(evaluate({1, 2, 3, 4}, p).cost, 1e-12));
    }
}

TEST_CASE("the sweep returns its own minimum", "[seeding]") {
    const auto p = testsupport::make_problem({.atoms = 30, .targets = 2, .epsilon = 0.05, .seed = 21});
    SeedOptions options;
    options.k_min = 2;
    options.k_max = 10;
    options.seed = 9;
    const auto result = kmeans_solution(p, options);
    REQUIRE(result.sweep.size() == 9);
    for (const auto& [k, cost] : result.sweep) CHECK(result.cost <= cost);
    // And the labels really evaluate to the reported cost.
    CHECK_THAT(evaluate(result.labels, p).cost, WithinRel(result.cost, 1e-12));
}

TEST_CASE("seeding is deterministic and always evaluator-ready", "[seeding]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = testsupport::make_problem({.atoms = 40, .targets = 2, .epsilon = 0.05, .seed = seed});
        SeedOptions options;
        options.seed = seed * 7;
        const auto a = kmeans_solution(p, options);
        const auto b = kmeans_solution(p, options);
        CHECK(a.labels == b.labels);
        CHECK(a.cost == b.cost);
        CHECK_NOTHROW(check_labels(a.labels, p.size()));
    }
}

TEST_CASE("zero-spread targets are dropped from the feature space", "[seeding]") {
    auto p = four_atoms_two_groups();
    // Second target identical across all atoms.
    p.target_names.push_back("flat");
    p.epsilon.push_back(0.1);
    double total = 0.0;
    for (auto& a : p.atoms) {
        a.sums.push_back(5.0 * static_cast<double>(a.count));
        a.sumsq.push_back(25.0 * static_cast<double>(a.count));
        total += a.sums.back();
    }
    p.totals.push_back(total);

    SeedOptions options;
    options.k_min = 2;
    options.k_max = 2;
    const auto result = kmeans_solution(p, options);
    CHECK(result.clusters == 2);
    CHECK(result.labels[0] != result.labels[2]);
}

TEST_CASE("all-identical atoms fall back to one stratum", "[seeding]") {
    auto p = four_atoms_two_groups();
    for (auto& a : p.atoms) {
        a.sums = p.atoms[0].sums;
        a.sumsq = p.atoms[0].sumsq;
    }
    p.totals[0] = 4.0 * p.atoms[0].sums[0];
    const auto result = kmeans_solution(p);
    CHECK(result.clusters == 1);
    CHECK(result.labels == std::vector<int>{1, 1, 1, 1});
}
