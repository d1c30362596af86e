#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stratalloc/common.hpp"
#include "stratalloc/rng.hpp"
#include "stratalloc/strata_state.hpp"

namespace stratalloc {

struct SaConfig {
    int maxit = 10;            // number of sequences
    int sequence_length = 1000;  // J
    double t_max = 0.01;       // starting temperature
    double t_min = 1e-11;
    double decrement = 0.95;   // DC, geometric cooling factor
    double l_max_pct = 0.01;   // initial q as a fraction of L
    double p_new = 0.05;       // probability of moving an atom to the new stratum
    std::uint64_t seed = 0;
    // ceiling(q * 0.99) stalls for q <= 100; the strict option decays with
    // floor instead so q always reaches 1.
    bool strict_decay = false;

    void validate() const {
        if (maxit < 1) throw InputError("sa config: maxit must be >= 1");
        if (sequence_length < 1) throw InputError("sa config: sequence length J must be >= 1");
        if (!(t_min > 0.0)) throw InputError("sa config: T_min must be positive");
        if (!(t_max >= t_min)) throw InputError("sa config: T_max must be >= T_min");
        if (!(decrement > 0.0 && decrement <= 1.0)) throw InputError("sa config: decrement constant must be in (0,1]");
        if (l_max_pct < 0.0 || l_max_pct > 1.0) throw InputError("sa config: L_max% must be in [0,1]");
        if (p_new < 0.0 || p_new > 1.0) throw InputError("sa config: P(H+1) must be in [0,1]");
    }
};

// Per-move budget: q starts at L * L_max% and shrinks by the fixed factor
// 0.99 over the first sequence; every later sequence moves single atoms.
class QSchedule {
  public:
    QSchedule(std::size_t atoms, double l_max_pct, bool strict_decay)
        : initial_(std::max<std::int64_t>(1, std::llround(static_cast<double>(atoms) * l_max_pct))),
          strict_(strict_decay) {}

    int next(int sequence, int step) {
        if (sequence > 1) return 1;
        if (step == 1) {
            q_ = initial_;
        } else if (strict_) {
            q_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(static_cast<double>(q_) * 0.99)));
        } else {
            q_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(static_cast<double>(q_) * 0.99)));
        }
        return static_cast<int>(q_);
    }

  private:
    std::int64_t initial_;
    std::int64_t q_ = 1;
    bool strict_;
};

// Metropolis criterion: improvements and ties always pass, a worse solution
// passes with probability exp(-delta/T). Draws from rng only when needed.
inline bool metropolis_accept(double delta_e, double temperature, Rng& rng) {
    if (delta_e <= 0.0) return true;
    return rng.uniform() < std::exp(-delta_e / temperature);
}

struct SequencePoint {
    int sequence = 0;
    double temperature = 0.0;  // temperature in force during the sequence
    double best_cost = 0.0;    // best-so-far cost at sequence end
    std::int64_t accepted_improving = 0;
    std::int64_t accepted_metropolis = 0;
    std::int64_t rejected = 0;
    std::int64_t evaluated = 0;  // includes no-op steps where no move existed
};

struct AnnealTrace {
    std::vector<SequencePoint> sequences;
    double initial_cost = 0.0;
    std::int64_t solutions_evaluated = 0;
    std::int64_t injections = 0;       // new-stratum injection events
    std::int64_t atoms_injected = 0;
};

struct AnnealResult {
    std::vector<int> best_labels;
    double best_cost = 0.0;
    AnnealTrace trace;
};

// The annealing driver. Each of up to maxit sequences runs J perturbation
// steps at constant temperature, then multiplies the temperature by the
// decrement constant; the run stops early once T falls to T_min. At the start
// of a sequence, with probability 1/J, every atomic stratum moves to a shared
// new stratum with probability P(H+1), applied without an acceptance test.
// Returns the best solution found so far, not the final current solution.
// Deterministic given the config seed.
inline AnnealResult anneal(const DomainProblem& problem, const std::vector<int>& initial_labels,
                           const SaConfig& config) {
    config.validate();
    Rng rng(config.seed);
    Stratification state(problem, initial_labels);

    AnnealResult result;
    result.best_labels = state.labels();
    result.best_cost = state.cost();
    result.trace.initial_cost = state.cost();

    QSchedule schedule(state.atom_count(), config.l_max_pct, config.strict_decay);
    const double inject_gate = 1.0 / static_cast<double>(config.sequence_length);
    double temperature = config.t_max;

    for (int i = 1; i <= config.maxit && temperature > config.t_min; ++i) {
        if (rng.uniform() <= inject_gate) {
            const int moved = state.inject_new_strata(config.p_new, rng);
            result.trace.injections += 1;
            result.trace.atoms_injected += moved;
        }

        SequencePoint point;
        point.sequence = i;
        point.temperature = temperature;
        for (int j = 1; j <= config.sequence_length; ++j) {
            const int q = schedule.next(i, j);
            point.evaluated += 1;
            const auto move = state.propose(q, rng);
            if (!move) continue;  // single stratum: counted as an evaluated no-op

            const DeltaEval candidate = state.delta_evaluate(*move);
            const double delta_e = candidate.cost - state.cost();
            if (delta_e <= 0.0) {
                state.apply_move(*move, &candidate);
                point.accepted_improving += 1;
            } else if (rng.uniform() < std::exp(-delta_e / temperature)) {
                state.apply_move(*move, &candidate);
                point.accepted_metropolis += 1;
            } else {
                point.rejected += 1;
                continue;
            }
            if (state.cost() <= result.best_cost) {
                result.best_cost = state.cost();
                result.best_labels = state.labels();
            }
        }
        temperature *= config.decrement;
        point.best_cost = result.best_cost;
        result.trace.solutions_evaluated += point.evaluated;
        result.trace.sequences.push_back(point);
    }
    return result;
}

}  // namespace stratalloc
