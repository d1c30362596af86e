#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stratalloc/allocation.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/frame.hpp"
#include "stratalloc/rng.hpp"

namespace stratalloc {

// One perturbation: q atomic strata leave stratum `source` for stratum
// `dest`. dest == stratum_count()+1 denotes a new stratum.
struct Move {
    int source = 0;
    int dest = 0;
    std::vector<std::int32_t> atom_ids;  // ascending
    bool empties_source = false;

    bool operator==(const Move& other) const {
        return source == other.source && dest == other.dest && atom_ids == other.atom_ids &&
               empties_source == other.empties_source;
    }
};

// Candidate evaluation of a move that has not been applied.
struct DeltaEval {
    double cost = 0.0;
    Allocation allocation;
    StratumSummary source_summary;  // unused when the move empties the source
    StratumSummary dest_summary;
};

// Mutable stratification of one domain's atomic strata, with cached stratum
// summaries, Lagrange weights and cost. Moves are applied and reverted in
// place; only the strata touched by a move ever get their statistics
// recomputed. Stratum labels stay contiguous 1..H: when a stratum empties,
// the highest-labelled stratum takes over its label.
//
// Cache contract: every cached summary is bit-identical to rebuilding that
// stratum from its member list, because all mutations re-sum members in
// ascending order (see summarize_stratum).
class Stratification {
  public:
    Stratification(const DomainProblem& problem, std::vector<int> labels, bool force_cold_alpha = false)
        : problem_(&problem), labels_(std::move(labels)), force_cold_alpha_(force_cold_alpha) {
        summaries_ = pool_summaries(problem_->atoms, labels_, problem_->sample_variance);
        const XiMatrix xi = compute_xi(summaries_, problem_->epsilon, problem_->totals);
        allocation_ = bethel_allocate(xi);
        alphas_ = allocation_.alphas;
        cost_ = allocation_.total;
    }

    const DomainProblem& problem() const { return *problem_; }
    const std::vector<int>& labels() const { return labels_; }
    int stratum_count() const { return static_cast<int>(summaries_.size()); }
    std::size_t atom_count() const { return labels_.size(); }
    double cost() const { return cost_; }
    const Allocation& allocation() const { return allocation_; }
    const std::vector<StratumSummary>& summaries() const { return summaries_; }
    const std::vector<double>& alphas() const { return alphas_; }

    // Test mode: every evaluation restarts from uniform alpha, making delta
    // and full evaluation agree exactly.
    void set_force_cold_alpha(bool cold) { force_cold_alpha_ = cold; }
    bool force_cold_alpha() const { return force_cold_alpha_; }

    // Number of stratum-summary rebuilds so far (instrumentation).
    std::int64_t summary_recomputes() const { return summary_recomputes_; }

    // Draws a move of up to q atomic strata between two distinct strata,
    // uniformly. Returns nothing when only one stratum exists.
    std::optional<Move> propose(int q, Rng& rng) const {
        const int strata = stratum_count();
        if (strata < 2 || q < 1) return std::nullopt;
        Move move;
        move.source = 1 + static_cast<int>(rng.below(strata));
        move.dest = 1 + static_cast<int>(rng.below(strata - 1));
        if (move.dest >= move.source) ++move.dest;

        const auto& members = summaries_[move.source - 1].members;
        const std::size_t take = std::min<std::size_t>(q, members.size());
        if (take == members.size()) {
            move.atom_ids = members;
            move.empties_source = true;
        } else if (take == 1) {
            move.atom_ids.push_back(members[rng.below(members.size())]);
        } else {
            std::vector<std::int32_t> pool = members;
            for (std::size_t i = 0; i < take; ++i) {
                std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            }
            pool.resize(take);
            std::sort(pool.begin(), pool.end());
            move.atom_ids = std::move(pool);
        }
        return move;
    }

    // The label vector the move would produce, without touching the state.
    std::vector<int> labels_after(const Move& move) const {
        std::vector<int> out = labels_;
        const bool created = move.dest == stratum_count() + 1;
        const int last_label = created ? stratum_count() + 1 : stratum_count();
        for (std::int32_t id : move.atom_ids) out[id] = move.dest;
        if (move.empties_source && last_label != move.source) {
            for (int& l : out) {
                if (l == last_label) l = move.source;
            }
        }
        return out;
    }

    // Cost of the move without mutating the state: rebuilds only the two
    // affected stratum summaries, reuses every other cached summary, and
    // warm-starts the allocation from the cached alphas.
    DeltaEval delta_evaluate(const Move& move) const {
        validate_move(move);
        const bool created = move.dest == stratum_count() + 1;

        DeltaEval delta;
        if (!move.empties_source) {
            delta.source_summary = summarize_stratum(
                problem_->atoms, difference(summaries_[move.source - 1].members, move.atom_ids),
                problem_->sample_variance);
            ++summary_recomputes_;
        }
        delta.dest_summary = summarize_stratum(
            problem_->atoms,
            created ? move.atom_ids : merged(summaries_[move.dest - 1].members, move.atom_ids),
            problem_->sample_variance);
        ++summary_recomputes_;

        // Assemble the candidate summary array in final label order,
        // mirroring exactly what apply_move would produce.
        std::vector<const StratumSummary*> arr;
        arr.reserve(summaries_.size() + 1);
        for (const auto& s : summaries_) arr.push_back(&s);
        if (created) {
            arr.push_back(&delta.dest_summary);
        } else {
            arr[move.dest - 1] = &delta.dest_summary;
        }
        if (move.empties_source) {
            arr[move.source - 1] = arr.back();
            arr.pop_back();
        } else {
            arr[move.source - 1] = &delta.source_summary;
        }

        const XiMatrix xi = compute_xi(arr, problem_->epsilon, problem_->totals);
        delta.allocation = allocate(xi);
        delta.cost = delta.allocation.total;
        return delta;
    }

    // Applies the move, recomputing affected summaries and the allocation.
    // Pass the move's DeltaEval to install the already-computed candidate
    // instead of redoing the work.
    void apply_move(const Move& move, const DeltaEval* delta = nullptr) {
        validate_move(move);
        const bool created = move.dest == stratum_count() + 1;

        UndoRecord undo;
        undo.move = move;
        undo.dest_created = created;
        undo.saved_source = summaries_[move.source - 1];
        if (!created) undo.saved_dest = summaries_[move.dest - 1];
        undo.saved_alphas = alphas_;
        undo.saved_allocation = allocation_;
        undo.saved_cost = cost_;

        // Structural phase: member lists and labels.
        auto& src_members = summaries_[move.source - 1].members;
        src_members = difference(src_members, move.atom_ids);
        std::size_t dest_index;
        if (created) {
            summaries_.push_back(StratumSummary{});
            summaries_.back().members = move.atom_ids;
            dest_index = summaries_.size() - 1;
        } else {
            dest_index = move.dest - 1;
            summaries_[dest_index].members = merged(summaries_[dest_index].members, move.atom_ids);
        }
        for (std::int32_t id : move.atom_ids) labels_[id] = move.dest;

        if (src_members.empty()) {
            const std::size_t last = summaries_.size() - 1;
            if (last != static_cast<std::size_t>(move.source - 1)) {
                summaries_[move.source - 1] = std::move(summaries_[last]);
                for (std::int32_t id : summaries_[move.source - 1].members) labels_[id] = move.source;
                undo.relabeled_from = static_cast<int>(last + 1);
                if (dest_index == last) dest_index = move.source - 1;
            }
            summaries_.pop_back();
        }

        // Statistics phase.
        if (delta != nullptr) {
            summaries_[dest_index] = delta->dest_summary;
            if (!src_members_emptied(undo)) summaries_[move.source - 1] = delta->source_summary;
            allocation_ = delta->allocation;
        } else {
            refresh_summary(dest_index);
            if (!src_members_emptied(undo)) refresh_summary(move.source - 1);
            const XiMatrix xi = compute_xi(summaries_, problem_->epsilon, problem_->totals);
            allocation_ = allocate(xi);
        }
        alphas_ = allocation_.alphas;
        cost_ = allocation_.total;
        undo_ = std::move(undo);
    }

    // Restores the state exactly as before the matching apply_move. Only the
    // most recently applied move can be reverted.
    void revert_move(const Move& move) {
        if (!undo_.has_value()) throw std::logic_error("revert_move without a matching apply_move");
        if (!(undo_->move == move)) throw std::logic_error("revert_move does not match the last applied move");
        UndoRecord undo = std::move(*undo_);
        undo_.reset();

        const bool emptied = src_members_emptied(undo);
        if (emptied) {
            // Undo the swap-last compaction.
            if (undo.relabeled_from != 0) {
                summaries_.push_back(std::move(summaries_[move.source - 1]));
                for (std::int32_t id : summaries_.back().members) labels_[id] = undo.relabeled_from;
            } else {
                summaries_.emplace_back();
            }
        }
        if (undo.dest_created) {
            summaries_.pop_back();
        } else {
            summaries_[move.dest - 1] = std::move(undo.saved_dest);
        }
        for (std::int32_t id : undo.saved_source.members) labels_[id] = move.source;
        summaries_[move.source - 1] = std::move(undo.saved_source);

        alphas_ = std::move(undo.saved_alphas);
        allocation_ = std::move(undo.saved_allocation);
        cost_ = undo.saved_cost;
    }

    // Moves each atomic stratum, independently with probability p, into one
    // shared new stratum. Applied unconditionally; the cost is recomputed
    // with one batched delta over the donor strata plus the new one. Returns
    // the number of atomic strata moved.
    int inject_new_strata(double p, Rng& rng) {
        if (p < 0.0 || p > 1.0) throw InputError("new-stratum probability must be in [0,1]");
        undo_.reset();  // the structural baseline changes; no revert across an injection
        std::vector<std::int32_t> selected;
        for (std::size_t l = 0; l < labels_.size(); ++l) {
            if (rng.uniform() <= p) selected.push_back(static_cast<std::int32_t>(l));
        }
        if (selected.empty()) return 0;

        std::vector<bool> moved(labels_.size(), false);
        for (std::int32_t id : selected) moved[id] = true;

        std::vector<StratumSummary> next;
        next.reserve(summaries_.size() + 1);
        for (auto& s : summaries_) {
            bool touched = false;
            for (std::int32_t id : s.members) {
                if (moved[id]) {
                    touched = true;
                    break;
                }
            }
            if (!touched) {
                next.push_back(std::move(s));  // summary reused as-is
                continue;
            }
            std::vector<std::int32_t> rest;
            rest.reserve(s.members.size());
            for (std::int32_t id : s.members) {
                if (!moved[id]) rest.push_back(id);
            }
            if (rest.empty()) continue;  // donor emptied entirely
            next.push_back(summarize_stratum(problem_->atoms, std::move(rest), problem_->sample_variance));
            ++summary_recomputes_;
        }
        next.push_back(summarize_stratum(problem_->atoms, selected, problem_->sample_variance));
        ++summary_recomputes_;

        summaries_ = std::move(next);
        for (std::size_t h = 0; h < summaries_.size(); ++h) {
            for (std::int32_t id : summaries_[h].members) labels_[id] = static_cast<int>(h + 1);
        }
        const XiMatrix xi = compute_xi(summaries_, problem_->epsilon, problem_->totals);
        allocation_ = allocate(xi);
        alphas_ = allocation_.alphas;
        cost_ = allocation_.total;
        return static_cast<int>(selected.size());
    }

  private:
    struct UndoRecord {
        Move move;
        StratumSummary saved_source;
        StratumSummary saved_dest;
        bool dest_created = false;
        int relabeled_from = 0;  // label of the stratum that filled the gap, 0 if none
        std::vector<double> saved_alphas;
        Allocation saved_allocation;
        double saved_cost = 0.0;
    };

    static bool src_members_emptied(const UndoRecord& undo) {
        return undo.move.empties_source;
    }

    void validate_move(const Move& move) const {
        const int strata = stratum_count();
        if (move.source < 1 || move.source > strata) throw std::logic_error("move: bad source stratum");
        if (move.dest < 1 || move.dest > strata + 1) throw std::logic_error("move: bad destination stratum");
        if (move.dest == move.source) throw std::logic_error("move: source equals destination");
        if (move.atom_ids.empty()) throw std::logic_error("move: no atomic strata selected");
        const auto& members = summaries_[move.source - 1].members;
        for (std::int32_t id : move.atom_ids) {
            if (!std::binary_search(members.begin(), members.end(), id)) {
                throw std::logic_error("move: atomic stratum not in source stratum");
            }
        }
        if (move.empties_source != (move.atom_ids.size() == members.size())) {
            throw std::logic_error("move: empties_source flag inconsistent");
        }
    }

    static std::vector<std::int32_t> difference(const std::vector<std::int32_t>& from,
                                                const std::vector<std::int32_t>& remove) {
        std::vector<std::int32_t> out;
        out.reserve(from.size() - remove.size());
        std::set_difference(from.begin(), from.end(), remove.begin(), remove.end(), std::back_inserter(out));
        return out;
    }

    static std::vector<std::int32_t> merged(const std::vector<std::int32_t>& a,
                                            const std::vector<std::int32_t>& b) {
        std::vector<std::int32_t> out;
        out.reserve(a.size() + b.size());
        std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return out;
    }

    void refresh_summary(std::size_t index) {
        std::vector<std::int32_t> members = std::move(summaries_[index].members);
        summaries_[index] = summarize_stratum(problem_->atoms, std::move(members), problem_->sample_variance);
        ++summary_recomputes_;
    }

    // Warm-started Bethel run; a stalled warm start gets one cold retry.
    Allocation allocate(const XiMatrix& xi) const {
        if (force_cold_alpha_) return bethel_allocate(xi);
        Allocation a = bethel_allocate(xi, alphas_);
        if (!a.converged) {
            Allocation cold = bethel_allocate(xi);
            if (cold.converged) return cold;
        }
        return a;
    }

    const DomainProblem* problem_;
    std::vector<int> labels_;
    std::vector<StratumSummary> summaries_;
    std::vector<double> alphas_;
    Allocation allocation_;
    double cost_ = 0.0;
    bool force_cold_alpha_ = false;
    mutable std::int64_t summary_recomputes_ = 0;
    std::optional<UndoRecord> undo_;
};

}  // namespace stratalloc
