#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace forkmdp {

/// Thrown when a model or chain has a structure the requested computation
/// cannot handle (multiple recurrent classes, singular stationary system).
class StructuralError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a model would exceed a configured resource cap.
class ResourceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an iterative method fails to converge within its cap.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double last_residual)
        : std::runtime_error(what), residual(last_residual) {}
    double residual;
};

/// One probabilistic outcome of a (state, action) pair. Rewards are kept as
/// two integer block counts so the same model can be re-scalarized for any
/// beta without a rebuild.
struct Transition {
    std::uint32_t target = 0;
    double prob = 0.0;
    std::uint16_t reward_adv = 0;  // adversary blocks finalized on this step
    std::uint16_t reward_hon = 0;  // honest blocks finalized on this step
};

/// Finite MDP in compressed sparse row form.
///
/// Per state there is a slice of action slots; per action slot a slice of
/// transitions. Action ids are model-defined integers, listed in ascending
/// order within each state. Probabilities of each transition row sum to 1
/// within kRowSumTolerance.
class SparseMdp {
  public:
    static constexpr double kRowSumTolerance = 1e-12;

    std::uint32_t state_count() const { return static_cast<std::uint32_t>(action_begin_.size() - 1); }
    std::uint32_t initial_state() const { return initial_state_; }
    std::size_t transition_count() const { return transitions_.size(); }
    std::size_t action_slot_count() const { return action_ids_.size(); }

    /// Action ids available in state s, ascending.
    std::span<const std::int32_t> actions_of(std::uint32_t s) const {
        return {action_ids_.data() + action_begin_[s], action_ids_.data() + action_begin_[s + 1]};
    }

    /// Transitions of the a-th available action (slot index, not id) of state s.
    std::span<const Transition> transitions_of_slot(std::uint32_t s, std::uint32_t slot) const {
        const std::size_t k = action_begin_[s] + slot;
        return {transitions_.data() + row_begin_[k], transitions_.data() + row_begin_[k + 1]};
    }

    /// Transitions of action `action_id` in state s; throws std::invalid_argument
    /// naming the state if the action is not available there.
    std::span<const Transition> transitions_of(std::uint32_t s, std::int32_t action_id) const;

    /// Slot index of `action_id` within state s, or -1 if unavailable.
    std::int64_t slot_of(std::uint32_t s, std::int32_t action_id) const;

    std::uint32_t slot_count(std::uint32_t s) const { return action_begin_[s + 1] - action_begin_[s]; }

    /// Flat index of the first transition of (state, slot); aligned with the
    /// reward vectors produced by scalarize_reward.
    std::size_t flat_row_begin(std::uint32_t s, std::uint32_t slot) const {
        return row_begin_[action_begin_[s] + slot];
    }

    std::span<const Transition> all_transitions() const { return transitions_; }

    /// Checks row stochasticity, non-empty action sets and target validity.
    /// Throws std::invalid_argument on the first violation.
    void validate() const;

  private:
    friend class MdpBuilder;
    std::uint32_t initial_state_ = 0;
    std::vector<std::uint32_t> action_begin_;  // size state_count + 1
    std::vector<std::int32_t> action_ids_;     // one per action slot
    std::vector<std::uint32_t> row_begin_;     // size action slots + 1
    std::vector<Transition> transitions_;
};

/// Incremental builder. States must be added with strictly increasing ids;
/// within a state, actions must be added with strictly increasing action ids.
/// Duplicate successors inside one transition list are merged only when their
/// reward components also match.
class MdpBuilder {
  public:
    std::uint32_t add_state();
    void begin_action(std::int32_t action_id);
    void add_transition(std::uint32_t target, double prob, std::uint16_t reward_adv,
                        std::uint16_t reward_hon);
    /// Merges duplicates, validates, and returns the finished model.
    SparseMdp finish(std::uint32_t initial_state);

  private:
    struct PendingAction {
        std::int32_t id;
        std::vector<Transition> transitions;
    };
    std::vector<std::vector<PendingAction>> states_;
};

/// Total map from state index to a chosen action id.
struct PositionalStrategy {
    std::vector<std::int32_t> choice;
};

/// Markov chain obtained by fixing a positional strategy in an MDP; keeps the
/// per-transition reward components.
struct InducedChain {
    std::vector<std::uint32_t> row_begin;  // size state_count + 1
    std::vector<Transition> entries;
    std::uint32_t state_count() const { return static_cast<std::uint32_t>(row_begin.size() - 1); }
    std::span<const Transition> row(std::uint32_t s) const {
        return {entries.data() + row_begin[s], entries.data() + row_begin[s + 1]};
    }
};

/// Fixes `strategy` in `mdp`. Throws std::invalid_argument naming the first
/// state whose chosen action is unavailable.
InducedChain induce_chain(const SparseMdp& mdp, const PositionalStrategy& strategy);

/// Per-transition scalar reward r_beta = reward_adv * (1 - beta) - reward_hon * beta,
/// aligned with mdp.all_transitions(). Throws std::domain_error for beta outside [0, 1].
std::vector<double> scalarize_reward(const SparseMdp& mdp, double beta);

}  // namespace forkmdp
