#include "forkmdp/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace forkmdp {

std::int64_t SparseMdp::slot_of(std::uint32_t s, std::int32_t action_id) const {
    const auto ids = actions_of(s);
    const auto it = std::lower_bound(ids.begin(), ids.end(), action_id);
    if (it == ids.end() || *it != action_id) return -1;
    return it - ids.begin();
}

std::span<const Transition> SparseMdp::transitions_of(std::uint32_t s, std::int32_t action_id) const {
    const std::int64_t slot = slot_of(s, action_id);
    if (slot < 0) {
        throw std::invalid_argument("action " + std::to_string(action_id) +
                                    " is not available in state " + std::to_string(s));
    }
    return transitions_of_slot(s, static_cast<std::uint32_t>(slot));
}

void SparseMdp::validate() const {
    const std::uint32_t n = state_count();
    for (std::uint32_t s = 0; s < n; ++s) {
        const std::uint32_t slots = slot_count(s);
        if (slots == 0)
            throw std::invalid_argument("state " + std::to_string(s) + " has no available action");
        for (std::uint32_t a = 0; a < slots; ++a) {
            const auto row = transitions_of_slot(s, a);
            if (row.empty())
                throw std::invalid_argument("state " + std::to_string(s) +
                                            " has an action with no transitions");
            double sum = 0.0;
            for (const Transition& t : row) {
                if (t.target >= n)
                    throw std::invalid_argument("transition from state " + std::to_string(s) +
                                                " targets invalid state " + std::to_string(t.target));
                if (t.prob < 0.0 || t.prob > 1.0)
                    throw std::invalid_argument("transition probability outside [0,1] in state " +
                                                std::to_string(s));
                sum += t.prob;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw std::invalid_argument("transition probabilities of state " + std::to_string(s) +
                                            " sum to " + std::to_string(sum));
        }
    }
    if (initial_state_ >= n) throw std::invalid_argument("initial state index out of range");
}

std::uint32_t MdpBuilder::add_state() {
    states_.emplace_back();
    return static_cast<std::uint32_t>(states_.size() - 1);
}

void MdpBuilder::begin_action(std::int32_t action_id) {
    auto& actions = states_.back();
    if (!actions.empty() && actions.back().id >= action_id)
        throw std::invalid_argument("action ids must be added in ascending order");
    actions.push_back(PendingAction{action_id, {}});
}

void MdpBuilder::add_transition(std::uint32_t target, double prob, std::uint16_t reward_adv,
                                std::uint16_t reward_hon) {
    auto& row = states_.back().back().transitions;
    // Merge only when target and both reward components match; the reward
    // depends on the event, not just on the successor state.
    for (Transition& t : row) {
        if (t.target == target && t.reward_adv == reward_adv && t.reward_hon == reward_hon) {
            t.prob += prob;
            return;
        }
    }
    row.push_back(Transition{target, prob, reward_adv, reward_hon});
}

SparseMdp MdpBuilder::finish(std::uint32_t initial_state) {
    SparseMdp mdp;
    mdp.initial_state_ = initial_state;
    mdp.action_begin_.reserve(states_.size() + 1);
    mdp.action_begin_.push_back(0);
    std::size_t slot_total = 0, transition_total = 0;
    for (const auto& actions : states_) {
        slot_total += actions.size();
        for (const auto& a : actions) transition_total += a.transitions.size();
    }
    mdp.action_ids_.reserve(slot_total);
    mdp.row_begin_.reserve(slot_total + 1);
    mdp.row_begin_.push_back(0);
    mdp.transitions_.reserve(transition_total);
    for (const auto& actions : states_) {
        for (const auto& a : actions) {
            mdp.action_ids_.push_back(a.id);
            mdp.transitions_.insert(mdp.transitions_.end(), a.transitions.begin(),
                                    a.transitions.end());
            mdp.row_begin_.push_back(static_cast<std::uint32_t>(mdp.transitions_.size()));
        }
        mdp.action_begin_.push_back(static_cast<std::uint32_t>(mdp.action_ids_.size()));
    }
    mdp.validate();
    return mdp;
}

InducedChain induce_chain(const SparseMdp& mdp, const PositionalStrategy& strategy) {
    const std::uint32_t n = mdp.state_count();
    if (strategy.choice.size() != n)
        throw std::invalid_argument("strategy covers " + std::to_string(strategy.choice.size()) +
                                    " states, model has " + std::to_string(n));
    InducedChain chain;
    chain.row_begin.reserve(n + 1);
    chain.row_begin.push_back(0);
    for (std::uint32_t s = 0; s < n; ++s) {
        const std::int64_t slot = mdp.slot_of(s, strategy.choice[s]);
        if (slot < 0)
            throw std::invalid_argument("strategy selects unavailable action " +
                                        std::to_string(strategy.choice[s]) + " in state " +
                                        std::to_string(s));
        const auto row = mdp.transitions_of_slot(s, static_cast<std::uint32_t>(slot));
        chain.entries.insert(chain.entries.end(), row.begin(), row.end());
        chain.row_begin.push_back(static_cast<std::uint32_t>(chain.entries.size()));
    }
    return chain;
}

std::vector<double> scalarize_reward(const SparseMdp& mdp, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::domain_error("beta must lie in [0,1], got " + std::to_string(beta));
    const auto all = mdp.all_transitions();
    std::vector<double> rewards(all.size());
    for (std::size_t k = 0; k < all.size(); ++k)
        rewards[k] = all[k].reward_adv * (1.0 - beta) - all[k].reward_hon * beta;
    return rewards;
}

}  // namespace forkmdp
