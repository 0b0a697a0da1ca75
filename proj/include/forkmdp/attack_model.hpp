#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "forkmdp/mdp.hpp"

namespace forkmdp {

/// Parameters of the multi-fork withholding attack.
struct AttackParams {
    double p = 0.0;      // adversary's share of the mining resource
    double gamma = 0.0;  // probability honest miners switch to an equal-length rival chain
    int depth = 1;       // d: how deep below the tip private forks may attach
    int forks = 1;       // f: private fork slots per attached block
    int max_len = 1;     // l: private fork length cap

    void validate() const;  // throws std::invalid_argument
};

/// Whose move resolved the last step.
///
/// Mining: all parties are mining. Adversary: the adversary just extended a
/// private fork. Honest: an honest block has been found and broadcast but the
/// adversary has not reacted yet; the fork bookkeeping still refers to the
/// chain as of before this pending block, so the adversary may answer it with
/// an equal-length (race) or longer release before concededly mining on.
enum class Phase : std::uint8_t { Mining, Honest, Adversary };

/// State triple: fork lengths (depth-major d x f matrix), confirmed-chain
/// ownership window (d-1 entries, tip first), and phase.
struct ChainState {
    std::vector<std::uint8_t> fork_len;  // (i-1)*f + (j-1), values 0..l
    std::vector<std::uint8_t> owner;     // 0 = honest, 1 = adversary
    Phase phase = Phase::Mining;

    std::uint8_t fork(int i, int j, const AttackParams& params) const {
        return fork_len[static_cast<std::size_t>(i - 1) * params.forks + (j - 1)];
    }
    std::uint8_t& fork(int i, int j, const AttackParams& params) {
        return fork_len[static_cast<std::size_t>(i - 1) * params.forks + (j - 1)];
    }
    bool operator==(const ChainState&) const = default;
};

/// Either mine, or publish the first k blocks of fork (i, j).
struct AttackAction {
    bool is_release = false;
    int i = 0, j = 0, k = 0;  // 1-based; meaningful only for releases

    static AttackAction mine() { return {}; }
    static AttackAction release(int i, int j, int k) { return {true, i, j, k}; }
    bool operator==(const AttackAction&) const = default;
};

/// Dense action ids: 0 = mine, releases follow in (i, j, k) order.
std::int32_t action_id(const AttackAction& action, const AttackParams& params);
AttackAction action_from_id(std::int32_t id, const AttackParams& params);

/// Canonical textual forms, bit-exact: states as
/// "T:<M|H|A>;O:<H/A chars, tip first>;C:<rows top-down, entries
/// comma-separated, rows '|'-separated>", actions as "mine" or
/// "release:i,j,k". Consumed by strategy files and simulator traces.
std::string encode_state(const ChainState& state, const AttackParams& params);
ChainState decode_state(const std::string& text, const AttackParams& params);
std::string encode_action(const AttackAction& action);
AttackAction decode_action(const std::string& text);

/// One probabilistic successor with its finalization counts.
struct Outcome {
    ChainState state;
    double prob = 0.0;
    std::uint16_t reward_adv = 0;
    std::uint16_t reward_hon = 0;
};

/// All-zero forks, all-honest window, mining phase.
ChainState initial_state(const AttackParams& params);

/// Number of blocks the adversary mines on: every non-empty fork plus one
/// fresh-start slot per depth that still has an empty fork slot.
int mining_fanout(const ChainState& state, const AttackParams& params);

/// Outcomes of the mine action in a Mining-phase state. Zero-probability
/// outcomes are omitted.
std::vector<Outcome> mining_step_distribution(const ChainState& state, const AttackParams& params);

/// Actions available in `state`: {mine} while mining; otherwise mine plus
/// every release(i, j, k) with i <= k <= fork length. In the Honest phase the
/// k = i release ties with the pending block (race); longer ones win outright.
std::vector<AttackAction> available_actions(const ChainState& state, const AttackParams& params);

/// Outcomes of a release. Throws std::invalid_argument if the action is not
/// available in `state`.
std::vector<Outcome> apply_release(const ChainState& state, const AttackAction& action,
                                   const AttackParams& params);

/// Outcome of choosing mine outside the Mining phase. From the Adversary phase
/// this is pure bookkeeping; from the Honest phase it concedes the pending
/// block: the window shifts and the block leaving it finalizes.
Outcome resolve_with_mine(const ChainState& state, const AttackParams& params);

/// Dispatch over the three cases above.
std::vector<Outcome> transition_outcomes(const ChainState& state, const AttackAction& action,
                                         const AttackParams& params);

/// Reachability-explored model with its state dictionary. State ids follow a
/// breadth-first order from the initial state; within a BFS layer states are
/// ordered by their canonical encoding.
struct BuiltModel {
    AttackParams params;
    SparseMdp mdp;
    std::vector<ChainState> states;
    std::unordered_map<std::string, std::uint32_t> index_of;

    std::string encoding_of(std::uint32_t s) const { return encode_state(states[s], params); }
};

/// Cap on explored states; reads FORKMDP_STATE_CAP when set.
std::uint64_t default_state_cap();

/// Upper bound 3 * (l+1)^(d*f) * 2^(d-1) on the state count.
double state_count_estimate(const AttackParams& params);

/// Explores all reachable states and assembles the sparse MDP. Throws
/// ResourceError (naming the estimate) when the state-count estimate or the
/// explored count exceeds `cap`.
BuiltModel build_model(const AttackParams& params, std::uint64_t cap = default_state_cap());

}  // namespace forkmdp
