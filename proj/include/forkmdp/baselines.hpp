#pragma once

#include <cstdint>
#include <vector>

#include "forkmdp/mdp.hpp"
#include "forkmdp/solver.hpp"

namespace forkmdp {

/// Relative revenue of mining honestly: every appended block is independently
/// adversarial with probability p, so the long-run share is p itself.
double honest_errev(double p);

/// State of the single-tree withholding attack: per-depth block counts of the
/// private tree and the lead of the tree depth over the honest blocks mined
/// since the fork point.
struct TreeState {
    std::vector<std::uint8_t> profile;  // entry i-1 = blocks at tree depth i, capped at the width
    std::uint8_t lead = 0;              // 0 means no active fork (profile all zero)

    bool operator==(const TreeState&) const = default;
};

struct TreeChainModel {
    InducedChain chain;
    std::vector<TreeState> states;  // index-aligned with the chain
};

/// Markov chain of the single-tree attack: the adversary grows a private tree
/// on one public block and follows the fixed publish triggers. Per step the
/// adversary extends depth i+1 with weight p * profile[i] (and starts depth 1
/// with weight p), honest miners extend with weight 1 - p; a success past the
/// depth or width cap is dropped. An honest find at lead 1 publishes the tree
/// into a race, at lead 2 it publishes to win by one block, and deeper leads
/// just shrink.
TreeChainModel build_single_tree_chain(double p, double gamma, int max_depth, int max_width);

/// gain_adv / (gain_adv + gain_hon) of the tree chain. Returns 0 when the
/// adversary never finalizes a block (p = 0).
double single_tree_errev(double p, double gamma, int max_depth, int max_width,
                         double tolerance = 1e-10);

}  // namespace forkmdp
