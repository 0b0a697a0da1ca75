#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forkmdp/mdp.hpp"

namespace forkmdp {

struct SolveOptions {
    enum class Method { PolicyIteration, ValueIteration };

    double tolerance = 1e-10;
    std::int64_t max_iterations = 1'000'000;  // cap for the value-iteration path
    Method method = Method::PolicyIteration;
    // Linear systems are solved by direct elimination up to this many states
    // and iteratively above it.
    std::uint32_t direct_solve_threshold = 10'000;
};

struct SolveResult {
    double gain = 0.0;            // optimal mean payoff
    PositionalStrategy strategy;  // a strategy achieving it
    std::int64_t iterations = 0;
    double residual = 0.0;  // Bellman residual of the returned (gain, bias) pair
};

/// Long-run averages of the two reward components under a fixed strategy.
struct GainPair {
    double gain_adv = 0.0;
    double gain_hon = 0.0;
};

/// Optimal mean payoff and an optimal positional strategy for a unichain MDP
/// with the given per-transition scalar rewards (aligned with
/// mdp.all_transitions()).
///
/// Howard policy iteration by default; falls back to relative value iteration
/// when a policy evaluation system turns out singular (a multichain policy was
/// visited on the way). Throws ConvergenceError if the iterative path does not
/// reach the tolerance within max_iterations, StructuralError if the model is
/// structurally multichain beyond what the fallback can handle.
SolveResult solve_mean_payoff(const SparseMdp& mdp, std::span<const double> rewards,
                              const SolveOptions& options = {});

/// Stationary expected per-step reward components of the chain induced by
/// `strategy`. Throws StructuralError if the induced chain has more than one
/// recurrent class.
GainPair evaluate_strategy(const SparseMdp& mdp, const PositionalStrategy& strategy,
                           double tolerance = 1e-10, std::uint32_t direct_solve_threshold = 10'000);

/// Same long-run averages for a chain given directly.
GainPair chain_gains(const InducedChain& chain, double tolerance = 1e-10,
                     std::uint32_t direct_solve_threshold = 10'000);

/// Stationary distribution pi of the chain: pi >= 0, sum pi = 1,
/// ||pi P - pi||_inf <= tolerance. Throws StructuralError when the chain has
/// multiple recurrent classes.
std::vector<double> stationary_distribution(const InducedChain& chain, double tolerance = 1e-10,
                                            std::uint32_t direct_solve_threshold = 10'000);

}  // namespace forkmdp
