#pragma once

#include <utility>
#include <vector>

#include "forkmdp/attack_model.hpp"
#include "forkmdp/solver.hpp"

namespace forkmdp {

struct BetaTracePoint {
    double beta = 0.0;
    double mean_payoff = 0.0;
};

struct RevenueReport {
    double errev_lower = 0.0;
    PositionalStrategy strategy;
    double epsilon = 0.0;
    std::vector<BetaTracePoint> beta_trace;  // mean payoffs are non-increasing in beta
    std::uint32_t state_count = 0;
    int solver_calls = 0;
    double build_seconds = 0.0;
    double solve_seconds = 0.0;
};

/// Optimal mean payoff and strategy for the model scalarized at `beta`.
std::pair<double, PositionalStrategy> mp_at_beta(const SparseMdp& mdp, double beta,
                                                 const SolveOptions& options = {});

/// Relative revenue of a fixed strategy: gain_adv / (gain_adv + gain_hon).
/// Throws StructuralError when the denominator falls below 10x tolerance,
/// which the honest-arrival floor of the model rules out.
double exact_errev(const BuiltModel& model, const PositionalStrategy& strategy,
                   double tolerance = 1e-10);

/// Binary search over beta: keeps the bracket mean-payoff signs invariant,
/// stops when the bracket is narrower than epsilon, and returns the lower end
/// with the strategy solved there. The same built model serves every beta.
RevenueReport compute_errev(const BuiltModel& model, double epsilon,
                            const SolveOptions& options = {});

/// Convenience: builds the model first and fills in the build time.
RevenueReport compute_errev(const AttackParams& params, double epsilon,
                            const SolveOptions& options = {});

/// 1 - errev. Throws std::domain_error outside [0,1].
double chain_quality(double errev);

}  // namespace forkmdp
