#include "forkmdp/revenue.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace forkmdp {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::pair<double, PositionalStrategy> mp_at_beta(const SparseMdp& mdp, double beta,
                                                 const SolveOptions& options) {
    const std::vector<double> rewards = scalarize_reward(mdp, beta);
    SolveResult result = solve_mean_payoff(mdp, rewards, options);
    return {result.gain, std::move(result.strategy)};
}

double exact_errev(const BuiltModel& model, const PositionalStrategy& strategy, double tolerance) {
    const GainPair gains = evaluate_strategy(model.mdp, strategy, tolerance);
    const double total = gains.gain_adv + gains.gain_hon;
    if (total < 10.0 * tolerance)
        throw StructuralError("finalization rate " + std::to_string(total) +
                              " is numerically zero; the honest-arrival floor makes this a "
                              "modeling bug");
    return gains.gain_adv / total;
}

RevenueReport compute_errev(const BuiltModel& model, double epsilon, const SolveOptions& options) {
    if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
    const auto start = std::chrono::steady_clock::now();
    // Gains within this band of zero count as non-negative so that the result
    // stays a lower bound.
    const double dead_band = 10.0 * options.tolerance;

    RevenueReport report;
    report.epsilon = epsilon;
    report.state_count = model.mdp.state_count();

    double beta_low = 0.0, beta_up = 1.0;
    double mp_low = std::numeric_limits<double>::infinity();  // not yet solved at beta_low
    while (beta_up - beta_low >= epsilon) {
        const double beta = (beta_low + beta_up) / 2.0;
        auto [mp, strategy] = mp_at_beta(model.mdp, beta, options);
        ++report.solver_calls;
        report.beta_trace.push_back({beta, mp});
        if (mp < -dead_band)
            beta_up = beta;
        else {
            beta_low = beta;
            mp_low = mp;
        }
        if (!(mp_low >= -dead_band || std::isinf(mp_low)))
            throw std::logic_error("bisection bracket invariant violated at beta_low");
    }

    auto [mp, strategy] = mp_at_beta(model.mdp, beta_low, options);
    ++report.solver_calls;
    if (mp < -dead_band) throw std::logic_error("final solve at beta_low has negative mean payoff");
    report.errev_lower = beta_low;
    report.strategy = std::move(strategy);
    report.solve_seconds = seconds_since(start);
    return report;
}

RevenueReport compute_errev(const AttackParams& params, double epsilon,
                            const SolveOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const BuiltModel model = build_model(params);
    const double build_seconds = seconds_since(start);
    RevenueReport report = compute_errev(model, epsilon, options);
    report.build_seconds = build_seconds;
    return report;
}

double chain_quality(double errev) {
    if (!(errev >= 0.0 && errev <= 1.0))
        throw std::domain_error("relative revenue must lie in [0,1], got " +
                                std::to_string(errev));
    return 1.0 - errev;
}

}  // namespace forkmdp
