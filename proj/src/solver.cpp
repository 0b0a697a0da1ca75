#include "forkmdp/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace forkmdp {
namespace {

// Number of recurrent classes: strongly connected components (over
// positive-probability edges) without edges leaving them. Iterative Tarjan.
int count_recurrent_classes(const InducedChain& chain) {
    const std::uint32_t n = chain.state_count();
    constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> index(n, kUnset), lowlink(n, 0), comp(n, kUnset);
    std::vector<bool> on_stack(n, false);
    std::vector<std::uint32_t> stack;
    std::uint32_t next_index = 0, comp_count = 0;

    struct Frame {
        std::uint32_t v;
        std::uint32_t edge;
    };
    std::vector<Frame> call;
    for (std::uint32_t root = 0; root < n; ++root) {
        if (index[root] != kUnset) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            auto& [v, edge] = call.back();
            if (edge == 0) {
                index[v] = lowlink[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            const auto row = chain.row(v);
            bool descended = false;
            while (edge < row.size()) {
                if (row[edge].prob <= 0.0) {
                    ++edge;
                    continue;
                }
                const std::uint32_t w = row[edge].target;
                ++edge;
                if (index[w] == kUnset) {
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) lowlink[v] = std::min(lowlink[v], index[w]);
            }
            if (descended) continue;
            if (lowlink[v] == index[v]) {
                while (true) {
                    const std::uint32_t w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = comp_count;
                    if (w == v) break;
                }
                ++comp_count;
            }
            const std::uint32_t finished = v;
            call.pop_back();
            if (!call.empty())
                lowlink[call.back().v] = std::min(lowlink[call.back().v], lowlink[finished]);
        }
    }

    std::vector<bool> leaves(comp_count, false);
    for (std::uint32_t s = 0; s < n; ++s)
        for (const Transition& t : chain.row(s))
            if (t.prob > 0.0 && comp[t.target] != comp[s]) leaves[comp[s]] = true;
    int recurrent = 0;
    for (std::uint32_t c = 0; c < comp_count; ++c)
        if (!leaves[c]) ++recurrent;
    return recurrent;
}

double stationary_residual(const InducedChain& chain, const std::vector<double>& pi) {
    const std::uint32_t n = chain.state_count();
    std::vector<double> pi_p(n, 0.0);
    for (std::uint32_t s = 0; s < n; ++s)
        for (const Transition& t : chain.row(s)) pi_p[t.target] += pi[s] * t.prob;
    double r = 0.0;
    for (std::uint32_t s = 0; s < n; ++s) r = std::max(r, std::abs(pi_p[s] - pi[s]));
    return r;
}

std::vector<double> stationary_direct(const InducedChain& chain) {
    const std::uint32_t n = chain.state_count();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1. The
    // columns of (P^T - I) sum to zero, so dropping any single row keeps full
    // row rank on a unichain model.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(chain.entries.size() + 2 * n);
    for (std::uint32_t s = 0; s < n; ++s) {
        for (const Transition& t : chain.row(s))
            if (t.target != n - 1) trips.emplace_back(t.target, s, t.prob);
        if (s != n - 1) trips.emplace_back(s, s, -1.0);
        trips.emplace_back(n - 1, s, 1.0);
    }
    Eigen::SparseMatrix<double> mat(n, n);
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(mat);
    if (lu.info() != Eigen::Success)
        throw StructuralError("stationary system is singular; chain is not unichain");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::VectorXd sol = lu.solve(rhs);
    std::vector<double> pi(sol.data(), sol.data() + n);
    double total = 0.0;
    for (double& x : pi) {
        if (x < 0.0) x = 0.0;  // clip direct-solve noise on transient states
        total += x;
    }
    for (double& x : pi) x /= total;
    return pi;
}

std::vector<double> stationary_iterative(const InducedChain& chain, double tolerance,
                                         std::int64_t max_iterations) {
    const std::uint32_t n = chain.state_count();
    // Damped power iteration; the damping makes periodic recurrent classes
    // converge without changing the fixed point.
    constexpr double tau = 0.7;
    std::vector<double> pi(n, 1.0 / n), pi_p(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (std::int64_t it = 0; it < max_iterations; ++it) {
        std::fill(pi_p.begin(), pi_p.end(), 0.0);
        for (std::uint32_t s = 0; s < n; ++s)
            for (const Transition& t : chain.row(s)) pi_p[t.target] += pi[s] * t.prob;
        residual = 0.0;
        for (std::uint32_t s = 0; s < n; ++s) residual = std::max(residual, std::abs(pi_p[s] - pi[s]));
        if (residual <= tolerance) return pi;
        double total = 0.0;
        for (std::uint32_t s = 0; s < n; ++s) {
            pi[s] = (1.0 - tau) * pi[s] + tau * pi_p[s];
            total += pi[s];
        }
        for (double& x : pi) x /= total;
    }
    throw ConvergenceError("stationary distribution did not converge", residual);
}

// Expected one-step scalar reward per state of a policy-fixed chain.
std::vector<double> expected_rewards(const InducedChain& chain, const SparseMdp& mdp,
                                     const PositionalStrategy& strategy,
                                     std::span<const double> rewards) {
    const std::uint32_t n = mdp.state_count();
    std::vector<double> rbar(n, 0.0);
    for (std::uint32_t s = 0; s < n; ++s) {
        const auto slot = static_cast<std::uint32_t>(mdp.slot_of(s, strategy.choice[s]));
        const std::size_t base = mdp.flat_row_begin(s, slot);
        const auto row = chain.row(s);
        for (std::size_t k = 0; k < row.size(); ++k) rbar[s] += row[k].prob * rewards[base + k];
    }
    return rbar;
}

struct GainBias {
    double gain;
    std::vector<double> bias;  // bias[initial_state] == 0
};

GainBias evaluate_gain_bias_direct(const InducedChain& chain, const std::vector<double>& rbar,
                                   std::uint32_t s0) {
    const std::uint32_t n = chain.state_count();
    // Unknowns x = (g, h(s) for s != s0); equation per state s:
    //   g + h(s) - sum_s' P(s,s') h(s') = rbar(s),   h(s0) = 0.
    auto col_of = [s0](std::uint32_t s) -> std::uint32_t { return s < s0 ? s + 1 : s; };
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(chain.entries.size() + 2 * n);
    for (std::uint32_t s = 0; s < n; ++s) {
        trips.emplace_back(s, 0, 1.0);
        if (s != s0) trips.emplace_back(s, col_of(s), 1.0);
        for (const Transition& t : chain.row(s))
            if (t.target != s0) trips.emplace_back(s, col_of(t.target), -t.prob);
    }
    Eigen::SparseMatrix<double> mat(n, n);
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(mat);
    if (lu.info() != Eigen::Success)
        throw StructuralError("policy evaluation system is singular; policy is not unichain");
    Eigen::VectorXd rhs(n);
    for (std::uint32_t s = 0; s < n; ++s) rhs[s] = rbar[s];
    Eigen::VectorXd sol = lu.solve(rhs);
    GainBias gb;
    gb.gain = sol[0];
    gb.bias.assign(n, 0.0);
    for (std::uint32_t s = 0; s < n; ++s)
        if (s != s0) gb.bias[s] = sol[col_of(s)];
    return gb;
}

GainBias evaluate_gain_bias_iterative(const InducedChain& chain, const std::vector<double>& rbar,
                                      std::uint32_t s0, double tolerance,
                                      std::int64_t max_iterations) {
    const std::uint32_t n = chain.state_count();
    constexpr double tau = 0.7;
    std::vector<double> h(n, 0.0), w(n, 0.0);
    double gain = 0.0, residual = std::numeric_limits<double>::infinity();
    for (std::int64_t it = 0; it < max_iterations; ++it) {
        for (std::uint32_t s = 0; s < n; ++s) {
            double acc = rbar[s];
            for (const Transition& t : chain.row(s)) acc += t.prob * h[t.target];
            w[s] = acc;
        }
        gain = w[s0];
        residual = 0.0;
        for (std::uint32_t s = 0; s < n; ++s)
            residual = std::max(residual, std::abs(w[s] - gain - h[s]));
        if (residual <= tolerance) break;
        for (std::uint32_t s = 0; s < n; ++s) h[s] = (1.0 - tau) * h[s] + tau * (w[s] - gain);
        h[s0] = 0.0;
    }
    if (residual > tolerance)
        throw ConvergenceError("policy evaluation did not converge", residual);
    GainBias gb;
    gb.gain = gain;
    gb.bias = std::move(h);
    return gb;
}

GainBias evaluate_gain_bias(const InducedChain& chain, const std::vector<double>& rbar,
                            std::uint32_t s0, const SolveOptions& options) {
    if (chain.state_count() <= options.direct_solve_threshold)
        return evaluate_gain_bias_direct(chain, rbar, s0);
    return evaluate_gain_bias_iterative(chain, rbar, s0, options.tolerance,
                                        options.max_iterations);
}

SolveResult solve_value_iteration(const SparseMdp& mdp, std::span<const double> rewards,
                                  const SolveOptions& options) {
    const std::uint32_t n = mdp.state_count();
    const std::uint32_t s0 = mdp.initial_state();
    constexpr double tau = 0.7;  // aperiodicity damping
    std::vector<double> v(n, 0.0), tv(n, 0.0);

    auto bellman = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::uint32_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            const std::uint32_t slots = mdp.slot_count(s);
            for (std::uint32_t a = 0; a < slots; ++a) {
                const std::size_t base = mdp.flat_row_begin(s, a);
                const auto row = mdp.transitions_of_slot(s, a);
                double q = 0.0;
                for (std::size_t k = 0; k < row.size(); ++k)
                    q += row[k].prob * (rewards[base + k] + in[row[k].target]);
                best = std::max(best, q);
            }
            out[s] = best;
        }
    };

    double gain = 0.0;
    double span = std::numeric_limits<double>::infinity();
    std::int64_t it = 0;
    for (; it < options.max_iterations; ++it) {
        bellman(v, tv);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::uint32_t s = 0; s < n; ++s) {
            const double delta = (1.0 - tau) * v[s] + tau * tv[s] - v[s];
            lo = std::min(lo, delta);
            hi = std::max(hi, delta);
        }
        gain = (lo + hi) / (2.0 * tau);
        span = (hi - lo) / tau;
        const double shift = (1.0 - tau) * v[s0] + tau * tv[s0];
        for (std::uint32_t s = 0; s < n; ++s) v[s] = (1.0 - tau) * v[s] + tau * tv[s] - shift;
        if (span <= options.tolerance) break;
    }
    if (span > options.tolerance)
        throw ConvergenceError("relative value iteration did not converge", span);

    SolveResult result;
    result.gain = gain;
    result.iterations = it + 1;
    result.strategy.choice.assign(n, 0);
    double residual = 0.0;
    for (std::uint32_t s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        std::int32_t best_id = 0;
        const auto ids = mdp.actions_of(s);
        for (std::uint32_t a = 0; a < ids.size(); ++a) {
            const std::size_t base = mdp.flat_row_begin(s, a);
            const auto row = mdp.transitions_of_slot(s, a);
            double q = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k)
                q += row[k].prob * (rewards[base + k] + v[row[k].target]);
            if (q > best) {  // scanning ascending ids keeps the lowest id on ties
                best = q;
                best_id = ids[a];
            }
        }
        result.strategy.choice[s] = best_id;
        residual = std::max(residual, std::abs(best - v[s] - gain));
    }
    result.residual = residual;
    return result;
}

SolveResult solve_policy_iteration(const SparseMdp& mdp, std::span<const double> rewards,
                                   const SolveOptions& options) {
    constexpr double kImprovementMargin = 1e-12;
    const std::uint32_t n = mdp.state_count();
    const std::uint32_t s0 = mdp.initial_state();

    PositionalStrategy policy;
    policy.choice.assign(n, 0);
    for (std::uint32_t s = 0; s < n; ++s) policy.choice[s] = mdp.actions_of(s)[0];

    GainBias gb;
    std::int64_t rounds = 0;
    while (true) {
        ++rounds;
        const InducedChain chain = induce_chain(mdp, policy);
        const std::vector<double> rbar = expected_rewards(chain, mdp, policy, rewards);
        gb = evaluate_gain_bias(chain, rbar, s0, options);

        bool changed = false;
        for (std::uint32_t s = 0; s < n; ++s) {
            const auto ids = mdp.actions_of(s);
            double best = -std::numeric_limits<double>::infinity();
            std::int32_t best_id = ids[0];
            double current_q = 0.0;
            for (std::uint32_t a = 0; a < ids.size(); ++a) {
                const std::size_t base = mdp.flat_row_begin(s, a);
                const auto row = mdp.transitions_of_slot(s, a);
                double q = 0.0;
                for (std::size_t k = 0; k < row.size(); ++k)
                    q += row[k].prob * (rewards[base + k] + gb.bias[row[k].target]);
                if (q > best) {
                    best = q;
                    best_id = ids[a];
                }
                if (ids[a] == policy.choice[s]) current_q = q;
            }
            if (best > current_q + kImprovementMargin && best_id != policy.choice[s]) {
                policy.choice[s] = best_id;
                changed = true;
            }
        }
        if (!changed) break;
        if (rounds > static_cast<std::int64_t>(n) * 64 + 1024)
            throw ConvergenceError("policy iteration is cycling", 0.0);
    }

    // Bellman residual of the final (gain, bias) pair.
    double residual = 0.0;
    for (std::uint32_t s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::uint32_t a = 0; a < mdp.slot_count(s); ++a) {
            const std::size_t base = mdp.flat_row_begin(s, a);
            const auto row = mdp.transitions_of_slot(s, a);
            double q = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k)
                q += row[k].prob * (rewards[base + k] + gb.bias[row[k].target]);
            best = std::max(best, q);
        }
        residual = std::max(residual, std::abs(best - gb.gain - gb.bias[s]));
    }

    SolveResult result;
    result.gain = gb.gain;
    result.strategy = std::move(policy);
    result.iterations = rounds;
    result.residual = residual;
    return result;
}

}  // namespace

SolveResult solve_mean_payoff(const SparseMdp& mdp, std::span<const double> rewards,
                              const SolveOptions& options) {
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (rewards.size() != mdp.transition_count())
        throw std::invalid_argument("reward vector does not match the model's transition count");
    if (options.method == SolveOptions::Method::ValueIteration)
        return solve_value_iteration(mdp, rewards, options);
    try {
        return solve_policy_iteration(mdp, rewards, options);
    } catch (const StructuralError&) {
        // A multichain policy was visited. Value iteration still converges when
        // the optimal gain is constant over the states.
        return solve_value_iteration(mdp, rewards, options);
    }
}

std::vector<double> stationary_distribution(const InducedChain& chain, double tolerance,
                                            std::uint32_t direct_solve_threshold) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const int recurrent = count_recurrent_classes(chain);
    if (recurrent != 1)
        throw StructuralError("chain has " + std::to_string(recurrent) +
                              " recurrent classes; stationary distribution is not unique");
    std::vector<double> pi = chain.state_count() <= direct_solve_threshold
                                 ? stationary_direct(chain)
                                 : stationary_iterative(chain, tolerance, 1'000'000);
    const double residual = stationary_residual(chain, pi);
    if (residual > tolerance)
        throw ConvergenceError("stationary residual above tolerance", residual);
    return pi;
}

GainPair chain_gains(const InducedChain& chain, double tolerance,
                     std::uint32_t direct_solve_threshold) {
    const std::vector<double> pi = stationary_distribution(chain, tolerance, direct_solve_threshold);
    GainPair gains;
    for (std::uint32_t s = 0; s < chain.state_count(); ++s) {
        if (pi[s] == 0.0) continue;
        for (const Transition& t : chain.row(s)) {
            gains.gain_adv += pi[s] * t.prob * t.reward_adv;
            gains.gain_hon += pi[s] * t.prob * t.reward_hon;
        }
    }
    return gains;
}

GainPair evaluate_strategy(const SparseMdp& mdp, const PositionalStrategy& strategy,
                           double tolerance, std::uint32_t direct_solve_threshold) {
    return chain_gains(induce_chain(mdp, strategy), tolerance, direct_solve_threshold);
}

}  // namespace forkmdp
