#include "forkmdp/attack_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace forkmdp {
namespace {

constexpr std::uint8_t kHonest = 0;
constexpr std::uint8_t kAdversary = 1;

char phase_char(Phase phase) {
    switch (phase) {
        case Phase::Mining: return 'M';
        case Phase::Honest: return 'H';
        case Phase::Adversary: return 'A';
    }
    return '?';
}

/// Confirmed-chain successor of publishing the first k blocks of fork (i, j):
/// blocks above the attach point are orphaned, the k published blocks join,
/// survivors shift down by the net growth g = k - i + 1, and the g entries
/// pushed past the window finalize.
Outcome accept_outcome(const ChainState& state, int i, int j, int k, const AttackParams& params,
                       double prob) {
    const int d = params.depth;
    const int f = params.forks;
    const int g = k - i + 1;

    Outcome out;
    out.prob = prob;
    out.state.phase = Phase::Mining;
    out.state.fork_len.assign(static_cast<std::size_t>(d) * f, 0);
    out.state.owner.assign(d - 1, kHonest);

    // Ownership: published adversary blocks stacked on the surviving window.
    std::vector<std::uint8_t> window;
    window.reserve(k + d - i);
    for (int n = 0; n < k; ++n) window.push_back(kAdversary);
    for (int depth = i; depth <= d - 1; ++depth) window.push_back(state.owner[depth - 1]);
    for (int n = 0; n < d - 1; ++n) out.state.owner[n] = window[n];
    for (std::size_t n = d - 1; n < window.size(); ++n) {
        if (window[n] == kAdversary)
            ++out.reward_adv;
        else
            ++out.reward_hon;
    }

    // Forks: the unpublished tail rides on the new tip; rows under the
    // published blocks start fresh; deeper rows are the shifted survivors with
    // the released fork's slot cleared.
    out.state.fork(1, 1, params) = static_cast<std::uint8_t>(state.fork(i, j, params) - k);
    for (int q = k + 1; q <= d; ++q) {
        const int old_row = q - g;
        for (int col = 1; col <= f; ++col)
            out.state.fork(q, col, params) = state.fork(old_row, col, params);
        if (old_row == i) out.state.fork(q, j, params) = 0;
    }
    return out;
}

/// Window shift for one honest block joining the confirmed chain; the block
/// reaching depth d finalizes (for d = 1 that is the new block itself).
Outcome concede_outcome(const ChainState& state, const AttackParams& params) {
    const int d = params.depth;
    const int f = params.forks;
    Outcome out;
    out.prob = 1.0;
    out.state.phase = Phase::Mining;
    out.state.fork_len.assign(static_cast<std::size_t>(d) * f, 0);
    for (int i = 2; i <= d; ++i)
        for (int j = 1; j <= f; ++j) out.state.fork(i, j, params) = state.fork(i - 1, j, params);
    out.state.owner.assign(d - 1, kHonest);
    for (int n = 1; n < d - 1; ++n) out.state.owner[n] = state.owner[n - 1];
    const std::uint8_t exiting = d == 1 ? kHonest : state.owner[d - 2];
    if (exiting == kAdversary)
        ++out.reward_adv;
    else
        ++out.reward_hon;
    return out;
}

}  // namespace

void AttackParams::validate() const {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("p must lie in [0,1], got " + std::to_string(p));
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("gamma must lie in [0,1], got " + std::to_string(gamma));
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (forks < 1) throw std::invalid_argument("forks must be >= 1");
    if (max_len < 1) throw std::invalid_argument("max fork length must be >= 1");
}

std::int32_t action_id(const AttackAction& action, const AttackParams& params) {
    if (!action.is_release) return 0;
    return 1 +
           (static_cast<std::int32_t>(action.i - 1) * params.forks + (action.j - 1)) *
               params.max_len +
           (action.k - 1);
}

AttackAction action_from_id(std::int32_t id, const AttackParams& params) {
    if (id == 0) return AttackAction::mine();
    const std::int32_t r = id - 1;
    const int k = r % params.max_len + 1;
    const int ij = r / params.max_len;
    return AttackAction::release(ij / params.forks + 1, ij % params.forks + 1, k);
}

std::string encode_state(const ChainState& state, const AttackParams& params) {
    std::string text = "T:";
    text += phase_char(state.phase);
    text += ";O:";
    for (std::uint8_t o : state.owner) text += o == kAdversary ? 'A' : 'H';
    text += ";C:";
    for (int i = 1; i <= params.depth; ++i) {
        if (i > 1) text += '|';
        for (int j = 1; j <= params.forks; ++j) {
            if (j > 1) text += ',';
            text += std::to_string(state.fork(i, j, params));
        }
    }
    return text;
}

ChainState decode_state(const std::string& text, const AttackParams& params) {
    const auto fail = [&](const std::string& why) {
        throw std::invalid_argument("bad state encoding \"" + text + "\": " + why);
    };
    if (text.size() < 3 || text.compare(0, 2, "T:") != 0) fail("missing T: prefix");
    ChainState state;
    switch (text[2]) {
        case 'M': state.phase = Phase::Mining; break;
        case 'H': state.phase = Phase::Honest; break;
        case 'A': state.phase = Phase::Adversary; break;
        default: fail("unknown phase");
    }
    std::size_t pos = text.find(";O:");
    if (pos != 3) fail("missing O section");
    pos += 3;
    const std::size_t c_pos = text.find(";C:", pos);
    if (c_pos == std::string::npos) fail("missing C section");
    for (std::size_t n = pos; n < c_pos; ++n) {
        if (text[n] == 'H')
            state.owner.push_back(kHonest);
        else if (text[n] == 'A')
            state.owner.push_back(kAdversary);
        else
            fail("owner characters must be H or A");
    }
    if (static_cast<int>(state.owner.size()) != params.depth - 1)
        fail("owner window must have depth-1 entries");
    state.fork_len.assign(static_cast<std::size_t>(params.depth) * params.forks, 0);
    std::istringstream rows(text.substr(c_pos + 3));
    std::string row;
    int i = 0;
    while (std::getline(rows, row, '|')) {
        ++i;
        if (i > params.depth) fail("too many fork rows");
        std::istringstream cells(row);
        std::string cell;
        int j = 0;
        while (std::getline(cells, cell, ',')) {
            ++j;
            if (j > params.forks) fail("too many fork columns");
            int value = 0;
            try {
                value = std::stoi(cell);
            } catch (const std::exception&) {
                fail("fork length is not a number");
            }
            if (value < 0 || value > params.max_len) fail("fork length out of range");
            state.fork(i, j, params) = static_cast<std::uint8_t>(value);
        }
        if (j != params.forks) fail("fork row has wrong width");
    }
    if (i != params.depth) fail("wrong number of fork rows");
    return state;
}

std::string encode_action(const AttackAction& action) {
    if (!action.is_release) return "mine";
    return "release:" + std::to_string(action.i) + "," + std::to_string(action.j) + "," +
           std::to_string(action.k);
}

AttackAction decode_action(const std::string& text) {
    if (text == "mine") return AttackAction::mine();
    if (text.compare(0, 8, "release:") == 0) {
        int i = 0, j = 0, k = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text.substr(8));
        if (in >> i >> c1 >> j >> c2 >> k && c1 == ',' && c2 == ',' && in.eof())
            return AttackAction::release(i, j, k);
    }
    throw std::invalid_argument("bad action encoding \"" + text + "\"");
}

ChainState initial_state(const AttackParams& params) {
    params.validate();
    ChainState state;
    state.fork_len.assign(static_cast<std::size_t>(params.depth) * params.forks, 0);
    state.owner.assign(params.depth - 1, kHonest);
    state.phase = Phase::Mining;
    return state;
}

int mining_fanout(const ChainState& state, const AttackParams& params) {
    if (state.phase != Phase::Mining)
        throw std::invalid_argument("mining fanout is defined for mining-phase states only");
    int fanout = 0;
    for (int i = 1; i <= params.depth; ++i) {
        bool has_empty = false;
        for (int j = 1; j <= params.forks; ++j) {
            if (state.fork(i, j, params) > 0)
                ++fanout;
            else
                has_empty = true;
        }
        if (has_empty) ++fanout;  // one fresh start per depth, at the smallest empty slot
    }
    return fanout;
}

std::vector<Outcome> mining_step_distribution(const ChainState& state, const AttackParams& params) {
    if (state.phase != Phase::Mining)
        throw std::invalid_argument("mining step requested outside the mining phase");
    const int sigma = mining_fanout(state, params);
    const double denom = 1.0 - params.p + params.p * sigma;
    const double p_each = params.p / denom;
    const double p_honest = (1.0 - params.p) / denom;

    std::vector<Outcome> outcomes;
    outcomes.reserve(sigma + 1);
    if (p_each > 0.0) {
        for (int i = 1; i <= params.depth; ++i) {
            int fresh_j = 0;
            for (int j = 1; j <= params.forks; ++j) {
                const std::uint8_t len = state.fork(i, j, params);
                if (len > 0) {
                    Outcome out;
                    out.state = state;
                    out.state.phase = Phase::Adversary;
                    // A success on a full-length fork consumes the step without
                    // lengthening it.
                    out.state.fork(i, j, params) =
                        static_cast<std::uint8_t>(std::min<int>(len + 1, params.max_len));
                    out.prob = p_each;
                    outcomes.push_back(std::move(out));
                } else if (fresh_j == 0) {
                    fresh_j = j;
                }
            }
            if (fresh_j != 0) {
                Outcome out;
                out.state = state;
                out.state.phase = Phase::Adversary;
                out.state.fork(i, fresh_j, params) = 1;
                out.prob = p_each;
                outcomes.push_back(std::move(out));
            }
        }
    }
    if (p_honest > 0.0) {
        // The found honest block stays pending until the adversary reacts; the
        // window shift and its finalization happen on that next transition.
        Outcome out;
        out.state = state;
        out.state.phase = Phase::Honest;
        out.prob = p_honest;
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

std::vector<AttackAction> available_actions(const ChainState& state, const AttackParams& params) {
    std::vector<AttackAction> actions;
    actions.push_back(AttackAction::mine());
    if (state.phase == Phase::Mining) return actions;
    for (int i = 1; i <= params.depth; ++i)
        for (int j = 1; j <= params.forks; ++j)
            for (int k = i; k <= state.fork(i, j, params); ++k)
                actions.push_back(AttackAction::release(i, j, k));
    return actions;
}

std::vector<Outcome> apply_release(const ChainState& state, const AttackAction& action,
                                   const AttackParams& params) {
    if (!action.is_release) throw std::invalid_argument("apply_release needs a release action");
    if (state.phase == Phase::Mining)
        throw std::invalid_argument("releases are not available while mining");
    const int i = action.i, j = action.j, k = action.k;
    if (i < 1 || i > params.depth || j < 1 || j > params.forks)
        throw std::invalid_argument("release indices out of range");
    if (k < 1 || k > state.fork(i, j, params))
        throw std::invalid_argument("cannot publish " + std::to_string(k) + " blocks of fork (" +
                                    std::to_string(i) + "," + std::to_string(j) + ") of length " +
                                    std::to_string(state.fork(i, j, params)));
    if (k < i)
        throw std::invalid_argument("release of " + std::to_string(k) + " blocks from depth " +
                                    std::to_string(i) + " cannot reach the chain tip");

    std::vector<Outcome> outcomes;
    if (state.phase == Phase::Honest && k == i) {
        // Race against the pending honest block.
        if (params.gamma > 0.0) {
            Outcome won = accept_outcome(state, i, j, k, params, params.gamma);
            outcomes.push_back(std::move(won));  // pending block orphaned
        }
        if (params.gamma < 1.0) {
            Outcome lost = concede_outcome(state, params);
            lost.prob = 1.0 - params.gamma;
            outcomes.push_back(std::move(lost));
        }
    } else {
        outcomes.push_back(accept_outcome(state, i, j, k, params, 1.0));
    }
    return outcomes;
}

Outcome resolve_with_mine(const ChainState& state, const AttackParams& params) {
    switch (state.phase) {
        case Phase::Adversary: {
            Outcome out;
            out.state = state;
            out.state.phase = Phase::Mining;
            out.prob = 1.0;
            return out;
        }
        case Phase::Honest: return concede_outcome(state, params);
        case Phase::Mining: break;
    }
    throw std::invalid_argument("mine in the mining phase is a probabilistic step");
}

std::vector<Outcome> transition_outcomes(const ChainState& state, const AttackAction& action,
                                         const AttackParams& params) {
    if (action.is_release) return apply_release(state, action, params);
    if (state.phase == Phase::Mining) return mining_step_distribution(state, params);
    return {resolve_with_mine(state, params)};
}

std::uint64_t default_state_cap() {
    if (const char* env = std::getenv("FORKMDP_STATE_CAP")) {
        char* end = nullptr;
        const unsigned long long value = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && value > 0) return value;
    }
    return 20'000'000;
}

double state_count_estimate(const AttackParams& params) {
    return 3.0 * std::pow(params.max_len + 1.0, static_cast<double>(params.depth) * params.forks) *
           std::pow(2.0, params.depth - 1.0);
}

BuiltModel build_model(const AttackParams& params, std::uint64_t cap) {
    params.validate();
    const double estimate = state_count_estimate(params);
    if (estimate > static_cast<double>(cap))
        throw ResourceError("estimated state count " + std::to_string(estimate) +
                            " exceeds the cap of " + std::to_string(cap) + " states");

    BuiltModel model;
    model.params = params;

    // Discovery: breadth-first layers, each layer ordered by canonical encoding
    // so that state ids are reproducible.
    std::vector<std::uint32_t> layer{0};
    model.states.push_back(initial_state(params));
    model.index_of.emplace(encode_state(model.states[0], params), 0);
    while (!layer.empty()) {
        std::vector<std::pair<std::string, ChainState>> discovered;
        std::unordered_map<std::string, bool> pending;
        for (const std::uint32_t s : layer) {
            const ChainState state = model.states[s];
            for (const AttackAction& action : available_actions(state, params)) {
                for (Outcome& out : transition_outcomes(state, action, params)) {
                    std::string key = encode_state(out.state, params);
                    if (model.index_of.contains(key)) continue;
                    if (!pending.emplace(key, true).second) continue;
                    discovered.emplace_back(std::move(key), std::move(out.state));
                }
            }
        }
        std::sort(discovered.begin(), discovered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        layer.clear();
        for (auto& [key, state] : discovered) {
            const auto id = static_cast<std::uint32_t>(model.states.size());
            if (id >= cap)
                throw ResourceError("explored state count exceeds the cap of " +
                                    std::to_string(cap) + " states");
            model.index_of.emplace(std::move(key), id);
            model.states.push_back(std::move(state));
            layer.push_back(id);
        }
    }

    MdpBuilder builder;
    for (std::uint32_t s = 0; s < model.states.size(); ++s) {
        builder.add_state();
        const ChainState& state = model.states[s];
        for (const AttackAction& action : available_actions(state, params)) {
            builder.begin_action(action_id(action, params));
            for (const Outcome& out : transition_outcomes(state, action, params)) {
                const std::uint32_t target = model.index_of.at(encode_state(out.state, params));
                builder.add_transition(target, out.prob, out.reward_adv, out.reward_hon);
            }
        }
    }
    model.mdp = builder.finish(0);
    return model;
}

}  // namespace forkmdp
