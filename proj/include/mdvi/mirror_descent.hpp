#pragma once

#include "mdvi/generative.hpp"
#include "mdvi/operators.hpp"
#include "mdvi/rng.hpp"
#include "mdvi/softmax.hpp"
#include "mdvi/trace.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace mdvi {

/// Knobs of sampled MDVI. alpha = τ/(τ+κ) weights the accumulator
/// s_{k+1} = q_{k+1} + α s_k; beta = 1/(τ+κ) is the inverse temperature
/// (infinite for the greedy limit).
struct MdviConfig {
    double alpha = 0.9;
    double beta = kInfiniteBeta;
    int iterations = 100;
    int samples_per_update = 1;
    std::uint64_t seed = 0;
    /// Replace sampled next-state averages by exact expectations.
    bool exact_mode = false;

    bool operator==(const MdviConfig&) const = default;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw validation_error("mdvi: alpha must lie in [0, 1]");
        check_beta(beta);
        if (iterations < 1) throw validation_error("mdvi: iterations must be >= 1");
        if (samples_per_update < 1) throw validation_error("mdvi: samples per update must be >= 1");
    }
};

struct MdviState {
    int iteration = 0;
    QTable s;
    VTable w;
    VTable w_prev;
    /// q_k of the last update (zero at k = 0).
    QTable q;
    /// k·M·X·A. Exact mode draws nothing but keeps the same nominal count so
    /// that sample axes line up across modes.
    std::uint64_t samples_used = 0;

    static MdviState initial(const TabularMdp& mdp) {
        const auto X = static_cast<Eigen::Index>(mdp.num_states());
        const auto A = static_cast<Eigen::Index>(mdp.num_actions());
        return MdviState{0, QTable::Zero(X, A), VTable::Zero(X), VTable::Zero(X), QTable::Zero(X, A), 0};
    }

    /// v_k = w_k − α w_{k−1}.
    VTable v(double alpha) const { return w - alpha * w_prev; }
};

/// One MDVI update. Samples are drawn x-major, a, then m innermost.
inline MdviState mdvi_iteration(const TabularMdp& mdp, const MdviState& state,
                                const MdviConfig& config, GenerativeModel& model, Rng& rng) {
    const VTable v = state.v(config.alpha);
    const double gamma = mdp.discount();
    QTable q;
    if (config.exact_mode) {
        q = mdp.rewards() + gamma * apply_P(mdp, v);
    } else {
        const std::size_t X = mdp.num_states();
        const std::size_t A = mdp.num_actions();
        const int M = config.samples_per_update;
        q.resize(static_cast<Eigen::Index>(X), static_cast<Eigen::Index>(A));
        for (std::size_t x = 0; x < X; ++x) {
            for (std::size_t a = 0; a < A; ++a) {
                double total = 0.0;
                for (int m = 0; m < M; ++m) total += v(static_cast<Eigen::Index>(model.sample(x, a, rng)));
                q(x, a) = mdp.rewards()(x, a) + gamma * (total / M);
            }
        }
    }
    MdviState next;
    next.iteration = state.iteration + 1;
    next.q = q;
    next.s = q + config.alpha * state.s;
    next.w_prev = state.w;
    next.w = soft_value(next.s, config.beta);
    next.samples_used =
        state.samples_used + static_cast<std::uint64_t>(config.samples_per_update) * mdp.num_pairs();
    return next;
}

/// Convenience overload that owns a simulator for the duration of the call.
inline MdviState mdvi_iteration(const TabularMdp& mdp, const MdviState& state,
                                const MdviConfig& config, Rng& rng) {
    GenerativeModel model(mdp);
    return mdvi_iteration(mdp, state, config, model, rng);
}

/// Called after every iteration (including k = 0) with the current state and
/// the policy extracted from s_k. Returning false stops the run.
using MdviObserver = std::function<bool(const MdviState&, const Policy&)>;

/// Streams a run through an observer without storing it.
inline void mdvi_stream(const TabularMdp& mdp, const MdviConfig& config, const MdviObserver& observe) {
    config.validate();
    GenerativeModel model(mdp);
    Rng rng(config.seed);
    MdviState state = MdviState::initial(mdp);
    if (!observe(state, boltzmann_policy(state.s, config.beta))) return;
    for (int k = 0; k < config.iterations; ++k) {
        state = mdvi_iteration(mdp, state, config, model, rng);
        if (!observe(state, boltzmann_policy(state.s, config.beta))) return;
    }
}

struct MdviRun {
    MdviConfig config;
    /// π_0..π_K: greedy for β = ∞, Boltzmann otherwise.
    std::vector<Policy> policies;
    std::vector<IterationTrace> trace;
};

/// Full run with the trace needed by the diagnostics (ε_k, E_k included).
inline MdviRun mdvi_run(const TabularMdp& mdp, const MdviConfig& config) {
    MdviRun run{config, {}, {}};
    run.policies.reserve(static_cast<std::size_t>(config.iterations) + 1);
    run.trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
    mdvi_stream(mdp, config, [&](const MdviState& st, const Policy& pi) {
        run.policies.push_back(pi);
        IterationTrace t;
        t.k = st.iteration;
        t.q = st.q;
        t.s = st.s;
        t.w = st.w;
        t.v = st.v(config.alpha);
        t.policy = greedy(st.s);
        t.samples_used = st.samples_used;
        run.trace.push_back(std::move(t));
        return true;
    });
    compute_eps_and_E(mdp, run.trace, config.alpha, config.exact_mode);
    return run;
}

} // namespace mdvi
