#pragma once

#include "mdvi/generative.hpp"
#include "mdvi/operators.hpp"
#include "mdvi/rng.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace mdvi {

/// Synchronous Q-learning with step size η_k = (k + 1)^{-w}.
struct QLearningConfig {
    int iterations = 100;
    int samples_per_update = 1;
    double rate_exponent = 1.0;
    std::uint64_t seed = 0;

    bool operator==(const QLearningConfig&) const = default;

    void validate() const {
        if (iterations < 0) throw validation_error("qlearning: iterations must be non-negative");
        if (samples_per_update < 1) throw validation_error("qlearning: samples per update must be >= 1");
        if (!(rate_exponent >= 0.5 && rate_exponent <= 1.0))
            throw validation_error("qlearning: rate exponent must lie in [0.5, 1]");
    }

    double step_size(int k) const { return std::pow(static_cast<double>(k) + 1.0, -rate_exponent); }
};

struct QLearningStep {
    int k = 0;
    QTable q;
    DetPolicy policy;
    std::uint64_t samples_used = 0;
};

/// Called with q_k and its greedy policy for k = 0..K; false stops the run.
using QLearningObserver = std::function<bool(const QLearningStep&)>;

inline void q_learning_stream(const TabularMdp& mdp, const QLearningConfig& config,
                              const QLearningObserver& observe) {
    config.validate();
    GenerativeModel model(mdp);
    Rng rng(config.seed);
    const std::size_t X = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const int M = config.samples_per_update;
    const double gamma = mdp.discount();

    QLearningStep step{0, QTable::Zero(static_cast<Eigen::Index>(X), static_cast<Eigen::Index>(A)),
                       DetPolicy::lowest(X), 0};
    if (!observe(step)) return;
    QTable target(static_cast<Eigen::Index>(X), static_cast<Eigen::Index>(A));
    for (int k = 0; k < config.iterations; ++k) {
        const VTable best = row_max(step.q);
        for (std::size_t x = 0; x < X; ++x) {
            for (std::size_t a = 0; a < A; ++a) {
                double total = 0.0;
                for (int m = 0; m < M; ++m) total += best(static_cast<Eigen::Index>(model.sample(x, a, rng)));
                target(x, a) = mdp.rewards()(x, a) + gamma * (total / M);
            }
        }
        const double eta = config.step_size(k);
        step.q = (1.0 - eta) * step.q + eta * target;
        step.k = k + 1;
        step.policy = greedy(step.q);
        step.samples_used = model.samples_used();
        if (!observe(step)) return;
    }
}

struct QLearningRun {
    DetPolicy policy;
    std::vector<QLearningStep> trace;
};

inline QLearningRun q_learning_run(const TabularMdp& mdp, const QLearningConfig& config) {
    QLearningRun run;
    q_learning_stream(mdp, config, [&run](const QLearningStep& s) {
        run.trace.push_back(s);
        return true;
    });
    run.policy = run.trace.back().policy;
    return run;
}

} // namespace mdvi
