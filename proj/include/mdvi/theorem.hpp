#pragma once

#include "mdvi/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mdvi {

enum class Regime {
    /// Guarantee for the non-stationary policy π'_K: α = γ.
    NonStationary,
    /// Guarantee for the last policy π_K: α = 1 − (1 − γ)².
    LastPolicy,
};

struct TheoremParams {
    Regime regime = Regime::NonStationary;
    double epsilon = 0.0;
    double delta = 0.0;
    std::array<double, 4> c{1.0, 1.0, 1.0, 1.0};
    double alpha = 0.0;
    std::uint64_t iterations = 0;
    std::uint64_t samples_per_update = 0;
    std::vector<std::string> warnings;
};

/// α, K and M prescribed by the sample-complexity theorems. Logarithms are
/// natural; K is computed first and then enters M through log(16 K X A / δ).
/// Only c1, c2 matter for the non-stationary regime and c3, c4 for the
/// last-policy regime.
inline TheoremParams theorem_params(Regime regime, double gamma, std::size_t num_states,
                                    std::size_t num_actions, double epsilon, double delta,
                                    std::array<double, 4> c = {1.0, 1.0, 1.0, 1.0}) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw validation_error("epsilon must lie in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw validation_error("delta must lie in (0, 1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw validation_error("gamma must lie in [0, 1)");
    if (num_states == 0 || num_actions == 0) throw validation_error("X and A must be positive");
    for (double ci : c)
        if (!(ci > 0.0)) throw validation_error("theorem constants must be positive");

    const double H = 1.0 / (1.0 - gamma);
    const double XA = static_cast<double>(num_states) * static_cast<double>(num_actions);
    TheoremParams out;
    out.regime = regime;
    out.epsilon = epsilon;
    out.delta = delta;
    out.c = c;
    if (regime == Regime::NonStationary) {
        out.alpha = gamma;
        out.iterations = static_cast<std::uint64_t>(
            std::ceil(3.0 / (1.0 - out.alpha) * std::log(c[0] * H / epsilon) + 2.0));
        const double K = static_cast<double>(out.iterations);
        out.samples_per_update = static_cast<std::uint64_t>(
            std::ceil(c[1] * H * H / (epsilon * epsilon) * std::log(16.0 * K * XA / delta)));
        if (epsilon > 1.0 / std::sqrt(H))
            out.warnings.push_back("epsilon exceeds 1/sqrt(H); the non-stationary guarantee assumes epsilon <= 1/sqrt(H)");
    } else {
        out.alpha = 1.0 - (1.0 - gamma) * (1.0 - gamma);
        out.iterations = static_cast<std::uint64_t>(
            std::ceil(5.0 / (1.0 - out.alpha) * std::log(c[2] * H / epsilon) + 2.0));
        const double K = static_cast<double>(out.iterations);
        out.samples_per_update = static_cast<std::uint64_t>(
            std::ceil(c[3] * H / (epsilon * epsilon) * std::log(16.0 * K * XA / delta)));
        if (epsilon > 1.0 / H)
            out.warnings.push_back("epsilon exceeds 1/H; the last-policy guarantee assumes epsilon <= 1/H");
    }
    return out;
}

} // namespace mdvi
