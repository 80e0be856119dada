#pragma once

#include "mdvi/mdp.hpp"
#include "mdvi/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace mdvi {

struct GarnetParams {
    std::size_t num_states = 8;
    std::size_t num_actions = 2;
    std::size_t branching = 2;
    double discount = 0.9;
    std::uint64_t seed = 0;

    bool operator==(const GarnetParams&) const = default;

    void validate() const {
        if (num_states == 0 || num_actions == 0)
            throw validation_error("garnet: states and actions must be positive");
        if (branching == 0 || branching > num_states)
            throw validation_error("garnet: branching must lie in [1, num_states]");
        if (!(discount >= 0.0 && discount < 1.0))
            throw validation_error("garnet: discount must lie in [0, 1)");
    }
};

/// Random Garnet MDP.
///
/// Generation order, all from one Rng(seed) stream:
///  1. for x = 0..X-1, for a = 0..A-1:
///     - pick B distinct successors by a partial Fisher-Yates shuffle of
///       (0, ..., X-1): step i swaps slot i with slot i + below(X - i);
///     - draw B-1 cut points uniform in (0, 1) and sort them;
///     - the k-th picked successor receives p_k − p_{k-1} (p_0 = 0, p_B = 1).
///  2. for x = 0..X-1: ρ(x) = 2u − 1 with u uniform in (0, 1), and
///     r(x, a) = ρ(x) for every action.
inline TabularMdp generate_garnet(const GarnetParams& params) {
    params.validate();
    const std::size_t X = params.num_states;
    const std::size_t A = params.num_actions;
    const std::size_t B = params.branching;
    Rng rng(params.seed);

    Matrix transitions = Matrix::Zero(static_cast<Eigen::Index>(X * A), static_cast<Eigen::Index>(X));
    std::vector<std::size_t> slots(X);
    std::vector<double> cuts(B + 1);
    for (std::size_t x = 0; x < X; ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            std::iota(slots.begin(), slots.end(), std::size_t{0});
            for (std::size_t i = 0; i < B; ++i) {
                const auto pick = i + static_cast<std::size_t>(rng.below(X - i));
                std::swap(slots[i], slots[pick]);
            }
            cuts.front() = 0.0;
            cuts.back() = 1.0;
            for (std::size_t i = 1; i < B; ++i) cuts[i] = rng.uniform_open();
            std::sort(cuts.begin() + 1, cuts.end() - 1);
            const auto row = static_cast<Eigen::Index>(x * A + a);
            for (std::size_t k = 1; k <= B; ++k)
                transitions(row, static_cast<Eigen::Index>(slots[k - 1])) = cuts[k] - cuts[k - 1];
        }
    }

    QTable rewards(static_cast<Eigen::Index>(X), static_cast<Eigen::Index>(A));
    for (std::size_t x = 0; x < X; ++x) {
        const double rho = 2.0 * rng.uniform_open() - 1.0;
        rewards.row(static_cast<Eigen::Index>(x)).setConstant(rho);
    }
    return TabularMdp(std::move(rewards), std::move(transitions), params.discount);
}

} // namespace mdvi
