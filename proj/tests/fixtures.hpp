#pragma once

#include "mdvi/garnet.hpp"
#include "mdvi/mdp.hpp"

#include <random>
#include <vector>

namespace fixtures {

using mdvi::TabularMdp;

/// Dense random MDP with rewards in [−1, 1] drawn from std::mt19937_64.
inline TabularMdp random_mdp(std::size_t X, std::size_t A, double gamma, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> r(X, std::vector<double>(A));
    std::vector<std::vector<std::vector<double>>> P(X, std::vector<std::vector<double>>(A, std::vector<double>(X)));
    for (std::size_t x = 0; x < X; ++x)
        for (std::size_t a = 0; a < A; ++a) {
            r[x][a] = 2.0 * u(gen) - 1.0;
            double total = 0.0;
            for (auto& p : P[x][a]) total += (p = u(gen));
            for (auto& p : P[x][a]) p /= total;
        }
    return TabularMdp::from_nested(r, P, gamma);
}

/// Fixed 3-state, 2-action MDP with distinct action values.
inline TabularMdp three_state() {
    return TabularMdp::from_nested({{0.1, 0.5}, {-0.3, 0.8}, {1.0, -1.0}},
                                   {{{0.2, 0.5, 0.3}, {0.0, 1.0, 0.0}},
                                    {{0.6, 0.0, 0.4}, {0.25, 0.25, 0.5}},
                                    {{0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}}},
                                   0.9);
}

/// Two states that swap deterministically; reward 1 in state 0.
inline TabularMdp two_cycle(double gamma) {
    return TabularMdp::from_nested({{1.0}, {0.0}}, {{{0.0, 1.0}}, {{1.0, 0.0}}}, gamma);
}

inline TabularMdp garnet(std::uint64_t seed, std::size_t branching = 2) {
    mdvi::GarnetParams p;
    p.seed = seed;
    p.branching = branching;
    return mdvi::generate_garnet(p);
}

inline mdvi::DetPolicy random_policy(std::size_t X, std::size_t A, std::mt19937_64& gen) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(A) - 1);
    mdvi::DetPolicy pi = mdvi::DetPolicy::lowest(X);
    for (auto& a : pi.action) a = d(gen);
    return pi;
}

inline std::vector<int> as_vector(const mdvi::DetPolicy& pi) { return pi.action; }

inline std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace fixtures
