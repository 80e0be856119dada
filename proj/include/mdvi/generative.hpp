#pragma once

#include "mdvi/mdp.hpp"
#include "mdvi/rng.hpp"

#include <cstdint>
#include <vector>

namespace mdvi {

/// Next state drawn from P(·|x, a) by inverse CDF over one uniform draw.
/// Zero-mass states are never returned; if rounding leaves the uniform above
/// the final cumulative sum, the last state with positive mass is used.
inline std::size_t generative_sample(const TabularMdp& mdp, std::size_t x, std::size_t a, Rng& rng) {
    const auto row = mdp.row(x, a);
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_support = 0;
    for (Eigen::Index y = 0; y < row.size(); ++y) {
        const double p = row(y);
        if (p <= 0.0) continue;
        cumulative += p;
        last_support = static_cast<std::size_t>(y);
        if (u < cumulative) return last_support;
    }
    return last_support;
}

/// Simulator with precomputed cumulative rows and a per-run sample counter.
/// Draws are identical to generative_sample for the same Rng stream.
class GenerativeModel {
public:
    explicit GenerativeModel(const TabularMdp& mdp)
        : num_actions_(mdp.num_actions()), support_(mdp.num_pairs()), cdf_(mdp.num_pairs()) {
        for (std::size_t i = 0; i < mdp.num_pairs(); ++i) {
            const auto row = mdp.transitions().row(static_cast<Eigen::Index>(i));
            double cumulative = 0.0;
            for (Eigen::Index y = 0; y < row.size(); ++y) {
                if (row(y) <= 0.0) continue;
                cumulative += row(y);
                support_[i].push_back(static_cast<std::size_t>(y));
                cdf_[i].push_back(cumulative);
            }
        }
    }

    std::size_t sample(std::size_t x, std::size_t a, Rng& rng) {
        ++samples_used_;
        const std::size_t i = x * num_actions_ + a;
        const double u = rng.uniform();
        const auto& cdf = cdf_[i];
        for (std::size_t k = 0; k < cdf.size(); ++k) {
            if (u < cdf[k]) return support_[i][k];
        }
        return support_[i].back();
    }

    std::uint64_t samples_used() const { return samples_used_; }

private:
    std::size_t num_actions_;
    std::vector<std::vector<std::size_t>> support_;
    std::vector<std::vector<double>> cdf_;
    std::uint64_t samples_used_ = 0;
};

} // namespace mdvi
