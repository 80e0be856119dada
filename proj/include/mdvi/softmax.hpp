#pragma once

#include "mdvi/types.hpp"

#include <cmath>
#include <limits>

namespace mdvi {

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

inline void check_beta(double beta) {
    if (!(beta > 0.0)) throw validation_error("beta must be positive (or infinite)");
}

/// w(x) = β⁻¹ log Σ_a exp(β s(x, a)), max-shifted; the rowwise max when β = ∞.
inline VTable soft_value(const QTable& s, double beta) {
    check_beta(beta);
    if (std::isinf(beta)) return row_max(s);
    VTable out(s.rows());
    for (Eigen::Index x = 0; x < s.rows(); ++x) {
        const double m = s.row(x).maxCoeff();
        double acc = 0.0;
        for (Eigen::Index a = 0; a < s.cols(); ++a) acc += std::exp(beta * (s(x, a) - m));
        out(x) = m + std::log(acc) / beta;
    }
    return out;
}

/// π(a|x) ∝ exp(β s(x, a)); greedy with lowest-index ties when β = ∞.
inline Policy boltzmann_policy(const QTable& s, double beta) {
    check_beta(beta);
    if (std::isinf(beta)) return greedy(s);
    StochPolicy pi{QTable(s.rows(), s.cols())};
    for (Eigen::Index x = 0; x < s.rows(); ++x) {
        const double m = s.row(x).maxCoeff();
        double total = 0.0;
        for (Eigen::Index a = 0; a < s.cols(); ++a) {
            pi.probs(x, a) = std::exp(beta * (s(x, a) - m));
            total += pi.probs(x, a);
        }
        pi.probs.row(x) /= total;
    }
    return pi;
}

} // namespace mdvi
