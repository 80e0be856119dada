#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mdvi {

/// State-value function, one entry per state.
using VTable = Eigen::VectorXd;

/// Action-value function laid out X×A, row-major so that the flat index of
/// (x, a) is x * A + a (the same ordering as the transition rows).
using QTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major matrix used for transition kernels and their products.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when an input violates a documented precondition or invariant.
class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Deterministic policy: one action index per state.
struct DetPolicy {
    std::vector<int> action;

    DetPolicy() = default;
    explicit DetPolicy(std::vector<int> a) : action(std::move(a)) {}
    /// All states choose action 0.
    static DetPolicy lowest(std::size_t num_states) {
        return DetPolicy(std::vector<int>(num_states, 0));
    }

    std::size_t size() const { return action.size(); }
    int operator[](std::size_t x) const { return action[x]; }
    int& operator[](std::size_t x) { return action[x]; }
    bool operator==(const DetPolicy&) const = default;
};

/// Stochastic policy stored as an X×A table of action probabilities.
struct StochPolicy {
    QTable probs;
};

using Policy = std::variant<DetPolicy, StochPolicy>;

/// The policy that plays head[0] at t = 0, head[1] at t = 1, ..., and the
/// tail policy forever after the head is exhausted. For MDVI outputs,
/// head = (π_k, π_{k-1}, ..., π_1) and tail = π_0.
struct NonStationaryPolicy {
    std::vector<DetPolicy> head;
    DetPolicy tail;
};

template <class Derived>
double sup_norm(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Greedy policy of q with the lowest-index tie-break.
inline DetPolicy greedy(const QTable& q) {
    DetPolicy pi = DetPolicy::lowest(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index x = 0; x < q.rows(); ++x) {
        int best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a) {
            if (q(x, a) > q(x, best)) best = static_cast<int>(a);
        }
        pi[static_cast<std::size_t>(x)] = best;
    }
    return pi;
}

/// Rowwise maximum of q.
inline VTable row_max(const QTable& q) { return q.rowwise().maxCoeff(); }

} // namespace mdvi
