#pragma once

// Exact tabular machinery: expectation and Bellman operators, optimal and
// policy evaluation, one-step variances, transition-chain products and the
// discounted resolvent.

#include "mdvi/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mdvi {

/// (P v)(x, a) = Σ_y P(y|x, a) v(y).
inline QTable apply_P(const TabularMdp& mdp, const VTable& v) {
    mdp.check_value(v);
    const Eigen::VectorXd flat = mdp.transitions() * v;
    return Eigen::Map<const QTable>(flat.data(), static_cast<Eigen::Index>(mdp.num_states()),
                                    static_cast<Eigen::Index>(mdp.num_actions()));
}

/// (π q)(x) = Σ_a π(a|x) q(x, a).
inline VTable aggregate(const DetPolicy& pi, const QTable& q) {
    if (pi.size() != static_cast<std::size_t>(q.rows()))
        throw validation_error("aggregate: policy and Q table disagree on state count");
    VTable out(q.rows());
    for (Eigen::Index x = 0; x < q.rows(); ++x) {
        const int a = pi[static_cast<std::size_t>(x)];
        if (a < 0 || a >= q.cols()) throw validation_error("aggregate: action out of range");
        out(x) = q(x, a);
    }
    return out;
}

inline VTable aggregate(const StochPolicy& pi, const QTable& q) {
    if (pi.probs.rows() != q.rows() || pi.probs.cols() != q.cols())
        throw validation_error("aggregate: policy and Q table shapes differ");
    return pi.probs.cwiseProduct(q).rowwise().sum();
}

inline VTable aggregate(const Policy& pi, const QTable& q) {
    return std::visit([&q](const auto& p) { return aggregate(p, q); }, pi);
}

/// State-to-state kernel (πP)(x, y) = Σ_a π(a|x) P(y|x, a).
inline Matrix state_kernel(const TabularMdp& mdp, const DetPolicy& pi) {
    mdp.check_policy(pi);
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    Matrix k(X, X);
    for (Eigen::Index x = 0; x < X; ++x)
        k.row(x) = mdp.row(static_cast<std::size_t>(x), static_cast<std::size_t>(pi[x]));
    return k;
}

inline Matrix state_kernel(const TabularMdp& mdp, const StochPolicy& pi) {
    mdp.check_policy(pi);
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const auto A = static_cast<Eigen::Index>(mdp.num_actions());
    Matrix k = Matrix::Zero(X, X);
    for (Eigen::Index x = 0; x < X; ++x)
        for (Eigen::Index a = 0; a < A; ++a)
            k.row(x) += pi.probs(x, a) * mdp.row(static_cast<std::size_t>(x),
                                                   static_cast<std::size_t>(a));
    return k;
}

inline Matrix state_kernel(const TabularMdp& mdp, const Policy& pi) {
    return std::visit([&mdp](const auto& p) { return state_kernel(mdp, p); }, pi);
}

/// T^π q = r + γ P (π q).
template <class PolicyT>
QTable bellman_backup(const TabularMdp& mdp, const PolicyT& pi, const QTable& q) {
    mdp.check_q(q);
    mdp.check_policy(pi);
    return mdp.rewards() + mdp.discount() * apply_P(mdp, aggregate(pi, q));
}

/// Result of exact_optimal.
struct OptimalSolution {
    QTable q_star;
    VTable v_star;
    DetPolicy pi_star;
    std::size_t sweeps = 0;
};

/// Optimal values by Q-value iteration, stopped once the sup-norm change of a
/// sweep is at most tol·(1−γ)/(2γ), which puts the returned table within tol
/// of q*. γ = 0 needs a single sweep.
inline OptimalSolution exact_optimal(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw validation_error("exact_optimal: tol must be positive");
    const double gamma = mdp.discount();
    OptimalSolution sol;
    QTable q = QTable::Zero(static_cast<Eigen::Index>(mdp.num_states()),
                            static_cast<Eigen::Index>(mdp.num_actions()));
    if (gamma == 0.0) {
        q = mdp.rewards();
        sol.sweeps = 1;
    } else {
        const double threshold = tol * (1.0 - gamma) / (2.0 * gamma);
        // Contraction guarantees convergence; the cap only guards against a
        // threshold below the floating-point resolution of the values.
        const double horizon = mdp.horizon();
        const auto cap = static_cast<std::size_t>(
            100 + 10.0 * horizon * std::log(4.0 * horizon / threshold + 1.0));
        for (;;) {
            QTable next = mdp.rewards() + gamma * apply_P(mdp, row_max(q));
            const double change = sup_norm(QTable(next - q));
            q = std::move(next);
            ++sol.sweeps;
            if (change <= threshold) break;
            if (sol.sweeps > cap)
                throw std::runtime_error("exact_optimal: no convergence; tolerance too small");
        }
    }
    sol.q_star = q;
    sol.v_star = row_max(q);
    sol.pi_star = greedy(q);
    return sol;
}

/// v^π as the solution of (I − γ πP) v = π r, by dense LU.
template <class PolicyT>
VTable policy_evaluation(const TabularMdp& mdp, const PolicyT& pi) {
    mdp.check_policy(pi);
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const Matrix kernel = state_kernel(mdp, pi);
    const VTable reward = aggregate(pi, mdp.rewards());
    const Matrix system = Matrix::Identity(X, X) - mdp.discount() * kernel;
    const VTable v = system.partialPivLu().solve(reward);
    const double residual = sup_norm(VTable(system * v - reward));
    if (!v.allFinite() || residual > 1e-10 * mdp.horizon())
        throw std::runtime_error("policy_evaluation: linear solve failed (residual " +
                                 std::to_string(residual) + ")");
    return v;
}

/// q^π = r + γ P v^π.
template <class PolicyT>
QTable policy_q(const TabularMdp& mdp, const PolicyT& pi) {
    return mdp.rewards() + mdp.discount() * apply_P(mdp, policy_evaluation(mdp, pi));
}

/// Value of a non-stationary policy: π_k T^{π_{k-1}} ⋯ T^{π_1} q^{π_0} with
/// head = (π_k, ..., π_1) and tail = π_0.
inline VTable eval_nonstationary(const TabularMdp& mdp, const NonStationaryPolicy& nsp) {
    if (nsp.head.empty()) throw validation_error("eval_nonstationary: empty head");
    mdp.check_policy(nsp.tail);
    for (const auto& pi : nsp.head) mdp.check_policy(pi);
    QTable q = policy_q(mdp, nsp.tail);
    // Apply T^{π_1} first, ending with T^{π_{k-1}}.
    for (std::size_t i = nsp.head.size() - 1; i >= 1; --i) q = bellman_backup(mdp, nsp.head[i], q);
    return aggregate(nsp.head.front(), q);
}

/// Predictive variance PVar(v) and its square root σ(v).
struct PredictiveVariance {
    QTable pvar;
    QTable sigma;
};

/// PVar(v)(x, a) = (P v²)(x, a) − (P v)²(x, a), evaluated in the centered
/// form Σ_y P(y|x,a)(v(y) − (P v)(x, a))².
inline PredictiveVariance pvar_sigma(const TabularMdp& mdp, const VTable& v) {
    mdp.check_value(v);
    const QTable mean = apply_P(mdp, v);
    const std::size_t X = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    PredictiveVariance out{QTable(X, A), QTable(X, A)};
    for (std::size_t x = 0; x < X; ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            const double m = mean(x, a);
            const auto row = mdp.row(x, a);
            double var = 0.0;
            for (std::size_t y = 0; y < X; ++y) {
                const double p = row(static_cast<Eigen::Index>(y));
                if (p == 0.0) continue;
                const double d = v(static_cast<Eigen::Index>(y)) - m;
                var += p * d * d;
            }
            if (var < 0.0) {
                if (var < -1e-12) throw std::runtime_error("pvar_sigma: negative variance");
                var = 0.0;
            }
            out.pvar(x, a) = var;
            out.sigma(x, a) = std::sqrt(var);
        }
    }
    return out;
}

/// (P^π f)(x, a) = Σ_y P(y|x, a) f(y, π(y)), the (XA)×(XA) kernel of P π.
inline QTable apply_pair_kernel(const TabularMdp& mdp, const DetPolicy& pi, const QTable& f) {
    return apply_P(mdp, aggregate(pi, f));
}

/// Dense (XA)×(XA) matrix of P^π = P π.
inline Matrix pair_kernel(const TabularMdp& mdp, const DetPolicy& pi) {
    mdp.check_policy(pi);
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const auto A = static_cast<Eigen::Index>(mdp.num_actions());
    Matrix k = Matrix::Zero(X * A, X * A);
    for (Eigen::Index i = 0; i < X * A; ++i)
        for (Eigen::Index y = 0; y < X; ++y) k(i, y * A + pi[static_cast<std::size_t>(y)]) =
            mdp.transitions()(i, y);
    return k;
}

namespace detail {
inline void check_chain_indices(std::span<const DetPolicy> policies, int j, int i) {
    if (i < j) return;
    if (j < 0 || static_cast<std::size_t>(i) >= policies.size()) {
        std::ostringstream os;
        os << "transition chain [" << j << ", " << i << "] outside policy range [0, "
           << policies.size() << ")";
        throw validation_error(os.str());
    }
}
} // namespace detail

/// P_j^i = P^{π_i} P^{π_{i-1}} ⋯ P^{π_j} as a dense (XA)×(XA) matrix;
/// identity when i < j.
inline Matrix compose_transitions(const TabularMdp& mdp, std::span<const DetPolicy> policies,
                                  int j, int i) {
    detail::check_chain_indices(policies, j, i);
    const auto n = static_cast<Eigen::Index>(mdp.num_pairs());
    Matrix out = Matrix::Identity(n, n);
    for (int t = j; t <= i; ++t) out = pair_kernel(mdp, policies[static_cast<std::size_t>(t)]) * out;
    return out;
}

/// P_j^i f without forming the matrix: P^{π_j} is applied first.
inline QTable apply_transition_chain(const TabularMdp& mdp, std::span<const DetPolicy> policies,
                                     int j, int i, QTable f) {
    detail::check_chain_indices(policies, j, i);
    for (int t = j; t <= i; ++t)
        f = apply_pair_kernel(mdp, policies[static_cast<std::size_t>(t)], f);
    return f;
}

/// N^π f = Σ_t (γ πP)^t f = (I − γ πP)^{-1} f, by dense LU.
inline VTable apply_resolvent(const TabularMdp& mdp, const DetPolicy& pi, const VTable& f) {
    mdp.check_value(f, "resolvent input");
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const Matrix system = Matrix::Identity(X, X) - mdp.discount() * state_kernel(mdp, pi);
    const VTable out = system.partialPivLu().solve(f);
    const double scale = std::max(1.0, sup_norm(f));
    if (!out.allFinite() || sup_norm(VTable(system * out - f)) > 1e-10 * mdp.horizon() * scale)
        throw std::runtime_error("apply_resolvent: linear solve failed");
    return out;
}

} // namespace mdvi
