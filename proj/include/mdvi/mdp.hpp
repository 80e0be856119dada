#pragma once

#include "mdvi/types.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mdvi {

/// Finite discounted MDP (X, A, γ, r, P) with dense storage.
///
/// Transitions are kept as an (X·A)×X row-major matrix whose row x·A + a is
/// the next-state distribution P(·|x, a). Rewards are X×A and bounded by 1
/// in absolute value. Instances are immutable after construction and every
/// constructor re-checks the invariants.
class TabularMdp {
public:
    /// Tolerance on transition row sums accepted by the constructor.
    static constexpr double kRowSumTolerance = 1e-12;

    TabularMdp(QTable rewards, Matrix transitions, double discount)
        : rewards_(std::move(rewards)), transitions_(std::move(transitions)),
          discount_(discount) {
        validate();
    }

    /// Builds an MDP from nested containers: rewards[x][a] and
    /// transitions[x][a][y].
    static TabularMdp from_nested(const std::vector<std::vector<double>>& rewards,
                                  const std::vector<std::vector<std::vector<double>>>& transitions,
                                  double discount) {
        const std::size_t X = rewards.size();
        if (X == 0) throw validation_error("MDP needs at least one state");
        const std::size_t A = rewards.front().size();
        if (A == 0) throw validation_error("MDP needs at least one action");
        if (transitions.size() != X) throw validation_error("transitions: expected X rows");
        QTable r(X, A);
        Matrix p(X * A, X);
        for (std::size_t x = 0; x < X; ++x) {
            if (rewards[x].size() != A) throw validation_error("rewards: ragged action dimension");
            if (transitions[x].size() != A)
                throw validation_error("transitions: ragged action dimension");
            for (std::size_t a = 0; a < A; ++a) {
                r(x, a) = rewards[x][a];
                if (transitions[x][a].size() != X)
                    throw validation_error("transitions: row length must equal num_states");
                for (std::size_t y = 0; y < X; ++y) p(x * A + a, y) = transitions[x][a][y];
            }
        }
        return TabularMdp(std::move(r), std::move(p), discount);
    }

    std::size_t num_states() const { return static_cast<std::size_t>(rewards_.rows()); }
    std::size_t num_actions() const { return static_cast<std::size_t>(rewards_.cols()); }
    std::size_t num_pairs() const { return num_states() * num_actions(); }
    double discount() const { return discount_; }
    /// Effective horizon H = 1/(1 − γ).
    double horizon() const { return 1.0 / (1.0 - discount_); }

    const QTable& rewards() const { return rewards_; }
    const Matrix& transitions() const { return transitions_; }

    double transition(std::size_t x, std::size_t a, std::size_t y) const {
        return transitions_(static_cast<Eigen::Index>(x * num_actions() + a),
                            static_cast<Eigen::Index>(y));
    }

    auto row(std::size_t x, std::size_t a) const {
        return transitions_.row(static_cast<Eigen::Index>(x * num_actions() + a));
    }

    /// Throws validation_error unless v has one entry per state.
    void check_value(const VTable& v, const char* what = "value table") const {
        if (static_cast<std::size_t>(v.size()) != num_states()) {
            std::ostringstream os;
            os << what << ": expected length " << num_states() << ", got " << v.size();
            throw validation_error(os.str());
        }
    }

    void check_q(const QTable& q, const char* what = "Q table") const {
        if (static_cast<std::size_t>(q.rows()) != num_states() ||
            static_cast<std::size_t>(q.cols()) != num_actions()) {
            std::ostringstream os;
            os << what << ": expected " << num_states() << "x" << num_actions() << ", got "
               << q.rows() << "x" << q.cols();
            throw validation_error(os.str());
        }
    }

    void check_policy(const DetPolicy& pi) const {
        if (pi.size() != num_states()) throw validation_error("policy: wrong number of states");
        for (int a : pi.action) {
            if (a < 0 || static_cast<std::size_t>(a) >= num_actions())
                throw validation_error("policy: action index out of range");
        }
    }

    void check_policy(const StochPolicy& pi) const {
        check_q(pi.probs, "stochastic policy");
        for (Eigen::Index x = 0; x < pi.probs.rows(); ++x) {
            if ((pi.probs.row(x).array() < 0.0).any())
                throw validation_error("stochastic policy: negative probability");
            if (std::abs(pi.probs.row(x).sum() - 1.0) > kRowSumTolerance)
                throw validation_error("stochastic policy: row does not sum to 1");
        }
    }

    void check_policy(const Policy& pi) const {
        std::visit([this](const auto& p) { check_policy(p); }, pi);
    }

private:
    void validate() const {
        if (!(discount_ >= 0.0 && discount_ < 1.0))
            throw validation_error("discount must lie in [0, 1)");
        if (rewards_.rows() == 0 || rewards_.cols() == 0)
            throw validation_error("MDP needs at least one state and one action");
        const Eigen::Index X = rewards_.rows();
        const Eigen::Index A = rewards_.cols();
        if (transitions_.rows() != X * A || transitions_.cols() != X)
            throw validation_error("transitions must be (X*A) x X");
        if (!rewards_.allFinite()) throw validation_error("rewards must be finite");
        if (rewards_.cwiseAbs().maxCoeff() > 1.0)
            throw validation_error("rewards must lie in [-1, 1]");
        if (!transitions_.allFinite()) throw validation_error("transitions must be finite");
        for (Eigen::Index i = 0; i < transitions_.rows(); ++i) {
            if ((transitions_.row(i).array() < 0.0).any()) {
                std::ostringstream os;
                os << "transition row (" << i / A << ", " << i % A << ") has a negative entry";
                throw validation_error(os.str());
            }
            const double sum = transitions_.row(i).sum();
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                std::ostringstream os;
                os.precision(17);
                os << "transition row (" << i / A << ", " << i % A << ") sums to " << sum;
                throw validation_error(os.str());
            }
        }
    }

    QTable rewards_;
    Matrix transitions_;
    double discount_;
};

} // namespace mdvi
