#pragma once

#include "mdvi/operators.hpp"

#include <cstdint>
#include <vector>

namespace mdvi {

/// Snapshot of one MDVI iteration k.
///
/// k = 0 is the initial state (everything zero, π_0 = all-lowest-index).
/// eps and E are filled by compute_eps_and_E:
///   ε_k = q_k − r − γ P v_{k−1}   (sampling error of the k-th update),
///   E_k = ε_k + α E_{k−1}          (α-discounted running sum, E_0 = 0).
struct IterationTrace {
    int k = 0;
    QTable q;
    QTable s;
    VTable w;
    VTable v;
    QTable eps;
    QTable E;
    /// Greedy policy of s_k (lowest-index ties).
    DetPolicy policy;
    std::uint64_t samples_used = 0;
};

/// Fills eps and E along a trace. In exact mode the update uses the true
/// expectation, so ε_k is set to zero rather than to rounding residue.
inline void compute_eps_and_E(const TabularMdp& mdp, std::vector<IterationTrace>& trace,
                              double alpha, bool exact_mode) {
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const auto A = static_cast<Eigen::Index>(mdp.num_actions());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        auto& t = trace[i];
        if (i == 0 || exact_mode) {
            t.eps = QTable::Zero(X, A);
        } else {
            // P̂_{k-1} v_{k-1} = (q_k − r)/γ, so γ P̂ v − γ P v = q_k − r − γ P v_{k-1}.
            t.eps = t.q - mdp.rewards() - mdp.discount() * apply_P(mdp, trace[i - 1].v);
        }
        t.E = (i == 0) ? QTable(t.eps) : QTable(t.eps + alpha * trace[i - 1].E);
    }
}

/// Policies π_0..π_K of a trace, indexed by iteration.
inline std::vector<DetPolicy> trace_policies(const std::vector<IterationTrace>& trace) {
    std::vector<DetPolicy> out;
    out.reserve(trace.size());
    for (const auto& t : trace) out.push_back(t.policy);
    return out;
}

} // namespace mdvi
