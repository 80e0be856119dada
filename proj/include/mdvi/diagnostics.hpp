#pragma once

// Instrumented checks of MDVI's error-propagation and concentration
// machinery on realized traces. Every checker is a deterministic function of
// the trace it is given.

#include "mdvi/mirror_descent.hpp"
#include "mdvi/operators.hpp"
#include "mdvi/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mdvi {

/// Absolute slack allowed on every elementwise lemma inequality.
inline constexpr double kLemmaSlack = 1e-8;

/// A_k = Σ_{j<k} α^j.
inline double a_k(double alpha, int k) {
    if (k <= 0) return 0.0;
    if (alpha == 1.0) return static_cast<double>(k);
    return (1.0 - std::pow(alpha, k)) / (1.0 - alpha);
}

/// A_∞ = 1/(1 − α); infinite when α = 1.
inline double a_infinity(double alpha) {
    return alpha < 1.0 ? 1.0 / (1.0 - alpha) : std::numeric_limits<double>::infinity();
}

/// A_{γ,k} = Σ_{j=0}^{k-1} γ^{k-j} α^j.
///
/// Closed form γ(α^k − γ^k)/(α − γ) when α ≠ γ and kγ^k when they are equal.
/// When |α − γ| is small enough for the closed form to lose digits, the sum
/// is evaluated directly.
inline double a_gamma_k(double alpha, double gamma, int k) {
    if (k <= 0) return 0.0;
    const double gap = alpha - gamma;
    if (std::abs(gap) <= 1e-14) return k * std::pow(gamma, k);
    if (std::abs(gap) < 1e-3) {
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::pow(gamma, k - j) * std::pow(alpha, j);
        return sum;
    }
    return gamma * (std::pow(alpha, k) - std::pow(gamma, k)) / gap;
}

struct SeriesConstants {
    double A_k = 0.0;
    double A_inf = 0.0;
    double A_gamma_k = 0.0;
    double iota1 = 0.0;
    double iota2 = 0.0;
};

/// Constants for iteration k of a K-iteration run on an X×A problem.
inline SeriesConstants series_constants(double alpha, double gamma, int k, int K, std::size_t X,
                                        std::size_t A, double delta) {
    const double KXA = static_cast<double>(K) * static_cast<double>(X) * static_cast<double>(A);
    return SeriesConstants{a_k(alpha, k), a_infinity(alpha), a_gamma_k(alpha, gamma, k),
                           std::log(8.0 * KXA / delta), std::log(16.0 * KXA / delta)};
}

/// Max over k ∈ [1, K] of ‖s_k − (A_k r + γ P w_{k−1} + E_k)‖_∞.
inline double check_s_identity(const TabularMdp& mdp, const std::vector<IterationTrace>& trace,
                               double alpha) {
    double worst = 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        const QTable predicted = a_k(alpha, static_cast<int>(k)) * mdp.rewards() +
                                 mdp.discount() * apply_P(mdp, trace[k - 1].w) + trace[k].E;
        worst = std::max(worst, sup_norm(QTable(trace[k].s - predicted)));
    }
    return worst;
}

/// Result of a two-sided elementwise bracket lower ≤ value ≤ upper.
struct BracketCheck {
    bool lower_ok = true;
    bool upper_ok = true;
    /// min over entries of value − lower (negative means the raw inequality
    /// fails; failure is declared only below −kLemmaSlack).
    double lower_margin = std::numeric_limits<double>::infinity();
    /// min over entries of upper − value.
    double upper_margin = std::numeric_limits<double>::infinity();

    bool ok() const { return lower_ok && upper_ok; }
    double worst_margin() const { return std::min(lower_margin, upper_margin); }

    static BracketCheck evaluate(const VTable& value, const VTable* lower, const VTable* upper) {
        BracketCheck c;
        if (lower) c.lower_margin = (value - *lower).minCoeff();
        if (upper) c.upper_margin = (*upper - value).minCoeff();
        c.lower_ok = c.lower_margin >= -kLemmaSlack;
        c.upper_ok = c.upper_margin >= -kLemmaSlack;
        return c;
    }
};

struct NonStationaryCheck {
    BracketCheck bracket;
    /// v* − v^{π'_k}.
    VTable gap;
    VTable Gamma;
};

struct LastPolicyCheck {
    BracketCheck bracket;
    /// v* − v^{π_k}.
    VTable gap;
    VTable rhs;
};

struct DeltaVCheck {
    /// |v_k| ≤ H (with 1e−10 slack).
    bool v_bounded_ok = true;
    double v_bound_margin = 0.0;
    /// Δ_k = w_k − w_{k−1} inside its chain bracket.
    BracketCheck delta;
    /// v* − v_k inside its chain bracket; the upper side needs A_∞ and is
    /// skipped when α = 1.
    BracketCheck v_error;
    bool v_error_upper_checked = true;

    bool ok() const { return v_bounded_ok && delta.ok() && v_error.ok(); }
};

/// Realized run plus the exact quantities the lemmas compare it with.
///
/// v* is policy_evaluation(π*) for the greedy π* of exact_optimal, so that
/// π* and v* agree to solver precision. Traces must come from greedy
/// (β = ∞) runs.
class LemmaContext {
public:
    LemmaContext(const TabularMdp& mdp, std::vector<IterationTrace> trace, double alpha)
        : mdp_(mdp), trace_(std::move(trace)), alpha_(alpha) {
        if (trace_.empty()) throw validation_error("lemma context: empty trace");
        if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw validation_error("lemma context: alpha out of range");
        for (const auto& t : trace_) {
            if (!t.E.size() || !t.eps.size())
                throw validation_error("lemma context: trace lacks eps/E (run compute_eps_and_E)");
            if (!(t.policy == greedy(t.s)))
                throw validation_error("lemma context: trace policies must be greedy in s_k");
        }
        policies_ = trace_policies(trace_);
        const OptimalSolution opt = exact_optimal(mdp_, 1e-10);
        pi_star_ = opt.pi_star;
        v_star_ = policy_evaluation(mdp_, pi_star_);
    }

    LemmaContext(const TabularMdp& mdp, const MdviRun& run)
        : LemmaContext(mdp, checked_trace(run), run.config.alpha) {}

    const TabularMdp& mdp() const { return mdp_; }
    const std::vector<IterationTrace>& trace() const { return trace_; }
    std::span<const DetPolicy> policies() const { return policies_; }
    const DetPolicy& pi_star() const { return pi_star_; }
    const VTable& v_star() const { return v_star_; }
    double alpha() const { return alpha_; }
    double gamma() const { return mdp_.discount(); }
    double horizon() const { return mdp_.horizon(); }
    int last_iteration() const { return static_cast<int>(trace_.size()) - 1; }

    /// E'_i = ε_i − (1 − α) E_{i−1}, with E_0 = 0.
    QTable e_prime(int i) const {
        const auto& t = trace_.at(static_cast<std::size_t>(i));
        if (i == 0) return t.eps;
        return t.eps - (1.0 - alpha_) * trace_[static_cast<std::size_t>(i) - 1].E;
    }

    const QTable& eps(int i) const { return trace_.at(static_cast<std::size_t>(i)).eps; }
    const QTable& E(int i) const { return trace_.at(static_cast<std::size_t>(i)).E; }

    /// Σ_{j=first}^{last} γ^j P_{top+1−j}^{top} term(j).
    template <class Term>
    QTable chain_sum(int top, int first, int last, Term&& term) const {
        QTable acc = QTable::Zero(static_cast<Eigen::Index>(mdp_.num_states()),
                                  static_cast<Eigen::Index>(mdp_.num_actions()));
        for (int j = first; j <= last; ++j) {
            acc += std::pow(gamma(), j) * apply_transition_chain(mdp_, policies_, top + 1 - j, top, term(j));
        }
        return acc;
    }

    /// Σ_{j=0}^{k−1} γ^j (P^{π*})^j E_{k−j}.
    QTable star_chain_sum_E(int k) const {
        QTable acc = QTable::Zero(static_cast<Eigen::Index>(mdp_.num_states()),
                                  static_cast<Eigen::Index>(mdp_.num_actions()));
        for (int j = 0; j < k; ++j) {
            QTable f = E(k - j);
            for (int t = 0; t < j; ++t) f = apply_pair_kernel(mdp_, pi_star_, f);
            acc += std::pow(gamma(), j) * f;
        }
        return acc;
    }

    /// 2H(α^k + A_{γ,k}/A_∞).
    double zero_error_bound(int k) const {
        return 2.0 * horizon() * (std::pow(alpha_, k) + a_gamma_k(alpha_, gamma(), k) / a_infinity(alpha_));
    }

    /// Γ_k of the non-stationary error-propagation bound. Γ_0 = 2H·1.
    VTable Gamma(int k) const {
        require_finite_horizon_weight("Gamma_k");
        const auto X = static_cast<Eigen::Index>(mdp_.num_states());
        VTable out = VTable::Constant(X, zero_error_bound(k));
        if (k == 0) return out;
        const QTable own = chain_sum(k - 1, 0, k - 1, [this, k](int j) { return E(k - j); });
        const QTable star = star_chain_sum_E(k);
        out += (aggregate(policies_[static_cast<std::size_t>(k)], own) - aggregate(pi_star_, star)) /
               a_infinity(alpha_);
        return out;
    }

    NonStationaryPolicy nonstationary(int k) const {
        NonStationaryPolicy nsp;
        for (int i = k; i >= 1; --i) nsp.head.push_back(policies_[static_cast<std::size_t>(i)]);
        nsp.tail = policies_.front();
        if (nsp.head.empty()) nsp.head.push_back(nsp.tail);
        return nsp;
    }

    void require_finite_horizon_weight(const char* what) const {
        if (!(alpha_ < 1.0))
            throw validation_error(std::string(what) + " needs alpha < 1 (A_inf is infinite)");
    }

private:
    static std::vector<IterationTrace> checked_trace(const MdviRun& run) {
        if (!std::isinf(run.config.beta))
            throw validation_error("lemma checks need a greedy (beta = inf) run");
        return run.trace;
    }

    const TabularMdp& mdp_;
    std::vector<IterationTrace> trace_;
    double alpha_;
    std::vector<DetPolicy> policies_;
    DetPolicy pi_star_;
    VTable v_star_;
};

/// 0 ≤ v* − v^{π'_k} ≤ Γ_k, elementwise with kLemmaSlack.
inline NonStationaryCheck check_nonstationary_bound(const LemmaContext& ctx, int k) {
    ctx.require_finite_horizon_weight("non-stationary bound");
    NonStationaryCheck out;
    out.gap = ctx.v_star() - eval_nonstationary(ctx.mdp(), ctx.nonstationary(k));
    out.Gamma = ctx.Gamma(k);
    const VTable zero = VTable::Zero(out.gap.size());
    out.bracket = BracketCheck::evaluate(out.gap, &zero, &out.Gamma);
    return out;
}

/// Last-policy error propagation:
/// 0 ≤ v* − v^{π_k} ≤ 2H(α^k + A_{γ,k}/A_∞) + (N^{π_k}π_k − N^{π*}π*) E_k / A_∞
///     + Σ_{j=1}^k γ^j (N^{π*}π* P_{k+1−j}^k − N^{π_k}π_k P_{k−j}^{k−1}) E'_{k+1−j} / A_∞.
inline LastPolicyCheck check_last_policy_bound(const LemmaContext& ctx, int k) {
    ctx.require_finite_horizon_weight("last-policy bound");
    const auto& mdp = ctx.mdp();
    const DetPolicy& pi_k = ctx.policies()[static_cast<std::size_t>(k)];
    LastPolicyCheck out;
    out.gap = ctx.v_star() - policy_evaluation(mdp, pi_k);

    const auto term = [&ctx, k](int j) { return ctx.e_prime(k + 1 - j); };
    const QTable star_sum = ctx.chain_sum(k, 1, k, term);
    const QTable own_sum = ctx.chain_sum(k - 1, 1, k, term);
    const QTable& E_k = ctx.E(k);
    out.rhs = VTable::Constant(out.gap.size(), ctx.zero_error_bound(k)) +
              (apply_resolvent(mdp, pi_k, aggregate(pi_k, QTable(E_k - own_sum))) +
               apply_resolvent(mdp, ctx.pi_star(), aggregate(ctx.pi_star(), QTable(star_sum - E_k)))) /
                  a_infinity(ctx.alpha());
    const VTable zero = VTable::Zero(out.gap.size());
    out.bracket = BracketCheck::evaluate(out.gap, &zero, &out.rhs);
    return out;
}

/// C_k = Σ_{j=0}^{k−1} γ^{k−1−j} α^j, the additive constant of the Δ_k
/// bracket (equal to A_{γ,k}/γ for γ > 0).
inline double delta_bound_constant(double alpha, double gamma, int k) {
    // C_i = α^{i−1} + γ C_{i−1}, C_0 = 0.
    double c = 0.0;
    for (int i = 1; i <= k; ++i) c = std::pow(alpha, i - 1) + gamma * c;
    return c;
}

/// (i) |v_k| ≤ H; (ii) the Δ_k chain bracket; (iii) the v-error bracket:
///   −2γ^k H − Σ_j γ^j π_k P_{k−j}^{k−1} ε_{k−j} ≤ v* − v_k
///       ≤ Γ_{k−1} + 2Hγ^k − Σ_j γ^j π_{k−1} P_{k−1−j}^{k−2} ε_{k−j}.
inline DeltaVCheck check_delta_and_v_bounds(const LemmaContext& ctx, int k) {
    if (k < 1 || k > ctx.last_iteration()) throw validation_error("delta/v check: k out of range");
    const auto& tr = ctx.trace();
    const auto K = static_cast<std::size_t>(k);
    const double H = ctx.horizon();
    const double g = ctx.gamma();
    const auto X = static_cast<Eigen::Index>(ctx.mdp().num_states());
    const DetPolicy& pi_k = ctx.policies()[K];
    const DetPolicy& pi_prev = ctx.policies()[K - 1];
    DeltaVCheck out;

    out.v_bound_margin = H - sup_norm(tr[K].v);
    out.v_bounded_ok = out.v_bound_margin >= -1e-10;

    const VTable delta = tr[K].w - tr[K - 1].w;
    const double C = delta_bound_constant(ctx.alpha(), g, k);
    const auto ep = [&ctx, k](int j) { return ctx.e_prime(k - j); };
    const VTable d_upper = aggregate(pi_k, ctx.chain_sum(k - 1, 0, k - 1, ep)) + VTable::Constant(X, C);
    const VTable d_lower = aggregate(pi_prev, ctx.chain_sum(k - 2, 0, k - 1, ep)) - VTable::Constant(X, C);
    out.delta = BracketCheck::evaluate(delta, &d_lower, &d_upper);

    const VTable gap = ctx.v_star() - tr[K].v;
    const auto eps = [&ctx, k](int j) { return ctx.eps(k - j); };
    const double tail = 2.0 * H * std::pow(g, k);
    const VTable v_lower = VTable::Constant(X, -tail) - aggregate(pi_k, ctx.chain_sum(k - 1, 0, k - 1, eps));
    if (ctx.alpha() < 1.0) {
        const VTable v_upper = ctx.Gamma(k - 1) + VTable::Constant(X, tail) -
                               aggregate(pi_prev, ctx.chain_sum(k - 2, 0, k - 1, eps));
        out.v_error = BracketCheck::evaluate(gap, &v_lower, &v_upper);
    } else {
        out.v_error = BracketCheck::evaluate(gap, &v_lower, nullptr);
        out.v_error_upper_checked = false;
    }
    return out;
}

/// Monitored (non-gating) ratios of realized errors to the deterministic
/// relaxations used by the coarse-bound arguments; values ≤ 1 are expected.
struct CoarseRatios {
    double nonstationary = 0.0;
    double last_policy = 0.0;
};

inline CoarseRatios coarse_ratios(const LemmaContext& ctx, int k) {
    ctx.require_finite_horizon_weight("coarse ratios");
    const double H = ctx.horizon();
    const double Ainf = a_infinity(ctx.alpha());
    double ns_tail = 0.0;
    for (int j = 0; j < k; ++j) ns_tail += std::pow(ctx.gamma(), j) * sup_norm(ctx.E(k - j));
    double lp_tail = 0.0;
    for (int j = 1; j <= k; ++j) lp_tail += std::pow(ctx.gamma(), j) * sup_norm(ctx.e_prime(k + 1 - j));
    const double base = ctx.zero_error_bound(k);
    const double ns_err =
        sup_norm(VTable(ctx.v_star() - eval_nonstationary(ctx.mdp(), ctx.nonstationary(k))));
    const double lp_err = sup_norm(VTable(
        ctx.v_star() - policy_evaluation(ctx.mdp(), ctx.policies()[static_cast<std::size_t>(k)])));
    return CoarseRatios{ns_err / (base + 2.0 * ns_tail / Ainf),
                        lp_err / (base + 2.0 * H * (sup_norm(ctx.E(k)) + lp_tail) / Ainf)};
}

struct TotalVarianceResult {
    QTable lhs;
    double bound = 0.0;
    bool ok = true;
};

/// Values v^{π'_j} for j = 0..k−1 of the non-stationary policies built from
/// policies[0..j].
inline std::vector<VTable> nonstationary_values(const TabularMdp& mdp, std::span<const DetPolicy> policies,
                                                int count) {
    std::vector<VTable> values;
    for (int j = 0; j < count; ++j) {
        NonStationaryPolicy nsp;
        for (int i = j; i >= 1; --i) nsp.head.push_back(policies[static_cast<std::size_t>(i)]);
        nsp.tail = policies.front();
        if (nsp.head.empty()) nsp.head.push_back(nsp.tail);
        values.push_back(eval_nonstationary(mdp, nsp));
    }
    return values;
}

/// Σ_{j=0}^{k−1} γ^{j+1} P_{k−j}^{k−1} σ_{k−j} with σ_i = σ(v^{π'_{i−1}}),
/// compared with √(2H³).
inline TotalVarianceResult total_variance_check(const TabularMdp& mdp, std::span<const DetPolicy> policies,
                                                int k) {
    if (k < 1 || static_cast<std::size_t>(k) > policies.size())
        throw validation_error("total variance: k must lie in [1, number of policies]");
    const std::vector<VTable> values = nonstationary_values(mdp, policies, k);
    TotalVarianceResult out;
    out.lhs = QTable::Zero(static_cast<Eigen::Index>(mdp.num_states()),
                           static_cast<Eigen::Index>(mdp.num_actions()));
    for (int j = 0; j < k; ++j) {
        const int i = k - j;
        const QTable sigma = pvar_sigma(mdp, values[static_cast<std::size_t>(i - 1)]).sigma;
        out.lhs += std::pow(mdp.discount(), j + 1) * apply_transition_chain(mdp, policies, i, k - 1, sigma);
    }
    const double H = mdp.horizon();
    out.bound = std::sqrt(2.0 * H * H * H);
    out.ok = out.lhs.maxCoeff() <= out.bound + kLemmaSlack;
    return out;
}

/// Σ_k² from the variance Bellman recursion Σ_k² = γ²σ_k² + γ² P^{π_{k−1}} Σ_{k−1}²,
/// where Σ_0² solves Σ_0² = γ²σ_0² + γ² P^{π_0} Σ_0² and σ_0 = σ(v^{π_0}).
/// Σ_k²(x, a) is the variance of the discounted return started from (x, a)
/// when A_t ~ π_{k−t} for 1 ≤ t ≤ k and π_0 afterwards.
inline QTable return_variance(const TabularMdp& mdp, std::span<const DetPolicy> policies, int k) {
    if (k < 0 || static_cast<std::size_t>(k) >= policies.size())
        throw validation_error("return variance: k out of range");
    const double g2 = mdp.discount() * mdp.discount();
    const auto X = static_cast<Eigen::Index>(mdp.num_states());
    const auto A = static_cast<Eigen::Index>(mdp.num_actions());
    const auto n = X * A;
    const std::vector<VTable> values = nonstationary_values(mdp, policies, std::max(k, 1));

    const QTable sigma0 = pvar_sigma(mdp, values[0]).pvar;
    const Matrix system = Matrix::Identity(n, n) - g2 * pair_kernel(mdp, policies[0]);
    const Eigen::VectorXd rhs = g2 * Eigen::Map<const Eigen::VectorXd>(sigma0.data(), n);
    const Eigen::VectorXd base = system.partialPivLu().solve(rhs);
    QTable sigma_sq = Eigen::Map<const QTable>(base.data(), X, A);
    for (int i = 1; i <= k; ++i) {
        const QTable pvar = pvar_sigma(mdp, values[static_cast<std::size_t>(i - 1)]).pvar;
        sigma_sq = g2 * pvar + g2 * apply_pair_kernel(mdp, policies[static_cast<std::size_t>(i - 1)], sigma_sq);
    }
    return sigma_sq;
}

/// Thresholds of the four concentration events. e3[k], e4[k] are per-(x, a)
/// tables for k = 1..K (index 0 unused).
struct EventThresholds {
    std::optional<double> e1;
    double e2 = 0.0;
    std::vector<QTable> e3;
    std::vector<QTable> e4;
    int iterations = 0;

    EventThresholds scaled(double factor) const {
        EventThresholds out = *this;
        if (out.e1) *out.e1 *= factor;
        out.e2 *= factor;
        for (auto& t : out.e3) t *= factor;
        for (auto& t : out.e4) t *= factor;
        return out;
    }
};

/// PVar̄_j of the variance-aware events; PVar̄_1 = 0.
inline QTable barred_pvar(const TabularMdp& mdp, const QTable& pvar_star, double alpha, int j, int M,
                          double iota1) {
    if (j <= 1) return QTable::Zero(pvar_star.rows(), pvar_star.cols());
    const double H = mdp.horizon();
    const double gamma = mdp.discount();
    const double m = std::max(alpha, gamma);
    const double ratio = alpha < 1.0 ? a_gamma_k(alpha, gamma, j - 2) / a_infinity(alpha) : 0.0;
    const double extra =
        4.0 * H * H * (4.0 * std::pow(m, 2 * (j - 2)) + ratio * ratio + 36.0 * H * H * iota1 / M);
    return (pvar_star.array() + extra).matrix();
}

/// e1 = 3H√(A_∞ι₁/M), e2 = 3H√(ι₁/M),
/// e3_k = 4Hι₂/(3M) + √(2V_kι₂), e4_k = 4Hι₂/(3M) + √(2W_kι₂) with
/// V_k = 4Σ_{j≤k} α^{2(k−j)} PVar̄_j / M and W_k = 4 PVar̄_k / M.
/// e1 and e3 need α < 1; for α = 1 e1 is absent and e3 is left empty.
inline EventThresholds concentration_thresholds(const TabularMdp& mdp, double alpha, int K, int M,
                                                double delta, const VTable& v_star) {
    if (K < 1 || M < 1) throw validation_error("thresholds: K and M must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw validation_error("thresholds: delta must lie in (0, 1)");
    const double H = mdp.horizon();
    const SeriesConstants sc = series_constants(alpha, mdp.discount(), K, K, mdp.num_states(),
                                                mdp.num_actions(), delta);
    EventThresholds out;
    out.iterations = K;
    out.e2 = 3.0 * H * std::sqrt(sc.iota1 / M);
    if (alpha < 1.0) out.e1 = 3.0 * H * std::sqrt(sc.A_inf * sc.iota1 / M);

    const QTable pvar_star = pvar_sigma(mdp, v_star).pvar;
    const double offset = 4.0 * H * sc.iota2 / (3.0 * M);
    out.e4.resize(static_cast<std::size_t>(K) + 1);
    if (alpha < 1.0) out.e3.resize(static_cast<std::size_t>(K) + 1);
    QTable V = QTable::Zero(pvar_star.rows(), pvar_star.cols());
    for (int k = 1; k <= K; ++k) {
        const QTable bar = barred_pvar(mdp, pvar_star, alpha, k, M, sc.iota1);
        const QTable W = 4.0 * bar / M;
        out.e4[static_cast<std::size_t>(k)] = ((2.0 * W.array() * sc.iota2).sqrt() + offset).matrix();
        if (alpha < 1.0) {
            // V_k = α² V_{k−1} + 4 PVar̄_k / M.
            V = alpha * alpha * V + W;
            out.e3[static_cast<std::size_t>(k)] = ((2.0 * V.array() * sc.iota2).sqrt() + offset).matrix();
        }
    }
    return out;
}

struct EventViolations {
    bool e1 = false;
    bool e2 = false;
    bool e3 = false;
    bool e4 = false;
};

/// Which events fail on one trace: E1 ⇔ ∃k,(x,a) |E_k| ≥ e1, E2 ⇔ |ε_k| ≥ e2,
/// E3 ⇔ |E_k| ≥ e3_k, E4 ⇔ |ε_k| ≥ e4_k, over k = 1..K.
inline EventViolations event_violations(const std::vector<IterationTrace>& trace,
                                        const EventThresholds& th) {
    EventViolations out;
    const std::size_t K = std::min(trace.size() - 1, static_cast<std::size_t>(th.iterations));
    for (std::size_t k = 1; k <= K; ++k) {
        const QTable absE = trace[k].E.cwiseAbs();
        const QTable absEps = trace[k].eps.cwiseAbs();
        if (th.e1 && absE.maxCoeff() >= *th.e1) out.e1 = true;
        if (absEps.maxCoeff() >= th.e2) out.e2 = true;
        if (!th.e3.empty() && (absE.array() >= th.e3[k].array()).any()) out.e3 = true;
        if ((absEps.array() >= th.e4[k].array()).any()) out.e4 = true;
    }
    return out;
}

struct EventRates {
    std::optional<double> e1;
    double e2 = 0.0;
    std::optional<double> e3;
    double e4 = 0.0;
    std::size_t runs = 0;
};

/// Fraction of runs violating each event.
inline EventRates event_violation_rates(std::span<const std::vector<IterationTrace>> runs,
                                        const EventThresholds& th) {
    if (runs.empty()) throw validation_error("event rates: need at least one run");
    std::size_t c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    for (const auto& tr : runs) {
        const EventViolations v = event_violations(tr, th);
        c1 += v.e1;
        c2 += v.e2;
        c3 += v.e3;
        c4 += v.e4;
    }
    const double n = static_cast<double>(runs.size());
    EventRates out;
    out.runs = runs.size();
    if (th.e1) out.e1 = c1 / n;
    out.e2 = c2 / n;
    if (!th.e3.empty()) out.e3 = c3 / n;
    out.e4 = c4 / n;
    return out;
}

/// Aggregate verdicts of all deterministic lemma checks over k = 1..K.
struct LemmaSuiteResult {
    bool nonstationary_ok = true;
    bool last_policy_ok = true;
    bool delta_ok = true;
    bool v_bounded_ok = true;
    bool v_error_ok = true;
    double s_identity_residual = 0.0;
    double nonstationary_worst = std::numeric_limits<double>::infinity();
    double last_policy_worst = std::numeric_limits<double>::infinity();
    double delta_worst = std::numeric_limits<double>::infinity();
    double v_error_worst = std::numeric_limits<double>::infinity();
    double v_bound_worst = std::numeric_limits<double>::infinity();
    double coarse_nonstationary_max = 0.0;
    double coarse_last_policy_max = 0.0;
    bool ok() const { return nonstationary_ok && last_policy_ok && delta_ok && v_bounded_ok && v_error_ok; }
};

inline LemmaSuiteResult run_lemma_suite(const LemmaContext& ctx) {
    LemmaSuiteResult r;
    r.s_identity_residual = check_s_identity(ctx.mdp(), ctx.trace(), ctx.alpha());
    const bool weighted = ctx.alpha() < 1.0;
    for (int k = 1; k <= ctx.last_iteration(); ++k) {
        if (weighted) {
            const auto ns = check_nonstationary_bound(ctx, k);
            r.nonstationary_ok = r.nonstationary_ok && ns.bracket.ok();
            r.nonstationary_worst = std::min(r.nonstationary_worst, ns.bracket.worst_margin());
            const auto lp = check_last_policy_bound(ctx, k);
            r.last_policy_ok = r.last_policy_ok && lp.bracket.ok();
            r.last_policy_worst = std::min(r.last_policy_worst, lp.bracket.worst_margin());
            const auto cr = coarse_ratios(ctx, k);
            r.coarse_nonstationary_max = std::max(r.coarse_nonstationary_max, cr.nonstationary);
            r.coarse_last_policy_max = std::max(r.coarse_last_policy_max, cr.last_policy);
        }
        const auto dv = check_delta_and_v_bounds(ctx, k);
        r.v_bounded_ok = r.v_bounded_ok && dv.v_bounded_ok;
        r.v_bound_worst = std::min(r.v_bound_worst, dv.v_bound_margin);
        r.delta_ok = r.delta_ok && dv.delta.ok();
        r.delta_worst = std::min(r.delta_worst, dv.delta.worst_margin());
        r.v_error_ok = r.v_error_ok && dv.v_error.ok();
        r.v_error_worst = std::min(r.v_error_worst, dv.v_error.worst_margin());
    }
    return r;
}

} // namespace mdvi
