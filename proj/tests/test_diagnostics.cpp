#include "fixtures.hpp"
#include "oracles.hpp"

#include "mdvi/diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace mdvi;

namespace {

MdviRun sampled_run(const TabularMdp& m, double alpha, int K, int M, std::uint64_t seed) {
    MdviConfig c;
    c.alpha = alpha;
    c.iterations = K;
    c.samples_per_update = M;
    c.seed = seed;
    return mdvi_run(m, c);
}

MdviRun exact_run(const TabularMdp& m, double alpha, int K) {
    MdviConfig c;
    c.alpha = alpha;
    c.iterations = K;
    c.exact_mode = true;
    return mdvi_run(m, c);
}

double direct_a_gamma(double alpha, double gamma, int k) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::pow(gamma, k - j) * std::pow(alpha, j);
    return s;
}

} // namespace

TEST(SeriesConstants, AGammaExamples) {
    EXPECT_EQ(a_gamma_k(0.5, 0.9, 0), 0.0);
    EXPECT_NEAR(a_gamma_k(0.5, 0.9, 3), 1.359, 1e-12);
    EXPECT_NEAR(a_gamma_k(0.9, 0.9, 2), 1.62, 1e-12);
    EXPECT_NEAR(a_gamma_k(0.9, 0.9, 2), 2 * 0.81, 1e-15);
}

TEST(SeriesConstants, AGammaMatchesSummation) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> kd(0, 100);
    for (int i = 0; i < 10000; ++i) {
        const double gamma = u(gen) * 0.999;
        const double alpha = (i % 10 == 0) ? gamma : u(gen) * 0.999;
        const int k = kd(gen);
        ASSERT_NEAR(a_gamma_k(alpha, gamma, k), direct_a_gamma(alpha, gamma, k), 1e-12)
            << alpha << ' ' << gamma << ' ' << k;
    }
}

TEST(SeriesConstants, AkAndIota) {
    EXPECT_EQ(a_k(0.5, 0), 0.0);
    EXPECT_NEAR(a_k(0.5, 3), 1.75, 1e-15);
    EXPECT_EQ(a_k(1.0, 4), 4.0);
    EXPECT_TRUE(std::isinf(a_infinity(1.0)));
    const auto sc = series_constants(0.9, 0.9, 3, 10, 8, 2, 0.1);
    EXPECT_NEAR(sc.A_inf, 10.0, 1e-12);
    EXPECT_NEAR(sc.iota1, std::log(12800.0), 1e-12);
    EXPECT_NEAR(sc.iota1, 9.457, 1e-3);
    EXPECT_NEAR(sc.iota2, std::log(25600.0), 1e-12);
}

TEST(SeriesConstants, AlphaEqualsGammaRatio) {
    const double g = 0.9;
    for (int k = 1; k < 30; ++k)
        EXPECT_NEAR(a_gamma_k(g, g, k) / a_infinity(g), k * std::pow(g, k) * (1.0 - g), 1e-12);
}

TEST(ErrorTrace, EpsAndERecursion) {
    const auto m = fixtures::garnet(3);
    const auto run = sampled_run(m, 0.8, 20, 2, 5);
    EXPECT_EQ(sup_norm(run.trace[1].eps), 0.0);
    EXPECT_EQ(sup_norm(run.trace[1].E), 0.0);
    for (std::size_t k = 1; k < run.trace.size(); ++k) {
        const QTable rec = run.trace[k].eps + 0.8 * run.trace[k - 1].E;
        EXPECT_LE(sup_norm(QTable(run.trace[k].E - rec)), 1e-12);
        // ε_k against an independent P v_{k−1}.
        const auto plain = oracle::from(m);
        for (int x = 0; x < 8; ++x)
            for (int a = 0; a < 2; ++a) {
                const double pv = oracle::expect(plain, x, a, fixtures::as_vector(run.trace[k - 1].v));
                EXPECT_NEAR(run.trace[k].eps(x, a), run.trace[k].q(x, a) - plain.r[x][a] - 0.9 * pv, 1e-12);
            }
    }
}

TEST(ErrorTrace, EpsShrinksLikeInverseRootM) {
    const auto m = fixtures::garnet(21);
    std::vector<double> ratios;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto small = sampled_run(m, 0.9, 5, 1, seed);
        const auto large = sampled_run(m, 0.9, 5, 10000, seed + 1000);
        double e1 = 0.0, e2 = 0.0;
        for (int k = 2; k <= 5; ++k) {
            e1 = std::max(e1, sup_norm(small.trace[k].eps));
            e2 = std::max(e2, sup_norm(large.trace[k].eps));
        }
        ratios.push_back(e2 / e1);
    }
    std::nth_element(ratios.begin(), ratios.begin() + 25, ratios.end());
    const double median = ratios[25];
    EXPECT_GE(median, 0.01 / 3.0);
    EXPECT_LE(median, 0.01 * 3.0);
}

TEST(SIdentity, ExactSampledAndFirstStep) {
    const auto m = fixtures::garnet(4);
    const double H = m.horizon();
    const auto one = sampled_run(m, 0.9, 1, 1, 0);
    EXPECT_EQ(check_s_identity(m, one.trace, 0.9), 0.0);
    EXPECT_LE(check_s_identity(m, exact_run(m, 0.9, 50).trace, 0.9), 1e-10 * 50 * H);
    EXPECT_LE(check_s_identity(m, sampled_run(m, 0.9, 50, 4, 1).trace, 0.9), 1e-9 * 50 * H);
}

TEST(NonStationaryBound, ExactModeReducesToConstant) {
    const auto m = fixtures::garnet(5);
    const LemmaContext ctx(m, exact_run(m, 0.9, 40));
    for (int k = 1; k <= 40; ++k) {
        const auto r = check_nonstationary_bound(ctx, k);
        EXPECT_TRUE(r.bracket.ok()) << k;
        const double c = 2.0 * m.horizon() * (std::pow(0.9, k) + a_gamma_k(0.9, 0.9, k) / 10.0);
        EXPECT_LE(sup_norm(VTable(r.Gamma - VTable::Constant(8, c))), 1e-12);
    }
    EXPECT_NEAR(ctx.Gamma(0)(0), 2.0 * m.horizon(), 1e-15);
}

TEST(NonStationaryBound, FirstIterationHasNoErrorTerm) {
    const auto m = fixtures::garnet(6);
    const LemmaContext ctx(m, sampled_run(m, 0.8, 5, 1, 2));
    const auto r = check_nonstationary_bound(ctx, 1);
    const double c = 2.0 * m.horizon() * (0.8 + a_gamma_k(0.8, 0.9, 1) / a_infinity(0.8));
    EXPECT_LE(sup_norm(VTable(r.Gamma - VTable::Constant(8, c))), 1e-12);
}

TEST(NonStationaryBound, NonStationaryValueMatchesExplicitPolicy) {
    const auto m = fixtures::garnet(7);
    const LemmaContext ctx(m, sampled_run(m, 0.9, 10, 1, 3));
    for (int k = 1; k <= 10; ++k) {
        NonStationaryPolicy nsp;
        for (int i = k; i >= 1; --i) nsp.head.push_back(ctx.policies()[static_cast<std::size_t>(i)]);
        nsp.tail = ctx.policies()[0];
        const auto r = check_nonstationary_bound(ctx, k);
        EXPECT_LE(sup_norm(VTable(r.gap - (ctx.v_star() - eval_nonstationary(m, nsp)))), 1e-12);
    }
}

TEST(NonStationaryBound, SampledRunsHoldAndAlphaOneUnavailable) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = fixtures::garnet(seed);
        const LemmaContext ctx(m, sampled_run(m, 0.9, 30, 4, seed));
        for (int k = 1; k <= 30; ++k) EXPECT_TRUE(check_nonstationary_bound(ctx, k).bracket.ok());
    }
    const auto m = fixtures::garnet(1);
    const LemmaContext one(m, sampled_run(m, 1.0, 5, 1, 0));
    EXPECT_THROW(check_nonstationary_bound(one, 2), validation_error);
    EXPECT_THROW(check_last_policy_bound(one, 2), validation_error);
}

TEST(LastPolicyBound, ExactModeReducesToConstant) {
    const auto m = fixtures::garnet(8);
    for (double alpha : {0.0, 0.5, 0.9}) {
        const LemmaContext ctx(m, exact_run(m, alpha, 40));
        for (int k = 1; k <= 40; ++k) {
            const auto r = check_last_policy_bound(ctx, k);
            EXPECT_TRUE(r.bracket.ok());
            const double c = 2.0 * m.horizon() * (std::pow(alpha, k) + a_gamma_k(alpha, 0.9, k) / a_infinity(alpha));
            EXPECT_LE(sup_norm(VTable(r.rhs - VTable::Constant(8, c))), 1e-9);
        }
    }
}

TEST(LastPolicyBound, SampledRunsHold) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = fixtures::garnet(seed + 10);
        const LemmaContext ctx(m, sampled_run(m, 0.99, 30, 2, seed));
        for (int k = 1; k <= 30; ++k) EXPECT_TRUE(check_last_policy_bound(ctx, k).bracket.ok());
    }
}

TEST(DeltaAndV, ExactModeDeltaWithinConstant) {
    const auto m = fixtures::garnet(9);
    const LemmaContext ctx(m, exact_run(m, 0.9, 30));
    for (int k = 1; k <= 30; ++k) {
        const auto r = check_delta_and_v_bounds(ctx, k);
        EXPECT_TRUE(r.ok()) << k;
        const VTable delta = ctx.trace()[k].w - ctx.trace()[k - 1].w;
        EXPECT_LE(sup_norm(delta), a_gamma_k(0.9, 0.9, k) / 0.9 + 1e-8);
    }
}

TEST(DeltaAndV, LiteralConstantFailsAtFirstStep) {
    // One state, reward 0.95: Δ_1 = w_1 − w_0 = 0.95 exceeds A_{γ,1} = γ = 0.9
    // but not C_1 = A_{γ,1}/γ = 1.
    const auto m = TabularMdp::from_nested({{0.95}}, {{{1.0}}}, 0.9);
    const LemmaContext ctx(m, exact_run(m, 0.5, 3));
    const double delta1 = ctx.trace()[1].w(0) - ctx.trace()[0].w(0);
    EXPECT_NEAR(delta1, 0.95, 1e-15);
    EXPECT_GT(delta1, a_gamma_k(0.5, 0.9, 1));
    EXPECT_NEAR(delta_bound_constant(0.5, 0.9, 1), 1.0, 1e-15);
    EXPECT_TRUE(check_delta_and_v_bounds(ctx, 1).delta.ok());
    for (int k = 1; k < 20; ++k)
        EXPECT_NEAR(delta_bound_constant(0.7, 0.9, k), a_gamma_k(0.7, 0.9, k) / 0.9, 1e-12);
}

TEST(DeltaAndV, LiteralLowerPolicyIndexCanFail) {
    // With π_{k−1} in front of the lower chain the bracket is violated on
    // some sampled runs; with π_k it holds on all of them.
    bool literal_failed = false;
    for (std::uint64_t seed = 0; seed < 60 && !literal_failed; ++seed) {
        const auto m = fixtures::garnet(seed);
        const LemmaContext ctx(m, sampled_run(m, 0.9, 30, 1, seed + 7));
        for (int k = 1; k <= 30; ++k) {
            const auto eps = [&ctx, k](int j) { return ctx.eps(k - j); };
            const VTable gap = ctx.v_star() - ctx.trace()[static_cast<std::size_t>(k)].v;
            const VTable literal = VTable::Constant(8, -2.0 * std::pow(0.9, k) * m.horizon()) -
                                   aggregate(ctx.policies()[static_cast<std::size_t>(k) - 1],
                                             ctx.chain_sum(k - 1, 0, k - 1, eps));
            if ((gap - literal).minCoeff() < -1e-6) literal_failed = true;
            EXPECT_TRUE(check_delta_and_v_bounds(ctx, k).v_error.ok());
        }
    }
    EXPECT_TRUE(literal_failed);
}

TEST(DeltaAndV, SampledSuiteAndBoundedV) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = fixtures::garnet(seed + 20);
        const LemmaContext ctx(m, sampled_run(m, 0.9, 30, 1, seed));
        for (int k = 1; k <= 30; ++k) {
            const auto r = check_delta_and_v_bounds(ctx, k);
            EXPECT_TRUE(r.ok()) << "seed " << seed << " k " << k;
            EXPECT_TRUE(r.v_error_upper_checked);
        }
        EXPECT_LE(sup_norm(ctx.trace()[1].v), 1.0);
    }
}

TEST(DeltaAndV, AlphaOneSkipsUpperVBracket) {
    const auto m = fixtures::garnet(2);
    const LemmaContext ctx(m, sampled_run(m, 1.0, 10, 1, 0));
    for (int k = 1; k <= 10; ++k) {
        const auto r = check_delta_and_v_bounds(ctx, k);
        EXPECT_FALSE(r.v_error_upper_checked);
        EXPECT_TRUE(r.v_bounded_ok);
        EXPECT_TRUE(r.delta.ok());
    }
}

TEST(LemmaContext, RejectsFiniteBetaAndIsDeterministic) {
    const auto m = fixtures::garnet(3);
    MdviConfig c;
    c.beta = 5.0;
    c.iterations = 5;
    EXPECT_THROW(LemmaContext(m, mdvi_run(m, c)), validation_error);

    const auto run = sampled_run(m, 0.9, 20, 2, 4);
    const LemmaContext ctx(m, run);
    const auto a = run_lemma_suite(ctx);
    const auto b = run_lemma_suite(ctx);
    EXPECT_EQ(a.ok(), b.ok());
    EXPECT_EQ(a.last_policy_worst, b.last_policy_worst);
    EXPECT_EQ(a.delta_worst, b.delta_worst);
    EXPECT_EQ(a.v_error_worst, b.v_error_worst);
}

TEST(CoarseRatios, StayBelowOne) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = fixtures::garnet(seed);
        const LemmaContext ctx(m, sampled_run(m, 0.9, 30, 1, seed));
        const auto r = run_lemma_suite(ctx);
        EXPECT_LE(r.coarse_nonstationary_max, 1.0);
        EXPECT_LE(r.coarse_last_policy_max, 1.0);
    }
}

TEST(TotalVariance, DeterministicMdpAndBoundValue) {
    const auto m = fixtures::garnet(4, 1);
    std::mt19937_64 gen(0);
    std::vector<DetPolicy> pols;
    for (int i = 0; i < 10; ++i) pols.push_back(fixtures::random_policy(8, 2, gen));
    const auto r = total_variance_check(m, pols, 10);
    EXPECT_EQ(sup_norm(r.lhs), 0.0);
    EXPECT_NEAR(r.bound, std::sqrt(2000.0), 1e-12);
    EXPECT_NEAR(r.bound, 44.7214, 1e-4);
    EXPECT_TRUE(r.ok);
    EXPECT_THROW(total_variance_check(m, pols, 11), validation_error);
}

TEST(TotalVariance, RandomSequencesRespectBound) {
    std::mt19937_64 gen(9);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = fixtures::garnet(seed);
        std::vector<DetPolicy> pols;
        for (int i = 0; i < 20; ++i) pols.push_back(fixtures::random_policy(8, 2, gen));
        const auto r = total_variance_check(m, pols, 20);
        EXPECT_TRUE(r.ok);
        EXPECT_GT(r.lhs.maxCoeff(), 0.0);
    }
}

TEST(ReturnVariance, MatchesMonteCarlo) {
    const auto m = fixtures::three_state();
    const std::vector<DetPolicy> pols{DetPolicy({0, 1, 0}), DetPolicy({1, 0, 0}), DetPolicy({1, 1, 1})};
    const int k = 2;
    const QTable sigma_sq = return_variance(m, pols, k);
    // Step t ≥ 1 plays π_{k−t} for t ≤ k, then π_0.
    const std::vector<std::vector<int>> seq{pols[1].action, pols[0].action};
    const auto plain = oracle::from(m);
    const int depth = static_cast<int>(std::ceil(std::log(1e-5) / std::log(0.9)));
    for (int x = 0; x < 3; ++x)
        for (int a = 0; a < 2; ++a) {
            const auto est = oracle::rollout_return_variance(plain, seq, x, a, 200000, depth,
                                                             static_cast<std::uint64_t>(10 * x + a));
            EXPECT_NEAR(sigma_sq(x, a), est.mean, 3.0 * est.stderr_ + 1e-3) << x << ',' << a;
        }
}

TEST(Thresholds, WorkedExample) {
    // H = 10, α = γ = 0.9, M = 100, K = 10, X = 8, A = 2, δ = 0.1.
    const auto m = fixtures::garnet(0);
    const auto th = concentration_thresholds(m, 0.9, 10, 100, 0.1, VTable::Zero(8));
    ASSERT_TRUE(th.e1.has_value());
    EXPECT_NEAR(*th.e1, 30.0 * std::sqrt(10.0 * std::log(12800.0) / 100.0), 1e-12);
    EXPECT_NEAR(*th.e1, 29.17, 0.01);
    EXPECT_NEAR(th.e2, 9.225, 0.001);
    ASSERT_EQ(th.e3.size(), 11u);
    ASSERT_EQ(th.e4.size(), 11u);
}

TEST(Thresholds, FirstIterationBaseCase) {
    const auto m = fixtures::garnet(3, 1);
    const VTable v_star = policy_evaluation(m, exact_optimal(m, 1e-10).pi_star);
    const int M = 16;
    const auto th = concentration_thresholds(m, 0.9, 5, M, 0.2, v_star);
    const double iota2 = std::log(16.0 * 5 * 16 / 0.2);
    const double base = 4.0 * m.horizon() * iota2 / (3.0 * M);
    EXPECT_LE((th.e4[1].array() - base).abs().maxCoeff(), 1e-12);
    for (int k = 1; k <= 5; ++k) {
        EXPECT_GE(th.e3[k].minCoeff(), 0.0);
        EXPECT_GE(th.e4[k].minCoeff(), base - 1e-12);
    }
    const auto one = concentration_thresholds(m, 1.0, 5, M, 0.2, v_star);
    EXPECT_FALSE(one.e1.has_value());
    EXPECT_TRUE(one.e3.empty());
    EXPECT_THROW(concentration_thresholds(m, 0.9, 5, M, 1.5, v_star), validation_error);
}

TEST(Thresholds, BarredVarianceFormula) {
    const auto m = fixtures::garnet(2);
    const QTable pv = QTable::Constant(8, 2, 0.3);
    const double H = 10.0, iota1 = 5.0;
    EXPECT_EQ(sup_norm(barred_pvar(m, pv, 0.5, 1, 4, iota1)), 0.0);
    // j = 2: max{α,γ}^0 = 1 and A_{γ,0} = 0.
    const double expect2 = 0.3 + 4 * H * H * (4.0 + 36 * H * H * iota1 / 4);
    EXPECT_NEAR(barred_pvar(m, pv, 0.5, 2, 4, iota1)(0, 0), expect2, 1e-12 * expect2);
    const double r = a_gamma_k(0.5, 0.9, 3) / 2.0;
    const double expect5 = 0.3 + 4 * H * H * (4.0 * std::pow(0.9, 6) + r * r + 36 * H * H * iota1 / 4);
    EXPECT_NEAR(barred_pvar(m, pv, 0.5, 5, 4, iota1)(0, 0), expect5, 1e-12 * expect5);
}

TEST(EventRates, ExactRunsNeverViolateAndTinyThresholdsAlways) {
    const auto m = fixtures::garnet(5);
    const VTable v_star = policy_evaluation(m, exact_optimal(m, 1e-10).pi_star);
    const auto th = concentration_thresholds(m, 0.9, 20, 16, 0.2, v_star);
    std::vector<std::vector<IterationTrace>> exact, sampled;
    for (int i = 0; i < 5; ++i) {
        exact.push_back(exact_run(m, 0.9, 20).trace);
        sampled.push_back(sampled_run(m, 0.9, 20, 16, static_cast<std::uint64_t>(i)).trace);
    }
    const auto z = event_violation_rates(exact, th);
    EXPECT_EQ(*z.e1, 0.0);
    EXPECT_EQ(z.e2, 0.0);
    EXPECT_EQ(*z.e3, 0.0);
    EXPECT_EQ(z.e4, 0.0);
    const auto all = event_violation_rates(sampled, th.scaled(1e-8));
    EXPECT_EQ(*all.e1, 1.0);
    EXPECT_EQ(all.e2, 1.0);
    EXPECT_EQ(*all.e3, 1.0);
    EXPECT_EQ(all.e4, 1.0);
    EXPECT_THROW(event_violation_rates(std::span<const std::vector<IterationTrace>>{}, th), validation_error);
}
