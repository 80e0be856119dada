#include "fixtures.hpp"
#include "oracles.hpp"

#include "mdvi/generative.hpp"
#include "mdvi/mirror_descent.hpp"
#include "mdvi/qlearning.hpp"
#include "mdvi/softmax.hpp"
#include "mdvi/theorem.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mdvi;

TEST(GenerativeSample, OneHotRowAlwaysSupport) {
    const auto m = fixtures::garnet(2, 1);
    Rng rng(1);
    for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t a = 0; a < 2; ++a)
            for (int i = 0; i < 20; ++i) EXPECT_EQ(m.transition(x, a, generative_sample(m, x, a, rng)), 1.0);
}

TEST(GenerativeSample, FairCoinFrequencies) {
    const auto m = TabularMdp::from_nested({{0.0}, {0.0}}, {{{0.5, 0.5}}, {{1.0, 0.0}}}, 0.5);
    Rng rng(5);
    int ones = 0;
    for (int i = 0; i < 100000; ++i) ones += static_cast<int>(generative_sample(m, 0, 0, rng));
    EXPECT_NEAR(ones / 1e5, 0.5, 0.01);
}

TEST(GenerativeSample, GarnetRowFrequencies) {
    GarnetParams p;
    p.branching = 5;
    p.seed = 8;
    const auto m = generate_garnet(p);
    Rng rng(6);
    for (std::size_t x = 0; x < 3; ++x) {
        std::vector<double> freq(8, 0.0);
        for (int i = 0; i < 100000; ++i) freq[generative_sample(m, x, 1, rng)] += 1e-5;
        for (std::size_t y = 0; y < 8; ++y) EXPECT_NEAR(freq[y], m.transition(x, 1, y), 0.01);
    }
}

TEST(GenerativeModel, SameDrawsAsFreeFunctionAndCounts) {
    const auto m = fixtures::garnet(4, 3);
    GenerativeModel model(m);
    Rng a(11), b(11);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t x = static_cast<std::size_t>(i) % 8, act = static_cast<std::size_t>(i) % 2;
        EXPECT_EQ(model.sample(x, act, a), generative_sample(m, x, act, b));
    }
    EXPECT_EQ(model.samples_used(), 1000u);
}

TEST(SoftValue, Examples) {
    QTable s1(3, 1);
    s1 << 0.3, -2.0, 5.0;
    EXPECT_EQ(soft_value(s1, 1.0), VTable(s1.col(0)));

    QTable s(1, 2);
    s << 0.0, 0.0;
    EXPECT_NEAR(soft_value(s, 1.0)(0), std::log(2.0), 1e-15);
    EXPECT_NEAR(soft_value(s, 1.0)(0), 0.693147, 1e-6);

    QTable big(1, 3);
    big << 1000.0, 999.0, -1000.0;
    EXPECT_TRUE(std::isfinite(soft_value(big, 1.0)(0)));
    EXPECT_EQ(soft_value(big, kInfiniteBeta)(0), 1000.0);
    EXPECT_THROW(soft_value(big, 0.0), validation_error);
}

TEST(BoltzmannPolicy, Examples) {
    QTable s(1, 2);
    s << 1.0, 0.0;
    const auto pi = std::get<StochPolicy>(boltzmann_policy(s, 1.0));
    EXPECT_NEAR(pi.probs(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
    EXPECT_NEAR(pi.probs(0, 0), 0.731059, 1e-6);
    EXPECT_NEAR(pi.probs(0, 1), 0.268941, 1e-6);

    const QTable r = QTable::Random(5, 4);
    const auto flat = std::get<StochPolicy>(boltzmann_policy(r, 1e-8));
    EXPECT_LE((flat.probs.array() - 0.25).abs().maxCoeff(), 1e-6);

    QTable tie(2, 3);
    tie << 1.0, 1.0, 0.0, -1.0, 2.0, 2.0;
    EXPECT_EQ(std::get<DetPolicy>(boltzmann_policy(tie, kInfiniteBeta)), DetPolicy({0, 1}));
    EXPECT_THROW(boltzmann_policy(tie, -1.0), validation_error);
}

TEST(MdviConfig, Validation) {
    MdviConfig c;
    EXPECT_NO_THROW(c.validate());
    c.alpha = 1.0;
    EXPECT_NO_THROW(c.validate());
    c.alpha = 1.01;
    EXPECT_THROW(c.validate(), validation_error);
    c = MdviConfig{};
    c.iterations = 0;
    EXPECT_THROW(c.validate(), validation_error);
    c = MdviConfig{};
    c.samples_per_update = 0;
    EXPECT_THROW(c.validate(), validation_error);
    c = MdviConfig{};
    c.beta = 0.0;
    EXPECT_THROW(c.validate(), validation_error);
}

TEST(MdviIteration, FirstStepIsReward) {
    const auto m = fixtures::garnet(3);
    MdviConfig c;
    c.samples_per_update = 3;
    Rng rng(0);
    const auto s1 = mdvi_iteration(m, MdviState::initial(m), c, rng);
    EXPECT_EQ(s1.s, m.rewards());
    EXPECT_EQ(s1.q, m.rewards());
    EXPECT_EQ(s1.samples_used, 3u * 16u);
}

TEST(MdviRun, ExactModeAlphaZeroIsValueIteration) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = fixtures::random_mdp(6, 3, 0.9, seed);
        MdviConfig c;
        c.alpha = 0.0;
        c.exact_mode = true;
        c.iterations = 100;
        const auto run = mdvi_run(m, c);
        const auto vi = oracle::value_iteration(oracle::from(m), 100);
        for (int k = 0; k <= 100; ++k)
            for (int x = 0; x < 6; ++x) ASSERT_NEAR(run.trace[k].w(x), vi[k][x], 1e-12) << "k=" << k;
    }
}

TEST(MdviRun, ExactModeHasZeroErrors) {
    MdviConfig c;
    c.exact_mode = true;
    c.iterations = 30;
    const auto run = mdvi_run(fixtures::garnet(1), c);
    for (const auto& t : run.trace) {
        EXPECT_EQ(sup_norm(t.eps), 0.0);
        EXPECT_EQ(sup_norm(t.E), 0.0);
    }
}

TEST(MdviRun, DeterministicAndCountsSamples) {
    const auto m = fixtures::garnet(2);
    MdviConfig c;
    c.iterations = 25;
    c.samples_per_update = 3;
    c.seed = 77;
    const auto a = mdvi_run(m, c);
    const auto b = mdvi_run(m, c);
    ASSERT_EQ(a.trace.size(), 26u);
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
        EXPECT_EQ(a.trace[k].q, b.trace[k].q);
        EXPECT_EQ(a.trace[k].policy, b.trace[k].policy);
        EXPECT_EQ(a.trace[k].samples_used, k * 3u * 16u);
    }
    EXPECT_EQ(a.trace.front().policy, DetPolicy::lowest(8));
    EXPECT_EQ(sup_norm(a.trace[1].eps), 0.0);
}

TEST(MdviRun, SampledRecursionReplay) {
    // Independent replay of the sampled recursion with the same draw order.
    const auto m = fixtures::garnet(6);
    MdviConfig c;
    c.alpha = 0.7;
    c.iterations = 15;
    c.samples_per_update = 2;
    c.seed = 3;
    const auto run = mdvi_run(m, c);
    const auto plain = oracle::from(m);
    Rng rng(3);
    oracle::Mat s(8, oracle::Vec(2, 0.0));
    oracle::Vec w(8, 0.0), w_prev(8, 0.0);
    for (int k = 1; k <= 15; ++k) {
        oracle::Vec v(8);
        for (int x = 0; x < 8; ++x) v[x] = w[x] - 0.7 * w_prev[x];
        for (int x = 0; x < 8; ++x)
            for (int a = 0; a < 2; ++a) {
                double tot = 0.0;
                for (int i = 0; i < 2; ++i) tot += v[generative_sample(m, x, a, rng)];
                s[x][a] = plain.r[x][a] + 0.9 * tot / 2.0 + 0.7 * s[x][a];
            }
        w_prev = w;
        for (int x = 0; x < 8; ++x) w[x] = std::max(s[x][0], s[x][1]);
        for (int x = 0; x < 8; ++x)
            for (int a = 0; a < 2; ++a) EXPECT_NEAR(run.trace[k].s(x, a), s[x][a], 1e-12);
    }
}

TEST(MdviRun, FiniteBetaGivesStochasticPolicies) {
    MdviConfig c;
    c.beta = 2.0;
    c.iterations = 5;
    const auto run = mdvi_run(fixtures::garnet(0), c);
    ASSERT_EQ(run.policies.size(), 6u);
    for (const auto& p : run.policies) EXPECT_TRUE(std::holds_alternative<StochPolicy>(p));
}

TEST(QLearning, StepSizes) {
    QLearningConfig c;
    EXPECT_EQ(c.step_size(0), 1.0);
    EXPECT_EQ(c.step_size(1), 0.5);
    c.rate_exponent = 0.4;
    EXPECT_THROW(c.validate(), validation_error);
}

TEST(QLearning, ZeroIterationsGivesLowestPolicy) {
    QLearningConfig c;
    c.iterations = 0;
    const auto run = q_learning_run(fixtures::garnet(0), c);
    EXPECT_EQ(run.policy, DetPolicy::lowest(8));
    EXPECT_EQ(run.trace.size(), 1u);
}

TEST(QLearning, DeterministicRecursionReplay) {
    const auto m = fixtures::garnet(12, 1);
    const auto plain = oracle::from(m);
    QLearningConfig c;
    c.iterations = 60;
    const auto run = q_learning_run(m, c);
    oracle::Mat q(8, oracle::Vec(2, 0.0));
    for (int k = 0; k < 60; ++k) {
        const double eta = 1.0 / (k + 1.0);
        oracle::Mat next = q;
        for (int x = 0; x < 8; ++x)
            for (int a = 0; a < 2; ++a) {
                int succ = 0;
                for (int y = 0; y < 8; ++y)
                    if (plain.P[x][a][y] == 1.0) succ = y;
                const double target = plain.r[x][a] + 0.9 * std::max(q[succ][0], q[succ][1]);
                next[x][a] = (1.0 - eta) * q[x][a] + eta * target;
            }
        q = next;
        for (int x = 0; x < 8; ++x)
            for (int a = 0; a < 2; ++a) ASSERT_NEAR(run.trace[k + 1].q(x, a), q[x][a], 1e-12);
    }
    EXPECT_EQ(run.trace.back().samples_used, 60u * 16u);
}

TEST(TheoremParams, WorkedExample) {
    const auto p = theorem_params(Regime::NonStationary, 0.9, 8, 2, 0.1, 0.1);
    EXPECT_EQ(p.alpha, 0.9);
    EXPECT_EQ(p.iterations, 141u);
    EXPECT_EQ(p.samples_per_update, 127966u);
    // Hand evaluation: ⌈30 ln 100 + 2⌉ and ⌈10⁴ ln(16·141·16/0.1)⌉.
    EXPECT_EQ(p.iterations, static_cast<std::uint64_t>(std::ceil(30.0 * std::log(100.0) + 2.0)));
    EXPECT_EQ(p.samples_per_update, static_cast<std::uint64_t>(std::ceil(1e4 * std::log(16.0 * 141 * 16 / 0.1))));
    EXPECT_TRUE(p.warnings.empty());
}

TEST(TheoremParams, LastPolicyAlpha) {
    const auto p = theorem_params(Regime::LastPolicy, 0.9, 8, 2, 0.05, 0.1);
    EXPECT_NEAR(p.alpha, 0.99, 1e-15);
    EXPECT_TRUE(p.warnings.empty());
    EXPECT_FALSE(theorem_params(Regime::LastPolicy, 0.9, 8, 2, 0.5, 0.1).warnings.empty());
}

TEST(TheoremParams, MonotoneInEpsilonAndValidated) {
    std::uint64_t K = 0, M = 0;
    for (double eps : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
        const auto p = theorem_params(Regime::NonStationary, 0.9, 8, 2, eps, 0.1);
        EXPECT_GE(p.iterations, K);
        EXPECT_GE(p.samples_per_update, M);
        K = p.iterations;
        M = p.samples_per_update;
    }
    EXPECT_THROW(theorem_params(Regime::NonStationary, 0.9, 8, 2, 0.0, 0.1), validation_error);
    EXPECT_THROW(theorem_params(Regime::NonStationary, 0.9, 8, 2, 0.1, 1.0), validation_error);
    EXPECT_THROW(theorem_params(Regime::NonStationary, 0.9, 8, 2, 0.1, 0.1, {1, 0, 1, 1}), validation_error);
}
