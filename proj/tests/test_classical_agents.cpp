#include <gtest/gtest.h>

#include <cmath>

#include "fmx/bandit_env.hpp"
#include "fmx/classical_agents.hpp"

using namespace fmx;

TEST(Thompson, SingleArmPosterior) {
    Rng rng = make_rng(1, stream::kAgent);
    EXPECT_EQ(thompson_select(BetaPosterior::uniform(1), rng), 0u);
}

TEST(Thompson, ConcentratedPosteriorWins) {
    BetaPosterior p{{500, 1}, {1, 500}};
    Rng rng = make_rng(2, stream::kAgent);
    int zero = 0;
    for (int i = 0; i < 1000; ++i) zero += thompson_select(p, rng) == 0 ? 1 : 0;
    EXPECT_GE(zero, 990);
}

TEST(Thompson, SymmetricPosteriorsSplitEvenly) {
    const auto p = BetaPosterior::uniform(2);
    Rng rng = make_rng(3, stream::kAgent);
    int zero = 0;
    for (int i = 0; i < 10000; ++i) zero += thompson_select(p, rng) == 0 ? 1 : 0;
    EXPECT_NEAR(zero / 10000.0, 0.5, 0.02);
}

TEST(Thompson, ConjugateUpdate) {
    auto p = BetaPosterior::uniform(2);
    thompson_update(p, 0, 1.0);
    EXPECT_EQ(p.alpha[0], 2.0);
    EXPECT_EQ(p.beta[0], 1.0);
    thompson_update(p, 1, 0.0);
    EXPECT_EQ(p.alpha[1], 1.0);
    EXPECT_EQ(p.beta[1], 2.0);
    EXPECT_THROW(thompson_update(p, 0, 0.5), std::invalid_argument);
    EXPECT_THROW(thompson_update(p, 2, 1.0), std::out_of_range);
}

TEST(Thompson, UpdateIsLocal) {
    BetaPosterior p{{3, 1}, {2, 1}};
    thompson_update(p, 0, 1.0);
    EXPECT_EQ(p.alpha[1], 1.0);
    EXPECT_EQ(p.beta[1], 1.0);
}

TEST(Thompson, PseudoCountsTrackPulls) {
    BernoulliBandit env({0.3, 0.7, 0.5}, 4);
    ThompsonAgent agent(3, 4);
    std::vector<int> pulls(3, 0);
    for (int t = 0; t < 300; ++t) {
        const auto a = agent.act({});
        const auto r = env.step(a);
        agent.observe(a, r.reward, r);
        ++pulls[a];
    }
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_EQ(agent.posterior().alpha[k] + agent.posterior().beta[k] - 2.0, static_cast<double>(pulls[k]));
}

TEST(Ucb1, UnpulledArmFirst) {
    UcbState s = UcbState::fresh(2);
    s.counts = {0, 5};
    s.means = {0.0, 0.6};
    s.total = 5;
    Rng rng = make_rng(0, stream::kAgent);
    EXPECT_EQ(ucb1_select(s, rng), 0u);
}

TEST(Ucb1, IndexFormula) {
    UcbState s = UcbState::fresh(2);
    s.counts = {10, 10};
    s.means = {0.8, 0.2};
    s.total = 20;
    EXPECT_NEAR(s.index(0), 0.8 + 0.25 * std::sqrt(2.0 * std::log(20.0) / 10.0), 1e-12);
    EXPECT_NEAR(s.index(0), 0.9936, 1e-3);
    EXPECT_NEAR(s.index(1), 0.3936, 1e-3);
    Rng rng = make_rng(0, stream::kAgent);
    EXPECT_EQ(ucb1_select(s, rng), 0u);
}

TEST(Ucb1, BonusDominatesForRarelyPulledArm) {
    UcbState s = UcbState::fresh(2);
    s.counts = {100, 1};
    s.means = {0.5, 0.4};
    s.total = 101;
    EXPECT_NEAR(s.index(1) - 0.4, 0.25 * std::sqrt(2.0 * std::log(101.0)), 1e-12);
    EXPECT_NEAR(s.index(1) - 0.4, 0.76, 0.01);
    Rng rng = make_rng(0, stream::kAgent);
    EXPECT_EQ(ucb1_select(s, rng), 1u);
}

TEST(Ucb1, IncrementalMean) {
    UcbState s = UcbState::fresh(1);
    ucb1_update(s, 0, 1.0);
    EXPECT_EQ(s.counts[0], 1u);
    EXPECT_DOUBLE_EQ(s.means[0], 1.0);
    ucb1_update(s, 0, 0.0);
    EXPECT_DOUBLE_EQ(s.means[0], 0.5);
    ucb1_update(s, 0, 1.0);
    EXPECT_DOUBLE_EQ(s.means[0], 2.0 / 3.0);
    EXPECT_EQ(s.total, 3u);
    EXPECT_THROW(ucb1_update(s, 0, 2.0), std::invalid_argument);
}

TEST(GreedyCommit, PullsEachArmThenCommits) {
    GreedyCommitAgent agent(3, 1);
    const StepResult dummy;
    std::vector<double> rewards{0.0, 1.0, 0.0};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto a = agent.act({});
        EXPECT_EQ(a, k);
        agent.observe(a, rewards[k], dummy);
    }
    for (int i = 0; i < 20; ++i) {
        const auto a = agent.act({});
        EXPECT_EQ(a, 1u);
        agent.observe(a, 0.0, dummy);
    }
}

TEST(RandomAgent, CoversAllActionsUniformly) {
    RandomAgent agent(4, 8);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 8000; ++i) ++counts[agent.act({})];
    for (int c : counts) EXPECT_NEAR(c / 8000.0, 0.25, 0.02);
}

TEST(Agents, SameSeedSameSequence) {
    ThompsonAgent a(3, 5), b(3, 5);
    BernoulliBandit ea({0.2, 0.5, 0.8}, 5), eb({0.2, 0.5, 0.8}, 5);
    for (int t = 0; t < 100; ++t) {
        const auto x = a.act({});
        const auto y = b.act({});
        ASSERT_EQ(x, y);
        const auto rx = ea.step(x);
        const auto ry = eb.step(y);
        a.observe(x, rx.reward, rx);
        b.observe(y, ry.reward, ry);
    }
}
