#include <gtest/gtest.h>

#include <map>

#include "fmx/classical_agents.hpp"
#include "fmx/gridworld_env.hpp"

using namespace fmx;

namespace {

Gridworld& grid_of(StepLimit& env) { return dynamic_cast<Gridworld&>(env.inner()); }

bool run_episode(StepLimit& env, Agent& agent, std::uint64_t seed, std::size_t* steps = nullptr) {
    Observation obs = env.reset(seed);
    agent.begin_episode();
    std::size_t n = 0;
    while (true) {
        const auto a = agent.act(obs);
        const StepResult r = env.step(a);
        agent.observe(a, r.reward, r);
        ++n;
        if (r.done()) {
            if (steps) *steps = n;
            return r.terminated;
        }
        obs = r.observation;
    }
}

}  // namespace

TEST(Gridworld, FixedModeRewardTopRight) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    const Observation obs = env->reset(0);
    EXPECT_EQ(obs, (Observation{0, 0, 4, 4}));
    EXPECT_EQ(grid_of(*env).state().reward, (Cell{4, 4}));
}

TEST(Gridworld, RandomModeIsSeededAndHidden) {
    auto env = make_gridworld(GridworldConfig::stochastic());
    const Observation obs = env->reset(11);
    EXPECT_EQ(obs.size(), 2u);
    const Cell first = grid_of(*env).state().reward;
    env->reset(11);
    EXPECT_EQ(grid_of(*env).state().reward, first);
}

TEST(Gridworld, RandomModeUniformOverNonStartCells) {
    auto env = make_gridworld(GridworldConfig::stochastic());
    std::map<Cell, int> freq;
    const int n = 10000;
    for (int s = 0; s < n; ++s) {
        env->reset(static_cast<std::uint64_t>(s));
        ++freq[grid_of(*env).state().reward];
    }
    EXPECT_EQ(freq.size(), 24u);
    EXPECT_EQ(freq.count(Cell{0, 0}), 0u);
    for (const auto& [cell, count] : freq) EXPECT_NEAR(count / double(n), 1.0 / 24.0, 0.01) << to_string(cell);
}

TEST(Gridworld, StepIntoRewardTerminates) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    env->reset(0);
    grid_of(*env).place_agent({4, 3});
    const StepResult r = env->step(static_cast<ActionIndex>(GridMove::Up));
    EXPECT_EQ(r.reward, 1.0);
    EXPECT_TRUE(r.terminated);
}

TEST(Gridworld, WallsClamp) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    env->reset(0);
    StepResult r = env->step(static_cast<ActionIndex>(GridMove::Left));
    EXPECT_EQ(r.observation[0], 0.0);
    EXPECT_EQ(r.observation[1], 0.0);
    EXPECT_EQ(r.reward, 0.0);
    r = env->step(static_cast<ActionIndex>(GridMove::Down));
    EXPECT_EQ(grid_of(*env).state().agent, (Cell{0, 0}));
}

TEST(Gridworld, ThirtyNonGoalMovesTruncate) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    env->reset(0);
    StepResult r;
    for (int i = 0; i < 30; ++i) r = env->step(static_cast<ActionIndex>(i % 2 == 0 ? GridMove::Up : GridMove::Down));
    EXPECT_TRUE(r.truncated);
    EXPECT_FALSE(r.terminated);
}

TEST(Gridworld, InvalidTokenRejected) {
    Gridworld g(GridworldConfig::deterministic());
    EXPECT_THROW(g.step(std::string("fly")), std::invalid_argument);
    EXPECT_NO_THROW(g.step(std::string("up")));
}

TEST(Gridworld, ConfigInvariants) {
    GridworldConfig c;
    c.start = {5, 0};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    GridworldConfig d;
    d.reveal_reward_in_observation = false;
    EXPECT_THROW(d.validate(), std::invalid_argument);
}

TEST(Gridworld, VisitedContainsAgentAfterEveryStep) {
    auto env = make_gridworld(GridworldConfig::stochastic());
    env->reset(3);
    RandomAgent agent(4, 3);
    for (int i = 0; i < 20; ++i) {
        const StepResult r = env->step(agent.act({}));
        const auto& st = grid_of(*env).state();
        EXPECT_TRUE(st.visited.count(st.agent));
        if (r.done()) break;
    }
}

TEST(SuccessRate, Examples) {
    EXPECT_DOUBLE_EQ(success_rate(std::vector<bool>(100, true)), 1.0);
    EXPECT_DOUBLE_EQ(success_rate(std::vector<bool>(100, false)), 0.0);
    std::vector<bool> v(100, false);
    for (int i = 0; i < 84; ++i) v[static_cast<std::size_t>(i)] = true;
    EXPECT_DOUBLE_EQ(success_rate(v), 0.84);
    EXPECT_THROW(success_rate(std::vector<bool>{}), std::invalid_argument);
}

TEST(ScriptedAgents, GreedyManhattanSolvesDeterministicInEightSteps) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    GreedyManhattanAgent agent;
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::size_t steps = 0;
        EXPECT_TRUE(run_episode(*env, agent, s, &steps));
        EXPECT_EQ(steps, 8u);
    }
}

TEST(ScriptedAgents, SnakeSweepAlwaysFindsHiddenReward) {
    auto env = make_gridworld(GridworldConfig::stochastic());
    SnakeSweepAgent agent;
    for (std::uint64_t s = 0; s < 500; ++s) {
        std::size_t steps = 0;
        EXPECT_TRUE(run_episode(*env, agent, s, &steps));
        EXPECT_LE(steps, 24u);
    }
}

TEST(ScriptedAgents, GreedyManhattanNeedsRevealedReward) {
    GreedyManhattanAgent agent;
    EXPECT_THROW(agent.act({0, 0}), std::invalid_argument);
}
