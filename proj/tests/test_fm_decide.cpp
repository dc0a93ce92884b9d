#include <gtest/gtest.h>

#include <sstream>

#include "fmx/fm/agent.hpp"
#include "fmx/fm/decide.hpp"
#include "fmx/gridworld_env.hpp"

using namespace fmx;
using namespace fmx::fm;

namespace {

FmRequest grid_request(Variant v = Variant::ActionOnly) {
    const auto binding = gridworld_binding(GridworldConfig::deterministic());
    FmRequest r;
    r.strategy = {Task::Gridworld, v};
    r.env_description = binding.env_description;
    r.legal_actions = binding.action_names;
    r.observation = binding.render_observation({0, 0, 4, 4}, 0);
    return r;
}

class FailingClient final : public ModelClient {
public:
    std::string complete(const std::string&, const DecodingOptions&) override { throw TransportError("down"); }
    std::string name() const override { return "failing"; }
};

}  // namespace

TEST(FmDecide, FirstTryLegalActionNeedsNoRetry) {
    ScriptedClient client({R"({"action": "right"})"});
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    DecisionCounters c;
    const auto d = fm_decide(client, grid_request(), m, 2, rng, &c);
    EXPECT_EQ(d.token, "right");
    EXPECT_EQ(c.retries, 0u);
    EXPECT_EQ(c.parsed, 1u);
    EXPECT_EQ(client.calls(), 1u);
}

TEST(FmDecide, GarbageExhaustsBudgetAndFallsBack) {
    ScriptedClient client({"garbage", "more garbage", "{\"action\": \"fly\"}", R"({"action": "up"})"});
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    DecisionCounters c;
    const auto d = fm_decide(client, grid_request(), m, 2, rng, &c);
    EXPECT_EQ(client.calls(), 3u);
    EXPECT_EQ(c.fallback, 1u);
    EXPECT_EQ(c.retries, 2u);
    EXPECT_LT(d.action, 4u);
    // The fallback draw is seeded.
    ScriptedClient again({"garbage"});
    Rng rng2 = make_rng(1, stream::kFallback);
    EXPECT_EQ(fm_decide(again, grid_request(), m, 2, rng2).action, d.action);
}

TEST(FmDecide, RetryRecoversAfterParseError) {
    ScriptedClient client({"nope", R"({"action": "down"})"});
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    DecisionCounters c;
    EXPECT_EQ(fm_decide(client, grid_request(), m, 2, rng, &c).token, "down");
    EXPECT_EQ(c.retries, 1u);
    EXPECT_EQ(c.fallback, 0u);
}

TEST(FmDecide, TransportErrorPropagates) {
    FailingClient client;
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    EXPECT_THROW(fm_decide(client, grid_request(), m, 2, rng), TransportError);
}

TEST(FmDecide, PlanIsAppendedToMemoryForPlanningStrategies) {
    ScriptedClient client({R"({"plan": "go right then up", "action": "right"})"});
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    fm_decide(client, grid_request(Variant::SimplePlan), m, 0, rng);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.lines()[0], "Plan: go right then up");
    TranscriptMemory ao;
    ScriptedClient client2({R"({"plan": "ignored", "action": "right"})"});
    fm_decide(client2, grid_request(), ao, 0, rng);
    EXPECT_TRUE(ao.empty());
}

TEST(FmDecide, LogRecordsAttempts) {
    std::ostringstream out;
    DecisionLog log(out);
    ScriptedClient client({"??", R"({"action": "left"})"});
    TranscriptMemory m;
    Rng rng = make_rng(1, stream::kFallback);
    fm_decide(client, grid_request(), m, 2, rng, nullptr, &log);
    const auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j["attempts"].size(), 2u);
    EXPECT_EQ(j["action"], "left");
    EXPECT_EQ(j["fallback"], false);
    EXPECT_EQ(j["prompt_hash"].get<std::string>().size(), 16u);
}

TEST(FmAgent, CountersBalanceOverAnEpisode) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    auto client = std::make_shared<ScriptedClient>(std::vector<std::string>{R"({"action": "right"})", "junk", "junk",
                                                                            "junk", R"({"action": "up"})"});
    FmAgent agent(client, gridworld_binding(GridworldConfig::deterministic()), {Task::Gridworld, Variant::ActionOnly});
    Observation obs = env->reset(0);
    agent.begin_episode();
    for (int i = 0; i < 30; ++i) {
        const auto a = agent.act(obs);
        const StepResult r = env->step(a);
        agent.observe(a, r.reward, r);
        if (r.done()) break;
        obs = r.observation;
    }
    const auto& c = agent.counters();
    EXPECT_EQ(c.total, c.parsed + c.fallback);
    EXPECT_GT(c.fallback, 0u);
    EXPECT_EQ(agent.memory().size(), c.total);
    EXPECT_EQ(agent.memory().lines()[0], "Executed right at (0, 0) resulting in (1, 0) and no reward.");
}

TEST(FmAgent, GreedyPolicyBackedSolvesGrid) {
    auto env = make_gridworld(GridworldConfig::deterministic());
    auto client = std::make_shared<PolicyBackedClient>(std::make_unique<GreedyManhattanAgent>(), grid_action_names());
    FmAgent agent(client, gridworld_binding(GridworldConfig::deterministic()), {Task::Gridworld, Variant::FocusedPlan});
    Observation obs = env->reset(0);
    agent.begin_episode();
    StepResult r;
    for (int i = 0; i < 30 && !r.done(); ++i) {
        const auto a = agent.act(obs);
        r = env->step(a);
        agent.observe(a, r.reward, r);
        obs = r.observation;
    }
    EXPECT_TRUE(r.terminated);
    EXPECT_EQ(agent.memory().lines().back(), "Executed up at (4, 3) resulting in (4, 4) and a reward.");
}

TEST(FmAgent, StrategyMustMatchTask) {
    auto client = std::make_shared<ScriptedClient>(std::vector<std::string>{"x"});
    EXPECT_THROW(FmAgent(client, bandit_binding(2), {Task::Gridworld, Variant::ActionOnly}), std::invalid_argument);
}

TEST(ScriptedClient, CyclesAndIsDeterministic) {
    ScriptedClient c({"a", "b"});
    EXPECT_EQ(c.complete("", {}), "a");
    EXPECT_EQ(c.complete("", {}), "b");
    EXPECT_EQ(c.complete("", {}), "a");
    EXPECT_TRUE(c.deterministic());
    EXPECT_THROW(ScriptedClient({}), std::invalid_argument);
}
