#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fmx/agent.hpp"
#include "fmx/fm/client.hpp"
#include "fmx/fm/decide.hpp"
#include "fmx/fm/memory.hpp"
#include "fmx/fm/prompt.hpp"
#include "fmx/gridworld_env.hpp"
#include "fmx/minifreeway.hpp"
#include "fmx/rng.hpp"

namespace fmx::fm {

/// How one environment is presented to a prompted agent.
struct TaskBinding {
    Task task = Task::Bandit;
    std::string env_description;
    std::vector<std::string> action_names;
    std::function<std::string(const Observation&, std::size_t step)> render_observation;
    /// Appends the outcome of one step to memory. `before` is the observation the action was chosen on.
    std::function<void(TranscriptMemory&, const Observation& before, ActionIndex, double reward, const StepResult&)> record;
};

inline TaskBinding bandit_binding(std::size_t arms, const TemplateSet& templates = TemplateSet::builtin()) {
    TaskBinding b;
    b.task = Task::Bandit;
    b.env_description = substitute(templates.get("bandit_env"), {{"arm_count", std::to_string(arms)},
                                                                 {"last_arm", std::to_string(arms - 1)}});
    for (std::size_t k = 0; k < arms; ++k) b.action_names.push_back(std::to_string(k));
    b.render_observation = [](const Observation&, std::size_t step) {
        return "This is round " + std::to_string(step + 1) + ".";
    };
    b.record = [](TranscriptMemory& m, const Observation&, ActionIndex a, double r, const StepResult&) {
        append_bandit_memory(m, a, r > 0.5 ? 1 : 0);
    };
    return b;
}

inline TaskBinding gridworld_binding(const GridworldConfig& config, const TemplateSet& templates = TemplateSet::builtin()) {
    TaskBinding b;
    b.task = Task::Gridworld;
    const bool revealed = config.reveal_reward_in_observation;
    b.env_description = substitute(templates.get(revealed ? "gridworld_env_deterministic" : "gridworld_env_stochastic"),
                                   {{"width", std::to_string(config.width)},
                                    {"height", std::to_string(config.height)},
                                    {"max_x", std::to_string(config.width - 1)},
                                    {"max_y", std::to_string(config.height - 1)},
                                    {"start", to_string(config.start)},
                                    {"max_steps", std::to_string(config.max_episode_steps)}});
    b.action_names = grid_action_names();
    const int budget = static_cast<int>(config.max_episode_steps);
    b.render_observation = [revealed, budget](const Observation& obs, std::size_t step) {
        const Cell agent{static_cast<int>(obs.at(0)), static_cast<int>(obs.at(1))};
        std::string s = "Your current position is " + to_string(agent) + ".";
        if (revealed && obs.size() >= 4) {
            s += " The reward is located at " + to_string(Cell{static_cast<int>(obs[2]), static_cast<int>(obs[3])}) + ".";
        } else {
            s += " The reward location is unknown.";
        }
        s += " Steps remaining: " + std::to_string(budget - static_cast<int>(step)) + ".";
        return s;
    };
    b.record = [](TranscriptMemory& m, const Observation& before, ActionIndex a, double r, const StepResult& res) {
        const Cell from{static_cast<int>(before.at(0)), static_cast<int>(before.at(1))};
        const Cell to{static_cast<int>(res.observation.at(0)), static_cast<int>(res.observation.at(1))};
        append_grid_memory(m, grid_action_names().at(a), from, to, r > 0.0);
    };
    return b;
}

/// Prompted guide for MiniFreeway. Guides are not told outcomes, so memory stays empty.
inline TaskBinding freeway_binding(const MiniFreewayConfig& config, const TemplateSet& templates = TemplateSet::builtin()) {
    TaskBinding b;
    b.task = Task::Freeway;
    b.env_description = substitute(templates.get("freeway_env"), {{"lanes", std::to_string(config.lanes)},
                                                                  {"goal_row", std::to_string(config.goal_row())},
                                                                  {"width", std::to_string(config.lane_width)}});
    b.action_names = freeway_action_names();
    b.render_observation = [config](const Observation& obs, std::size_t) { return describe_freeway_observation(obs, config); };
    b.record = [](TranscriptMemory&, const Observation&, ActionIndex, double, const StepResult&) {};
    return b;
}

struct FmAgentOptions {
    int retry_budget = 2;
    DecodingOptions decoding;
    std::uint64_t seed = 0;  // drives the fallback stream only
    std::string template_key;
};

/// Prompted agent: each act() is one fm_decide round trip.
class FmAgent final : public Agent {
public:
    FmAgent(std::shared_ptr<ModelClient> client, TaskBinding binding, PromptStrategy strategy, FmAgentOptions options = {},
            const TemplateSet* templates = nullptr, std::shared_ptr<DecisionLog> log = nullptr)
        : client_(std::move(client)), binding_(std::move(binding)), strategy_(strategy), options_(options),
          templates_(templates), log_(std::move(log)), fallback_rng_(make_rng(options.seed, stream::kFallback)) {
        if (!client_) throw std::invalid_argument("fm agent: null client");
        if (strategy_.task != binding_.task) throw std::invalid_argument("fm agent: strategy task does not match environment");
        strategy_.validate();
    }

    std::string name() const override { return std::string("fm_") + to_string(strategy_.variant); }

    void begin_episode() override {
        memory_.clear();
        step_ = 0;
    }

    ActionIndex act(const Observation& observation) override {
        last_obs_ = observation;
        FmRequest req{templates_, strategy_, binding_.env_description, binding_.action_names,
                      binding_.render_observation(observation, step_), options_.decoding, options_.template_key};
        const ParsedDecision d = fm_decide(*client_, req, memory_, options_.retry_budget, fallback_rng_, &counters_, log_.get());
        return d.action;
    }

    void observe(ActionIndex action, double reward, const StepResult& result) override {
        binding_.record(memory_, last_obs_, action, reward, result);
        ++step_;
    }

    const TranscriptMemory& memory() const { return memory_; }
    const DecisionCounters& counters() const { return counters_; }
    ModelClient& client() { return *client_; }

private:
    std::shared_ptr<ModelClient> client_;
    TaskBinding binding_;
    PromptStrategy strategy_;
    FmAgentOptions options_;
    const TemplateSet* templates_;
    std::shared_ptr<DecisionLog> log_;
    Rng fallback_rng_;
    TranscriptMemory memory_;
    DecisionCounters counters_;
    Observation last_obs_;
    std::size_t step_ = 0;
};

}  // namespace fmx::fm
