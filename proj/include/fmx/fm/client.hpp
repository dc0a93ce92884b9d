#pragma once

#include <fstream>
#include <memory>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmx/agent.hpp"
#include "fmx/env_core.hpp"

namespace fmx::fm {

struct DecodingOptions {
    double temperature = 1.0;
    int max_tokens = 256;
};

/// Unrecoverable client failure (network, HTTP status, malformed envelope).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual std::string complete(const std::string& prompt, const DecodingOptions& options) = 0;
    virtual std::string name() const = 0;
    /// False for clients whose output can differ between identical runs.
    virtual bool deterministic() const { return true; }
};

/// Returns its responses in order, wrapping around at the end.
class ScriptedClient final : public ModelClient {
public:
    explicit ScriptedClient(std::vector<std::string> responses) : responses_(std::move(responses)) {
        if (responses_.empty()) throw std::invalid_argument("scripted client: empty response list");
    }

    /// One response per non-empty line.
    static ScriptedClient from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("scripted client: cannot open " + path);
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) lines.push_back(line);
        }
        return ScriptedClient(std::move(lines));
    }

    std::string complete(const std::string&, const DecodingOptions&) override {
        const std::string& r = responses_[next_ % responses_.size()];
        ++next_;
        return r;
    }

    std::string name() const override { return "scripted"; }
    std::size_t calls() const { return next_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

/// Wraps an ordinary agent behind the text interface. All state the agent
/// sees is recovered from the prompt itself: bandit outcomes from the memory
/// lines, positions from the observation lines. Not thread-safe.
class PolicyBackedClient final : public ModelClient {
public:
    PolicyBackedClient(std::unique_ptr<Agent> policy, std::vector<std::string> action_names)
        : policy_(std::move(policy)), action_names_(std::move(action_names)) {
        if (!policy_) throw std::invalid_argument("policy_backed client: null policy");
    }

    std::string complete(const std::string& prompt, const DecodingOptions&) override {
        static const std::regex pulled(R"(^Pulled arm (\d+) resulting in a reward of (\d+)$)");
        static const std::regex position(R"(^Your current position is \((-?\d+), (-?\d+)\)\.)");
        static const std::regex reward_at(R"(The reward is located at \((-?\d+), (-?\d+)\)\.)");
        static const std::regex row(R"(^You are on row (\d+) )");
        static const std::regex lane(R"(^Lane (\d+): car at column (-?\d+))");

        std::vector<std::pair<ActionIndex, double>> outcomes;
        Observation obs;
        Observation reward_cell;
        Observation lanes;
        std::istringstream in(prompt);
        std::smatch m;
        for (std::string line; std::getline(in, line);) {
            if (std::regex_match(line, m, pulled)) {
                outcomes.emplace_back(std::stoul(m[1]), std::stod(m[2]));
            } else if (std::regex_search(line, m, position)) {
                obs = {std::stod(m[1]), std::stod(m[2])};
                if (std::regex_search(line, m, reward_at)) reward_cell = {std::stod(m[1]), std::stod(m[2])};
            } else if (std::regex_search(line, m, row)) {
                obs = {std::stod(m[1])};
            } else if (std::regex_search(line, m, lane)) {
                lanes.push_back(std::stod(m[2]));
            }
        }
        obs.insert(obs.end(), reward_cell.begin(), reward_cell.end());
        obs.insert(obs.end(), lanes.begin(), lanes.end());

        if (outcomes.size() < consumed_) {
            consumed_ = 0;
            policy_->begin_episode();
        }
        for (; consumed_ < outcomes.size(); ++consumed_) {
            const auto [a, r] = outcomes[consumed_];
            policy_->observe(a, r, StepResult{{}, r, false, false});
        }

        const ActionIndex a = policy_->act(obs);
        if (a >= action_names_.size()) throw TransportError("policy_backed client: wrapped policy chose an unknown action");
        nlohmann::json out{{"plan", "follow " + policy_->name()}, {"action", action_names_[a]}};
        return out.dump();
    }

    std::string name() const override { return "policy_backed(" + policy_->name() + ")"; }
    Agent& policy() { return *policy_; }

private:
    std::unique_ptr<Agent> policy_;
    std::vector<std::string> action_names_;
    std::size_t consumed_ = 0;
};

}  // namespace fmx::fm
