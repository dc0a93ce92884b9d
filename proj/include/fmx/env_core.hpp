#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmx {

using Observation = std::vector<double>;
using ActionIndex = std::size_t;

struct EnvSpec {
    std::size_t action_count = 1;
    std::vector<std::size_t> observation_shape;
    std::size_t max_episode_steps = 1;
    bool is_episodic = true;
    std::vector<std::string> action_names;

    void validate() const {
        if (action_count < 1) throw std::invalid_argument("EnvSpec: action_count must be >= 1");
        if (is_episodic && max_episode_steps < 1)
            throw std::invalid_argument("EnvSpec: max_episode_steps must be >= 1 for episodic environments");
        if (!action_names.empty() && action_names.size() != action_count)
            throw std::invalid_argument("EnvSpec: action_names size differs from action_count");
    }

    std::size_t observation_size() const {
        std::size_t n = 1;
        for (auto d : observation_shape) n *= d;
        return observation_shape.empty() ? 0 : n;
    }
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;

    bool done() const { return terminated || truncated; }
};

class EnvError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Episode lifecycle shared by every task. Implementations reject
/// out-of-range actions and steps after a terminal transition.
class Environment {
public:
    virtual ~Environment() = default;

    virtual const EnvSpec& spec() const = 0;
    virtual Observation reset(std::uint64_t seed) = 0;
    virtual StepResult step(ActionIndex action) = 0;
    virtual std::string name() const = 0;

    /// Hashable key for the full (Markov) state, used by visit counting.
    virtual std::uint64_t state_key() const { return 0; }

protected:
    void check_action(ActionIndex action) const {
        if (action >= spec().action_count) {
            throw EnvError(name() + ": action index " + std::to_string(action) +
                           " out of range [0, " + std::to_string(spec().action_count) + ")");
        }
    }
};

/// Applies the episode clock to any episodic environment: sets `truncated`
/// when the step budget is reached and refuses to step a finished episode.
class StepLimit final : public Environment {
public:
    StepLimit(std::unique_ptr<Environment> inner, std::size_t max_steps)
        : inner_(std::move(inner)), spec_(inner_->spec()) {
        if (max_steps < 1) throw std::invalid_argument("StepLimit: max_steps must be >= 1");
        spec_.max_episode_steps = max_steps;
    }

    const EnvSpec& spec() const override { return spec_; }
    std::string name() const override { return inner_->name(); }
    std::uint64_t state_key() const override { return inner_->state_key(); }

    Observation reset(std::uint64_t seed) override {
        steps_ = 0;
        finished_ = false;
        return inner_->reset(seed);
    }

    StepResult step(ActionIndex action) override {
        if (finished_) throw EnvError(name() + ": step called after episode end; call reset first");
        check_action(action);
        StepResult r = inner_->step(action);
        ++steps_;
        if (!r.terminated && steps_ >= spec_.max_episode_steps) r.truncated = true;
        finished_ = r.done();
        return r;
    }

    std::size_t steps() const { return steps_; }
    Environment& inner() { return *inner_; }
    const Environment& inner() const { return *inner_; }

private:
    std::unique_ptr<Environment> inner_;
    EnvSpec spec_;
    std::size_t steps_ = 0;
    bool finished_ = false;
};

struct DiscountedReturnConfig {
    double gamma = 0.99;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    }
};

/// G = sum_k gamma^k r_k.
inline double discounted_return(std::span<const double> rewards, double gamma) {
    DiscountedReturnConfig{gamma}.validate();
    double g = 0.0;
    double weight = 1.0;
    for (double r : rewards) {
        g += weight * r;
        weight *= gamma;
    }
    return g;
}

}  // namespace fmx
