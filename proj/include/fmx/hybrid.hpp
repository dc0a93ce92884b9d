#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fmx/agent.hpp"
#include "fmx/env_core.hpp"
#include "fmx/ppo/learner.hpp"
#include "fmx/rng.hpp"

namespace fmx {

/// (epsilon, T) guided-segment state machine. While the learner is in control
/// each step starts an intervention with probability epsilon; an intervention
/// hands the next T steps (including the current one) to the guide. Segments
/// are cut short at episode boundaries.
class InterventionSchedule {
public:
    InterventionSchedule(double epsilon, std::size_t duration) : epsilon_(epsilon), duration_(duration) {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("hybrid: epsilon must lie in [0, 1]");
        if (duration < 1) throw std::invalid_argument("hybrid: duration T must be >= 1");
    }

    /// Advances by one environment step; true when the guide acts on this step.
    bool advance(Rng& rng) {
        if (remaining_ == 0) {
            // Zero epsilon consumes no randomness.
            if (epsilon_ <= 0.0 || !(uniform01(rng) < epsilon_)) return false;
            remaining_ = duration_;
            ++interventions_started_;
        }
        --remaining_;
        ++guided_steps_total_;
        return true;
    }

    void end_episode() { remaining_ = 0; }

    /// Cancels the step just granted to the guide and ends its segment.
    void revoke_current_step() {
        if (guided_steps_total_ > 0) --guided_steps_total_;
        remaining_ = 0;
    }

    bool guided() const { return remaining_ > 0; }
    std::size_t steps_remaining() const { return remaining_; }
    double epsilon() const { return epsilon_; }
    std::size_t duration() const { return duration_; }
    std::size_t interventions_started() const { return interventions_started_; }
    std::size_t guided_steps_total() const { return guided_steps_total_; }

private:
    double epsilon_;
    std::size_t duration_;
    std::size_t remaining_ = 0;
    std::size_t interventions_started_ = 0;
    std::size_t guided_steps_total_ = 0;
};

struct HybridDecision {
    ActionIndex action;
    bool guided;
};

/// One routed step: the schedule decides who acts; `learner_act` is only
/// invoked when the learner keeps control.
template <typename LearnerAct>
HybridDecision hybrid_step(InterventionSchedule& schedule, LearnerAct&& learner_act, Agent& guide,
                           const Observation& observation, Rng& rng, std::size_t action_count) {
    if (schedule.advance(rng)) {
        const ActionIndex a = guide.act(observation);
        if (a >= action_count) throw std::out_of_range("hybrid: guide '" + guide.name() + "' emitted an illegal action");
        return {a, true};
    }
    return {learner_act(observation), false};
}

/// Replays a fixed list of action tokens, wrapping around. One token per
/// non-empty line when read from a file.
class ScriptedGuide final : public Agent {
public:
    ScriptedGuide(const std::vector<std::string>& tokens, const std::vector<std::string>& action_names) {
        for (const auto& t : tokens) {
            auto it = std::find(action_names.begin(), action_names.end(), t);
            if (it == action_names.end()) throw std::invalid_argument("scripted guide: unknown action '" + t + "'");
            actions_.push_back(static_cast<ActionIndex>(it - action_names.begin()));
        }
        if (actions_.empty()) throw std::invalid_argument("scripted guide: empty script");
    }

    static ScriptedGuide from_file(const std::string& path, const std::vector<std::string>& action_names) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("scripted guide: cannot open " + path);
        std::vector<std::string> tokens;
        for (std::string line; std::getline(in, line);) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) tokens.push_back(line);
        }
        return ScriptedGuide(tokens, action_names);
    }

    std::string name() const override { return "scripted"; }
    ActionIndex act(const Observation&) override { return actions_[next_++ % actions_.size()]; }

private:
    std::vector<ActionIndex> actions_;
    std::size_t next_ = 0;
};

enum class GuideFailurePolicy { Abort, Degrade };

/// Adapts a schedule + guide to the PPO loop's StepController hook.
class HybridController final : public StepController {
public:
    HybridController(InterventionSchedule schedule, Agent& guide, std::size_t action_count, std::uint64_t seed,
                     GuideFailurePolicy on_failure = GuideFailurePolicy::Abort)
        : schedule_(schedule), guide_(guide), action_count_(action_count), rng_(make_rng(seed, stream::kSchedule)),
          on_failure_(on_failure) {}

    void on_episode_start() override { guide_.begin_episode(); }

    std::optional<ActionIndex> take_over(const Observation& raw) override {
        // The learner's own action is sampled by the training loop, so its turn is signalled by nullopt.
        constexpr ActionIndex kLearnerTurn = static_cast<ActionIndex>(-1);
        try {
            const auto d = hybrid_step(
                schedule_, [](const Observation&) { return kLearnerTurn; }, guide_, raw, rng_, action_count_);
            if (d.guided) return d.action;
            return std::nullopt;
        } catch (const std::exception& e) {
            if (on_failure_ == GuideFailurePolicy::Abort) throw;
            std::cerr << "hybrid: guide failure, degrading to learner control: " << e.what() << '\n';
            ++guide_failures_;
            schedule_.revoke_current_step();
            return std::nullopt;
        }
    }

    void on_episode_end() override { schedule_.end_episode(); }

    const InterventionSchedule& schedule() const { return schedule_; }
    std::size_t guide_failures() const { return guide_failures_; }

private:
    InterventionSchedule schedule_;
    Agent& guide_;
    std::size_t action_count_;
    Rng rng_;
    GuideFailurePolicy on_failure_;
    std::size_t guide_failures_ = 0;
};

struct HybridRunResult {
    TrainingResult training;
    std::size_t interventions_started = 0;
    std::size_t guided_steps_total = 0;
    std::size_t guide_failures = 0;
    double guided_fraction = 0.0;
};

/// PPO training with every step routed through the intervention schedule.
inline HybridRunResult run_hybrid_training(Environment& env, PpoLearner& learner, Agent& guide,
                                           InterventionSchedule schedule, std::size_t total_steps, std::uint64_t seed,
                                           GuideFailurePolicy on_failure = GuideFailurePolicy::Abort,
                                           TrainingOptions options = {}) {
    if (total_steps < learner.config().rollout_length)
        throw std::invalid_argument("run_hybrid_training: total_steps must cover at least one rollout");
    HybridController controller(schedule, guide, env.spec().action_count, seed, on_failure);
    HybridRunResult r;
    r.training = train_ppo(env, learner, total_steps, seed, &controller, options);
    r.interventions_started = controller.schedule().interventions_started();
    r.guided_steps_total = controller.schedule().guided_steps_total();
    r.guide_failures = controller.guide_failures();
    r.guided_fraction = static_cast<double>(r.training.guided_steps) / static_cast<double>(total_steps);
    return r;
}

}  // namespace fmx
