#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmx/agent.hpp"
#include "fmx/env_core.hpp"
#include "fmx/rng.hpp"

namespace fmx {

enum class FreewayMove : std::size_t { Up = 0, Down = 1, Stay = 2 };

inline const std::vector<std::string>& freeway_action_names() {
    static const std::vector<std::string> names{"up", "down", "stay"};
    return names;
}

struct MiniFreewayConfig {
    int lanes = 8;
    int lane_width = 16;
    std::vector<int> car_speeds{1, -1, 2, -2, 1, -1, 2, -2};
    // Staggered start columns; every lane (including the speed-2 ones) passes the agent column.
    std::vector<int> car_offsets{0, 2, 4, 6, 8, 10, 12, 14};
    // When set, reset() draws start columns uniformly from the seeded stream instead.
    bool randomize_offsets = false;
    std::size_t episode_steps = 512;
    double collision_penalty = 0.0;
    double crossing_reward = 1.0;
    bool cars_enabled = true;

    int agent_column() const { return lane_width / 2; }
    int goal_row() const { return lanes + 1; }

    void validate() const {
        if (lanes < 1) throw std::invalid_argument("minifreeway: lanes must be >= 1");
        if (lane_width < 2) throw std::invalid_argument("minifreeway: lane_width must be >= 2");
        if (static_cast<int>(car_speeds.size()) != lanes)
            throw std::invalid_argument("minifreeway: car_speeds needs one entry per lane");
        for (int s : car_speeds) {
            if (std::abs(s) < 1) throw std::invalid_argument("minifreeway: |car speed| must be >= 1");
        }
        if (!randomize_offsets) {
            if (static_cast<int>(car_offsets.size()) != lanes)
                throw std::invalid_argument("minifreeway: car_offsets needs one entry per lane");
            for (int o : car_offsets) {
                if (o < 0 || o >= lane_width) throw std::invalid_argument("minifreeway: car offset outside the lane");
            }
        }
        if (episode_steps < 1) throw std::invalid_argument("minifreeway: episode_steps must be >= 1");
    }
};

struct MiniFreewayState {
    int row = 0;
    std::vector<int> cars;
    std::size_t crossings = 0;
    std::size_t steps = 0;
};

/// Lane-crossing task: the agent starts on the bottom curb (row 0) and scores
/// each time it reaches the top curb (row lanes + 1), after which it is
/// returned to row 0 and the episode continues. A car sharing the agent's
/// cell after a step knocks the agent back to row 0.
///
/// Raw observation layout: [row, car column of lane 0, ..., car column of lane L-1].
class MiniFreeway final : public Environment {
public:
    explicit MiniFreeway(MiniFreewayConfig config = {}, std::uint64_t instance = 0)
        : config_(std::move(config)), instance_(instance) {
        config_.validate();
        spec_.action_count = 3;
        spec_.observation_shape = {static_cast<std::size_t>(config_.lanes + 1)};
        spec_.max_episode_steps = config_.episode_steps;
        spec_.is_episodic = true;
        spec_.action_names = freeway_action_names();
        reset(0);
    }

    const EnvSpec& spec() const override { return spec_; }
    std::string name() const override { return "minifreeway"; }

    Observation reset(std::uint64_t seed) override {
        Rng rng = make_rng(seed ^ splitmix64(instance_), stream::kEnvironment);
        state_ = MiniFreewayState{};
        state_.cars.resize(static_cast<std::size_t>(config_.lanes));
        if (config_.randomize_offsets) {
            for (auto& c : state_.cars) c = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config_.lane_width)));
        } else {
            state_.cars = config_.car_offsets;
        }
        return observe();
    }

    StepResult step(ActionIndex action) override {
        check_action(action);
        switch (static_cast<FreewayMove>(action)) {
            case FreewayMove::Up: state_.row += 1; break;
            case FreewayMove::Down: state_.row = std::max(0, state_.row - 1); break;
            case FreewayMove::Stay: break;
        }
        for (std::size_t lane = 0; lane < state_.cars.size(); ++lane) {
            const int w = config_.lane_width;
            state_.cars[lane] = ((state_.cars[lane] + config_.car_speeds[lane]) % w + w) % w;
        }
        state_.steps += 1;

        double reward = 0.0;
        if (state_.row >= config_.goal_row()) {
            reward = config_.crossing_reward;
            state_.crossings += 1;
            state_.row = 0;
        } else if (config_.cars_enabled && state_.row >= 1 &&
                   state_.cars[static_cast<std::size_t>(state_.row - 1)] == config_.agent_column()) {
            reward = -config_.collision_penalty;
            state_.row = 0;
        }
        return StepResult{observe(), reward, false, false};
    }

    Observation observe() const {
        Observation obs;
        obs.reserve(state_.cars.size() + 1);
        obs.push_back(static_cast<double>(state_.row));
        for (int c : state_.cars) obs.push_back(static_cast<double>(c));
        return obs;
    }

    std::uint64_t state_key() const override {
        std::uint64_t key = static_cast<std::uint64_t>(state_.row);
        for (int c : state_.cars) key = key * static_cast<std::uint64_t>(config_.lane_width) + static_cast<std::uint64_t>(c);
        return key;
    }

    const MiniFreewayState& state() const { return state_; }
    const MiniFreewayConfig& config() const { return config_; }

    /// Period of the joint car motion: lcm over lanes of width / gcd(|speed|, width).
    std::size_t car_period() const {
        std::size_t period = 1;
        for (int s : config_.car_speeds) {
            const int lane_period = config_.lane_width / std::gcd(std::abs(s), config_.lane_width);
            period = std::lcm(period, static_cast<std::size_t>(lane_period));
        }
        return period;
    }

    /// Test hook.
    void set_state(MiniFreewayState s) { state_ = std::move(s); }

private:
    MiniFreewayConfig config_;
    std::uint64_t instance_;
    EnvSpec spec_;
    MiniFreewayState state_;
};

inline std::unique_ptr<StepLimit> make_minifreeway(const MiniFreewayConfig& config, std::uint64_t instance = 0) {
    return std::make_unique<StepLimit>(std::make_unique<MiniFreeway>(config, instance), config.episode_steps);
}

/// Scripted stand-in for a guide that knows the right high-level strategy.
inline ActionIndex oracle_up_guide(const Observation& /*observation*/) {
    return static_cast<ActionIndex>(FreewayMove::Up);
}

class OracleUpAgent final : public Agent {
public:
    std::string name() const override { return "oracle_up"; }
    ActionIndex act(const Observation& obs) override { return oracle_up_guide(obs); }
};

/// Plain-text rendering of a raw MiniFreeway observation for prompted guides.
inline std::string describe_freeway_observation(const Observation& obs, const MiniFreewayConfig& config) {
    std::ostringstream out;
    out << "You are on row " << static_cast<int>(obs.at(0)) << " of " << config.goal_row()
        << " (row 0 is the start curb, row " << config.goal_row() << " is the goal curb) at column "
        << config.agent_column() << ".\n";
    for (int lane = 0; lane < config.lanes; ++lane) {
        const int speed = config.car_speeds[static_cast<std::size_t>(lane)];
        out << "Lane " << (lane + 1) << ": car at column " << static_cast<int>(obs.at(static_cast<std::size_t>(lane) + 1))
            << ", moving " << (speed > 0 ? "right" : "left") << " " << std::abs(speed) << " per step.\n";
    }
    return out.str();
}

}  // namespace fmx
