#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fmx/agent.hpp"
#include "fmx/env_core.hpp"
#include "fmx/rng.hpp"

namespace fmx {

/// Grid coordinate, origin at the bottom-left; "up" increments y.
struct Cell {
    int x = 0;
    int y = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline std::string to_string(const Cell& c) {
    return "(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
}

enum class GridMove : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline const std::vector<std::string>& grid_action_names() {
    static const std::vector<std::string> names{"up", "down", "left", "right"};
    return names;
}

inline GridMove parse_grid_move(const std::string& token) {
    const auto& names = grid_action_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == token) return static_cast<GridMove>(i);
    }
    throw std::invalid_argument("gridworld: invalid action token '" + token + "'");
}

enum class RewardMode { FixedTopRight, UniformRandomHidden };

struct GridworldConfig {
    int width = 5;
    int height = 5;
    RewardMode reward_mode = RewardMode::FixedTopRight;
    Cell start{0, 0};
    std::size_t max_episode_steps = 30;
    bool reveal_reward_in_observation = true;

    static GridworldConfig deterministic() { return {}; }

    static GridworldConfig stochastic() {
        GridworldConfig c;
        c.reward_mode = RewardMode::UniformRandomHidden;
        c.reveal_reward_in_observation = false;
        return c;
    }

    bool inside(Cell c) const { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; }
    int cell_count() const { return width * height; }
    int index_of(Cell c) const { return c.y * width + c.x; }

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("gridworld: width and height must be positive");
        if (width * height < 2) throw std::invalid_argument("gridworld: need at least two cells");
        if (!inside(start)) throw std::invalid_argument("gridworld: start cell outside grid");
        if (max_episode_steps < 1) throw std::invalid_argument("gridworld: max_episode_steps must be >= 1");
        if (reveal_reward_in_observation != (reward_mode == RewardMode::FixedTopRight)) {
            throw std::invalid_argument("gridworld: reward is revealed iff reward_mode is fixed_top_right");
        }
    }
};

struct GridState {
    Cell agent;
    Cell reward;
    std::size_t steps_taken = 0;
    std::set<Cell> visited;
};

/// Empty grid with a single reward cell; reaching it terminates the episode with reward 1.
/// Observation layout: [agent x, agent y] followed by [reward x, reward y] when revealed.
/// Moving into a wall leaves the agent in place. Truncation is applied by StepLimit.
class Gridworld final : public Environment {
public:
    explicit Gridworld(GridworldConfig config, std::uint64_t instance = 0)
        : config_(config), instance_(instance) {
        config_.validate();
        spec_.action_count = 4;
        spec_.observation_shape = {config_.reveal_reward_in_observation ? std::size_t{4} : std::size_t{2}};
        spec_.max_episode_steps = config_.max_episode_steps;
        spec_.is_episodic = true;
        spec_.action_names = grid_action_names();
        reset(0);
    }

    const EnvSpec& spec() const override { return spec_; }
    std::string name() const override { return "gridworld"; }

    std::uint64_t state_key() const override {
        return static_cast<std::uint64_t>(config_.index_of(state_.agent)) * 1024u +
               static_cast<std::uint64_t>(config_.index_of(state_.reward));
    }

    Observation reset(std::uint64_t seed) override {
        rng_ = make_rng(seed ^ splitmix64(instance_), stream::kEnvironment);
        state_ = GridState{};
        state_.agent = config_.start;
        if (config_.reward_mode == RewardMode::FixedTopRight) {
            state_.reward = Cell{config_.width - 1, config_.height - 1};
        } else {
            // Uniform over every cell except the start cell.
            const auto pick = static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(config_.cell_count() - 1)));
            int skip_to = pick >= config_.index_of(config_.start) ? pick + 1 : pick;
            state_.reward = Cell{skip_to % config_.width, skip_to / config_.width};
        }
        state_.visited.insert(state_.agent);
        terminated_ = false;
        return observe();
    }

    StepResult step(ActionIndex action) override {
        check_action(action);
        if (terminated_) throw EnvError("gridworld: step called after the reward was reached");
        Cell next = state_.agent;
        switch (static_cast<GridMove>(action)) {
            case GridMove::Up: next.y += 1; break;
            case GridMove::Down: next.y -= 1; break;
            case GridMove::Left: next.x -= 1; break;
            case GridMove::Right: next.x += 1; break;
        }
        if (config_.inside(next)) state_.agent = next;
        state_.steps_taken += 1;
        state_.visited.insert(state_.agent);
        terminated_ = state_.agent == state_.reward;
        return StepResult{observe(), terminated_ ? 1.0 : 0.0, terminated_, false};
    }

    StepResult step(const std::string& token) { return step(static_cast<ActionIndex>(parse_grid_move(token))); }

    Observation observe() const {
        Observation obs{static_cast<double>(state_.agent.x), static_cast<double>(state_.agent.y)};
        if (config_.reveal_reward_in_observation) {
            obs.push_back(static_cast<double>(state_.reward.x));
            obs.push_back(static_cast<double>(state_.reward.y));
        }
        return obs;
    }

    const GridState& state() const { return state_; }
    const GridworldConfig& config() const { return config_; }

    /// Test hook: place the agent at an arbitrary in-grid cell.
    void place_agent(Cell c) {
        if (!config_.inside(c)) throw std::invalid_argument("gridworld: cell outside grid");
        state_.agent = c;
        state_.visited.insert(c);
    }

private:
    GridworldConfig config_;
    std::uint64_t instance_;
    EnvSpec spec_;
    GridState state_;
    bool terminated_ = false;
    Rng rng_;
};

inline std::unique_ptr<StepLimit> make_gridworld(const GridworldConfig& config, std::uint64_t instance = 0) {
    return std::make_unique<StepLimit>(std::make_unique<Gridworld>(config, instance), config.max_episode_steps);
}

/// Fraction of successful episodes.
template <typename Range>
double success_rate(const Range& outcomes) {
    std::size_t n = 0;
    std::size_t wins = 0;
    for (bool o : outcomes) {
        ++n;
        wins += o ? 1 : 0;
    }
    if (n == 0) throw std::invalid_argument("success_rate: empty outcome list");
    return static_cast<double>(wins) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Scripted reference agents. Both read the raw gridworld observation layout.

/// Walks straight to a revealed reward: x first, then y.
inline GridMove greedy_manhattan_move(Cell agent, Cell reward) {
    if (agent.x < reward.x) return GridMove::Right;
    if (agent.x > reward.x) return GridMove::Left;
    if (agent.y < reward.y) return GridMove::Up;
    return GridMove::Down;
}

/// Boustrophedon sweep from the bottom-left: right along even rows, left along odd rows, up at row ends.
inline GridMove snake_sweep_move(Cell agent, int width) {
    if (agent.y % 2 == 0) return agent.x < width - 1 ? GridMove::Right : GridMove::Up;
    return agent.x > 0 ? GridMove::Left : GridMove::Up;
}

class GreedyManhattanAgent final : public Agent {
public:
    std::string name() const override { return "greedy_manhattan"; }
    ActionIndex act(const Observation& obs) override {
        if (obs.size() < 4) throw std::invalid_argument("greedy_manhattan: reward location not observed");
        const Cell agent{static_cast<int>(obs[0]), static_cast<int>(obs[1])};
        const Cell reward{static_cast<int>(obs[2]), static_cast<int>(obs[3])};
        return static_cast<ActionIndex>(greedy_manhattan_move(agent, reward));
    }
};

class SnakeSweepAgent final : public Agent {
public:
    explicit SnakeSweepAgent(int width = 5) : width_(width) {}
    std::string name() const override { return "snake_sweep"; }
    ActionIndex act(const Observation& obs) override {
        return static_cast<ActionIndex>(snake_sweep_move(Cell{static_cast<int>(obs[0]), static_cast<int>(obs[1])}, width_));
    }

private:
    int width_;
};

}  // namespace fmx
