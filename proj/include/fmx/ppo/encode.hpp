#pragma once

#include <deque>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmx/env_core.hpp"
#include "fmx/gridworld_env.hpp"
#include "fmx/minifreeway.hpp"

namespace fmx {

/// Gridworld feature layout (3 blocks of width*height):
///   [0, C)    one-hot agent cell
///   [C, 2C)   one-hot reward cell, all zeros when the reward is hidden
///   [2C, 3C)  visited-cell bitmap, filled only when `use_visited`
inline std::vector<double> encode_gridworld(const Observation& raw, const std::set<Cell>& visited,
                                            const GridworldConfig& config, bool use_visited) {
    const auto cells = static_cast<std::size_t>(config.cell_count());
    std::vector<double> f(3 * cells, 0.0);
    const Cell agent{static_cast<int>(raw.at(0)), static_cast<int>(raw.at(1))};
    f[static_cast<std::size_t>(config.index_of(agent))] = 1.0;
    if (raw.size() >= 4) {
        const Cell reward{static_cast<int>(raw[2]), static_cast<int>(raw[3])};
        f[cells + static_cast<std::size_t>(config.index_of(reward))] = 1.0;
    }
    if (use_visited) {
        for (const Cell& c : visited) f[2 * cells + static_cast<std::size_t>(config.index_of(c))] = 1.0;
    }
    return f;
}

/// MiniFreeway feature layout: [row / (lanes+1), agent column / width,
/// car column / width for each lane].
inline std::vector<double> encode_freeway(const Observation& raw, const MiniFreewayConfig& config) {
    std::vector<double> f;
    f.reserve(raw.size() + 1);
    f.push_back(raw.at(0) / static_cast<double>(config.goal_row()));
    f.push_back(static_cast<double>(config.agent_column()) / static_cast<double>(config.lane_width));
    for (std::size_t lane = 1; lane < raw.size(); ++lane) f.push_back(raw[lane] / static_cast<double>(config.lane_width));
    return f;
}

/// Stateful per-episode observation encoder used by the learner.
class ObservationEncoder {
public:
    virtual ~ObservationEncoder() = default;
    virtual std::size_t feature_size() const = 0;
    /// Begins a new episode from its first raw observation and returns its features.
    virtual std::vector<double> reset(const Observation& raw) = 0;
    /// Features for the next raw observation within the current episode.
    virtual std::vector<double> encode(const Observation& raw) = 0;
    virtual std::unique_ptr<ObservationEncoder> clone() const = 0;
};

class IdentityEncoder final : public ObservationEncoder {
public:
    explicit IdentityEncoder(std::size_t size) : size_(size) {}
    std::size_t feature_size() const override { return size_; }
    std::vector<double> reset(const Observation& raw) override { return encode(raw); }
    std::vector<double> encode(const Observation& raw) override {
        if (raw.size() != size_) throw std::invalid_argument("IdentityEncoder: observation size mismatch");
        return raw;
    }
    std::unique_ptr<ObservationEncoder> clone() const override { return std::make_unique<IdentityEncoder>(*this); }

private:
    std::size_t size_;
};

class GridworldEncoder final : public ObservationEncoder {
public:
    GridworldEncoder(GridworldConfig config, bool use_visited) : config_(config), use_visited_(use_visited) {}

    std::size_t feature_size() const override { return 3 * static_cast<std::size_t>(config_.cell_count()); }

    std::vector<double> reset(const Observation& raw) override {
        visited_.clear();
        return encode(raw);
    }

    std::vector<double> encode(const Observation& raw) override {
        visited_.insert(Cell{static_cast<int>(raw.at(0)), static_cast<int>(raw.at(1))});
        return encode_gridworld(raw, visited_, config_, use_visited_);
    }

    std::unique_ptr<ObservationEncoder> clone() const override { return std::make_unique<GridworldEncoder>(*this); }

    const std::set<Cell>& visited() const { return visited_; }

private:
    GridworldConfig config_;
    bool use_visited_;
    std::set<Cell> visited_;
};

class FreewayEncoder final : public ObservationEncoder {
public:
    explicit FreewayEncoder(MiniFreewayConfig config) : config_(std::move(config)) {}
    std::size_t feature_size() const override { return static_cast<std::size_t>(config_.lanes) + 2; }
    std::vector<double> reset(const Observation& raw) override { return encode(raw); }
    std::vector<double> encode(const Observation& raw) override { return encode_freeway(raw, config_); }
    std::unique_ptr<ObservationEncoder> clone() const override { return std::make_unique<FreewayEncoder>(*this); }

private:
    MiniFreewayConfig config_;
};

/// Concatenates the last H encoded frames, newest first. The first frame of
/// an episode is repeated to fill the stack.
class HistoryStack final : public ObservationEncoder {
public:
    HistoryStack(std::unique_ptr<ObservationEncoder> inner, std::size_t history)
        : inner_(std::move(inner)), history_(history) {
        if (history_ < 1) throw std::invalid_argument("HistoryStack: history length must be >= 1");
    }

    HistoryStack(const HistoryStack& other)
        : inner_(other.inner_->clone()), history_(other.history_), frames_(other.frames_) {}

    std::size_t feature_size() const override { return inner_->feature_size() * history_; }

    std::vector<double> reset(const Observation& raw) override {
        frames_.assign(history_, inner_->reset(raw));
        return stacked();
    }

    std::vector<double> encode(const Observation& raw) override {
        frames_.push_front(inner_->encode(raw));
        frames_.pop_back();
        return stacked();
    }

    std::unique_ptr<ObservationEncoder> clone() const override { return std::make_unique<HistoryStack>(*this); }

private:
    std::vector<double> stacked() const {
        std::vector<double> out;
        out.reserve(feature_size());
        for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
        return out;
    }

    std::unique_ptr<ObservationEncoder> inner_;
    std::size_t history_;
    std::deque<std::vector<double>> frames_;
};

/// Builds the encoder for an env kind ("gridworld", "minifreeway", anything else = identity)
/// wrapped in a history stack when H > 1.
inline std::unique_ptr<ObservationEncoder> make_encoder(const Environment& env, std::size_t history_length) {
    std::unique_ptr<ObservationEncoder> base;
    const Environment* inner = &env;
    if (const auto* limited = dynamic_cast<const StepLimit*>(&env)) inner = &limited->inner();
    if (const auto* grid = dynamic_cast<const Gridworld*>(inner)) {
        const bool hidden = grid->config().reward_mode == RewardMode::UniformRandomHidden;
        base = std::make_unique<GridworldEncoder>(grid->config(), hidden);
    } else if (const auto* fw = dynamic_cast<const MiniFreeway*>(inner)) {
        base = std::make_unique<FreewayEncoder>(fw->config());
    } else {
        base = std::make_unique<IdentityEncoder>(env.spec().observation_size());
    }
    if (history_length > 1) return std::make_unique<HistoryStack>(std::move(base), history_length);
    return base;
}

}  // namespace fmx
