#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmx/agent.hpp"
#include "fmx/env_core.hpp"
#include "fmx/rng.hpp"

namespace fmx {

namespace detail {

/// Argmax over scores with uniform random tie-breaking.
inline std::size_t argmax_random_ties(const std::vector<double>& scores, Rng& rng) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> ties;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k] > best) {
            best = scores[k];
            ties.assign(1, k);
        } else if (scores[k] == best) {
            ties.push_back(k);
        }
    }
    return ties.size() == 1 ? ties.front() : ties[uniform_index(rng, ties.size())];
}

inline void check_binary_reward(double reward) {
    if (reward != 0.0 && reward != 1.0) {
        throw std::invalid_argument("reward must be 0 or 1, got " + std::to_string(reward));
    }
}

inline void check_arm(std::size_t arm, std::size_t k) {
    if (arm >= k) throw std::out_of_range("arm " + std::to_string(arm) + " out of range");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Thompson Sampling

struct BetaPosterior {
    std::vector<double> alpha;
    std::vector<double> beta;

    static BetaPosterior uniform(std::size_t k, double prior_alpha = 1.0, double prior_beta = 1.0) {
        if (!(prior_alpha > 0.0 && prior_beta > 0.0)) throw std::invalid_argument("Beta prior must be positive");
        return {std::vector<double>(k, prior_alpha), std::vector<double>(k, prior_beta)};
    }

    std::size_t arm_count() const { return alpha.size(); }

    void validate() const {
        if (alpha.size() != beta.size() || alpha.empty()) throw std::invalid_argument("BetaPosterior: bad shape");
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            if (!(alpha[k] > 0.0 && beta[k] > 0.0)) throw std::invalid_argument("BetaPosterior: non-positive parameter");
        }
    }
};

inline double sample_beta(double a, double b, Rng& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

inline std::size_t thompson_select(const BetaPosterior& posterior, Rng& rng) {
    std::vector<double> draws(posterior.arm_count());
    for (std::size_t k = 0; k < draws.size(); ++k) draws[k] = sample_beta(posterior.alpha[k], posterior.beta[k], rng);
    return detail::argmax_random_ties(draws, rng);
}

inline void thompson_update(BetaPosterior& posterior, std::size_t arm, double reward) {
    detail::check_arm(arm, posterior.arm_count());
    detail::check_binary_reward(reward);
    if (reward == 1.0) {
        posterior.alpha[arm] += 1.0;
    } else {
        posterior.beta[arm] += 1.0;
    }
}

// ---------------------------------------------------------------------------
// UCB1

struct UcbState {
    std::vector<std::size_t> counts;
    std::vector<double> means;
    std::size_t total = 0;
    double c = 0.25;
    // Factor inside the square root: 2 gives the textbook UCB1 bonus.
    double log_scale = 2.0;

    static UcbState fresh(std::size_t k, double c = 0.25, double log_scale = 2.0) {
        if (!(c > 0.0)) throw std::invalid_argument("UCB exploration constant must be positive");
        return {std::vector<std::size_t>(k, 0), std::vector<double>(k, 0.0), 0, c, log_scale};
    }

    std::size_t arm_count() const { return counts.size(); }

    double index(std::size_t arm) const {
        return means[arm] + c * std::sqrt(log_scale * std::log(static_cast<double>(total)) /
                                          static_cast<double>(counts[arm]));
    }
};

inline std::size_t ucb1_select(const UcbState& state, Rng& rng) {
    for (std::size_t k = 0; k < state.arm_count(); ++k) {
        if (state.counts[k] == 0) return k;
    }
    std::vector<double> scores(state.arm_count());
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = state.index(k);
    return detail::argmax_random_ties(scores, rng);
}

inline void ucb1_update(UcbState& state, std::size_t arm, double reward) {
    detail::check_arm(arm, state.arm_count());
    detail::check_binary_reward(reward);
    state.counts[arm] += 1;
    state.total += 1;
    state.means[arm] += (reward - state.means[arm]) / static_cast<double>(state.counts[arm]);
}

// ---------------------------------------------------------------------------
// Agent wrappers

class ThompsonAgent final : public Agent {
public:
    ThompsonAgent(std::size_t k, std::uint64_t seed, double prior_alpha = 1.0, double prior_beta = 1.0)
        : posterior_(BetaPosterior::uniform(k, prior_alpha, prior_beta)), rng_(make_rng(seed, stream::kAgent)) {}

    std::string name() const override { return "thompson"; }
    ActionIndex act(const Observation&) override { return thompson_select(posterior_, rng_); }
    void observe(ActionIndex a, double r, const StepResult&) override { thompson_update(posterior_, a, r); }

    const BetaPosterior& posterior() const { return posterior_; }

private:
    BetaPosterior posterior_;
    Rng rng_;
};

class Ucb1Agent final : public Agent {
public:
    Ucb1Agent(std::size_t k, std::uint64_t seed, double c = 0.25, double log_scale = 2.0)
        : state_(UcbState::fresh(k, c, log_scale)), rng_(make_rng(seed, stream::kAgent)) {}

    std::string name() const override { return "ucb1"; }
    ActionIndex act(const Observation&) override { return ucb1_select(state_, rng_); }
    void observe(ActionIndex a, double r, const StepResult&) override { ucb1_update(state_, a, r); }

    const UcbState& state() const { return state_; }

private:
    UcbState state_;
    Rng rng_;
};

/// Uniform over the action set. Works for any environment.
class RandomAgent final : public Agent {
public:
    RandomAgent(std::size_t action_count, std::uint64_t seed)
        : action_count_(action_count), rng_(make_rng(seed, stream::kAgent)) {}

    std::string name() const override { return "random"; }
    ActionIndex act(const Observation&) override { return uniform_index(rng_, action_count_); }

private:
    std::size_t action_count_;
    Rng rng_;
};

/// Pulls each arm once, then commits forever to the best empirical arm.
class GreedyCommitAgent final : public Agent {
public:
    GreedyCommitAgent(std::size_t k, std::uint64_t seed)
        : sums_(k, 0.0), pulls_(k, 0), rng_(make_rng(seed, stream::kAgent)) {}

    std::string name() const override { return "greedy_commit"; }

    ActionIndex act(const Observation&) override {
        if (committed_) return *committed_;
        for (std::size_t k = 0; k < pulls_.size(); ++k) {
            if (pulls_[k] == 0) return k;
        }
        std::vector<double> means(sums_.size());
        for (std::size_t k = 0; k < means.size(); ++k) means[k] = sums_[k] / static_cast<double>(pulls_[k]);
        committed_ = detail::argmax_random_ties(means, rng_);
        return *committed_;
    }

    void observe(ActionIndex a, double r, const StepResult&) override {
        detail::check_arm(a, pulls_.size());
        sums_[a] += r;
        pulls_[a] += 1;
    }

private:
    std::vector<double> sums_;
    std::vector<std::size_t> pulls_;
    std::optional<std::size_t> committed_;
    Rng rng_;
};

}  // namespace fmx
