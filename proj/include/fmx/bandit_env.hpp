#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fmx/env_core.hpp"
#include "fmx/rng.hpp"

namespace fmx {

/// Suboptimality gap between the two arms of a gap instance, 0 < delta < 1.
struct GapSpec {
    double delta;

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("GapSpec: delta must lie in (0, 1)");
    }
};

struct OptimalArm {
    std::size_t index;
    double theta;
};

/// Stateless K-armed Bernoulli bandit. Arm k pays 1 with probability theta[k].
/// Observations are zero-length; the environment never terminates.
class BernoulliBandit final : public Environment {
public:
    BernoulliBandit(std::vector<double> thetas, std::uint64_t seed, std::uint64_t instance = 0)
        : thetas_(std::move(thetas)), instance_(instance) {
        if (thetas_.size() < 2) throw std::invalid_argument("BernoulliBandit: need at least 2 arms");
        for (double t : thetas_) {
            if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("BernoulliBandit: theta outside [0, 1]");
        }
        spec_.action_count = thetas_.size();
        spec_.observation_shape = {};
        spec_.is_episodic = false;
        spec_.max_episode_steps = 1;
        for (std::size_t k = 0; k < thetas_.size(); ++k) spec_.action_names.push_back(std::to_string(k));
        reset(seed);
    }

    /// Each theta drawn independently from U(0, 1).
    static BernoulliBandit uniform(std::size_t k, std::uint64_t seed, std::uint64_t instance = 0) {
        if (k < 2) throw std::invalid_argument("BernoulliBandit::uniform: k must be >= 2");
        Rng rng = make_rng(seed ^ splitmix64(instance), stream::kInstance);
        std::vector<double> thetas(k);
        for (auto& t : thetas) t = uniform01(rng);
        return BernoulliBandit(std::move(thetas), seed, instance);
    }

    /// Two arms at 0.5 +/- delta/2, optimal position chosen by the seed.
    static BernoulliBandit gap(GapSpec spec, std::uint64_t seed, std::uint64_t instance = 0) {
        spec.validate();
        Rng rng = make_rng(seed ^ splitmix64(instance), stream::kInstance);
        const double hi = 0.5 + spec.delta / 2.0;
        const double lo = 0.5 - spec.delta / 2.0;
        const bool optimal_first = uniform01(rng) < 0.5;
        std::vector<double> thetas = optimal_first ? std::vector<double>{hi, lo} : std::vector<double>{lo, hi};
        return BernoulliBandit(std::move(thetas), seed, instance);
    }

    const EnvSpec& spec() const override { return spec_; }
    std::string name() const override { return "bandit"; }

    Observation reset(std::uint64_t seed) override {
        rng_ = make_rng(seed ^ splitmix64(instance_), stream::kEnvironment);
        return {};
    }

    StepResult step(ActionIndex arm) override {
        return StepResult{{}, static_cast<double>(pull(arm)), false, false};
    }

    int pull(std::size_t arm) {
        if (arm >= thetas_.size()) {
            throw EnvError("bandit: arm " + std::to_string(arm) + " out of range [0, " +
                           std::to_string(thetas_.size()) + ")");
        }
        // One draw per pull regardless of theta so the stream position depends only on call count.
        const double u = uniform01(rng_);
        return u < thetas_[arm] ? 1 : 0;
    }

    /// Argmax arm; ties go to the lowest index.
    OptimalArm optimal_arm() const {
        std::size_t best = 0;
        for (std::size_t k = 1; k < thetas_.size(); ++k) {
            if (thetas_[k] > thetas_[best]) best = k;
        }
        return {best, thetas_[best]};
    }

    const std::vector<double>& thetas() const { return thetas_; }
    std::size_t arm_count() const { return thetas_.size(); }

private:
    std::vector<double> thetas_;
    std::uint64_t instance_;
    EnvSpec spec_;
    Rng rng_;
};

}  // namespace fmx
