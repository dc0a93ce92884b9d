#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace fmx {

struct AdvantageEstimate {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// Generalized advantage estimation over one rollout.
///
/// `values` carries one extra trailing entry: the bootstrap value of the state
/// reached after the final step. `dones[t]` cuts the recursion after step t.
///   delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// `bootstrap_cuts[t]` (optional) stops the recursion after step t while still
/// bootstrapping from v_{t+1}, as at a segment boundary inside a live episode.
inline AdvantageEstimate compute_gae(std::span<const double> rewards, std::span<const double> values,
                                     const std::vector<bool>& dones, double gamma, double lambda,
                                     const std::vector<bool>& bootstrap_cuts = {}) {
    const std::size_t n = rewards.size();
    if (values.size() != n + 1 || dones.size() != n) {
        throw std::invalid_argument("compute_gae: expected |values| = |rewards| + 1 and |dones| = |rewards|");
    }
    if (!bootstrap_cuts.empty() && bootstrap_cuts.size() != n)
        throw std::invalid_argument("compute_gae: |bootstrap_cuts| must equal |rewards|");
    AdvantageEstimate out{std::vector<double>(n), std::vector<double>(n)};
    double next_adv = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double live = dones[i] ? 0.0 : 1.0;
        const double carry = (!bootstrap_cuts.empty() && bootstrap_cuts[i]) ? 0.0 : live;
        const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
        next_adv = delta + gamma * lambda * carry * next_adv;
        out.advantages[i] = next_adv;
        out.returns[i] = next_adv + values[i];
    }
    return out;
}

/// Standardizes `xs` over the entries where `mask` is true (all if mask empty).
/// Entries outside the mask are left untouched.
inline void normalize_masked(std::vector<double>& xs, const std::vector<bool>& mask, double min_std = 1e-8) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (mask.empty() || mask[i]) {
            sum += xs[i];
            ++n;
        }
    }
    if (n == 0) return;
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (mask.empty() || mask[i]) sq += (xs[i] - mean) * (xs[i] - mean);
    }
    const double denom = std::max(std::sqrt(sq / static_cast<double>(n)), min_std);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (mask.empty() || mask[i]) xs[i] = (xs[i] - mean) / denom;
    }
}

}  // namespace fmx
