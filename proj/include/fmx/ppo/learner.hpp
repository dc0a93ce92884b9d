#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "fmx/env_core.hpp"
#include "fmx/ppo/dense.hpp"
#include "fmx/ppo/encode.hpp"
#include "fmx/ppo/gae.hpp"
#include "fmx/ppo/rnd.hpp"
#include "fmx/rng.hpp"

namespace fmx {

struct PpoConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_range = 0.2;
    int epochs_per_update = 4;
    std::size_t rollout_length = 2048;
    std::size_t minibatch_size = 64;
    double learning_rate = 3e-4;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    std::size_t history_length = 1;
    int hidden_width = 64;
    bool include_guided_in_update = false;
    RndConfig rnd;

    void validate() const {
        if (!(clip_range > 0.0 && clip_range < 1.0)) throw std::invalid_argument("ppo: clip_range must lie in (0, 1)");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must lie in [0, 1]");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("ppo: gae_lambda must lie in [0, 1]");
        if (epochs_per_update < 1) throw std::invalid_argument("ppo: epochs_per_update must be >= 1");
        if (rollout_length < 1 || minibatch_size < 1) throw std::invalid_argument("ppo: rollout and minibatch sizes must be >= 1");
        if (history_length < 1) throw std::invalid_argument("ppo: history_length must be >= 1");
        if (hidden_width < 1) throw std::invalid_argument("ppo: hidden_width must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("ppo: learning_rate must be positive");
    }
};

/// Shared tanh trunk with two heads: `action_count` logits followed by one value output.
class PolicyValueNet {
public:
    PolicyValueNet() = default;

    PolicyValueNet(int input_size, int action_count, int hidden, std::uint64_t seed)
        : actions_(action_count), body_(input_size, hidden, action_count + 1) {
        Rng rng = make_rng(seed, stream::kNetworkInit);
        // Policy logits start near uniform.
        body_.initialize(rng, [action_count](int row) { return row < action_count ? 0.01 : 1.0; });
    }

    struct Output {
        nn::Matrix logits;  // N x A
        nn::Vector values;  // N
    };

    Output forward(const nn::Matrix& x, nn::Mlp::Cache* cache = nullptr) const {
        nn::Matrix y = body_.forward(x, cache);
        return {y.leftCols(actions_), y.col(actions_)};
    }

    int action_count() const { return actions_; }
    int input_size() const { return body_.in(); }
    nn::Mlp& body() { return body_; }
    const nn::Mlp& body() const { return body_; }

private:
    int actions_ = 0;
    nn::Mlp body_;
};

inline std::vector<double> softmax_row(const nn::Matrix& logits, Eigen::Index row) {
    const nn::Matrix lp = nn::log_softmax(logits.row(row));
    std::vector<double> p(static_cast<std::size_t>(lp.cols()));
    for (Eigen::Index j = 0; j < lp.cols(); ++j) p[static_cast<std::size_t>(j)] = std::exp(lp(0, j));
    return p;
}

struct RolloutBuffer {
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> next_features;
    std::vector<ActionIndex> actions;
    std::vector<double> log_probs;
    std::vector<double> reward_ext;
    std::vector<double> reward_int;
    std::vector<double> values;
    std::vector<bool> dones;
    std::vector<bool> guided;
    // Filled by finish():
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return actions.size(); }
    bool empty() const { return actions.empty(); }

    void clear() { *this = RolloutBuffer{}; }

    void push(std::vector<double> f, std::vector<double> next_f, ActionIndex a, double logp, double r_ext,
              double r_int, double v, bool done, bool was_guided) {
        features.push_back(std::move(f));
        next_features.push_back(std::move(next_f));
        actions.push_back(a);
        log_probs.push_back(logp);
        reward_ext.push_back(r_ext);
        reward_int.push_back(r_int);
        values.push_back(v);
        dones.push_back(done);
        guided.push_back(was_guided);
    }

    /// Computes advantages and returns using total reward r_ext + beta * r_int.
    /// With `cut_at_guided`, a learner step followed by a guided step bootstraps
    /// from the learner's value of the boundary state instead of chaining
    /// through the guide's rewards.
    void finish(double bootstrap_value, double gamma, double lambda, double intrinsic_beta, bool cut_at_guided = false) {
        std::vector<double> rewards(size());
        for (std::size_t i = 0; i < size(); ++i) rewards[i] = reward_ext[i] + intrinsic_beta * reward_int[i];
        std::vector<double> vals = values;
        vals.push_back(bootstrap_value);
        std::vector<bool> cuts;
        if (cut_at_guided) {
            cuts.assign(size(), false);
            for (std::size_t i = 0; i + 1 < size(); ++i) cuts[i] = !guided[i] && guided[i + 1];
        }
        auto est = compute_gae(rewards, vals, dones, gamma, lambda, cuts);
        advantages = std::move(est.advantages);
        returns = std::move(est.returns);
    }

    /// Transitions that may contribute to the surrogate loss.
    std::vector<bool> trainable_mask(bool include_guided) const {
        std::vector<bool> mask(size(), true);
        if (!include_guided) {
            for (std::size_t i = 0; i < size(); ++i) mask[i] = !guided[i];
        }
        return mask;
    }
};

/// One minibatch in the form consumed by the loss.
struct PpoBatch {
    nn::Matrix features;
    std::vector<ActionIndex> actions;
    std::vector<double> old_log_probs;
    std::vector<double> advantages;  // already normalized
    std::vector<double> returns;
    std::vector<double> weights;     // 0 excludes a row from every term
};

struct PpoLoss {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    nn::Vector grad;
};

/// Clipped-surrogate PPO objective with value and entropy terms, plus its analytic gradient:
///   L = -mean(min(rho A, clip(rho, 1-e, 1+e) A)) + c_v mean((V - R)^2) - c_e mean(H)
/// Means are weighted by `batch.weights`, normalized by their sum.
inline PpoLoss ppo_loss(const PolicyValueNet& net, const PpoBatch& batch, const PpoConfig& config) {
    nn::Mlp::Cache cache;
    const auto out = net.forward(batch.features, &cache);
    const auto n = out.logits.rows();
    const auto a_count = out.logits.cols();
    const nn::Matrix logp = nn::log_softmax(out.logits);

    double weight_sum = 0.0;
    for (double w : batch.weights) weight_sum += w;
    PpoLoss loss;
    nn::Matrix dy = nn::Matrix::Zero(n, a_count + 1);
    if (weight_sum <= 0.0) {
        loss.grad = nn::Vector::Zero(net.body().params().size());
        return loss;
    }

    std::size_t clipped = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double w = batch.weights[ui] / weight_sum;
        if (w == 0.0) continue;
        const auto a = static_cast<Eigen::Index>(batch.actions[ui]);
        const double adv = batch.advantages[ui];
        const double ratio = std::exp(logp(i, a) - batch.old_log_probs[ui]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip_range, 1.0 + config.clip_range);
        const double surr1 = ratio * adv;
        const double surr2 = clipped_ratio * adv;
        const bool unclipped_active = surr1 <= surr2;
        if (!unclipped_active) ++clipped;
        loss.policy -= w * std::min(surr1, surr2);
        loss.approx_kl += w * ((ratio - 1.0) - (logp(i, a) - batch.old_log_probs[ui]));

        double entropy = 0.0;
        for (Eigen::Index j = 0; j < a_count; ++j) entropy -= std::exp(logp(i, j)) * logp(i, j);
        loss.entropy += w * entropy;

        const double v_err = out.values[i] - batch.returns[ui];
        loss.value += w * v_err * v_err;

        for (Eigen::Index j = 0; j < a_count; ++j) {
            const double p = std::exp(logp(i, j));
            double g = 0.0;
            if (unclipped_active) g += -w * adv * ratio * ((j == a ? 1.0 : 0.0) - p);
            // d(-H)/dz_j = p_j (log p_j + H)
            g += config.entropy_coef * w * p * (logp(i, j) + entropy);
            dy(i, j) = g;
        }
        dy(i, a_count) = config.value_coef * w * 2.0 * v_err;
    }
    loss.total = loss.policy + config.value_coef * loss.value - config.entropy_coef * loss.entropy;
    loss.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
    loss.grad = net.body().backward(cache, dy);
    return loss;
}

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    std::size_t trained_samples = 0;
    bool skipped = false;
};

inline nn::Matrix to_matrix(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& idx,
                            std::size_t start, std::size_t end, int width) {
    nn::Matrix m(static_cast<Eigen::Index>(end - start), width);
    for (std::size_t i = start; i < end; ++i) {
        const auto& r = rows[idx[i]];
        for (int j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i - start), j) = r[static_cast<std::size_t>(j)];
    }
    return m;
}

/// Minibatch passes of the clipped surrogate over a finished buffer. Guided
/// transitions are dropped unless `config.include_guided_in_update`.
inline UpdateStats ppo_update(PolicyValueNet& net, nn::Adam& optimizer, const RolloutBuffer& buffer,
                              const PpoConfig& config, Rng& rng) {
    UpdateStats stats;
    const auto mask = buffer.trainable_mask(config.include_guided_in_update);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        if (mask[i]) idx.push_back(i);
    }
    if (idx.empty()) {
        std::cerr << "warning: ppo_update skipped, no trainable transitions in buffer\n";
        stats.skipped = true;
        return stats;
    }
    std::vector<double> adv = buffer.advantages;
    normalize_masked(adv, mask);

    std::size_t batches = 0;
    for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t start = 0; start < idx.size(); start += config.minibatch_size) {
            const std::size_t end = std::min(idx.size(), start + config.minibatch_size);
            PpoBatch mb;
            mb.features = to_matrix(buffer.features, idx, start, end, net.input_size());
            for (std::size_t i = start; i < end; ++i) {
                mb.actions.push_back(buffer.actions[idx[i]]);
                mb.old_log_probs.push_back(buffer.log_probs[idx[i]]);
                mb.advantages.push_back(adv[idx[i]]);
                mb.returns.push_back(buffer.returns[idx[i]]);
                mb.weights.push_back(1.0);
            }
            PpoLoss l = ppo_loss(net, mb, config);
            nn::clip_grad_norm(l.grad, config.max_grad_norm);
            optimizer.step(net.body().params(), l.grad);
            stats.policy_loss += l.policy;
            stats.value_loss += l.value;
            stats.entropy += l.entropy;
            stats.approx_kl += l.approx_kl;
            stats.clip_fraction += l.clip_fraction;
            ++batches;
        }
    }
    const auto b = static_cast<double>(batches);
    stats.policy_loss /= b;
    stats.value_loss /= b;
    stats.entropy /= b;
    stats.approx_kl /= b;
    stats.clip_fraction /= b;
    stats.trained_samples = idx.size();
    return stats;
}

/// Policy/value network, optimizer, optional RND heads and the seeded streams
/// for action sampling and minibatch shuffling.
class PpoLearner {
public:
    PpoLearner(int input_size, int action_count, PpoConfig config, std::uint64_t seed)
        : config_(std::move(config)),
          net_(input_size, action_count, config_.hidden_width, seed),
          optimizer_(net_.body().params().size(), nn::AdamConfig{config_.learning_rate}),
          action_rng_(make_rng(seed, stream::kAgent)),
          minibatch_rng_(make_rng(seed, stream::kMinibatch)) {
        config_.validate();
        if (config_.rnd.enabled) rnd_.emplace(input_size, config_.rnd, seed);
    }

    struct Decision {
        std::vector<double> probs;
        double value = 0.0;
    };

    Decision evaluate(const std::vector<double>& features) const {
        const auto out = net_.forward(RndHeads::row(features));
        return {softmax_row(out.logits, 0), out.values[0]};
    }

    double value(const std::vector<double>& features) const { return evaluate(features).value; }

    ActionIndex sample(const std::vector<double>& probs) {
        return std::discrete_distribution<std::size_t>(probs.begin(), probs.end())(action_rng_);
    }

    ActionIndex act(const std::vector<double>& features) { return sample(evaluate(features).probs); }

    ActionIndex greedy(const std::vector<double>& features) const {
        const auto p = evaluate(features).probs;
        return static_cast<ActionIndex>(std::max_element(p.begin(), p.end()) - p.begin());
    }

    UpdateStats update(const RolloutBuffer& buffer) {
        UpdateStats s = ppo_update(net_, optimizer_, buffer, config_, minibatch_rng_);
        if (rnd_) rnd_->train(buffer.next_features);
        return s;
    }

    const PpoConfig& config() const { return config_; }
    PolicyValueNet& net() { return net_; }
    const PolicyValueNet& net() const { return net_; }
    std::optional<RndHeads>& rnd() { return rnd_; }
    const std::optional<RndHeads>& rnd() const { return rnd_; }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write checkpoint " + path);
        out << "fmx-ppo-checkpoint 1\n" << net_.action_count() << '\n';
        net_.body().save(out);
        out << (rnd_ ? 1 : 0) << '\n';
        if (rnd_) {
            rnd_->target().save(out);
            rnd_->predictor().save(out);
        }
    }

    void load(const std::string& path) {
        std::ifstream in(path);
        std::string magic;
        int version = 0, actions = 0;
        if (!(in >> magic >> version >> actions) || magic != "fmx-ppo-checkpoint" || version != 1)
            throw std::runtime_error("not a checkpoint: " + path);
        nn::Mlp body = nn::Mlp::load(in);
        if (actions != net_.action_count() || body.in() != net_.input_size() || body.out() != net_.body().out() ||
            body.hidden() != net_.body().hidden())
            throw std::runtime_error("checkpoint shape mismatch: " + path);
        net_.body().params() = body.params();
        int has_rnd = 0;
        in >> has_rnd;
        if (has_rnd && rnd_) {
            nn::Mlp::load(in);  // target is rebuilt from the seed
            rnd_->predictor().params() = nn::Mlp::load(in).params();
        }
    }

private:
    PpoConfig config_;
    PolicyValueNet net_;
    nn::Adam optimizer_;
    Rng action_rng_;
    Rng minibatch_rng_;
    std::optional<RndHeads> rnd_;
};

// ---------------------------------------------------------------------------
// Training loop

/// Hook that may take over individual steps of a rollout (see hybrid.hpp).
class StepController {
public:
    virtual ~StepController() = default;
    virtual void on_episode_start() {}
    /// Returns an action when the controller takes this step; nullopt lets the learner act.
    virtual std::optional<ActionIndex> take_over(const Observation& raw) = 0;
    virtual void on_episode_end() {}
};

struct EpisodeRecord {
    std::size_t env_step = 0;  // cumulative steps at episode end
    double episodic_return = 0.0;
    bool success = false;      // terminated (goal reached) rather than truncated
    std::size_t length = 0;
};

struct TrainingResult {
    std::vector<EpisodeRecord> episodes;
    std::vector<UpdateStats> updates;
    std::size_t guided_steps = 0;
    std::size_t distinct_states = 0;
    std::vector<ActionIndex> action_trace;
    std::vector<double> reward_trace;
};

struct TrainingOptions {
    bool record_trace = false;
    bool count_states = false;
    bool zero_extrinsic = false;  // learn from intrinsic reward only (extrinsic still reported)
};

inline std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode) {
    return derive_seed(run_seed, 1000 + episode);
}

/// Standard on-policy loop: collect `rollout_length` steps, compute GAE, update.
/// Every step is offered to `controller` first; steps it takes are flagged as guided.
inline TrainingResult train_ppo(Environment& env, PpoLearner& learner, std::size_t total_steps, std::uint64_t seed,
                                StepController* controller = nullptr, TrainingOptions options = {}) {
    const PpoConfig& cfg = learner.config();
    auto encoder = make_encoder(env, cfg.history_length);
    if (static_cast<int>(encoder->feature_size()) != learner.net().input_size())
        throw std::invalid_argument("train_ppo: encoder width does not match the network input");

    TrainingResult result;
    RolloutBuffer buffer;
    std::unordered_set<std::uint64_t> seen;
    std::size_t episode = 0;
    Observation raw = env.reset(episode_seed(seed, episode));
    std::vector<double> features = encoder->reset(raw);
    if (controller) controller->on_episode_start();
    double ep_return = 0.0;
    std::size_t ep_len = 0;
    const double beta = learner.rnd() ? cfg.rnd.beta : 0.0;

    for (std::size_t t = 1; t <= total_steps; ++t) {
        if (options.count_states) seen.insert(env.state_key());
        const auto decision = learner.evaluate(features);
        std::optional<ActionIndex> forced = controller ? controller->take_over(raw) : std::nullopt;
        const bool guided = forced.has_value();
        const ActionIndex action = guided ? *forced : learner.sample(decision.probs);
        if (action >= decision.probs.size()) throw std::out_of_range("train_ppo: controller produced an illegal action");
        const double logp = std::log(std::max(decision.probs[action], 1e-300));

        StepResult step = env.step(action);
        std::vector<double> next_features = encoder->encode(step.observation);
        double r_ext = step.reward;
        double r_int = learner.rnd() ? learner.rnd()->intrinsic(next_features) : 0.0;
        // Time-limit truncation: bootstrap from the value of the state we were cut off in.
        double r_train = options.zero_extrinsic ? 0.0 : r_ext;
        if (step.truncated && !step.terminated) r_train += cfg.gamma * learner.value(next_features);

        buffer.push(features, next_features, action, logp, r_train, r_int, decision.value, step.done(), guided);
        if (guided) ++result.guided_steps;
        if (options.record_trace) {
            result.action_trace.push_back(action);
            result.reward_trace.push_back(r_ext);
        }
        ep_return += r_ext;
        ++ep_len;

        if (step.done()) {
            result.episodes.push_back({t, ep_return, step.terminated, ep_len});
            if (controller) controller->on_episode_end();
            ep_return = 0.0;
            ep_len = 0;
            ++episode;
            raw = env.reset(episode_seed(seed, episode));
            features = encoder->reset(raw);
            if (controller) controller->on_episode_start();
        } else {
            raw = std::move(step.observation);
            features = std::move(next_features);
        }

        if (buffer.size() >= cfg.rollout_length || t == total_steps) {
            buffer.finish(learner.value(features), cfg.gamma, cfg.gae_lambda, beta, !cfg.include_guided_in_update);
            result.updates.push_back(learner.update(buffer));
            buffer.clear();
        }
    }
    result.distinct_states = seen.size();
    return result;
}

/// Runs `episodes` evaluation episodes with the current policy (sampled or greedy)
/// and returns the per-episode success flags.
inline std::vector<bool> evaluate_policy(Environment& env, PpoLearner& learner, std::size_t episodes,
                                         std::uint64_t seed, bool greedy = false) {
    auto encoder = make_encoder(env, learner.config().history_length);
    std::vector<bool> outcomes;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation raw = env.reset(derive_seed(seed, 500000 + e));
        std::vector<double> f = encoder->reset(raw);
        while (true) {
            const ActionIndex a = greedy ? learner.greedy(f) : learner.act(f);
            StepResult r = env.step(a);
            if (r.done()) {
                outcomes.push_back(r.terminated);
                break;
            }
            f = encoder->encode(r.observation);
        }
    }
    return outcomes;
}

}  // namespace fmx
