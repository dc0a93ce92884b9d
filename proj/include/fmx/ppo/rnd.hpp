#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "fmx/ppo/dense.hpp"
#include "fmx/rng.hpp"

namespace fmx {

struct RndConfig {
    bool enabled = false;
    double beta = 0.5;  // weight of the intrinsic term in r_ext + beta * r_int
    int hidden = 64;
    int embedding = 16;
    double learning_rate = 1e-3;
    int epochs = 4;
    int minibatch_size = 64;
};

/// Welford accumulator.
class RunningStat {
public:
    void push(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Random network distillation: a frozen random target network and a trained
/// predictor of identical shape. Novel inputs give large prediction error.
class RndHeads {
public:
    RndHeads() = default;

    RndHeads(int input_size, RndConfig config, std::uint64_t seed)
        : config_(config),
          target_(input_size, config.hidden, config.embedding),
          predictor_(input_size, config.hidden, config.embedding) {
        Rng rng = make_rng(seed, stream::kRndInit);
        target_.initialize(rng);
        predictor_.initialize(rng);
        optimizer_ = nn::Adam(predictor_.params().size(), nn::AdamConfig{config.learning_rate});
        minibatch_rng_ = make_rng(seed, stream::kRndInit + 100);
    }

    /// Mean squared difference between target and predictor embeddings for each row.
    std::vector<double> raw_errors(const nn::Matrix& features) const {
        const nn::Matrix diff = predictor_.forward(features) - target_.forward(features);
        std::vector<double> out(static_cast<std::size_t>(features.rows()));
        for (Eigen::Index i = 0; i < diff.rows(); ++i) out[static_cast<std::size_t>(i)] = diff.row(i).squaredNorm() / diff.cols();
        return out;
    }

    double raw_error(const std::vector<double>& features) const {
        return raw_errors(row(features)).front();
    }

    /// Raw error scaled by the running standard deviation of all raw errors seen so far.
    double intrinsic(const std::vector<double>& features) {
        const double raw = raw_error(features);
        stats_.push(raw);
        const double sd = stats_.stddev();
        return sd > 1e-8 ? raw / sd : raw;
    }

    /// Predictor loss (mean over rows of the per-row error) and its gradient.
    std::pair<double, nn::Vector> loss_and_grad(const nn::Matrix& features) const {
        nn::Mlp::Cache cache;
        const nn::Matrix pred = predictor_.forward(features, &cache);
        const nn::Matrix diff = pred - target_.forward(features);
        const double scale = 1.0 / static_cast<double>(diff.rows() * diff.cols());
        const double loss = diff.squaredNorm() * scale;
        return {loss, predictor_.backward(cache, 2.0 * scale * diff)};
    }

    /// Fits the predictor on a batch of (next-state) features.
    double train(const std::vector<std::vector<double>>& batch) {
        if (batch.empty()) return 0.0;
        std::vector<std::size_t> order(batch.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        double last = 0.0;
        const auto mb = static_cast<std::size_t>(std::max(1, config_.minibatch_size));
        for (int e = 0; e < config_.epochs; ++e) {
            std::shuffle(order.begin(), order.end(), minibatch_rng_);
            for (std::size_t start = 0; start < order.size(); start += mb) {
                const std::size_t end = std::min(order.size(), start + mb);
                nn::Matrix x(static_cast<Eigen::Index>(end - start), predictor_.in());
                for (std::size_t i = start; i < end; ++i) {
                    for (int j = 0; j < predictor_.in(); ++j)
                        x(static_cast<Eigen::Index>(i - start), j) = batch[order[i]][static_cast<std::size_t>(j)];
                }
                auto [loss, grad] = loss_and_grad(x);
                optimizer_.step(predictor_.params(), grad);
                last = loss;
            }
        }
        return last;
    }

    const nn::Mlp& target() const { return target_; }
    nn::Mlp& predictor() { return predictor_; }
    const nn::Mlp& predictor() const { return predictor_; }
    const RndConfig& config() const { return config_; }
    const RunningStat& stats() const { return stats_; }

    static nn::Matrix row(const std::vector<double>& v) {
        nn::Matrix m(1, static_cast<Eigen::Index>(v.size()));
        for (std::size_t j = 0; j < v.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = v[j];
        return m;
    }

private:
    RndConfig config_;
    nn::Mlp target_;
    nn::Mlp predictor_;
    nn::Adam optimizer_;
    RunningStat stats_;
    Rng minibatch_rng_;
};

}  // namespace fmx
