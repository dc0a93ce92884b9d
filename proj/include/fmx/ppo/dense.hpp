#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "fmx/rng.hpp"

namespace fmx::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fully-connected network with one tanh hidden layer and a linear output
/// layer. All parameters live in one flat vector so optimizers and
/// finite-difference checks can treat the network as a point in R^n.
///
/// Flat layout: W1 (hidden x in, column-major), b1, W2 (out x hidden), b2.
class Mlp {
public:
    struct Cache {
        Matrix input;   // N x in
        Matrix hidden;  // N x hidden, post-activation
    };

    Mlp() = default;

    Mlp(int in, int hidden, int out) : in_(in), hidden_(hidden), out_(out), params_(Vector::Zero(size(in, hidden, out))) {
        if (in < 1 || hidden < 1 || out < 1) throw std::invalid_argument("Mlp: all layer sizes must be positive");
    }

    static Eigen::Index size(int in, int hidden, int out) {
        return static_cast<Eigen::Index>(hidden) * in + hidden + static_cast<Eigen::Index>(out) * hidden + out;
    }

    /// Glorot-uniform weights, zero biases. `out_row_scale(r)` rescales output
    /// row r so heads can start near zero.
    template <typename RowScale>
    void initialize(Rng& rng, RowScale out_row_scale) {
        params_.setZero();
        const double lim1 = std::sqrt(6.0 / (in_ + hidden_));
        const double lim2 = std::sqrt(6.0 / (hidden_ + out_));
        auto w1 = W1();
        for (Eigen::Index j = 0; j < w1.cols(); ++j)
            for (Eigen::Index i = 0; i < w1.rows(); ++i) w1(i, j) = (2.0 * uniform01(rng) - 1.0) * lim1;
        auto w2 = W2();
        for (Eigen::Index j = 0; j < w2.cols(); ++j)
            for (Eigen::Index i = 0; i < w2.rows(); ++i)
                w2(i, j) = (2.0 * uniform01(rng) - 1.0) * lim2 * out_row_scale(static_cast<int>(i));
    }

    void initialize(Rng& rng) {
        initialize(rng, [](int) { return 1.0; });
    }

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
        if (x.cols() != in_) throw std::invalid_argument("Mlp::forward: input width mismatch");
        Matrix pre = (x * W1().transpose()).rowwise() + b1().transpose();
        Matrix h = pre.array().tanh().matrix();
        Matrix y = (h * W2().transpose()).rowwise() + b2().transpose();
        if (cache) {
            cache->input = x;
            cache->hidden = std::move(h);
        }
        return y;
    }

    /// Gradient of a scalar loss w.r.t. the flat parameters given dL/dY.
    Vector backward(const Cache& cache, const Matrix& dy) const {
        Vector grad = Vector::Zero(params_.size());
        Eigen::Map<Matrix> gw1(grad.data(), hidden_, in_);
        Eigen::Map<Vector> gb1(grad.data() + w1_size(), hidden_);
        Eigen::Map<Matrix> gw2(grad.data() + w1_size() + hidden_, out_, hidden_);
        Eigen::Map<Vector> gb2(grad.data() + w1_size() + hidden_ + w2_size(), out_);

        gw2 = dy.transpose() * cache.hidden;
        gb2 = dy.colwise().sum().transpose();
        Matrix dh = dy * W2();
        Matrix dpre = (dh.array() * (1.0 - cache.hidden.array().square())).matrix();
        gw1 = dpre.transpose() * cache.input;
        gb1 = dpre.colwise().sum().transpose();
        return grad;
    }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }
    int in() const { return in_; }
    int hidden() const { return hidden_; }
    int out() const { return out_; }

    void save(std::ostream& os) const {
        os << in_ << ' ' << hidden_ << ' ' << out_ << '\n';
        os.precision(17);
        for (Eigen::Index i = 0; i < params_.size(); ++i) os << params_[i] << (i + 1 == params_.size() ? '\n' : ' ');
    }

    static Mlp load(std::istream& is) {
        int in = 0, hidden = 0, out = 0;
        if (!(is >> in >> hidden >> out)) throw std::runtime_error("Mlp::load: bad header");
        Mlp net(in, hidden, out);
        for (Eigen::Index i = 0; i < net.params_.size(); ++i) {
            if (!(is >> net.params_[i])) throw std::runtime_error("Mlp::load: truncated parameter list");
        }
        return net;
    }

private:
    Eigen::Index w1_size() const { return static_cast<Eigen::Index>(hidden_) * in_; }
    Eigen::Index w2_size() const { return static_cast<Eigen::Index>(out_) * hidden_; }

    Eigen::Map<Matrix> W1() { return {params_.data(), hidden_, in_}; }
    Eigen::Map<const Matrix> W1() const { return {params_.data(), hidden_, in_}; }
    Eigen::Map<const Vector> b1() const { return {params_.data() + w1_size(), hidden_}; }
    Eigen::Map<Matrix> W2() { return {params_.data() + w1_size() + hidden_, out_, hidden_}; }
    Eigen::Map<const Matrix> W2() const { return {params_.data() + w1_size() + hidden_, out_, hidden_}; }
    Eigen::Map<const Vector> b2() const { return {params_.data() + w1_size() + hidden_ + w2_size(), out_}; }

    int in_ = 0;
    int hidden_ = 0;
    int out_ = 0;
    Vector params_;
};

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-5;
};

class Adam {
public:
    Adam() = default;
    Adam(Eigen::Index n, AdamConfig config) : config_(config), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

    void step(Vector& params, const Vector& grad) {
        ++t_;
        m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
        v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        params.array() -= config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
    }

    std::int64_t steps() const { return t_; }

private:
    AdamConfig config_;
    Vector m_;
    Vector v_;
    std::int64_t t_ = 0;
};

/// Rescales `grad` in place so its L2 norm does not exceed `max_norm`.
inline void clip_grad_norm(Vector& grad, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = grad.norm();
    if (norm > max_norm) grad *= max_norm / (norm + 1e-6);
}

/// Row-wise log-softmax with the max subtracted for stability.
inline Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

}  // namespace fmx::nn
