#pragma once
// Shared helpers for the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace fmx::testing {

/// Largest componentwise relative error between an analytic gradient and
/// central differences of `loss` at `params`.
inline double gradient_rel_error(const std::function<double(const Eigen::VectorXd&)>& loss, Eigen::VectorXd params,
                                 const Eigen::VectorXd& analytic, double h = 1e-5, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss(params);
        params[i] = keep - h;
        const double down = loss(params);
        params[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace fmx::testing
