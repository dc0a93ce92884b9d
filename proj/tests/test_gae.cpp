#include <gtest/gtest.h>

#include <vector>

#include "fmx/ppo/gae.hpp"
#include "fmx/rng.hpp"

using namespace fmx;

namespace {

// Direct double sum A_t = sum_k (gamma lambda)^k delta_{t+k}, stopping after a done step.
std::vector<double> unrolled(const std::vector<double>& r, const std::vector<double>& v, const std::vector<bool>& d,
                             double g, double l) {
    const std::size_t n = r.size();
    std::vector<double> delta(n), out(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) delta[t] = r[t] + g * v[t + 1] * (d[t] ? 0.0 : 1.0) - v[t];
    for (std::size_t t = 0; t < n; ++t) {
        double w = 1.0;
        for (std::size_t k = t; k < n; ++k) {
            out[t] += w * delta[k];
            if (d[k]) break;
            w *= g * l;
        }
    }
    return out;
}

}  // namespace

TEST(Gae, SingleTerminalStep) {
    const std::vector<double> r{1}, v{0, 0};
    const auto e = compute_gae(r, v, {true}, 1.0, 1.0);
    EXPECT_EQ(e.advantages, std::vector<double>{1.0});
    EXPECT_EQ(e.returns, std::vector<double>{1.0});
}

TEST(Gae, TwoStepFollowsRecursion) {
    // delta = [0, 1]; A_1 = 1, A_0 = 0 + 0.5 * 1 * A_1.
    const std::vector<double> r{0, 1}, v{0, 0, 0};
    const auto e = compute_gae(r, v, {false, true}, 0.5, 1.0);
    EXPECT_EQ(e.advantages, (std::vector<double>{0.5, 1.0}));
}

TEST(Gae, ZeroCase) {
    const std::vector<double> r(4, 0.0), v(5, 0.0);
    const auto e = compute_gae(r, v, std::vector<bool>(4, false), 0.99, 0.95);
    for (double a : e.advantages) EXPECT_EQ(a, 0.0);
}

TEST(Gae, MatchesUnrolledOracleOnSmallToys) {
    Rng rng = make_rng(17, stream::kAgent);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 5);
        std::vector<double> r(n), v(n + 1);
        std::vector<bool> d(n);
        for (auto& x : r) x = static_cast<double>(uniform_index(rng, 3));
        for (auto& x : v) x = static_cast<double>(uniform_index(rng, 5)) * 0.25;
        for (std::size_t i = 0; i < n; ++i) d[i] = uniform01(rng) < 0.3;
        const double g = 0.5, l = 0.5;
        const auto e = compute_gae(r, v, d, g, l);
        const auto want = unrolled(r, v, d, g, l);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(e.advantages[i], want[i]) << "trial " << trial;
            EXPECT_EQ(e.returns[i], want[i] + v[i]);
        }
    }
}

TEST(Gae, BootstrapCutKeepsValueButStopsRecursion) {
    const std::vector<double> r{0, 5, 1}, v{0.5, 2.0, 1.0, 0.0};
    const auto e = compute_gae(r, v, {false, false, true}, 0.9, 1.0, {true, false, false});
    // Step 0 is cut: A_0 = r_0 + gamma v_1 - v_0 only.
    EXPECT_DOUBLE_EQ(e.advantages[0], 0.0 + 0.9 * 2.0 - 0.5);
    const auto plain = compute_gae(r, v, {false, false, true}, 0.9, 1.0);
    EXPECT_DOUBLE_EQ(e.advantages[1], plain.advantages[1]);
    EXPECT_NE(e.advantages[0], plain.advantages[0]);
}

TEST(Gae, LengthMismatchRejected) {
    const std::vector<double> r{1, 2}, v{0, 0};
    EXPECT_THROW(compute_gae(r, v, {false, false}, 0.9, 0.9), std::invalid_argument);
    const std::vector<double> v3{0, 0, 0};
    EXPECT_THROW(compute_gae(r, v3, {false}, 0.9, 0.9), std::invalid_argument);
    EXPECT_THROW(compute_gae(r, v3, {false, false}, 0.9, 0.9, {true}), std::invalid_argument);
}

TEST(NormalizeMasked, StandardizesOnlyMaskedEntries) {
    std::vector<double> xs{1, 2, 3, 100};
    normalize_masked(xs, {true, true, true, false});
    EXPECT_NEAR(xs[0] + xs[1] + xs[2], 0.0, 1e-12);
    EXPECT_NEAR((xs[0] * xs[0] + xs[1] * xs[1] + xs[2] * xs[2]) / 3.0, 1.0, 1e-12);
    EXPECT_EQ(xs[3], 100.0);
}
