// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fmx/bandit_env.hpp"
#include "fmx/classical_agents.hpp"
#include "fmx/fm/agent.hpp"
#include "fmx/gridworld_env.hpp"
#include "fmx/hybrid.hpp"
#include "fmx/metrics.hpp"
#include "fmx/minifreeway.hpp"
#include "fmx/ppo/gae.hpp"
#include "fmx/ppo/learner.hpp"
#include "fmx/ppo/rnd.hpp"
#include "support.hpp"

using namespace fmx;
using namespace fmx::fm;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail, double seconds) {
    std::printf("%s criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

void run(int id, const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail += std::string(" exception: ") + e.what();
    }
    report(id, ok, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

using AgentFactory = std::function<std::unique_ptr<Agent>(std::size_t k, std::uint64_t seed)>;

/// Mean pseudo-regret at each requested horizon over seeds 1..n.
std::vector<double> mean_pseudo(double delta, const AgentFactory& make, std::size_t n_seeds,
                                const std::vector<std::size_t>& horizons) {
    const std::size_t T = horizons.back();
    std::vector<double> sum(horizons.size(), 0.0);
    for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
        auto env = BernoulliBandit::gap(GapSpec{delta}, seed);
        auto agent = make(2, seed);
        RegretRecord rec(env.thetas());
        agent->begin_episode();
        for (std::size_t t = 0; t < T; ++t) {
            const ActionIndex a = agent->act({});
            const StepResult r = env.step(a);
            agent->observe(a, r.reward, r);
            rec.push(a, static_cast<int>(r.reward));
        }
        for (std::size_t h = 0; h < horizons.size(); ++h) sum[h] += rec.pseudo()[horizons[h] - 1];
    }
    for (auto& s : sum) s /= static_cast<double>(n_seeds);
    return sum;
}

const AgentFactory thompson = [](std::size_t k, std::uint64_t s) { return std::make_unique<ThompsonAgent>(k, s); };
const AgentFactory ucb1 = [](std::size_t k, std::uint64_t s) { return std::make_unique<Ucb1Agent>(k, s, 0.25); };
const AgentFactory uniform = [](std::size_t k, std::uint64_t s) { return std::make_unique<RandomAgent>(k, s); };
const AgentFactory commit = [](std::size_t k, std::uint64_t s) { return std::make_unique<GreedyCommitAgent>(k, s); };

struct EpisodeOutcome {
    bool success = false;
    std::size_t length = 0;
};

std::vector<EpisodeOutcome> play(Environment& env, Agent& agent, std::size_t episodes, std::uint64_t seed) {
    std::vector<EpisodeOutcome> out;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation obs = env.reset(derive_seed(seed, 1000 + e));
        agent.begin_episode();
        EpisodeOutcome o;
        while (true) {
            const ActionIndex a = agent.act(obs);
            StepResult r = env.step(a);
            agent.observe(a, r.reward, r);
            ++o.length;
            if (r.done()) {
                o.success = r.terminated;
                break;
            }
            obs = std::move(r.observation);
        }
        out.push_back(o);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

PpoConfig freeway_ppo() {
    PpoConfig c;
    c.rollout_length = 256;
    return c;
}

constexpr std::uint64_t kFreewaySeeds = 5;
constexpr std::size_t kFreewaySteps = 100000;

/// First env step at which the seed-averaged trailing-10 return reaches `level`.
double steps_to_reach(const std::vector<TrainingResult>& runs, double level) {
    const std::vector<double> grid = step_grid(static_cast<double>(kFreewaySteps), 64.0);
    std::vector<double> mean(grid.size(), 0.0);
    for (const auto& r : runs) {
        std::vector<CurvePoint> pts;
        for (const auto& e : r.episodes) pts.push_back({static_cast<double>(e.env_step), e.episodic_return});
        const auto s = resample_episodic(pts, grid, 10);
        for (std::size_t i = 0; i < grid.size(); ++i) mean[i] += s[i] / static_cast<double>(runs.size());
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (mean[i] >= level) return grid[i];
    }
    return std::numeric_limits<double>::infinity();
}

double mean_return_within(const TrainingResult& r, std::size_t steps) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& e : r.episodes) {
        if (e.env_step > steps) break;
        s += e.episodic_return;
        ++n;
    }
    return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

int main() {
    run(1, [](std::string& d) {
        const double ts = mean_pseudo(0.4, thompson, 200, {500})[0];
        const double ucb = mean_pseudo(0.4, ucb1, 200, {500})[0];
        const double rnd = mean_pseudo(0.4, uniform, 200, {500})[0];
        d = fmt("thompson %.2f (<30), ucb1 %.2f (<45), random MC %.2f (100 +/- 15%%)", ts, ucb, rnd);
        return ts < 30.0 && ucb < 45.0 && ts < 100.0 / 3.0 && ucb < 100.0 / 3.0 && std::abs(rnd - 100.0) <= 15.0;
    });

    run(2, [](std::string& d) {
        const double r2 = mean_pseudo(0.2, thompson, 200, {1000})[0];
        const double r4 = mean_pseudo(0.4, thompson, 200, {1000})[0];
        const double r6 = mean_pseudo(0.6, thompson, 200, {1000})[0];
        d = fmt("thompson at 1000: delta .2 %.2f > .4 %.2f > .6 %.2f", r2, r4, r6);
        return r2 > r4 && r4 > r6;
    });

    run(3, [](std::string& d) {
        const auto ts = mean_pseudo(0.4, thompson, 200, {500, 1000});
        const auto ucb = mean_pseudo(0.4, ucb1, 200, {500, 1000});
        const double rt = ts[1] / ts[0], ru = ucb[1] / ucb[0];
        d = fmt("R(1000)/R(500): thompson %.3f, ucb1 %.3f (<1.9)", rt, ru);
        return rt < 1.9 && ru < 1.9;
    });

    run(4, [](std::string& d) {
        const double ts = mean_pseudo(0.2, thompson, 200, {500})[0];
        const double gc = mean_pseudo(0.2, commit, 200, {500})[0];
        d = fmt("greedy_commit %.2f vs thompson %.2f, ratio %.2f (>=2)", gc, ts, gc / ts);
        return gc >= 2.0 * ts;
    });

    run(5, [](std::string& d) {
        auto det = make_gridworld(GridworldConfig::deterministic());
        auto sto = make_gridworld(GridworldConfig::stochastic());
        GreedyManhattanAgent greedy;
        SnakeSweepAgent snake;
        RandomAgent random(4, 1);
        std::size_t greedy_ok = 0, snake_ok = 0, random_ok = 0;
        for (const auto& o : play(*det, greedy, 1000, 1)) greedy_ok += o.success && o.length <= 8;
        for (const auto& o : play(*sto, snake, 1000, 2)) snake_ok += o.success && o.length <= 30;
        for (const auto& o : play(*sto, random, 1000, 3)) random_ok += o.success;
        d = fmt("greedy det %zu/1000 in <=8 steps, snake stoch %zu/1000 in <=30, random stoch %.1f%% (<60%%)", greedy_ok,
                snake_ok, random_ok / 10.0);
        return greedy_ok == 1000 && snake_ok == 1000 && random_ok < 600;
    });

    run(6, [](std::string& d) {
        bool ok = true;
        d = "eval success per seed:";
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto env = make_gridworld(GridworldConfig::deterministic());
            PpoLearner learner(75, 4, PpoConfig{}, seed);
            train_ppo(*env, learner, 50000, seed);
            const double s = success_rate(evaluate_policy(*env, learner, 100, seed));
            d += fmt(" %.2f", s);
            ok = ok && s >= 0.95;
        }
        d += " (each >=0.95 at 50k steps)";
        return ok;
    });

    run(7, [](std::string& d) {
        std::vector<TrainingResult> plain, rnd, hybrid;
        for (std::uint64_t seed = 1; seed <= kFreewaySeeds; ++seed) {
            const MiniFreewayConfig fc;
            {
                auto env = make_minifreeway(fc);
                PpoLearner l(10, 3, freeway_ppo(), seed);
                plain.push_back(train_ppo(*env, l, kFreewaySteps, seed));
            }
            {
                auto env = make_minifreeway(fc);
                PpoConfig c = freeway_ppo();
                c.rnd.enabled = true;
                PpoLearner l(10, 3, c, seed);
                rnd.push_back(train_ppo(*env, l, kFreewaySteps, seed));
            }
            {
                auto env = make_minifreeway(fc);
                PpoConfig c = freeway_ppo();
                c.include_guided_in_update = false;
                PpoLearner l(10, 3, c, seed);
                OracleUpAgent guide;
                hybrid.push_back(
                    run_hybrid_training(*env, l, guide, InterventionSchedule(0.1, 5), kFreewaySteps, seed).training);
            }
        }
        const double s_plain = steps_to_reach(plain, 1.0);
        const double s_hyb = steps_to_reach(hybrid, 1.0);
        int wins = 0;
        std::string per_seed;
        for (std::size_t i = 0; i < kFreewaySeeds; ++i) {
            const double h = mean_return_within(hybrid[i], 20000), r = mean_return_within(rnd[i], 20000);
            per_seed += fmt(" %.2f/%.2f", h, r);
            wins += h >= r;
        }
        const bool faster = s_hyb <= 0.5 * s_plain;
        d = fmt("steps to mean return 1: hybrid %.0f vs ppo %.0f (need <=50%%); 20k mean hybrid/rnd:%s, wins %d/5 (need >=4)",
                s_hyb, s_plain, per_seed.c_str(), wins);
        return faster && wins >= 4;
    });

    run(8, [](std::string& d) {
        bool ok = true;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            auto e1 = make_minifreeway(MiniFreewayConfig{});
            auto e2 = make_minifreeway(MiniFreewayConfig{});
            PpoLearner a(10, 3, freeway_ppo(), seed), b(10, 3, freeway_ppo(), seed);
            TrainingOptions opt;
            opt.record_trace = true;
            const auto plain = train_ppo(*e1, a, 8192, seed, nullptr, opt);
            OracleUpAgent guide;
            const auto hyb = run_hybrid_training(*e2, b, guide, InterventionSchedule(0.0, 5), 8192, seed,
                                                 GuideFailurePolicy::Abort, opt);
            ok = ok && plain.action_trace == hyb.training.action_trace && plain.reward_trace == hyb.training.reward_trace &&
                 a.net().body().params() == b.net().body().params() && hyb.guided_steps_total == 0;
        }
        d = "epsilon=0 hybrid vs plain PPO, 3 seeds x 8192 steps: action/reward traces and parameters identical";
        if (!ok) d = "epsilon=0 hybrid diverged from plain PPO";
        return ok;
    });

    run(9, [](std::string& d) {
        std::size_t mismatches = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            BernoulliBandit raw_env = BernoulliBandit::gap(GapSpec{0.2}, seed);
            BernoulliBandit fm_env = raw_env;
            ThompsonAgent raw(2, seed);
            auto client = std::make_shared<PolicyBackedClient>(std::make_unique<ThompsonAgent>(2, seed),
                                                               std::vector<std::string>{"0", "1"});
            FmAgentOptions opt;
            opt.seed = seed;
            FmAgent fm(client, bandit_binding(2), {Task::Bandit, Variant::ImplicitV1}, opt);
            for (int t = 0; t < 100; ++t) {
                const auto a = raw.act({});
                const auto b = fm.act({});
                if (a != b) ++mismatches;
                const auto ra = raw_env.step(a);
                const auto rb = fm_env.step(b);
                raw.observe(a, ra.reward, ra);
                fm.observe(b, rb.reward, rb);
            }
            if (fm.counters().fallback != 0) ++mismatches;
        }
        TranscriptMemory bm;
        append_bandit_memory(bm, 2, 1);
        append_bandit_memory(bm, 0, 0);
        append_bandit_memory(bm, 1, 1);
        TranscriptMemory gm;
        append_grid_memory(gm, "up", {1, 1}, {1, 2}, false);
        append_grid_memory(gm, "left", {0, 0}, {0, 0}, false);
        append_grid_memory(gm, "up", {4, 3}, {4, 4}, true);
        const bool bandit_golden = bm.render() + "\n" == read_file(FMX_TEST_DATA_DIR "/bandit_memory.golden");
        const bool grid_golden = gm.render() + "\n" == read_file(FMX_TEST_DATA_DIR "/grid_memory.golden");
        d = fmt("20 seeds x 100 steps, %zu action mismatches; bandit golden %s, grid golden %s", mismatches,
                bandit_golden ? "match" : "DIFFER", grid_golden ? "match" : "DIFFER");
        return mismatches == 0 && bandit_golden && grid_golden;
    });

    run(10, [](std::string& d) {
        // Dense layer.
        Rng rng = make_rng(1, stream::kNetworkInit);
        nn::Mlp mlp(5, 7, 3);
        mlp.initialize(rng);
        nn::Matrix x(6, 5), target(6, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * uniform01(rng) - 1.0;
        for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = 2.0 * uniform01(rng) - 1.0;
        nn::Mlp::Cache cache;
        const nn::Matrix y = mlp.forward(x, &cache);
        const double e_mlp = fmx::testing::gradient_rel_error(
            [&](const nn::Vector& p) {
                nn::Mlp probe = mlp;
                probe.params() = p;
                return 0.5 * (probe.forward(x) - target).squaredNorm();
            },
            mlp.params(), mlp.backward(cache, y - target));

        // PPO loss, ratios inside the clip band.
        PpoConfig pc;
        pc.entropy_coef = 0.01;
        PolicyValueNet net(6, 3, 8, 4);
        net.body().params() *= 20.0;
        Rng brng = make_rng(4, stream::kAgent);
        PpoBatch batch;
        batch.features.resize(10, 6);
        for (Eigen::Index i = 0; i < batch.features.size(); ++i) batch.features.data()[i] = uniform01(brng);
        const nn::Matrix lp = nn::log_softmax(net.forward(batch.features).logits);
        for (int i = 0; i < 10; ++i) {
            const auto a = uniform_index(brng, 3);
            batch.actions.push_back(a);
            batch.old_log_probs.push_back(lp(i, static_cast<Eigen::Index>(a)) + 0.05 * (2.0 * uniform01(brng) - 1.0));
            batch.advantages.push_back(2.0 * uniform01(brng) - 1.0);
            batch.returns.push_back(uniform01(brng));
            batch.weights.push_back(1.0);
        }
        const double e_ppo = fmx::testing::gradient_rel_error(
            [&](const nn::Vector& p) {
                PolicyValueNet probe = net;
                probe.body().params() = p;
                return ppo_loss(probe, batch, pc).total;
            },
            net.body().params(), ppo_loss(net, batch, pc).grad);

        // RND predictor.
        RndConfig rc;
        rc.hidden = 6;
        rc.embedding = 4;
        RndHeads rnd(5, rc, 3);
        nn::Matrix rx(7, 5);
        for (Eigen::Index i = 0; i < rx.size(); ++i) rx.data()[i] = uniform01(brng);
        const auto [rl, rg] = rnd.loss_and_grad(rx);
        const nn::Vector start = rnd.predictor().params();
        const double e_rnd = fmx::testing::gradient_rel_error(
            [&](const nn::Vector& p) {
                rnd.predictor().params() = p;
                return rnd.loss_and_grad(rx).first;
            },
            start, rg);

        // GAE against the double sum.
        std::size_t gae_bad = 0;
        Rng grng = make_rng(17, stream::kAgent);
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t n = 1 + uniform_index(grng, 5);
            std::vector<double> r(n), v(n + 1);
            std::vector<bool> dn(n);
            for (auto& z : r) z = static_cast<double>(uniform_index(grng, 3));
            for (auto& z : v) z = static_cast<double>(uniform_index(grng, 5)) * 0.25;
            for (std::size_t i = 0; i < n; ++i) dn[i] = uniform01(grng) < 0.3;
            const double g = 0.5, l = 0.5;
            const auto est = compute_gae(r, v, dn, g, l);
            for (std::size_t t = 0; t < n; ++t) {
                double want = 0.0, w = 1.0;
                for (std::size_t k = t; k < n; ++k) {
                    want += w * (r[k] + g * v[k + 1] * (dn[k] ? 0.0 : 1.0) - v[k]);
                    if (dn[k]) break;
                    w *= g * l;
                }
                if (est.advantages[t] != want || est.returns[t] != want + v[t]) ++gae_bad;
            }
        }

        // Pseudo-regret over all 3^5 sequences.
        const std::vector<double> th{0.25, 0.75, 0.5};
        std::size_t enum_bad = 0;
        for (int code = 0; code < 243; ++code) {
            std::vector<std::size_t> a(5);
            int c = code;
            for (auto& z : a) {
                z = static_cast<std::size_t>(c % 3);
                c /= 3;
            }
            const auto s = pseudo_regret(a, th);
            double running = 0.0;
            for (std::size_t t = 0; t < 5; ++t) {
                running += 0.75 - th[a[t]];
                if (s[t] != running) ++enum_bad;
            }
        }
        d = fmt("grad rel err mlp %.1e, ppo %.1e, rnd %.1e (<1e-4); gae mismatches %zu; 3^5 enumeration mismatches %zu",
                e_mlp, e_ppo, e_rnd, gae_bad, enum_bad);
        return e_mlp < 1e-4 && e_ppo < 1e-4 && e_rnd < 1e-4 && rl > 0.0 && gae_bad == 0 && enum_bad == 0;
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
