#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fmx/experiments/config.hpp"
#include "fmx/experiments/registry.hpp"
#include "fmx/metrics.hpp"
#include "fmx/version.hpp"

namespace fmx::exp {

namespace fs = std::filesystem;

/// Failure while executing a valid config (CLI exit code 2).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SeedOutput {
    std::uint64_t seed = 0;
    std::string series_file;         // relative to the run directory
    std::vector<std::string> files;  // every file written for this seed
    json summary = json::object();
    json counters = json::object();
    double wall_clock_s = 0.0;
};

struct RunOptions {
    std::size_t workers = 1;
    std::optional<fs::path> output_root;  // overrides the config's output_dir
    fs::path config_dir = ".";
    bool quiet = false;
};

struct RunManifest {
    fs::path path;
    json doc;
};

inline bool uses_live_client(const json& j) {
    if (j.is_object()) {
        if (j.contains("kind") && j["kind"] == "http_chat") return true;
        for (const auto& [k, v] : j.items()) {
            if (uses_live_client(v)) return true;
        }
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (uses_live_client(v)) return true;
        }
    }
    return false;
}

inline bool uses_fm(const ExperimentConfig& c) {
    if (c.agent.value("kind", "") == "fm") return true;
    return c.hybrid.is_object() && c.hybrid.value("guide", "").rfind("fm:", 0) == 0;
}

inline EnvContext make_context(const ExperimentConfig& c) {
    EnvContext ctx;
    ctx.kind = c.env.at("kind").get<std::string>();
    if (ctx.kind == "bandit") {
        const BernoulliBandit b = make_bandit(c.env, c.seeds.front());
        ctx.action_count = b.arm_count();
        ctx.action_names = b.spec().action_names;
    } else if (ctx.kind == "gridworld") {
        ctx.grid = gridworld_config(c.env);
        ctx.action_count = 4;
        ctx.action_names = grid_action_names();
    } else if (ctx.kind == "minifreeway") {
        ctx.freeway = freeway_config(c.env);
        ctx.action_count = 3;
        ctx.action_names = freeway_action_names();
    } else {
        throw ConfigError("unknown env kind '" + ctx.kind + "'");
    }
    return ctx;
}

/// Registry-level checks; builds the first seed's agent once so bad
/// parameters surface before any work starts.
inline void validate_config(const ExperimentConfig& c, RunResources& res) {
    const std::string env_kind = c.env.at("kind").get<std::string>();
    const std::string agent_kind = c.agent.at("kind").get<std::string>();
    if (!known_kind(env_kinds(), env_kind)) throw ConfigError(c.name + ": unknown env kind '" + env_kind + "'");
    if (!known_kind(agent_kinds(), agent_kind)) throw ConfigError(c.name + ": unknown agent kind '" + agent_kind + "'");
    const EnvContext ctx = make_context(c);
    if (agent_kind == "ppo") {
        if (env_kind == "bandit") throw ConfigError(c.name + ": ppo needs an episodic env");
        if (c.total_steps == 0) throw ConfigError(c.name + ": ppo needs 'total_steps'");
        const PpoConfig pc = ppo_config(c.agent, env_kind);
        if (c.total_steps < pc.rollout_length) throw ConfigError(c.name + ": 'total_steps' must cover one rollout");
        if (c.hybrid.is_object()) {
            const HybridSettings hs = hybrid_settings(c.hybrid);
            make_guide(hs, ctx, c.seeds.front(), res, nullptr);
        }
        return;
    }
    if (c.hybrid.is_object()) throw ConfigError(c.name + ": a 'hybrid' section requires a ppo agent");
    if (env_kind == "bandit" && c.horizon == 0) throw ConfigError(c.name + ": bandit runs need 'horizon'");
    if (env_kind != "bandit" && c.episodes == 0) throw ConfigError(c.name + ": episodic runs need 'episodes'");
    make_agent(c.agent, ctx, c.seeds.front(), res, nullptr);
}

namespace detail {

inline std::string seed_file(std::uint64_t seed, const char* suffix) {
    return "seed_" + std::to_string(seed) + "_" + suffix;
}

inline void write_text_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    body(out);
    if (!out) throw RuntimeFailure("write failed for " + path.string());
}

inline std::shared_ptr<fm::DecisionLog> open_decision_log(const ExperimentConfig& c, std::uint64_t seed,
                                                          const fs::path& dir, SeedOutput& out) {
    if (!uses_fm(c)) return nullptr;
    const std::string name = seed_file(seed, "decisions.jsonl");
    fs::remove(dir / name);
    out.files.push_back(name);
    return std::make_shared<fm::DecisionLog>((dir / name).string());
}

inline void add_fm_counters(Agent* agent, json& counters) {
    if (auto* fa = dynamic_cast<fm::FmAgent*>(agent)) {
        const auto& k = fa->counters();
        counters["decisions"] = k.total;
        counters["parsed"] = k.parsed;
        counters["fallbacks"] = k.fallback;
        counters["retries"] = k.retries;
    }
}

inline double mean_of_last(const std::vector<EpisodeRow>& rows, std::size_t n) {
    if (rows.empty()) return 0.0;
    const std::size_t k = std::min(n, rows.size());
    double s = 0.0;
    for (std::size_t i = rows.size() - k; i < rows.size(); ++i) s += rows[i].episodic_return;
    return s / static_cast<double>(k);
}

inline void run_bandit_seed(const ExperimentConfig& c, const EnvContext& ctx, std::uint64_t seed, const fs::path& dir,
                            RunResources& res, SeedOutput& out) {
    BernoulliBandit bandit = make_bandit(c.env, seed);
    auto log = open_decision_log(c, seed, dir, out);
    auto agent = make_agent(c.agent, ctx, seed, res, log);
    RegretRecord rec(bandit.thetas());
    agent->begin_episode();
    for (std::size_t t = 0; t < c.horizon; ++t) {
        const ActionIndex a = agent->act({});
        const StepResult r = bandit.step(a);
        agent->observe(a, r.reward, r);
        rec.push(a, static_cast<int>(r.reward));
    }
    out.series_file = seed_file(seed, "regret.csv");
    out.files.push_back(out.series_file);
    write_text_file(dir / out.series_file, [&](std::ostream& o) { write_regret_csv(o, rec); });
    out.summary = {{"final_pseudo_regret", rec.pseudo().back()},
                   {"final_realized_regret", rec.realized().back()},
                   {"optimal_arm", bandit.optimal_arm().index},
                   {"thetas", bandit.thetas()}};
    add_fm_counters(agent.get(), out.counters);
}

inline void run_episodic_seed(const ExperimentConfig& c, const EnvContext& ctx, std::uint64_t seed, const fs::path& dir,
                              RunResources& res, SeedOutput& out) {
    auto env = make_episodic_env(c.env);
    auto log = open_decision_log(c, seed, dir, out);
    auto agent = make_agent(c.agent, ctx, seed, res, log);
    std::vector<EpisodeRow> rows;
    std::size_t steps = 0;
    std::size_t successes = 0;
    std::size_t success_steps = 0;
    for (std::size_t ep = 0; ep < c.episodes; ++ep) {
        Observation obs = env->reset(episode_seed(seed, ep));
        agent->begin_episode();
        double ret = 0.0;
        std::size_t len = 0;
        while (true) {
            const ActionIndex a = agent->act(obs);
            StepResult r = env->step(a);
            agent->observe(a, r.reward, r);
            ret += r.reward;
            ++len;
            if (r.done()) {
                if (r.terminated) {
                    ++successes;
                    success_steps += len;
                }
                break;
            }
            obs = std::move(r.observation);
        }
        steps += len;
        rows.push_back({steps, ret});
    }
    out.series_file = seed_file(seed, "curve.csv");
    out.files.push_back(out.series_file);
    write_text_file(dir / out.series_file, [&](std::ostream& o) { write_learning_curve_csv(o, rows, seed); });
    double total = 0.0;
    for (const auto& r : rows) total += r.episodic_return;
    out.summary = {{"episodes", rows.size()}, {"mean_return", total / static_cast<double>(rows.size())}};
    if (ctx.kind == "gridworld") {
        out.summary["success_rate"] = static_cast<double>(successes) / static_cast<double>(rows.size());
        out.summary["mean_steps_to_success"] =
            successes ? static_cast<double>(success_steps) / static_cast<double>(successes) : 0.0;
    }
    add_fm_counters(agent.get(), out.counters);
}

inline void run_ppo_seed(const ExperimentConfig& c, const EnvContext& ctx, std::uint64_t seed, const fs::path& dir,
                         RunResources& res, SeedOutput& out) {
    auto env = make_episodic_env(c.env);
    PpoConfig pc = ppo_config(c.agent, ctx.kind);
    std::optional<HybridSettings> hs;
    if (c.hybrid.is_object()) {
        hs = hybrid_settings(c.hybrid);
        pc.include_guided_in_update = hs->include_guided;
    }
    const auto encoder = make_encoder(*env, pc.history_length);
    PpoLearner learner(static_cast<int>(encoder->feature_size()), static_cast<int>(ctx.action_count), pc, seed);
    TrainingResult tr;
    if (hs) {
        auto log = open_decision_log(c, seed, dir, out);
        auto guide = make_guide(*hs, ctx, seed, res, log);
        const auto h = run_hybrid_training(*env, learner, *guide, InterventionSchedule(hs->epsilon, hs->duration),
                                           c.total_steps, seed, hs->on_failure);
        tr = h.training;
        out.counters["interventions_started"] = h.interventions_started;
        out.counters["guided_steps_total"] = h.guided_steps_total;
        out.counters["guided_fraction"] = h.guided_fraction;
        out.counters["guide_failures"] = h.guide_failures;
        add_fm_counters(guide.get(), out.counters);
    } else {
        tr = train_ppo(*env, learner, c.total_steps, seed);
    }
    std::vector<EpisodeRow> rows;
    rows.reserve(tr.episodes.size());
    for (const auto& e : tr.episodes) rows.push_back({e.env_step, e.episodic_return});
    out.series_file = seed_file(seed, "curve.csv");
    out.files.push_back(out.series_file);
    write_text_file(dir / out.series_file, [&](std::ostream& o) { write_learning_curve_csv(o, rows, seed); });
    double total = 0.0;
    for (const auto& r : rows) total += r.episodic_return;
    out.summary = {{"episodes", rows.size()},
                   {"updates", tr.updates.size()},
                   {"mean_return", rows.empty() ? 0.0 : total / static_cast<double>(rows.size())},
                   {"final_window_mean_return", mean_of_last(rows, c.curve_window)}};
    if (ctx.kind == "gridworld" && c.eval_episodes > 0)
        out.summary["eval_success_rate"] = success_rate(evaluate_policy(*env, learner, c.eval_episodes, seed));
}

}  // namespace detail

inline SeedOutput run_seed(const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir, RunResources& res) {
    const auto t0 = std::chrono::steady_clock::now();
    SeedOutput out;
    out.seed = seed;
    const EnvContext ctx = make_context(c);
    if (c.agent.at("kind") == "ppo") detail::run_ppo_seed(c, ctx, seed, dir, res, out);
    else if (ctx.kind == "bandit") detail::run_bandit_seed(c, ctx, seed, dir, res, out);
    else detail::run_episodic_seed(c, ctx, seed, dir, res, out);
    out.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline fs::path run_directory(const ExperimentConfig& c, const RunOptions& opt) {
    const fs::path root = opt.output_root ? *opt.output_root : fs::path(c.output_dir);
    return root / c.name;
}

/// Executes every seed on a pool of `opt.workers` threads and writes the
/// manifest. On failure, files written by this run are removed and no manifest is left behind.
inline RunManifest run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
    RunResources res;
    res.config_dir = opt.config_dir;
    validate_config(c, res);

    const fs::path dir = run_directory(c, opt);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
    fs::remove(dir / "manifest.json");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = c.seeds.size();
    std::vector<std::optional<SeedOutput>> outputs(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                outputs[i] = run_seed(c, c.seeds[i], dir, res);
                if (!opt.quiet) std::cerr << c.name << ": seed " << c.seeds[i] << " done\n";
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true);
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(opt.workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        for (const auto& o : outputs) {
            if (!o) continue;
            for (const auto& f : o->files) fs::remove(dir / f, ec);
        }
        for (const auto s : c.seeds) {
            for (const char* suffix : {"regret.csv", "curve.csv", "decisions.jsonl"})
                fs::remove(dir / detail::seed_file(s, suffix), ec);
        }
        try {
            std::rethrow_exception(errors[i]);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw RuntimeFailure(c.name + ": seed " + std::to_string(c.seeds[i]) + " failed: " + e.what());
        }
    }

    const std::string env_kind = c.env.at("kind").get<std::string>();
    json seeds = json::array();
    for (const auto& o : outputs) {
        seeds.push_back({{"seed", o->seed},
                         {"series_file", o->series_file},
                         {"files", o->files},
                         {"summary", o->summary},
                         {"counters", o->counters},
                         {"wall_clock_s", o->wall_clock_s}});
    }
    RunManifest m;
    m.path = dir / "manifest.json";
    m.doc = {{"name", c.name},
             {"artifact_version", kVersion},
             {"config_hash", c.hash()},
             {"config", c.raw},
             {"env_kind", env_kind},
             {"agent_kind", c.agent.at("kind")},
             {"series", env_kind == "bandit" && c.agent.at("kind") != "ppo" ? "regret" : "curve"},
             {"nondeterministic", uses_live_client(c.agent) || uses_live_client(c.hybrid)},
             {"workers", workers},
             {"curve_window", c.curve_window},
             {"curve_grid_step", c.curve_grid_step},
             {"wall_clock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
             {"seeds", seeds}};
    detail::write_text_file(m.path, [&](std::ostream& o) { o << m.doc.dump(2) << '\n'; });
    return m;
}

inline RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open manifest " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("seeds") || !j.contains("series"))
        throw RuntimeFailure("not a run manifest: " + path.string());
    return {path, std::move(j)};
}

}  // namespace fmx::exp
