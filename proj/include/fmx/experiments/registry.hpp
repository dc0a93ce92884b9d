#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmx/bandit_env.hpp"
#include "fmx/classical_agents.hpp"
#include "fmx/experiments/config.hpp"
#include "fmx/fm/agent.hpp"
#include "fmx/fm/http_client.hpp"
#include "fmx/gridworld_env.hpp"
#include "fmx/hybrid.hpp"
#include "fmx/minifreeway.hpp"
#include "fmx/ppo/learner.hpp"

namespace fmx::exp {

struct KindInfo {
    std::string name;
    std::string description;
};

inline const std::vector<KindInfo>& env_kinds() {
    static const std::vector<KindInfo> kinds{
        {"bandit", "K-armed Bernoulli bandit (instance: gap | uniform | fixed thetas)"},
        {"gridworld", "5x5 navigation grid (mode: deterministic | stochastic)"},
        {"minifreeway", "lane-crossing game with wrapping cars, never terminates, fixed-length episodes"},
    };
    return kinds;
}

inline const std::vector<KindInfo>& agent_kinds() {
    static const std::vector<KindInfo> kinds{
        {"thompson", "Beta-Bernoulli Thompson sampling [bandit]"},
        {"ucb1", "UCB1 with confidence scale c [bandit]"},
        {"greedy_commit", "pull each arm once, then commit to the best [bandit]"},
        {"random", "uniform over actions [any]"},
        {"greedy_manhattan", "walk straight to the revealed reward [gridworld deterministic]"},
        {"snake_sweep", "boustrophedon sweep of the grid [gridworld]"},
        {"oracle_up", "always move up [minifreeway]"},
        {"fm", "prompted model agent; client: scripted | policy_backed | http_chat [bandit, gridworld, minifreeway]"},
        {"ppo", "PPO learner, optional rnd section and hybrid guide section [gridworld, minifreeway]"},
    };
    return kinds;
}

inline bool known_kind(const std::vector<KindInfo>& kinds, const std::string& name) {
    for (const auto& k : kinds) {
        if (k.name == name) return true;
    }
    return false;
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": key '" + key + "' has the wrong type");
    }
}

// ---------------------------------------------------------------------------
// Environments

inline BernoulliBandit make_bandit(const json& env, std::uint64_t seed) {
    check_keys(env, {"kind", "arms", "instance", "delta", "thetas"}, "env");
    if (env.contains("thetas")) {
        auto thetas = get_or<std::vector<double>>(env, "thetas", {}, "env");
        try {
            return BernoulliBandit(std::move(thetas), seed);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("env: ") + e.what());
        }
    }
    const std::string instance = get_or<std::string>(env, "instance", env.contains("delta") ? "gap" : "uniform", "env");
    try {
        if (instance == "gap") {
            if (get_or<std::size_t>(env, "arms", 2, "env") != 2) throw ConfigError("env: gap instances have exactly 2 arms");
            return BernoulliBandit::gap(GapSpec{get_or<double>(env, "delta", 0.4, "env")}, seed);
        }
        if (instance == "uniform") return BernoulliBandit::uniform(get_or<std::size_t>(env, "arms", 2, "env"), seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("env: ") + e.what());
    }
    throw ConfigError("env: unknown bandit instance '" + instance + "'");
}

inline GridworldConfig gridworld_config(const json& env) {
    check_keys(env, {"kind", "mode", "width", "height", "max_steps", "start"}, "env");
    const std::string mode = get_or<std::string>(env, "mode", "deterministic", "env");
    GridworldConfig c;
    if (mode == "deterministic") c = GridworldConfig::deterministic();
    else if (mode == "stochastic") c = GridworldConfig::stochastic();
    else throw ConfigError("env: gridworld mode must be deterministic or stochastic");
    c.width = get_or<int>(env, "width", c.width, "env");
    c.height = get_or<int>(env, "height", c.height, "env");
    c.max_episode_steps = get_or<std::size_t>(env, "max_steps", c.max_episode_steps, "env");
    if (env.contains("start")) {
        const auto s = get_or<std::vector<int>>(env, "start", {}, "env");
        if (s.size() != 2) throw ConfigError("env: start must be [x, y]");
        c.start = Cell{s[0], s[1]};
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("env: ") + e.what());
    }
    return c;
}

inline MiniFreewayConfig freeway_config(const json& env) {
    check_keys(env, {"kind", "lanes", "lane_width", "car_speeds", "car_offsets", "randomize_offsets", "episode_steps",
                     "collision_penalty", "crossing_reward", "cars_enabled"},
               "env");
    MiniFreewayConfig c;
    c.lanes = get_or<int>(env, "lanes", c.lanes, "env");
    c.lane_width = get_or<int>(env, "lane_width", c.lane_width, "env");
    c.car_speeds = get_or<std::vector<int>>(env, "car_speeds", c.car_speeds, "env");
    c.car_offsets = get_or<std::vector<int>>(env, "car_offsets", c.car_offsets, "env");
    c.randomize_offsets = get_or<bool>(env, "randomize_offsets", c.randomize_offsets, "env");
    c.episode_steps = get_or<std::size_t>(env, "episode_steps", c.episode_steps, "env");
    c.collision_penalty = get_or<double>(env, "collision_penalty", c.collision_penalty, "env");
    c.crossing_reward = get_or<double>(env, "crossing_reward", c.crossing_reward, "env");
    c.cars_enabled = get_or<bool>(env, "cars_enabled", c.cars_enabled, "env");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("env: ") + e.what());
    }
    return c;
}

/// Episodic environments; bandits are built per seed by make_bandit.
inline std::unique_ptr<Environment> make_episodic_env(const json& env) {
    const std::string kind = env.at("kind").get<std::string>();
    if (kind == "gridworld") return make_gridworld(gridworld_config(env));
    if (kind == "minifreeway") return make_minifreeway(freeway_config(env));
    throw ConfigError("env kind '" + kind + "' is not episodic");
}

// ---------------------------------------------------------------------------
// PPO

inline PpoConfig ppo_config(const json& agent, const std::string& env_kind) {
    check_keys(agent, {"kind", "gamma", "gae_lambda", "clip_range", "epochs", "rollout_length", "minibatch_size",
                       "learning_rate", "entropy_coef", "value_coef", "max_grad_norm", "history_length", "hidden_width",
                       "rnd"},
               "agent");
    PpoConfig c;
    if (env_kind == "minifreeway") c.rollout_length = 256;
    c.gamma = get_or<double>(agent, "gamma", c.gamma, "agent");
    c.gae_lambda = get_or<double>(agent, "gae_lambda", c.gae_lambda, "agent");
    c.clip_range = get_or<double>(agent, "clip_range", c.clip_range, "agent");
    c.epochs_per_update = get_or<int>(agent, "epochs", c.epochs_per_update, "agent");
    c.rollout_length = get_or<std::size_t>(agent, "rollout_length", c.rollout_length, "agent");
    c.minibatch_size = get_or<std::size_t>(agent, "minibatch_size", c.minibatch_size, "agent");
    c.learning_rate = get_or<double>(agent, "learning_rate", c.learning_rate, "agent");
    c.entropy_coef = get_or<double>(agent, "entropy_coef", c.entropy_coef, "agent");
    c.value_coef = get_or<double>(agent, "value_coef", c.value_coef, "agent");
    c.max_grad_norm = get_or<double>(agent, "max_grad_norm", c.max_grad_norm, "agent");
    c.history_length = get_or<std::size_t>(agent, "history_length", c.history_length, "agent");
    c.hidden_width = get_or<int>(agent, "hidden_width", c.hidden_width, "agent");
    if (agent.contains("rnd")) {
        const json& r = agent["rnd"];
        if (r.is_boolean()) {
            c.rnd.enabled = r.get<bool>();
        } else if (r.is_object()) {
            check_keys(r, {"enabled", "beta", "hidden", "embedding", "learning_rate", "epochs", "minibatch_size"}, "agent.rnd");
            c.rnd.enabled = get_or<bool>(r, "enabled", true, "agent.rnd");
            c.rnd.beta = get_or<double>(r, "beta", c.rnd.beta, "agent.rnd");
            c.rnd.hidden = get_or<int>(r, "hidden", c.rnd.hidden, "agent.rnd");
            c.rnd.embedding = get_or<int>(r, "embedding", c.rnd.embedding, "agent.rnd");
            c.rnd.learning_rate = get_or<double>(r, "learning_rate", c.rnd.learning_rate, "agent.rnd");
            c.rnd.epochs = get_or<int>(r, "epochs", c.rnd.epochs, "agent.rnd");
            c.rnd.minibatch_size = get_or<int>(r, "minibatch_size", c.rnd.minibatch_size, "agent.rnd");
        } else {
            throw ConfigError("agent.rnd must be a boolean or an object");
        }
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("agent: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Agents and clients

/// Shared across the seeds of one run.
struct RunResources {
    std::filesystem::path config_dir = ".";
    std::shared_ptr<fm::RateLimiter> limiter;  // created on first http_chat client
    std::mutex mu;
};

/// What the agent factory needs to know about the environment.
struct EnvContext {
    std::string kind;
    std::size_t action_count = 0;
    std::vector<std::string> action_names;
    GridworldConfig grid;
    MiniFreewayConfig freeway;
};

inline std::filesystem::path resolve_path(const RunResources& res, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : res.config_dir / path;
}

inline std::unique_ptr<Agent> make_agent(const json& agent, const EnvContext& env, std::uint64_t seed, RunResources& res,
                                         std::shared_ptr<fm::DecisionLog> log);

inline std::shared_ptr<fm::ModelClient> make_client(const json& client, const EnvContext& env, std::uint64_t seed,
                                                    RunResources& res, std::shared_ptr<fm::DecisionLog> log) {
    if (!client.is_object() || !client.contains("kind")) throw ConfigError("fm client needs a 'kind'");
    const std::string kind = client["kind"].get<std::string>();
    if (kind == "scripted") {
        check_keys(client, {"kind", "responses", "file"}, "client");
        if (client.contains("file"))
            return std::make_shared<fm::ScriptedClient>(
                fm::ScriptedClient::from_file(resolve_path(res, client["file"].get<std::string>()).string()));
        auto responses = get_or<std::vector<std::string>>(client, "responses", {}, "client");
        if (responses.empty()) throw ConfigError("scripted client needs 'responses' or 'file'");
        return std::make_shared<fm::ScriptedClient>(std::move(responses));
    }
    if (kind == "policy_backed") {
        check_keys(client, {"kind", "policy"}, "client");
        if (!client.contains("policy")) throw ConfigError("policy_backed client needs a 'policy' agent section");
        return std::make_shared<fm::PolicyBackedClient>(make_agent(client["policy"], env, seed, res, log), env.action_names);
    }
    if (kind == "http_chat") {
        check_keys(client, {"kind", "endpoint", "model", "api_key_env", "system_prompt", "requests_per_minute",
                            "max_retries", "retry_backoff_s", "timeout_s"},
                   "client");
        fm::HttpChatConfig hc;
        hc.endpoint = get_or<std::string>(client, "endpoint", hc.endpoint, "client");
        hc.model = get_or<std::string>(client, "model", hc.model, "client");
        hc.api_key_env = get_or<std::string>(client, "api_key_env", hc.api_key_env, "client");
        hc.system_prompt = get_or<std::string>(client, "system_prompt", hc.system_prompt, "client");
        hc.requests_per_minute = get_or<double>(client, "requests_per_minute", hc.requests_per_minute, "client");
        hc.max_retries = get_or<int>(client, "max_retries", hc.max_retries, "client");
        hc.retry_backoff_s = get_or<double>(client, "retry_backoff_s", hc.retry_backoff_s, "client");
        hc.timeout_s = get_or<double>(client, "timeout_s", hc.timeout_s, "client");
        std::shared_ptr<fm::RateLimiter> limiter;
        {
            std::lock_guard<std::mutex> lock(res.mu);
            if (!res.limiter) res.limiter = std::make_shared<fm::RateLimiter>(hc.requests_per_minute);
            limiter = res.limiter;
        }
        try {
            return std::make_shared<fm::HttpChatClient>(hc, limiter);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("client: ") + e.what());
        }
    }
    throw ConfigError("unknown fm client kind '" + kind + "'");
}

inline fm::TaskBinding binding_for(const EnvContext& env, const fm::TemplateSet& templates) {
    if (env.kind == "bandit") return fm::bandit_binding(env.action_count, templates);
    if (env.kind == "gridworld") return fm::gridworld_binding(env.grid, templates);
    if (env.kind == "minifreeway") return fm::freeway_binding(env.freeway, templates);
    throw ConfigError("fm agent does not support env kind '" + env.kind + "'");
}

inline fm::Task task_for(const std::string& env_kind) {
    if (env_kind == "bandit") return fm::Task::Bandit;
    if (env_kind == "gridworld") return fm::Task::Gridworld;
    return fm::Task::Freeway;
}

/// Template sets are loaded once per directory and kept for the process lifetime.
inline const fm::TemplateSet& templates_for(const std::string& dir) {
    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<fm::TemplateSet>> cache;
    if (dir.empty()) return fm::TemplateSet::builtin();
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[dir];
    if (!slot) {
        try {
            slot = std::make_unique<fm::TemplateSet>(fm::TemplateSet::load(dir));
        } catch (const std::exception& e) {
            cache.erase(dir);
            throw ConfigError(e.what());
        }
    }
    return *slot;
}

inline std::unique_ptr<Agent> make_fm_agent(const json& agent, const EnvContext& env, std::uint64_t seed, RunResources& res,
                                            std::shared_ptr<fm::DecisionLog> log, const std::string& template_key = {}) {
    check_keys(agent, {"kind", "strategy", "client", "retry_budget", "temperature", "max_tokens", "prompt_dir", "template"},
               "agent");
    fm::PromptStrategy strategy;
    strategy.task = task_for(env.kind);
    const std::string fallback_variant = strategy.task == fm::Task::Bandit ? "v1" : "ao";
    try {
        strategy.variant = fm::parse_variant(get_or<std::string>(agent, "strategy", fallback_variant, "agent"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("agent: ") + e.what());
    }
    if (!strategy.legal()) throw ConfigError("agent: strategy not valid for env kind '" + env.kind + "'");
    const std::string dir = agent.contains("prompt_dir")
                                ? resolve_path(res, agent["prompt_dir"].get<std::string>()).string()
                                : std::string{};
    const fm::TemplateSet& templates = templates_for(dir);
    fm::FmAgentOptions opt;
    opt.retry_budget = get_or<int>(agent, "retry_budget", opt.retry_budget, "agent");
    if (opt.retry_budget < 0) throw ConfigError("agent: retry_budget must be >= 0");
    opt.decoding.temperature = get_or<double>(agent, "temperature", opt.decoding.temperature, "agent");
    opt.decoding.max_tokens = get_or<int>(agent, "max_tokens", opt.decoding.max_tokens, "agent");
    opt.seed = seed;
    opt.template_key = template_key.empty() ? get_or<std::string>(agent, "template", "", "agent") : template_key;
    if (!opt.template_key.empty() && !templates.has(opt.template_key))
        throw ConfigError("agent: no prompt template named '" + opt.template_key + "'");
    if (!agent.contains("client")) throw ConfigError("fm agent needs a 'client' section");
    auto client = make_client(agent["client"], env, seed, res, log);
    return std::make_unique<fm::FmAgent>(std::move(client), binding_for(env, templates), strategy, opt, &templates,
                                         std::move(log));
}

inline std::unique_ptr<Agent> make_agent(const json& agent, const EnvContext& env, std::uint64_t seed, RunResources& res,
                                         std::shared_ptr<fm::DecisionLog> log) {
    if (!agent.is_object() || !agent.contains("kind")) throw ConfigError("agent section needs a 'kind'");
    const std::string kind = agent["kind"].get<std::string>();
    const bool bandit = env.kind == "bandit";
    auto require = [&](bool ok, const char* what) {
        if (!ok) throw ConfigError("agent '" + kind + "' needs " + what + " (env is '" + env.kind + "')");
    };
    if (kind == "thompson") {
        check_keys(agent, {"kind", "prior_alpha", "prior_beta"}, "agent");
        return std::make_unique<ThompsonAgent>(env.action_count, seed, get_or<double>(agent, "prior_alpha", 1.0, "agent"),
                                               get_or<double>(agent, "prior_beta", 1.0, "agent"));
    }
    if (kind == "ucb1") {
        require(bandit, "a bandit env");
        check_keys(agent, {"kind", "c", "log_scale"}, "agent");
        return std::make_unique<Ucb1Agent>(env.action_count, seed, get_or<double>(agent, "c", 0.25, "agent"),
                                           get_or<double>(agent, "log_scale", 2.0, "agent"));
    }
    if (kind == "greedy_commit") {
        require(bandit, "a bandit env");
        check_keys(agent, {"kind"}, "agent");
        return std::make_unique<GreedyCommitAgent>(env.action_count, seed);
    }
    if (kind == "random") {
        check_keys(agent, {"kind"}, "agent");
        return std::make_unique<RandomAgent>(env.action_count, seed);
    }
    if (kind == "greedy_manhattan") {
        require(env.kind == "gridworld" && env.grid.reveal_reward_in_observation, "a deterministic gridworld");
        check_keys(agent, {"kind"}, "agent");
        return std::make_unique<GreedyManhattanAgent>();
    }
    if (kind == "snake_sweep") {
        require(env.kind == "gridworld", "a gridworld env");
        check_keys(agent, {"kind"}, "agent");
        return std::make_unique<SnakeSweepAgent>(env.grid.width);
    }
    if (kind == "oracle_up") {
        require(env.kind == "minifreeway", "a minifreeway env");
        check_keys(agent, {"kind"}, "agent");
        return std::make_unique<OracleUpAgent>();
    }
    if (kind == "fm") return make_fm_agent(agent, env, seed, res, std::move(log));
    if (kind == "ppo") throw ConfigError("ppo is a learner, not a policy; it cannot be nested here");
    throw ConfigError("unknown agent kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Hybrid

struct HybridSettings {
    double epsilon = 0.1;
    std::size_t duration = 5;
    bool include_guided = false;
    std::string guide = "oracle_up";
    GuideFailurePolicy on_failure = GuideFailurePolicy::Abort;
    json client;  // for fm:<template> guides
};

inline HybridSettings hybrid_settings(const json& h) {
    check_keys(h, {"epsilon", "duration", "include_guided", "guide", "on_failure", "client"}, "hybrid");
    HybridSettings s;
    s.epsilon = get_or<double>(h, "epsilon", s.epsilon, "hybrid");
    s.duration = get_or<std::size_t>(h, "duration", s.duration, "hybrid");
    s.include_guided = get_or<bool>(h, "include_guided", s.include_guided, "hybrid");
    s.guide = get_or<std::string>(h, "guide", s.guide, "hybrid");
    const std::string fail = get_or<std::string>(h, "on_failure", "abort", "hybrid");
    if (fail == "abort") s.on_failure = GuideFailurePolicy::Abort;
    else if (fail == "degrade") s.on_failure = GuideFailurePolicy::Degrade;
    else throw ConfigError("hybrid: on_failure must be abort or degrade");
    if (h.contains("client")) s.client = h["client"];
    if (!(s.epsilon >= 0.0 && s.epsilon <= 1.0)) throw ConfigError("hybrid: epsilon must lie in [0, 1]");
    if (s.duration < 1) throw ConfigError("hybrid: duration must be >= 1");
    return s;
}

/// Guide spec: oracle_up | thompson | random | snake_sweep | scripted:<file> | fm:<template>.
inline std::unique_ptr<Agent> make_guide(const HybridSettings& s, const EnvContext& env, std::uint64_t seed,
                                         RunResources& res, std::shared_ptr<fm::DecisionLog> log) {
    const std::uint64_t guide_seed = derive_seed(seed, stream::kGuide);
    const std::string& g = s.guide;
    if (g.rfind("scripted:", 0) == 0) {
        try {
            return std::make_unique<ScriptedGuide>(
                ScriptedGuide::from_file(resolve_path(res, g.substr(9)).string(), env.action_names));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("hybrid guide: ") + e.what());
        }
    }
    if (g.rfind("fm:", 0) == 0) {
        if (s.client.is_null()) throw ConfigError("hybrid: fm guide needs a 'client' section");
        json a{{"kind", "fm"}, {"client", s.client}};
        return make_fm_agent(a, env, guide_seed, res, std::move(log), g.substr(3));
    }
    return make_agent(json{{"kind", g}}, env, guide_seed, res, std::move(log));
}

}  // namespace fmx::exp
