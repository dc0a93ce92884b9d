#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmx/hash.hpp"

namespace fmx::exp {

using nlohmann::json;

/// Invalid configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Recursive object merge; `over` wins, arrays and scalars are replaced whole.
inline void deep_merge(json& base, const json& over) {
    if (!base.is_object() || !over.is_object()) {
        base = over;
        return;
    }
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (base.contains(it.key())) deep_merge(base[it.key()], it.value());
        else base[it.key()] = it.value();
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, false, true);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    if (!j.is_object()) throw ConfigError("config root must be an object: " + path.string());
    return j;
}

/// Loads a config and resolves its "include" list (paths relative to the including
/// file, applied in order, then overridden by the file itself).
inline json load_with_includes(const std::filesystem::path& path, int depth = 0) {
    if (depth > 16) throw ConfigError("include nesting too deep at " + path.string());
    json self = read_json_file(path);
    json merged = json::object();
    if (self.contains("include")) {
        json inc = self["include"];
        if (inc.is_string()) inc = json::array({inc});
        if (!inc.is_array()) throw ConfigError("'include' must be a string or list in " + path.string());
        for (const auto& item : inc) {
            if (!item.is_string()) throw ConfigError("'include' entries must be strings in " + path.string());
            deep_merge(merged, load_with_includes(path.parent_path() / item.get<std::string>(), depth + 1));
        }
        self.erase("include");
    }
    deep_merge(merged, self);
    return merged;
}

struct ExperimentConfig {
    std::string name;
    json env;
    json agent;
    json hybrid;  // null when absent
    std::vector<std::uint64_t> seeds;
    std::size_t horizon = 0;      // bandit pulls
    std::size_t total_steps = 0;  // learner environment steps
    std::size_t episodes = 0;     // non-learning episodic agents
    std::size_t eval_episodes = 100;
    std::size_t curve_window = 10;
    std::size_t curve_grid_step = 0;  // 0: choose from the data
    std::string output_dir;
    json raw;  // resolved document this config was built from

    std::string hash() const { return hex64(fnv1a64(raw.dump())); }
};

namespace detail {

inline std::vector<std::uint64_t> parse_seeds(const json& j) {
    std::vector<std::uint64_t> seeds;
    if (j.is_array()) {
        for (const auto& s : j) {
            if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
                throw ConfigError("seeds must be non-negative integers");
            seeds.push_back(s.get<std::uint64_t>());
        }
    } else if (j.is_object()) {
        const auto from = j.value("from", std::uint64_t{1});
        const auto count = j.value("count", std::uint64_t{0});
        for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(from + i);
    } else {
        throw ConfigError("'seeds' must be a list or {\"from\": n, \"count\": m}");
    }
    if (seeds.empty()) throw ConfigError("'seeds' must not be empty");
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw ConfigError("'seeds' contains duplicates");
    return seeds;
}

inline std::size_t size_key(const json& j, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

inline ExperimentConfig build(const json& doc, const std::string& name) {
    static const std::set<std::string> allowed{"name",        "env",           "agent",        "hybrid",
                                               "seeds",       "horizon",       "total_steps",  "episodes",
                                               "eval_episodes", "curve_window", "curve_grid_step", "output_dir",
                                               "variants",    "description"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError("unknown top-level key '" + it.key() + "'");
    }
    ExperimentConfig c;
    c.name = name;
    if (c.name.empty()) throw ConfigError("config needs a 'name'");
    if (!doc.contains("env") || !doc["env"].is_object() || !doc["env"].contains("kind"))
        throw ConfigError(name + ": 'env' section with a 'kind' is required");
    if (!doc.contains("agent") || !doc["agent"].is_object() || !doc["agent"].contains("kind"))
        throw ConfigError(name + ": 'agent' section with a 'kind' is required");
    if (!doc.contains("seeds")) throw ConfigError(name + ": 'seeds' is required");
    c.env = doc["env"];
    c.agent = doc["agent"];
    if (doc.contains("hybrid") && !doc["hybrid"].is_null()) {
        if (!doc["hybrid"].is_object()) throw ConfigError(name + ": 'hybrid' must be an object");
        c.hybrid = doc["hybrid"];
    }
    c.seeds = parse_seeds(doc["seeds"]);
    c.horizon = size_key(doc, "horizon", 0);
    c.total_steps = size_key(doc, "total_steps", 0);
    c.episodes = size_key(doc, "episodes", 0);
    c.eval_episodes = size_key(doc, "eval_episodes", 100);
    c.curve_window = size_key(doc, "curve_window", 10);
    c.curve_grid_step = size_key(doc, "curve_grid_step", 0);
    if (c.curve_window < 1) throw ConfigError(name + ": 'curve_window' must be >= 1");
    c.output_dir = doc.value("output_dir", std::string("runs"));
    c.raw = doc;
    c.raw.erase("variants");
    c.raw["name"] = name;
    return c;
}

}  // namespace detail

/// Parses a resolved config document. A "variants" list expands into one
/// config per entry, each deep-merged over the base and named base_variant.
inline std::vector<ExperimentConfig> expand_configs(const json& doc) {
    const std::string base = doc.value("name", std::string{});
    if (!doc.contains("variants")) return {detail::build(doc, base)};
    const auto& variants = doc["variants"];
    if (!variants.is_array() || variants.empty()) throw ConfigError("'variants' must be a non-empty list");
    std::vector<ExperimentConfig> out;
    std::set<std::string> names;
    for (const auto& v : variants) {
        if (!v.is_object() || !v.contains("name") || !v["name"].is_string())
            throw ConfigError("every variant needs a string 'name'");
        json merged = doc;
        merged.erase("variants");
        json over = v;
        const std::string vname = over["name"].get<std::string>();
        over.erase("name");
        deep_merge(merged, over);
        const std::string full = base.empty() ? vname : base + "_" + vname;
        if (!names.insert(full).second) throw ConfigError("duplicate variant name '" + vname + "'");
        out.push_back(detail::build(merged, full));
    }
    return out;
}

inline std::vector<ExperimentConfig> load_experiment(const std::filesystem::path& path) {
    return expand_configs(load_with_includes(path));
}

}  // namespace fmx::exp
