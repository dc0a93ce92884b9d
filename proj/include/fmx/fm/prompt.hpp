#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmx/fm/memory.hpp"

#ifndef FMX_PROMPT_DIR
#define FMX_PROMPT_DIR "prompts"
#endif

namespace fmx::fm {

enum class Task { Bandit, Gridworld, Freeway };

enum class Variant { ImplicitV1, ExplicitV2, ActionOnly, SimplePlan, FocusedPlan };

struct PromptStrategy {
    Task task = Task::Bandit;
    Variant variant = Variant::ImplicitV1;

    bool legal() const {
        switch (task) {
            case Task::Bandit: return variant == Variant::ImplicitV1 || variant == Variant::ExplicitV2;
            case Task::Gridworld:
                return variant == Variant::ActionOnly || variant == Variant::SimplePlan || variant == Variant::FocusedPlan;
            case Task::Freeway: return variant == Variant::ActionOnly;
        }
        return false;
    }

    void validate() const {
        if (!legal()) throw std::invalid_argument("prompt strategy: variant not legal for task");
    }

    bool requires_plan() const { return variant == Variant::SimplePlan || variant == Variant::FocusedPlan; }
};

inline const char* to_string(Task t) {
    switch (t) {
        case Task::Bandit: return "bandit";
        case Task::Gridworld: return "gridworld";
        case Task::Freeway: return "freeway";
    }
    return "?";
}

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::ImplicitV1: return "implicit_v1";
        case Variant::ExplicitV2: return "explicit_v2";
        case Variant::ActionOnly: return "action_only";
        case Variant::SimplePlan: return "simple_plan";
        case Variant::FocusedPlan: return "focused_plan";
    }
    return "?";
}

/// Accepts long names and the short forms v1, v2, ao, sp, fp.
inline Variant parse_variant(const std::string& s) {
    if (s == "implicit_v1" || s == "v1") return Variant::ImplicitV1;
    if (s == "explicit_v2" || s == "v2") return Variant::ExplicitV2;
    if (s == "action_only" || s == "ao") return Variant::ActionOnly;
    if (s == "simple_plan" || s == "sp") return Variant::SimplePlan;
    if (s == "focused_plan" || s == "fp") return Variant::FocusedPlan;
    throw std::invalid_argument("unknown prompt variant '" + s + "'");
}

/// Replaces `{name}` for every name present in `values`. Anything else,
/// including JSON braces and unknown names, is copied verbatim.
inline std::string substitute(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
            if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
                auto it = values.find(tmpl.substr(i + 1, j - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = j + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

/// The prompt template files, keyed by file stem.
class TemplateSet {
public:
    static TemplateSet load(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw std::runtime_error("prompt directory not found: " + dir.string());
        TemplateSet set;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            set.templates_[entry.path().stem().string()] = ss.str();
        }
        if (std::ifstream v(dir / "VERSION"); v) std::getline(v, set.version_);
        return set;
    }

    /// $FMX_PROMPT_DIR if set, else the directory baked in at build time.
    static std::filesystem::path default_dir() {
        if (const char* env = std::getenv("FMX_PROMPT_DIR"); env && *env) return env;
        return FMX_PROMPT_DIR;
    }

    static const TemplateSet& builtin() {
        static const TemplateSet set = load(default_dir());
        return set;
    }

    const std::string& get(const std::string& key) const {
        auto it = templates_.find(key);
        if (it == templates_.end()) throw std::runtime_error("missing prompt template '" + key + "'");
        return it->second;
    }

    bool has(const std::string& key) const { return templates_.count(key) != 0; }
    void set(const std::string& key, std::string text) { templates_[key] = std::move(text); }
    const std::string& version() const { return version_; }

private:
    std::map<std::string, std::string> templates_;
    std::string version_;
};

inline constexpr const char* kEmptyMemory = "(no previous actions)";

/// Template used for a strategy: bandit_<variant>, gridworld_<variant> or freeway_guide.
inline std::string template_key(const PromptStrategy& s) {
    switch (s.task) {
        case Task::Bandit: return std::string("bandit_") + to_string(s.variant);
        case Task::Gridworld: return std::string("gridworld_") + to_string(s.variant);
        case Task::Freeway: return "freeway_guide";
    }
    return {};
}

inline std::string join_actions(const std::vector<std::string>& actions) {
    std::string out;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += ", ";
        out += actions[i];
    }
    return out;
}

/// Assembles the full prompt. Placeholders: {env_description}, {actions},
/// {memory}, {observation}, {memory_size}. A non-empty `key` picks another template.
inline std::string build_prompt(const TemplateSet& templates, const PromptStrategy& strategy,
                                const std::string& env_description, const std::vector<std::string>& legal_actions,
                                const TranscriptMemory& memory, const std::string& observation,
                                const std::string& key = {}) {
    strategy.validate();
    const std::map<std::string, std::string> values{
        {"env_description", env_description},
        {"actions", join_actions(legal_actions)},
        {"memory", memory.empty() ? std::string(kEmptyMemory) : memory.render()},
        {"memory_size", std::to_string(memory.size())},
        {"observation", observation},
    };
    return substitute(templates.get(key.empty() ? template_key(strategy) : key), values);
}

}  // namespace fmx::fm
