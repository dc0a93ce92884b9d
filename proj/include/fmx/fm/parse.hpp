#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmx/env_core.hpp"
#include "fmx/fm/prompt.hpp"

namespace fmx::fm {

/// Recoverable: the caller may re-query the model.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ParsedDecision {
    ActionIndex action = 0;
    std::string token;                // legal action name as listed in the prompt
    std::optional<std::string> plan;  // absent for action-only strategies
};

inline std::string trim_lower(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// End offset (exclusive) of the brace-balanced span starting at `open`,
/// honoring string literals; npos if unbalanced.
inline std::size_t balanced_end(const std::string& text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string::npos;
}

/// First well-formed JSON object anywhere in the text: prose, markdown
/// fences and trailing chatter are skipped. With `required_keys`, the first
/// object holding one of them wins, else the first object at all.
inline std::optional<nlohmann::json> extract_json_object(const std::string& text,
                                                         const std::vector<std::string>& required_keys = {}) {
    std::optional<nlohmann::json> first;
    for (std::size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
        const std::size_t end = balanced_end(text, pos);
        if (end == std::string::npos) continue;
        auto j = nlohmann::json::parse(text.begin() + static_cast<std::ptrdiff_t>(pos),
                                       text.begin() + static_cast<std::ptrdiff_t>(end), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        if (required_keys.empty()) return j;
        for (const auto& k : required_keys) {
            if (j.contains(k)) return j;
        }
        if (!first) first = std::move(j);
    }
    return first;
}

namespace detail {

inline std::optional<std::string> action_field(const nlohmann::json& obj) {
    for (const char* key : {"action", "arm"}) {
        auto it = obj.find(key);
        if (it == obj.end()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number_integer() || it->is_number_unsigned()) return std::to_string(it->get<long long>());
        if (it->is_number_float()) {
            const double d = it->get<double>();
            if (d == std::floor(d)) return std::to_string(static_cast<long long>(d));
        }
        throw ParseError(std::string("field '") + key + "' has an unusable type");
    }
    return std::nullopt;
}

}  // namespace detail

/// Extracts and validates a decision. `legal_actions` are matched case-insensitively
/// after trimming; a bandit token such as "arm 2" also matches "2".
inline ParsedDecision parse_response(const std::string& text, const PromptStrategy& strategy,
                                     const std::vector<std::string>& legal_actions) {
    const auto obj = extract_json_object(text, {"action", "arm"});
    if (!obj) throw ParseError("no JSON object in response");
    const auto raw = detail::action_field(*obj);
    if (!raw) throw ParseError("response object has no action field");

    std::string token = trim_lower(*raw);
    if (strategy.task == Task::Bandit && token.rfind("arm", 0) == 0) token = trim_lower(token.substr(3));

    ParsedDecision d;
    bool found = false;
    for (std::size_t i = 0; i < legal_actions.size(); ++i) {
        if (trim_lower(legal_actions[i]) == token) {
            d.action = i;
            d.token = legal_actions[i];
            found = true;
            break;
        }
    }
    if (!found) throw ParseError("illegal action '" + *raw + "'");

    if (strategy.requires_plan()) {
        auto it = obj->find("plan");
        if (it == obj->end() || !it->is_string()) throw ParseError("response is missing the plan field");
        d.plan = it->get<std::string>();
    }
    return d;
}

}  // namespace fmx::fm
