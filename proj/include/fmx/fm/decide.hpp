#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmx/fm/client.hpp"
#include "fmx/fm/memory.hpp"
#include "fmx/fm/parse.hpp"
#include "fmx/fm/prompt.hpp"
#include "fmx/hash.hpp"
#include "fmx/rng.hpp"

namespace fmx::fm {

struct DecisionCounters {
    std::size_t total = 0;
    std::size_t parsed = 0;
    std::size_t fallback = 0;
    std::size_t retries = 0;

    DecisionCounters& operator+=(const DecisionCounters& o) {
        total += o.total;
        parsed += o.parsed;
        fallback += o.fallback;
        retries += o.retries;
        return *this;
    }
};

/// JSON-lines sink, safe to share between threads.
class DecisionLog {
public:
    explicit DecisionLog(const std::string& path) : file_(path, std::ios::app) {
        if (!file_) throw std::runtime_error("cannot open decision log " + path);
        out_ = &file_;
    }
    explicit DecisionLog(std::ostream& out) : out_(&out) {}

    void write(const nlohmann::json& record) {
        std::lock_guard<std::mutex> lock(mu_);
        *out_ << record.dump() << '\n';
        out_->flush();
    }

private:
    std::mutex mu_;
    std::ofstream file_;
    std::ostream* out_ = nullptr;
};

/// Everything needed to render one prompt besides the memory.
struct FmRequest {
    const TemplateSet* templates = nullptr;
    PromptStrategy strategy;
    std::string env_description;
    std::vector<std::string> legal_actions;
    std::string observation;
    DecodingOptions decoding;
    std::string template_key;  // empty: the strategy's default template
};

/// One agent step: prompt, query, parse; re-query on parse errors up to
/// `retry_budget` extra times, then fall back to a uniform legal action.
/// Transport errors propagate. Plans from SP/FP responses go into memory.
inline ParsedDecision fm_decide(ModelClient& client, const FmRequest& request, TranscriptMemory& memory,
                                int retry_budget, Rng& fallback_rng, DecisionCounters* counters = nullptr,
                                DecisionLog* log = nullptr) {
    if (retry_budget < 0) throw std::invalid_argument("fm_decide: retry_budget must be >= 0");
    if (request.legal_actions.empty()) throw std::invalid_argument("fm_decide: empty action set");
    const TemplateSet& templates = request.templates ? *request.templates : TemplateSet::builtin();
    const std::string prompt = build_prompt(templates, request.strategy, request.env_description,
                                            request.legal_actions, memory, request.observation, request.template_key);

    nlohmann::json record{{"prompt_hash", hex64(fnv1a64(prompt))}, {"client", client.name()}};
    nlohmann::json attempts = nlohmann::json::array();
    std::optional<ParsedDecision> decision;
    int retries_used = 0;
    for (int attempt = 0; attempt <= retry_budget && !decision; ++attempt) {
        if (attempt > 0) ++retries_used;
        const auto t0 = std::chrono::steady_clock::now();
        const std::string response = client.complete(prompt, request.decoding);
        const double latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json a{{"response", response}, {"latency_ms", latency_ms}};
        try {
            decision = parse_response(response, request.strategy, request.legal_actions);
            a["outcome"] = "ok";
        } catch (const ParseError& e) {
            a["outcome"] = std::string("parse_error: ") + e.what();
        }
        attempts.push_back(std::move(a));
    }

    const bool fell_back = !decision;
    if (fell_back) {
        const ActionIndex a = uniform_index(fallback_rng, request.legal_actions.size());
        decision = ParsedDecision{a, request.legal_actions[a], std::nullopt};
        std::cerr << "fm: response unusable after " << attempts.size() << " attempt(s), falling back to random action '"
                  << decision->token << "'\n";
    }
    if (decision->plan && request.strategy.requires_plan()) append_plan(memory, *decision->plan);

    if (counters) {
        ++counters->total;
        ++(fell_back ? counters->fallback : counters->parsed);
        counters->retries += static_cast<std::size_t>(retries_used);
    }
    if (log) {
        record["attempts"] = std::move(attempts);
        record["fallback"] = fell_back;
        record["action"] = decision->token;
        if (decision->plan) record["plan"] = *decision->plan;
        log->write(record);
    }
    return *decision;
}

}  // namespace fmx::fm
