#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "fmx/fm/client.hpp"

namespace fmx::fm {

/// Spaces calls at least 60/rpm seconds apart across all threads sharing it.
class RateLimiter {
public:
    using Clock = std::chrono::steady_clock;

    explicit RateLimiter(double requests_per_minute) {
        if (!(requests_per_minute > 0.0)) throw std::invalid_argument("rate limiter: requests_per_minute must be positive");
        interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(60.0 / requests_per_minute));
    }

    void acquire() {
        Clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mu_);
            slot = std::max(Clock::now(), next_);
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

    Clock::duration interval() const { return interval_; }

private:
    std::mutex mu_;
    Clock::duration interval_{};
    Clock::time_point next_{};
};

struct HttpChatConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "FMX_API_KEY";
    std::string system_prompt;
    double requests_per_minute = 60.0;
    int max_retries = 3;
    double retry_backoff_s = 1.0;  // doubled after each failed attempt
    double timeout_s = 60.0;
};

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// Chat-completion client (OpenAI-style request and response envelope).
/// The API key is read from the environment at construction and never logged.
class HttpChatClient final : public ModelClient {
public:
    explicit HttpChatClient(HttpChatConfig config, std::shared_ptr<RateLimiter> limiter = nullptr)
        : config_(std::move(config)), url_(split_url(config_.endpoint)),
          limiter_(limiter ? std::move(limiter) : std::make_shared<RateLimiter>(config_.requests_per_minute)) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
        httplib::Client probe(url_.origin);
        if (!probe.is_valid()) throw std::invalid_argument("unsupported endpoint (https needs an OpenSSL build): " + url_.origin);
    }

    std::string complete(const std::string& prompt, const DecodingOptions& options) override {
        nlohmann::json messages = nlohmann::json::array();
        if (!config_.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
        messages.push_back({{"role", "user"}, {"content", prompt}});
        const nlohmann::json body{{"model", config_.model},
                                  {"messages", messages},
                                  {"temperature", options.temperature},
                                  {"max_tokens", options.max_tokens}};
        const std::string payload = body.dump();

        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        std::string last_error;
        double backoff = config_.retry_backoff_s;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0 && backoff > 0.0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            limiter_->acquire();
            httplib::Client cli(url_.origin);
            const auto t = std::chrono::duration<double>(config_.timeout_s);
            cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(t));
            cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(t));
            auto res = cli.Post(url_.path, headers, payload, "application/json");
            if (!res) {
                last_error = "request failed: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status));
            return extract_content(res->body);
        }
        throw TransportError("chat endpoint unreachable after " + std::to_string(config_.max_retries + 1) +
                             " attempts: " + last_error);
    }

    std::string name() const override { return "http_chat(" + config_.model + ")"; }
    bool deterministic() const override { return false; }
    bool has_api_key() const { return !api_key_.empty(); }
    const HttpChatConfig& config() const { return config_; }

    static std::string extract_content(const std::string& body) {
        auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw TransportError("chat endpoint returned non-JSON body");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw TransportError("chat response lacks choices[0].message.content");
        }
    }

private:
    HttpChatConfig config_;
    ParsedUrl url_;
    std::shared_ptr<RateLimiter> limiter_;
    std::string api_key_;
};

}  // namespace fmx::fm
