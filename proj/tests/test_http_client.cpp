#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "fmx/fm/decide.hpp"
#include "fmx/fm/http_client.hpp"

using namespace fmx::fm;

namespace {

/// Local chat-completions mock. `fail_first` requests answer with `fail_status`.
class MockServer {
public:
    MockServer(int fail_first = 0, int fail_status = 500) : fail_first_(fail_first), fail_status_(fail_status) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++requests_;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (n <= fail_first_) {
                res.status = fail_status_;
                res.set_content("{}", "application/json");
                return;
            }
            nlohmann::json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}};
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    std::string reply = R"({"action": "up"})";
    std::atomic<int> requests_{0};
    std::string last_auth_;
    std::string last_body_;

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int fail_first_;
    int fail_status_;
};

HttpChatConfig config_for(const MockServer& s) {
    HttpChatConfig c;
    c.endpoint = s.endpoint();
    c.api_key_env = "FMX_TEST_API_KEY";
    c.requests_per_minute = 6000;
    c.retry_backoff_s = 0.0;
    c.timeout_s = 5;
    return c;
}

}  // namespace

TEST(HttpChat, SendsChatEnvelopeAndReturnsContent) {
    ::setenv("FMX_TEST_API_KEY", "sk-test-secret", 1);
    MockServer server;
    HttpChatClient client(config_for(server));
    EXPECT_TRUE(client.has_api_key());
    DecodingOptions opt;
    opt.temperature = 0.7;
    opt.max_tokens = 64;
    EXPECT_EQ(client.complete("hello", opt), R"({"action": "up"})");
    EXPECT_EQ(server.last_auth_, "Bearer sk-test-secret");
    const auto body = nlohmann::json::parse(server.last_body_);
    EXPECT_EQ(body["messages"][0]["content"], "hello");
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
    EXPECT_EQ(body["max_tokens"], 64);
    EXPECT_FALSE(client.deterministic());
}

TEST(HttpChat, RetriesServerErrorsThenSucceeds) {
    MockServer server(2, 503);
    HttpChatClient client(config_for(server));
    EXPECT_EQ(client.complete("x", {}), R"({"action": "up"})");
    EXPECT_EQ(server.requests_.load(), 3);
}

TEST(HttpChat, GivesUpAfterRetries) {
    MockServer server(100, 429);
    auto cfg = config_for(server);
    cfg.max_retries = 2;
    HttpChatClient client(cfg);
    EXPECT_THROW(client.complete("x", {}), TransportError);
    EXPECT_EQ(server.requests_.load(), 3);
}

TEST(HttpChat, ClientErrorIsNotRetried) {
    MockServer server(100, 401);
    HttpChatClient client(config_for(server));
    EXPECT_THROW(client.complete("x", {}), TransportError);
    EXPECT_EQ(server.requests_.load(), 1);
}

TEST(HttpChat, UnreachableEndpointIsTransportError) {
    HttpChatConfig c;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.max_retries = 1;
    c.retry_backoff_s = 0.0;
    c.timeout_s = 1;
    HttpChatClient client(c);
    EXPECT_THROW(client.complete("x", {}), TransportError);
}

TEST(HttpChat, MalformedEnvelopeIsTransportError) {
    EXPECT_THROW(HttpChatClient::extract_content("not json"), TransportError);
    EXPECT_THROW(HttpChatClient::extract_content(R"({"choices": []})"), TransportError);
    EXPECT_EQ(HttpChatClient::extract_content(R"({"choices": [{"message": {"content": "hi"}}]})"), "hi");
}

TEST(HttpChat, KeyNeverReachesDecisionLog) {
    ::setenv("FMX_TEST_API_KEY", "sk-very-secret-value", 1);
    MockServer server;
    HttpChatClient client(config_for(server));
    std::ostringstream out;
    DecisionLog log(out);
    FmRequest req;
    req.strategy = {Task::Gridworld, Variant::ActionOnly};
    req.env_description = "grid";
    req.legal_actions = {"up", "down", "left", "right"};
    req.observation = "obs";
    TranscriptMemory m;
    fmx::Rng rng = fmx::make_rng(1, fmx::stream::kFallback);
    testing::internal::CaptureStderr();
    EXPECT_EQ(fm_decide(client, req, m, 0, rng, nullptr, &log).token, "up");
    const std::string err = testing::internal::GetCapturedStderr();
    EXPECT_EQ(out.str().find("sk-very-secret-value"), std::string::npos);
    EXPECT_EQ(err.find("sk-very-secret-value"), std::string::npos);
    EXPECT_EQ(client.name().find("sk-very"), std::string::npos);
}

TEST(RateLimiter, SpacesRequests) {
    RateLimiter limiter(600);  // one slot per 100 ms
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 4; ++i) limiter.acquire();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(elapsed, 0.29);
    EXPECT_LT(elapsed, 1.0);
    EXPECT_THROW(RateLimiter(0), std::invalid_argument);
}

TEST(RateLimiter, SharedAcrossThreads) {
    auto limiter = std::make_shared<RateLimiter>(1200);  // 50 ms
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    for (int i = 0; i < 3; ++i)
        threads.emplace_back([&] {
            for (int j = 0; j < 2; ++j) limiter->acquire();
        });
    for (auto& t : threads) t.join();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(elapsed, 0.24);
}

TEST(SplitUrl, OriginAndPath) {
    const auto u = split_url("http://localhost:8080/v1/chat/completions");
    EXPECT_EQ(u.origin, "http://localhost:8080");
    EXPECT_EQ(u.path, "/v1/chat/completions");
    EXPECT_THROW(split_url("localhost/v1"), std::invalid_argument);
}
