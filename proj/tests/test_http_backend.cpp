#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/errors.hpp"

using namespace switchcot;

namespace {

// in-process OpenAI-style server for driving the client
struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    std::atomic<int> prefix_calls{0};
    std::atomic<int> chat_calls{0};
    std::atomic<int> flaky_failures_left{0};
    std::atomic<bool> teapot{false};
    nlohmann::json last_prefix_body;
    nlohmann::json last_chat_body;

    TestServer() {
        server.Post("/v1/completions", [this](const httplib::Request& req,
                                              httplib::Response& res) {
            ++prefix_calls;
            if (teapot) {
                res.status = 418;
                res.set_content("short and stout", "text/plain");
                return;
            }
            if (flaky_failures_left > 0) {
                --flaky_failures_left;
                res.status = 503;
                res.set_content("overloaded", "text/plain");
                return;
            }
            last_prefix_body = nlohmann::json::parse(req.body);
            nlohmann::json out{
                {"choices",
                 nlohmann::json::array(
                     {{{"text", " prefix reply"}, {"finish_reason", "stop"}}})},
                {"usage", {{"completion_tokens", 17}}}};
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
            ++chat_calls;
            last_chat_body = nlohmann::json::parse(req.body);
            nlohmann::json out{
                {"choices",
                 nlohmann::json::array({{{"message", {{"content", "chat reply"}}},
                                         {"finish_reason", "length"}}})}};
            res.set_content(out.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer() {
        server.stop();
        thread.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

GenerationRequest make_request() {
    GenerationRequest req;
    req.question_id = "q1";
    req.route = "long";
    req.prompt.user_text = "What is 2+2?";
    req.prompt.assistant_prefix = "<think>";
    req.prompt.stop_sequences = {"</answer>"};
    req.model_id = "test-model";
    req.max_new_tokens = 50;
    req.seed = 11;
    return req;
}

} // namespace

TEST_CASE("prefix mode posts prompt plus prefix and trusts server usage") {
    TestServer srv;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.model_id = "cfg-model";
    HttpBackend backend(cfg);

    Generation g = backend.generate(make_request());
    CHECK(g.text == " prefix reply");
    CHECK(g.completion_tokens == 17); // server-reported, not estimated
    CHECK(g.finish_reason == FinishReason::stop);
    CHECK(srv.prefix_calls == 1);

    const nlohmann::json& body = srv.last_prefix_body;
    CHECK(body.at("prompt").get<std::string>() == "What is 2+2?\n<think>");
    CHECK(body.at("model").get<std::string>() == "test-model"); // request wins over config
    CHECK(body.at("max_tokens").get<int>() == 50);
    CHECK(body.at("seed").get<long long>() == 11);
    CHECK(body.at("stop").at(0).get<std::string>() == "</answer>");
    CHECK(backend.exact_token_counts() == false);
    CHECK(backend.id().find("prefix") != std::string::npos);
}

TEST_CASE("chat mode sends an open assistant turn when continuation is on") {
    TestServer srv;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.model_id = "cfg-model";
    cfg.mode = "chat";
    cfg.chat_continuation = true;
    HttpBackend backend(cfg);
    CHECK_FALSE(backend.prefix_folded_into_user_turn());

    Generation g = backend.generate(make_request());
    CHECK(g.text == "chat reply");
    CHECK(g.finish_reason == FinishReason::length);
    // no usage block: estimate capped by the request bound
    CHECK(g.completion_tokens == 3); // ceil(10/4)

    const nlohmann::json& body = srv.last_chat_body;
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(1).at("role") == "assistant");
    CHECK(body.at("messages").at(1).at("content") == "<think>");
}

TEST_CASE("chat mode folds the prefix into the user turn when told to") {
    TestServer srv;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.mode = "chat";
    cfg.chat_continuation = false;
    HttpBackend backend(cfg);
    CHECK(backend.prefix_folded_into_user_turn());

    backend.generate(make_request());
    const nlohmann::json& body = srv.last_chat_body;
    REQUIRE(body.at("messages").size() == 1);
    CHECK(body.at("messages").at(0).at("content").get<std::string>() ==
          "What is 2+2?\n<think>");
}

TEST_CASE("retryable server errors are retried until success") {
    TestServer srv;
    srv.flaky_failures_left = 2;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.max_attempts = 3;
    cfg.backoff_initial_ms = 1;
    HttpBackend backend(cfg);

    Generation g = backend.generate(make_request());
    CHECK(g.text == " prefix reply");
    CHECK(srv.prefix_calls == 3); // two 503s then the success
}

TEST_CASE("exhausted retries raise a retryable error") {
    TestServer srv;
    srv.flaky_failures_left = 99;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.max_attempts = 2;
    cfg.backoff_initial_ms = 1;
    HttpBackend backend(cfg);

    try {
        backend.generate(make_request());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.retryable());
        CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
    }
    CHECK(srv.prefix_calls == 2);
}

TEST_CASE("non-retryable statuses fail immediately") {
    TestServer srv;
    srv.teapot = true;
    HttpBackendConfig cfg;
    cfg.base_url = srv.url();
    cfg.max_attempts = 3;
    cfg.backoff_initial_ms = 1;
    HttpBackend backend(cfg);

    try {
        backend.generate(make_request());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK_FALSE(e.retryable());
        CHECK(std::string(e.what()).find("418") != std::string::npos);
    }
    CHECK(srv.prefix_calls == 1); // no retry on a client error
}

TEST_CASE("unreachable host raises a retryable error after retries") {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:1"; // nothing listens on port 1
    cfg.max_attempts = 2;
    cfg.backoff_initial_ms = 1;
    cfg.timeout_seconds = 2;
    HttpBackend backend(cfg);
    try {
        backend.generate(make_request());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.retryable());
    }
}

TEST_CASE("http factory reads config and env api key") {
    auto b = make_backend({{"type", "http"},
                           {"base_url", "http://127.0.0.1:9"},
                           {"model_id", "m"},
                           {"mode", "chat"}});
    CHECK(b->id().find("chat") != std::string::npos);
    CHECK(b->id().find("m") != std::string::npos);
    CHECK_THROWS_AS(make_backend({{"type", "http"}}), ConfigError);
}
