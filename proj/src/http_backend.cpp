#include "switchcot/backend.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("http backend base_url must be non-empty");
    if (cfg_.mode != "prefix" && cfg_.mode != "chat") {
        throw ConfigError("http backend mode must be prefix or chat");
    }
}

std::string HttpBackend::id() const {
    return "http:" + cfg_.model_id + ":" + cfg_.mode;
}

bool HttpBackend::prefix_folded_into_user_turn() const {
    return cfg_.mode == "chat" && !cfg_.chat_continuation;
}

int HttpBackend::count_tokens(std::string_view text) const {
    return approx_token_count(text);
}

namespace {

struct ParsedResponse {
    std::string text;
    std::optional<int> completion_tokens;
    std::string finish_reason;
};

ParsedResponse parse_body(const std::string& body, bool chat) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw BackendError("malformed response: not JSON");
    ParsedResponse out;
    try {
        const auto& choice = j.at("choices").at(0);
        out.text = chat ? choice.at("message").at("content").get<std::string>()
                        : choice.at("text").get<std::string>();
        if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
            out.finish_reason = it->get<std::string>();
        }
        if (j.contains("usage") && j.at("usage").contains("completion_tokens")) {
            out.completion_tokens = j.at("usage").at("completion_tokens").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed response: ") + e.what());
    }
    return out;
}

} // namespace

Generation HttpBackend::generate(const GenerationRequest& req) {
    const bool chat = cfg_.mode == "chat";
    const std::string path = chat ? "/v1/chat/completions" : "/v1/completions";

    nlohmann::json body;
    body["model"] = req.model_id.empty() ? cfg_.model_id : req.model_id;
    body["temperature"] = req.temperature;
    if (req.max_new_tokens) body["max_tokens"] = *req.max_new_tokens;
    if (req.seed) body["seed"] = *req.seed;
    if (!req.prompt.stop_sequences.empty()) body["stop"] = req.prompt.stop_sequences;
    if (chat) {
        nlohmann::json messages = nlohmann::json::array();
        if (cfg_.chat_continuation) {
            messages.push_back({{"role", "user"}, {"content", req.prompt.user_text}});
            messages.push_back({{"role", "assistant"}, {"content", req.prompt.assistant_prefix}});
        } else {
            messages.push_back(
                {{"role", "user"},
                 {"content", req.prompt.user_text + "\n" + req.prompt.assistant_prefix}});
        }
        body["messages"] = std::move(messages);
    } else {
        body["prompt"] = req.prompt.user_text + "\n" + req.prompt.assistant_prefix;
    }
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, cfg_.max_attempts); ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(
                static_cast<long>(cfg_.backoff_initial_ms * std::pow(2.0, attempt - 1)));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("http backend status " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               /*retryable=*/false);
        }
        ParsedResponse parsed = parse_body(res->body, chat);
        Generation g;
        g.text = std::move(parsed.text);
        if (parsed.completion_tokens) {
            g.completion_tokens = *parsed.completion_tokens; // server count is authoritative
        } else {
            g.completion_tokens = approx_token_count(g.text);
            if (req.max_new_tokens) {
                g.completion_tokens = std::min(g.completion_tokens, *req.max_new_tokens);
            }
        }
        g.finish_reason =
            parsed.finish_reason == "length" ? FinishReason::length : FinishReason::stop;
        return g;
    }
    throw BackendError("http backend failed after " + std::to_string(cfg_.max_attempts) +
                           " attempts: " + last_error,
                       /*retryable=*/true);
}

} // namespace switchcot
