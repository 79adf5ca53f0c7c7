#include "switchcot/backend.hpp"

#include <cctype>
#include <cstdlib>

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

std::string to_string(FinishReason r) {
    return r == FinishReason::stop ? "stop" : "length";
}

FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    throw DataError("unknown finish_reason: " + s);
}

int whitespace_token_count(std::string_view text) {
    int count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        bool ws = std::isspace(c) != 0;
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

int approx_token_count(std::string_view text) {
    return int((text.size() + 3) / 4);
}

TokenTruncation truncate_to_tokens(std::string_view text, int max_tokens) {
    if (max_tokens <= 0) {
        return {"", 0, whitespace_token_count(text) > 0};
    }
    int count = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
        if (!ws && !in_token) {
            ++count;
            in_token = true;
        } else if (ws && in_token) {
            in_token = false;
            if (count == max_tokens) {
                bool more = text.find_first_not_of(" \t\r\n\f\v", i) != std::string_view::npos;
                if (!more) return {std::string(text), count, false};
                return {std::string(text.substr(0, i)), count, true};
            }
        }
    }
    return {std::string(text), count, false};
}

namespace {

Generation bounded(std::string text, const GenerationRequest& req) {
    Generation g;
    if (req.max_new_tokens) {
        TokenTruncation t = truncate_to_tokens(text, *req.max_new_tokens);
        g.text = std::move(t.text);
        g.completion_tokens = t.tokens;
        g.finish_reason = t.truncated ? FinishReason::length : FinishReason::stop;
    } else {
        g.completion_tokens = whitespace_token_count(text);
        g.text = std::move(text);
        g.finish_reason = FinishReason::stop;
    }
    return g;
}

const std::string& require_route(const GenerationRequest& req, const char* backend) {
    if (req.route.empty()) {
        throw BackendError(std::string(backend) +
                           " backend requires request route metadata (short/long/selection/final)");
    }
    return req.route;
}

} // namespace

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

MockBackend::MockBackend(std::vector<MockFixture> fixtures) {
    for (auto& f : fixtures) {
        if (f.seed) {
            seeded_[{f.question_id, f.strategy, *f.seed}] = std::move(f.text);
        } else {
            rows_[{f.question_id, f.strategy}] = std::move(f.text);
        }
    }
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
    std::vector<MockFixture> fixtures;
    util::for_each_jsonl(path, [&](const nlohmann::json& row, int lineno) {
        MockFixture f;
        try {
            f.question_id = row.at("question_id").get<std::string>();
            f.strategy = row.at("strategy").get<std::string>();
            f.text = row.at("text").get<std::string>();
            if (auto it = row.find("seed"); it != row.end() && !it->is_null()) {
                f.seed = it->get<long long>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        fixtures.push_back(std::move(f));
    });
    return std::make_shared<MockBackend>(std::move(fixtures));
}

Generation MockBackend::generate(const GenerationRequest& req) {
    const std::string& route = require_route(req, "mock");
    const std::string* text = nullptr;
    if (req.seed) {
        auto it = seeded_.find({req.question_id, route, *req.seed});
        if (it != seeded_.end()) text = &it->second;
    }
    if (!text) {
        auto it = rows_.find({req.question_id, route});
        if (it != rows_.end()) text = &it->second;
    }
    if (!text) {
        // a missing forced-final row means the scripted model had nothing
        // more to say; an empty answer is scored incorrect, not an error
        if (route == "final") return bounded("", req);
        throw BackendError("mock fixture miss: question_id=" + req.question_id +
                           " strategy=" + route);
    }
    return bounded(*text, req);
}

int MockBackend::count_tokens(std::string_view text) const {
    return whitespace_token_count(text);
}

// ---------------------------------------------------------------------------
// SyntheticBackend
// ---------------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(std::vector<SyntheticSpec> specs) {
    for (auto& s : specs) {
        std::string id = s.question_id;
        specs_.emplace(std::move(id), std::move(s));
    }
}

std::shared_ptr<SyntheticBackend> SyntheticBackend::from_file(const std::string& path) {
    std::vector<SyntheticSpec> specs;
    util::for_each_jsonl(path, [&](const nlohmann::json& row, int lineno) {
        SyntheticSpec s;
        try {
            s.question_id = row.at("question_id").get<std::string>();
            s.required_think_tokens = row.at("required_think_tokens").get<int>();
            s.correct_answer = row.at("correct_answer").get<std::string>();
            s.wrong_answer = row.at("wrong_answer").get<std::string>();
            if (auto it = row.find("think_filler_token"); it != row.end()) {
                s.think_filler_token = it->get<std::string>();
            }
            if (auto it = row.find("short_correct"); it != row.end()) {
                s.short_correct = it->get<bool>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        specs.push_back(std::move(s));
    });
    return std::make_shared<SyntheticBackend>(std::move(specs));
}

const SyntheticSpec& SyntheticBackend::spec_for(const std::string& question_id) const {
    auto it = specs_.find(question_id);
    if (it == specs_.end()) {
        throw BackendError("synthetic backend has no spec for question_id=" + question_id);
    }
    return it->second;
}

Generation SyntheticBackend::generate(const GenerationRequest& req) {
    const std::string& route = require_route(req, "synthetic");
    const SyntheticSpec& spec = spec_for(req.question_id);

    if (route == "selection") {
        std::string text = spec.required_think_tokens > 0 ? "B. Long Chain of Thought"
                                                          : "A. Short Chain of Thought";
        return bounded(std::move(text), req);
    }

    if (route == "short") {
        const std::string& ans = spec.short_correct ? spec.correct_answer : spec.wrong_answer;
        return bounded("\n\n" + ans, req);
    }

    if (route == "final") {
        // answer quality depends on how much thinking the prompt already holds
        std::string think;
        const std::string& prefix = req.prompt.assistant_prefix;
        auto open = prefix.find("<think>");
        auto close = prefix.find("</think>");
        if (open != std::string::npos && close != std::string::npos && close > open) {
            think = prefix.substr(open + 7, close - open - 7);
        }
        bool enough = whitespace_token_count(think) >= spec.required_think_tokens;
        return bounded(" " + (enough ? spec.correct_answer : spec.wrong_answer), req);
    }

    if (route == "long") {
        std::string full;
        for (int i = 0; i < spec.required_think_tokens; ++i) {
            if (i) full += ' ';
            full += spec.think_filler_token;
        }
        // the closing tag glues onto the last filler token so the think
        // segment counts exactly required_think_tokens
        full += "</think>\n\n" + spec.correct_answer;
        int full_tokens = whitespace_token_count(full);
        if (!req.max_new_tokens || full_tokens <= *req.max_new_tokens) {
            Generation g;
            g.text = std::move(full);
            g.completion_tokens = full_tokens;
            g.finish_reason = FinishReason::stop;
            return g;
        }
        // not enough room to finish: emit filler to the cap, never a
        // dangling close, so truncation is visible to the budget protocol
        int n = *req.max_new_tokens;
        std::string filler;
        for (int i = 0; i < n; ++i) {
            if (i) filler += ' ';
            filler += spec.think_filler_token;
        }
        Generation g;
        g.text = std::move(filler);
        g.completion_tokens = n;
        g.finish_reason = FinishReason::length;
        return g;
    }

    throw BackendError("synthetic backend: unknown route " + route);
}

int SyntheticBackend::count_tokens(std::string_view text) const {
    return whitespace_token_count(text);
}

// ---------------------------------------------------------------------------
// factory
// ---------------------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const nlohmann::json& cfg) {
    if (!cfg.is_object() || !cfg.contains("type")) {
        throw ConfigError("backend config must be an object with a type field");
    }
    std::string type = cfg.at("type").get<std::string>();
    if (type == "mock") {
        if (!cfg.contains("fixtures")) throw ConfigError("mock backend needs fixtures path");
        return MockBackend::from_file(cfg.at("fixtures").get<std::string>());
    }
    if (type == "synthetic") {
        if (!cfg.contains("config")) throw ConfigError("synthetic backend needs config path");
        return SyntheticBackend::from_file(cfg.at("config").get<std::string>());
    }
    if (type == "http") {
        HttpBackendConfig hc;
        if (!cfg.contains("base_url")) throw ConfigError("http backend needs base_url");
        hc.base_url = cfg.at("base_url").get<std::string>();
        if (auto it = cfg.find("model_id"); it != cfg.end()) hc.model_id = it->get<std::string>();
        if (auto it = cfg.find("mode"); it != cfg.end()) hc.mode = it->get<std::string>();
        if (hc.mode != "prefix" && hc.mode != "chat") {
            throw ConfigError("http backend mode must be prefix or chat");
        }
        if (auto it = cfg.find("chat_continuation"); it != cfg.end()) {
            hc.chat_continuation = it->get<bool>();
        }
        if (auto it = cfg.find("timeout_seconds"); it != cfg.end()) {
            hc.timeout_seconds = it->get<int>();
        }
        if (auto it = cfg.find("max_attempts"); it != cfg.end()) {
            hc.max_attempts = it->get<int>();
        }
        if (auto it = cfg.find("backoff_initial_ms"); it != cfg.end()) {
            hc.backoff_initial_ms = it->get<int>();
        }
        if (const char* key = std::getenv("SWITCHCOT_API_KEY"); key && *key) {
            hc.api_key = key;
        } else if (auto it = cfg.find("api_key"); it != cfg.end()) {
            hc.api_key = it->get<std::string>();
        }
        return std::make_shared<HttpBackend>(std::move(hc));
    }
    throw ConfigError("unknown backend type: " + type);
}

} // namespace switchcot
