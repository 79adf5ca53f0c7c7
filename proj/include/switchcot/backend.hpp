#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/domain.hpp"
#include "switchcot/prompting.hpp"

namespace switchcot {

struct GenerationRequest {
    PromptBundle prompt;
    std::optional<int> max_new_tokens; // absent = unlimited
    double temperature = 0.0;
    std::string model_id;
    std::optional<long long> seed;

    // Routing metadata consumed by the fixture and synthetic backends and
    // folded into the cache key. route is one of short/long/selection/final.
    std::string question_id;
    std::string route;
};

enum class FinishReason { stop, length };

std::string to_string(FinishReason r);
FinishReason finish_reason_from_string(const std::string& s);

struct Generation {
    std::string text; // continuation only, excludes the assistant_prefix
    int completion_tokens = 0;
    FinishReason finish_reason = FinishReason::stop;
    bool cache_hit = false;
};

// Whitespace-separated unit count; the authoritative tokenizer for the mock
// and synthetic backends.
int whitespace_token_count(std::string_view text);

// ceil(len/4) character estimate used when a server does not report usage.
int approx_token_count(std::string_view text);

// Longest prefix of text holding at most max_tokens whitespace tokens,
// original bytes preserved.
struct TokenTruncation {
    std::string text;
    int tokens = 0;
    bool truncated = false;
};
TokenTruncation truncate_to_tokens(std::string_view text, int max_tokens);

class Backend {
public:
    virtual ~Backend() = default;

    // Returns the continuation after prompt.assistant_prefix. Bounded
    // requests must satisfy completion_tokens <= max_new_tokens.
    virtual Generation generate(const GenerationRequest& req) = 0;

    virtual int count_tokens(std::string_view text) const = 0;

    // True when count_tokens matches the generator exactly (mock/synthetic);
    // false when counts are server-reported or estimated (HTTP).
    virtual bool exact_token_counts() const = 0;

    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Fixture-driven mock: scripted continuations keyed by (question_id, route).
// ---------------------------------------------------------------------------

struct MockFixture {
    std::string question_id;
    std::string strategy; // short | long | selection | final
    std::string text;
    std::optional<long long> seed; // optional per-repetition variant
};

class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<MockFixture> fixtures);

    // Fixture file: JSONL of {question_id, strategy, text[, seed]}.
    static std::shared_ptr<MockBackend> from_file(const std::string& path);

    Generation generate(const GenerationRequest& req) override;
    int count_tokens(std::string_view text) const override;
    bool exact_token_counts() const override { return true; }
    std::string id() const override { return "mock"; }

private:
    // seed-specific rows preferred, (qid, strategy) rows the fallback
    std::map<std::tuple<std::string, std::string, long long>, std::string> seeded_;
    std::map<std::pair<std::string, std::string>, std::string> rows_;
};

// ---------------------------------------------------------------------------
// Synthetic reasoner: a deterministic model stand-in whose correctness is
// decided by a think-token threshold, giving tests an independent oracle.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    std::string question_id;
    int required_think_tokens = 0;
    std::string correct_answer;
    std::string wrong_answer;
    std::string think_filler_token = "hmm";
    // whether the direct (short CoT) answer is the correct one
    bool short_correct = false;
};

// Correctness contract:
//   long CoT: the full think + close + answer is emitted only when it fits
//     the request bound, so the answer is the correct one iff the allotted
//     think tokens reach required_think_tokens; otherwise the output is
//     filler cut at the bound (finish_reason=length, no dangling close).
//   short CoT: emits correct_answer iff short_correct.
//   forced final: answers from the think tokens already present in the
//     prompt, correct iff they reach required_think_tokens.
//   selection: answers "B." when required_think_tokens > 0, else "A.".
class SyntheticBackend : public Backend {
public:
    explicit SyntheticBackend(std::vector<SyntheticSpec> specs);

    static std::shared_ptr<SyntheticBackend> from_file(const std::string& path);

    Generation generate(const GenerationRequest& req) override;
    int count_tokens(std::string_view text) const override;
    bool exact_token_counts() const override { return true; }
    std::string id() const override { return "synthetic"; }

    const SyntheticSpec& spec_for(const std::string& question_id) const;

private:
    std::map<std::string, SyntheticSpec> specs_;
};

// ---------------------------------------------------------------------------
// Content-addressed generation cache.
// ---------------------------------------------------------------------------

struct CacheStats {
    long hits = 0;
    long misses = 0;
    long backend_calls = 0;
    std::vector<std::string> warnings;
};

class CachedBackend : public Backend {
public:
    CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir);

    Generation generate(const GenerationRequest& req) override;
    int count_tokens(std::string_view text) const override { return inner_->count_tokens(text); }
    bool exact_token_counts() const override { return inner_->exact_token_counts(); }
    std::string id() const override { return inner_->id(); }

    CacheStats stats() const;

    // digest of the canonical serialized request; includes the backend id
    static std::string cache_key(const GenerationRequest& req, const std::string& backend_id);

    const std::filesystem::path& cache_dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::shared_ptr<Backend> inner_;
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    CacheStats stats_;
};

// Cache administration shared by the CLI `cache` subcommands.
struct CacheDiskStats {
    long entries = 0;
    long long bytes = 0;
};
CacheDiskStats cache_disk_stats(const std::filesystem::path& dir);
long cache_clear(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend.
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url; // e.g. http://localhost:8000
    std::string model_id;
    std::string mode = "prefix"; // prefix | chat
    bool chat_continuation = true; // chat mode: send the prefix as an open assistant turn
    std::string api_key; // empty = no Authorization header
    int max_attempts = 3;
    int backoff_initial_ms = 200;
    int timeout_seconds = 120;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    Generation generate(const GenerationRequest& req) override;
    int count_tokens(std::string_view text) const override;
    bool exact_token_counts() const override { return false; }
    std::string id() const override;

    // True when chat mode had to fold the assistant prefix into the user
    // turn; surfaced in run manifests.
    bool prefix_folded_into_user_turn() const;

private:
    HttpBackendConfig cfg_;
};

// Builds a backend from a JSON config object with a `type` field of
// mock | synthetic | http. Used by the CLI and the labeling pipeline.
std::shared_ptr<Backend> make_backend(const nlohmann::json& cfg);

} // namespace switchcot
