#pragma once

#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/prompting.hpp"

namespace switchcot {

// One strategy executed on one question, with full token accounting.
struct Outcome {
    std::string question_id;
    Strategy strategy = Strategy::short_cot;
    std::string transcript; // full assistant text including the prefix
    std::string think_text; // between "<think>" and "</think>"
    std::string answer_text; // after "</think>"
    int think_tokens = 0;
    int answer_tokens = 0;
    int total_tokens = 0; // always think_tokens + answer_tokens
    bool truncated = false;
    bool forced_final = false; // implies truncated
};

nlohmann::json to_json(const Outcome& o);
Outcome outcome_from_json(const nlohmann::json& j);

// Splits an assistant transcript at its single "</think>". With no close tag
// at all: a lone "<think>" means the model never stopped thinking (answer
// empty); no tags at all means the whole text is the answer.
// More than one "</think>" is a malformed transcript (DataError).
std::pair<std::string, std::string> split_transcript(const std::string& text);

struct StrategyRunOptions {
    std::string model_id;
    double temperature = 0.0;
    std::optional<long long> seed;
};

// Executes one strategy under an optional budget.
//
// Unbounded: one unrestricted generation.
// Bounded: the budget covers think + answer combined. Phase 1 may spend
// max_total_tokens - answer_reserve; if it ends without closing the think
// block, the closing tag and a "Final answer" prompt are appended and a
// second generation spends what remains of the reserve. Guarantees
// total_tokens <= max_total_tokens for token-exact backends.
Outcome run_strategy(const Question& q, Strategy strategy, const std::optional<Budget>& budget,
                     Backend& backend, const PromptTemplates& templates,
                     const StrategyRunOptions& opts = {});

} // namespace switchcot
