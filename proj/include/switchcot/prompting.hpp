#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/domain.hpp"

namespace switchcot {

// A single-turn prompt: the user message plus the text the assistant turn
// must begin with. stop_sequences default empty; budgets are enforced by
// token counting, not stop strings.
struct PromptBundle {
    std::string user_text;
    std::string assistant_prefix;
    std::vector<std::string> stop_sequences;
};

// Assistant-turn openers. The placeholder block makes the model skip the
// deliberation phase entirely.
const std::string& think_open();
const std::string& short_placeholder_prefix();

// Fixed continuation used when a truncated think phase must be closed before
// the final answer is elicited.
const std::string& final_answer_suffix();

// Per (strategy, answer_format) instruction sentences appended after the
// question body. Defaults are built in; entries can be replaced from a
// JSON override table whose byte content is authoritative.
class PromptTemplates {
public:
    PromptTemplates(); // defaults

    static PromptTemplates from_file(const std::string& path);

    // Overrides: array of {"strategy","answer_format","user_suffix"}.
    void apply_overrides(const nlohmann::json& table);

    const std::string& instruction(Strategy s, AnswerFormat f) const;

private:
    std::map<std::pair<Strategy, AnswerFormat>, std::string> table_;
};

// Question body shared by every prompt: the text, plus inline
// " Answer Choices: (A) ... (B) ..." and a closing period when choices exist.
std::string question_body(const Question& q);

PromptBundle build_long_prompt(const Question& q, const PromptTemplates& templates);
PromptBundle build_short_prompt(const Question& q, const PromptTemplates& templates);
PromptBundle build_prompt(const Question& q, Strategy s, const PromptTemplates& templates);

// The A-or-B method-selection prompt. Uses the placeholder assistant prefix
// so the selector answers immediately instead of deliberating.
PromptBundle build_selection_prompt(const Question& q);

} // namespace switchcot
