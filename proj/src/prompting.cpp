#include "switchcot/prompting.hpp"

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

const std::string& think_open() {
    static const std::string s = "<think>";
    return s;
}

const std::string& short_placeholder_prefix() {
    static const std::string s = "<think>Okay, I think I have finished thinking.</think>";
    return s;
}

const std::string& final_answer_suffix() {
    static const std::string s = "</think>\n\nFinal answer:";
    return s;
}

PromptTemplates::PromptTemplates() {
    const std::string mc_tail =
        "finish your answer with 'the answer is (X)' where X is the correct letter choice.";
    const std::string scale =
        "Please analyze the sentiment using 0-4. 0 means very negative while 4 means very "
        "positive.";
    table_[{Strategy::long_cot, AnswerFormat::multiple_choice}] =
        "Think step by step and then " + mc_tail;
    table_[{Strategy::short_cot, AnswerFormat::multiple_choice}] =
        "Please answer the question directly without any thinking process and then " + mc_tail;
    table_[{Strategy::long_cot, AnswerFormat::short_answer}] =
        "Think step by step and put your final answer within \\boxed{}.";
    table_[{Strategy::short_cot, AnswerFormat::short_answer}] =
        "Please write the answer for this math problem directly without any thinking process.";
    table_[{Strategy::long_cot, AnswerFormat::numeric_scale}] = scale;
    table_[{Strategy::short_cot, AnswerFormat::numeric_scale}] = scale;
    table_[{Strategy::long_cot, AnswerFormat::free_text}] =
        "Think step by step and then write your final answer.";
    table_[{Strategy::short_cot, AnswerFormat::free_text}] =
        "Please answer the question directly without any thinking process.";
}

PromptTemplates PromptTemplates::from_file(const std::string& path) {
    PromptTemplates t;
    nlohmann::json table = nlohmann::json::parse(util::read_file(path), nullptr, false);
    if (table.is_discarded()) throw ConfigError("template override file is not valid JSON: " + path);
    t.apply_overrides(table);
    return t;
}

void PromptTemplates::apply_overrides(const nlohmann::json& table) {
    if (!table.is_array()) throw ConfigError("template overrides must be a JSON array");
    for (const auto& entry : table) {
        if (!entry.is_object() || !entry.contains("strategy") ||
            !entry.contains("answer_format") || !entry.contains("user_suffix")) {
            throw ConfigError(
                "template override entries need strategy, answer_format, user_suffix");
        }
        Strategy s = strategy_from_string(entry.at("strategy").get<std::string>());
        AnswerFormat f = answer_format_from_string(entry.at("answer_format").get<std::string>());
        // byte content is authoritative: no trimming or normalization
        table_[{s, f}] = entry.at("user_suffix").get<std::string>();
    }
}

const std::string& PromptTemplates::instruction(Strategy s, AnswerFormat f) const {
    auto it = table_.find({s, f});
    if (it == table_.end()) {
        throw ConfigError("no prompt template for strategy " + to_string(s) + ", format " +
                          to_string(f));
    }
    return it->second;
}

std::string question_body(const Question& q) {
    std::string body = q.text;
    if (!q.choices.empty()) {
        body += " Answer Choices:";
        for (const auto& c : q.choices) body += " (" + c.letter + ") " + c.text;
        body += ".";
    }
    return body;
}

PromptBundle build_prompt(const Question& q, Strategy s, const PromptTemplates& templates) {
    validate(q);
    PromptBundle b;
    b.user_text = question_body(q) + "\n" + templates.instruction(s, q.answer_format);
    b.assistant_prefix = (s == Strategy::long_cot) ? think_open() : short_placeholder_prefix();
    return b;
}

PromptBundle build_long_prompt(const Question& q, const PromptTemplates& templates) {
    return build_prompt(q, Strategy::long_cot, templates);
}

PromptBundle build_short_prompt(const Question& q, const PromptTemplates& templates) {
    return build_prompt(q, Strategy::short_cot, templates);
}

PromptBundle build_selection_prompt(const Question& q) {
    validate(q);
    PromptBundle b;
    std::string text =
        "You are given a question. Decide the most appropriate method to answer it based on "
        "the complexity and depth required.\n";
    text += "Question: " + question_body(q) + "\n";
    if (q.answer_format == AnswerFormat::numeric_scale) {
        // the scale instruction is part of the question presentation, so the
        // selector sees the same task the answerer would
        text +=
            "Please analyze the sentiment using 0-4. 0 means very negative while 4 means very "
            "positive.\n";
    }
    text += "Which method should be used to answer this question?\n";
    text +=
        "A. Short Chain of Thought – Use this if the question is simple or factual, and "
        "can be answered correctly without deep reasoning or extended explanation.\n";
    text +=
        "B. Long Chain of Thought – Use this if the question requires in-depth reasoning, "
        "multiple steps, or a comprehensive explanation to reach a correct answer.\n";
    text += "Just answer A or B. Do not answer the question.";
    b.user_text = std::move(text);
    b.assistant_prefix = short_placeholder_prefix();
    return b;
}

} // namespace switchcot
