#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace switchcot {

enum class AnswerFormat { short_answer, multiple_choice, numeric_scale, free_text };

enum class Category { math, knowledge, social, fact, creative, sentiment, other };

// Strategy keeps a total order (short < long) so serialized output is stable.
enum class Strategy { short_cot, long_cot };

std::string to_string(AnswerFormat f);
std::string to_string(Category c);
std::string to_string(Strategy s);

AnswerFormat answer_format_from_string(const std::string& s);
Category category_from_string(const std::string& s);
Strategy strategy_from_string(const std::string& s);

// All seven categories in the fixed presentation order used by reports.
const std::vector<Category>& all_categories();

struct Choice {
    std::string letter;
    std::string text;

    bool operator==(const Choice&) const = default;
};

struct Question {
    std::string id;
    std::string text;
    AnswerFormat answer_format = AnswerFormat::free_text;
    std::vector<Choice> choices;
    std::string gold;
    std::string dataset;
    Category category = Category::other;

    // numeric_scale bounds; fixed 0..4 unless the dataset row overrides them
    int scale_min = 0;
    int scale_max = 4;

    bool operator==(const Question&) const = default;
};

// Token budget for one generation; unbounded when max_total_tokens is absent.
// answer_reserve is held back from the think phase for the forced final answer.
struct Budget {
    std::optional<int> max_total_tokens;
    int answer_reserve = 32;

    bool bounded() const { return max_total_tokens.has_value(); }
};

enum class ConfusionCell { TT, TF, FT, FF };

std::string to_string(ConfusionCell c);
ConfusionCell confusion_cell_from_string(const std::string& s);

// First letter encodes short-CoT correctness, second long-CoT correctness.
ConfusionCell confusion_cell(bool short_correct, bool long_correct);

// TT/TF -> short (the cheaper strategy wins whenever short CoT is correct),
// FT -> long, FF -> nullopt (instance is discarded as inherently hard).
std::optional<Strategy> cell_to_label(ConfusionCell cell);

enum class Provenance { instance_based, budget_aware };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct LabeledInstance {
    std::string question_id;
    std::optional<int> budget;
    Strategy label = Strategy::short_cot;
    Provenance provenance = Provenance::instance_based;

    bool operator==(const LabeledInstance&) const = default;
};

// Throws DataError if the budget/provenance coupling is violated.
void validate(const LabeledInstance& inst);

nlohmann::json to_json(const Question& q);
Question question_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LabeledInstance& inst);
LabeledInstance labeled_instance_from_json(const nlohmann::json& j);

// Loads a dataset file (one Question JSON object per line). Structural or
// semantic problems raise DataError naming the offending line; duplicate ids
// name both lines involved.
std::vector<Question> load_dataset(const std::string& path);

// Validation used by load_dataset and exposed for single-question checks.
void validate(const Question& q);

} // namespace switchcot
