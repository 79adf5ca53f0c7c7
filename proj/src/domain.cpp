#include "switchcot/domain.hpp"

#include <charconv>
#include <map>

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

std::string to_string(AnswerFormat f) {
    switch (f) {
        case AnswerFormat::short_answer: return "short_answer";
        case AnswerFormat::multiple_choice: return "multiple_choice";
        case AnswerFormat::numeric_scale: return "numeric_scale";
        case AnswerFormat::free_text: return "free_text";
    }
    throw DataError("unreachable answer_format");
}

AnswerFormat answer_format_from_string(const std::string& s) {
    if (s == "short_answer") return AnswerFormat::short_answer;
    if (s == "multiple_choice") return AnswerFormat::multiple_choice;
    if (s == "numeric_scale") return AnswerFormat::numeric_scale;
    if (s == "free_text") return AnswerFormat::free_text;
    throw DataError("unknown answer_format: " + s);
}

std::string to_string(Category c) {
    switch (c) {
        case Category::math: return "math";
        case Category::knowledge: return "knowledge";
        case Category::social: return "social";
        case Category::fact: return "fact";
        case Category::creative: return "creative";
        case Category::sentiment: return "sentiment";
        case Category::other: return "other";
    }
    throw DataError("unreachable category");
}

Category category_from_string(const std::string& s) {
    if (s == "math") return Category::math;
    if (s == "knowledge") return Category::knowledge;
    if (s == "social") return Category::social;
    if (s == "fact") return Category::fact;
    if (s == "creative") return Category::creative;
    if (s == "sentiment") return Category::sentiment;
    if (s == "other") return Category::other;
    throw DataError("unknown category: " + s);
}

std::string to_string(Strategy s) {
    return s == Strategy::short_cot ? "short" : "long";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "short") return Strategy::short_cot;
    if (s == "long") return Strategy::long_cot;
    throw DataError("unknown strategy: " + s);
}

const std::vector<Category>& all_categories() {
    static const std::vector<Category> cats = {
        Category::math, Category::knowledge, Category::social, Category::fact,
        Category::creative, Category::sentiment, Category::other};
    return cats;
}

std::string to_string(ConfusionCell c) {
    switch (c) {
        case ConfusionCell::TT: return "TT";
        case ConfusionCell::TF: return "TF";
        case ConfusionCell::FT: return "FT";
        case ConfusionCell::FF: return "FF";
    }
    throw DataError("unreachable confusion cell");
}

ConfusionCell confusion_cell_from_string(const std::string& s) {
    if (s == "TT") return ConfusionCell::TT;
    if (s == "TF") return ConfusionCell::TF;
    if (s == "FT") return ConfusionCell::FT;
    if (s == "FF") return ConfusionCell::FF;
    throw DataError("unknown confusion cell: " + s);
}

ConfusionCell confusion_cell(bool short_correct, bool long_correct) {
    if (short_correct) return long_correct ? ConfusionCell::TT : ConfusionCell::TF;
    return long_correct ? ConfusionCell::FT : ConfusionCell::FF;
}

std::optional<Strategy> cell_to_label(ConfusionCell cell) {
    switch (cell) {
        case ConfusionCell::TT: return Strategy::short_cot;
        case ConfusionCell::TF: return Strategy::short_cot;
        case ConfusionCell::FT: return Strategy::long_cot;
        case ConfusionCell::FF: return std::nullopt;
    }
    throw DataError("unreachable confusion cell");
}

std::string to_string(Provenance p) {
    return p == Provenance::instance_based ? "instance_based" : "budget_aware";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "instance_based") return Provenance::instance_based;
    if (s == "budget_aware") return Provenance::budget_aware;
    throw DataError("unknown provenance: " + s);
}

void validate(const LabeledInstance& inst) {
    if (inst.question_id.empty()) throw DataError("labeled instance has empty question_id");
    bool has_budget = inst.budget.has_value();
    bool budget_aware = inst.provenance == Provenance::budget_aware;
    if (has_budget != budget_aware) {
        throw DataError("labeled instance " + inst.question_id +
                        ": budget must be present exactly when provenance is budget_aware");
    }
    if (has_budget && *inst.budget <= 0) {
        throw DataError("labeled instance " + inst.question_id + ": budget must be positive");
    }
}

nlohmann::json to_json(const Question& q) {
    nlohmann::json j{{"id", q.id},
                     {"text", q.text},
                     {"answer_format", to_string(q.answer_format)},
                     {"gold", q.gold},
                     {"dataset", q.dataset},
                     {"category", to_string(q.category)}};
    if (!q.choices.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : q.choices) arr.push_back({{"letter", c.letter}, {"text", c.text}});
        j["choices"] = std::move(arr);
    }
    if (q.answer_format == AnswerFormat::numeric_scale && (q.scale_min != 0 || q.scale_max != 4)) {
        j["scale_min"] = q.scale_min;
        j["scale_max"] = q.scale_max;
    }
    return j;
}

namespace {

std::string require_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing required field: ") + key);
    if (!it->is_string()) throw DataError(std::string("field must be a string: ") + key);
    return it->get<std::string>();
}

} // namespace

Question question_from_json(const nlohmann::json& j) {
    Question q;
    q.id = require_string(j, "id");
    q.text = require_string(j, "text");
    q.answer_format = answer_format_from_string(require_string(j, "answer_format"));
    q.gold = require_string(j, "gold");
    q.dataset = require_string(j, "dataset");
    q.category = category_from_string(require_string(j, "category"));
    if (auto it = j.find("choices"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw DataError("field must be an array: choices");
        for (const auto& cj : *it) {
            if (!cj.is_object()) throw DataError("choices entries must be objects");
            q.choices.push_back({require_string(cj, "letter"), require_string(cj, "text")});
        }
    }
    if (auto it = j.find("scale_min"); it != j.end()) q.scale_min = it->get<int>();
    if (auto it = j.find("scale_max"); it != j.end()) q.scale_max = it->get<int>();
    return q;
}

nlohmann::json to_json(const LabeledInstance& inst) {
    nlohmann::json j{{"question_id", inst.question_id},
                     {"label", to_string(inst.label)},
                     {"provenance", to_string(inst.provenance)}};
    j["budget"] = inst.budget ? nlohmann::json(*inst.budget) : nlohmann::json(nullptr);
    return j;
}

LabeledInstance labeled_instance_from_json(const nlohmann::json& j) {
    LabeledInstance inst;
    inst.question_id = require_string(j, "question_id");
    inst.label = strategy_from_string(require_string(j, "label"));
    inst.provenance = provenance_from_string(require_string(j, "provenance"));
    if (auto it = j.find("budget"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw DataError("field must be an integer or null: budget");
        inst.budget = it->get<int>();
    }
    validate(inst);
    return inst;
}

void validate(const Question& q) {
    if (q.id.empty()) throw DataError("question id must be non-empty");
    if (q.text.empty()) throw DataError("question " + q.id + ": text must be non-empty");
    if (q.answer_format == AnswerFormat::multiple_choice) {
        if (q.choices.empty()) {
            throw DataError("question " + q.id + ": multiple_choice requires choices");
        }
        bool gold_is_letter = false;
        for (const auto& c : q.choices) {
            if (c.letter.empty()) {
                throw DataError("question " + q.id + ": choice letters must be non-empty");
            }
            if (c.letter == q.gold) gold_is_letter = true;
        }
        if (!gold_is_letter) {
            throw DataError("question " + q.id + ": gold must equal one of the choice letters");
        }
    } else if (q.answer_format == AnswerFormat::numeric_scale) {
        int value = 0;
        auto res = std::from_chars(q.gold.data(), q.gold.data() + q.gold.size(), value);
        if (res.ec != std::errc{} || res.ptr != q.gold.data() + q.gold.size()) {
            throw DataError("question " + q.id + ": numeric_scale gold must be an integer");
        }
        if (value < q.scale_min || value > q.scale_max) {
            throw DataError("question " + q.id + ": gold " + q.gold + " outside scale " +
                            std::to_string(q.scale_min) + ".." + std::to_string(q.scale_max));
        }
    }
}

std::vector<Question> load_dataset(const std::string& path) {
    std::vector<Question> out;
    std::map<std::string, int> seen; // id -> first line number
    util::for_each_jsonl(path, [&](const nlohmann::json& row, int lineno) {
        Question q;
        try {
            q = question_from_json(row);
            validate(q);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto [it, inserted] = seen.emplace(q.id, lineno);
        if (!inserted) {
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate id '" + q.id +
                            "' (first seen at line " + std::to_string(it->second) + ")");
        }
        out.push_back(std::move(q));
    });
    return out;
}

} // namespace switchcot
