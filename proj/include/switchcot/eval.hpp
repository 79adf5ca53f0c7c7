#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/budget_force.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/selector.hpp"

namespace switchcot {

// ---------------------------------------------------------------------------
// answer extraction and scoring
// ---------------------------------------------------------------------------

// Canonical answer form: trimmed, markup stripped, trailing period dropped,
// lowercased, thousands separators removed ("720." -> "720").
std::string normalize_answer(const std::string& s);

struct ExtractionContext {
    std::vector<std::string> choice_letters; // multiple choice letter range
    int scale_min = 0;
    int scale_max = 4;

    static ExtractionContext for_question(const Question& q);
};

struct Extraction {
    bool ok = false;
    std::string value; // normalized
};

// Last-occurrence-wins extraction: reasoning transcripts restate candidates,
// and the final statement is the commitment.
//   multiple_choice: last "the answer is (X)", else last parenthesized
//     letter, else last standalone letter in the choice range.
//   short_answer: last \boxed{...} content, else the last number.
//   numeric_scale: last bold-or-plain integer inside the scale range.
//   free_text: the whole text, normalized.
Extraction extract_answer(const std::string& text, AnswerFormat format,
                          const ExtractionContext& ctx = {});

// String equality over normalized forms; short_answer additionally accepts
// numeric equality within 1e-6 relative when both sides parse as numbers.
bool score(const std::string& predicted, const std::string& gold, AnswerFormat format);

struct Scored {
    bool extraction_ok = false;
    std::string extracted;
    bool correct = false;
};

// Extracts from the outcome's answer segment and compares to the gold.
Scored score_outcome(const Question& q, const Outcome& o);

// ---------------------------------------------------------------------------
// evaluation runs
// ---------------------------------------------------------------------------

struct EvalRecord {
    std::string question_id;
    std::string selector_id;
    Strategy strategy_used = Strategy::short_cot;
    bool correct = false;
    int total_tokens = 0;
    std::optional<int> budget;
    bool extraction_ok = false;
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

struct EvalOptions {
    std::string model_id;
    double temperature = 0.0;
    int workers = 4;
};

struct EvalRunResult {
    std::vector<EvalRecord> records; // question-id order
    std::vector<Outcome> outcomes; // parallel to records
    std::vector<std::string> backend_error_ids; // excluded from denominators
};

// Two-stage pipeline: select a strategy per question (budget-aware when the
// policy is bounded), then execute it under the budget and score.
EvalRunResult run_eval(const std::vector<Question>& dataset, Selector& selector,
                       Backend& backend, const std::optional<Budget>& budget_policy,
                       const PromptTemplates& templates, const EvalOptions& opts = {});

struct ConfusionCounts {
    long tt = 0;
    long tf = 0;
    long ft = 0;
    long ff = 0;

    long total() const { return tt + tf + ft + ff; }
};

struct ConfusionResult {
    ConfusionCounts counts;
    // per question: the cell plus both outcomes, question-id order
    std::vector<std::tuple<std::string, ConfusionCell>> cells;
    std::vector<Outcome> outcomes;
    std::vector<std::string> backend_error_ids;
};

// Runs both strategies on every question and tabulates the four cells.
ConfusionResult confusion_report(const std::vector<Question>& dataset, Backend& backend,
                                 const std::optional<Budget>& budget,
                                 const PromptTemplates& templates, const EvalOptions& opts = {});

struct SweepRow {
    std::string selector_id;
    int budget = 0;
    double accuracy = 0.0;
    double mean_tokens = 0.0;
    long n = 0;
};

// Full cross product of selectors and budgets under Budget Force.
std::vector<SweepRow> budget_sweep(const std::vector<Question>& dataset,
                                   const std::vector<std::shared_ptr<Selector>>& selectors,
                                   const std::vector<int>& budgets, int answer_reserve,
                                   Backend& backend, const PromptTemplates& templates,
                                   const EvalOptions& opts = {});

// header: selector,budget,accuracy,mean_tokens,n
std::string render_sweep_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

struct ReportRow {
    std::string category; // category name or "ALL"
    long n = 0;
    long correct = 0;
    double accuracy = 0.0; // correct / n
    double mean_tokens = 0.0;
};

struct Report {
    std::vector<ReportRow> rows; // categories in fixed order, then "ALL"
    ConfusionCounts confusion; // zeros for plain eval runs
    nlohmann::json manifest; // backend id, budget policy, selector, seeds, cache stats
};

// Exact rational aggregates over id-sorted records; categories roll up in
// the fixed presentation order with an "ALL" total row.
Report aggregate(const std::vector<EvalRecord>& records, const std::vector<Question>& dataset);

std::string render_report_json(const Report& r);
std::string render_report_csv(const Report& r);
std::string render_report_markdown(const Report& r);

Report report_from_json(const std::string& text);
// CSV carries the rows only; confusion and manifest come back empty.
Report report_from_csv(const std::string& text);

} // namespace switchcot
