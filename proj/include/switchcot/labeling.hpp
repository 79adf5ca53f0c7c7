#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/budget_force.hpp"
#include "switchcot/domain.hpp"

namespace switchcot {

// Correctness of one outcome for one question; defaults to the evaluation
// module's extract-and-score rule.
using OutcomeScorer = std::function<bool(const Question&, const Outcome&)>;
OutcomeScorer default_scorer();

struct DiscardRecord {
    std::string question_id;
    std::optional<int> budget; // absent for instance-based discards
};

struct LabelingRunResult {
    std::vector<LabeledInstance> labeled;
    std::vector<DiscardRecord> discarded; // confusion cell FF
    std::vector<std::string> errors; // backend failures, pipeline continued
    std::vector<Outcome> outcomes; // everything executed, for audit
};

struct LabelingOptions {
    int reps = 1; // strategy counts correct iff a strict majority of reps do
    int workers = 4;
    int answer_reserve = 32;
    std::string model_id;
    double temperature = 0.0;
    long long seed = 0;
};

// Scores both outcomes, forms the confusion cell, applies the cell map.
// Empty result = FF, the instance is discarded as inherently hard.
std::optional<LabeledInstance> label_instance(const Question& q, const Outcome& outcome_short,
                                              const Outcome& outcome_long,
                                              const OutcomeScorer& scorer);

// Runs both strategies unbounded on every question, `reps` times each, and
// labels by confusion cell. Every input question lands in exactly one of
// labeled / discarded / errors.
LabelingRunResult run_instance_labeling(const std::vector<Question>& dataset, Backend& backend,
                                        const PromptTemplates& templates,
                                        const LabelingOptions& opts = {});

struct BudgetThreshold {
    std::string dataset;
    int b_d = 0; // always a member of the evaluated grid
    std::string method; // "crossover" or "no_crossover"
    struct GridPoint {
        int budget = 0;
        double acc_short = 0.0;
        double acc_long = 0.0;
    };
    std::vector<GridPoint> grid_evaluated;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const BudgetThreshold& t);
BudgetThreshold budget_threshold_from_json(const nlohmann::json& j);

struct ThresholdOptions {
    int workers = 4;
    int answer_reserve = 32;
    int min_sample = 20; // below this, accuracies get a small-sample warning
    std::string model_id;
    double temperature = 0.0;
};

// Evaluates both pure strategies under Budget Force at every grid budget.
// b_d is the smallest grid budget where long CoT at least matches short CoT;
// with no such point, the largest grid budget is tagged "no_crossover".
BudgetThreshold estimate_budget_threshold(const std::vector<Question>& dataset, Backend& backend,
                                          const PromptTemplates& templates,
                                          const std::vector<int>& grid,
                                          const ThresholdOptions& opts = {});

struct SampledBudgets {
    std::vector<int> budgets; // distinct, ascending, within [1, 2*b_d]
    bool shortfall = false; // fewer than n values were available
};

// n i.i.d. uniform draws over the integers [0, 2*b_d] from the seeded
// stream; zeros become 1, duplicates are replaced by further draws while
// distinct values remain.
SampledBudgets sample_budgets(int b_d, int n, long long seed);

// Runs both strategies under max_total_tokens=b. The correct strategy wins;
// both correct prefers short (the cheaper one); both wrong discards.
// An infeasibly small b counts a strategy as incorrect, not as an error.
// Executed outcomes are appended to *outcomes_out when provided.
std::optional<LabeledInstance> label_budget_aware(const Question& q, int b, Backend& backend,
                                                  const PromptTemplates& templates,
                                                  const OutcomeScorer& scorer,
                                                  const LabelingOptions& opts = {},
                                                  std::vector<Outcome>* outcomes_out = nullptr);

// Budget-aware half of the pipeline: per question, sample `budgets_per_q`
// budgets from the threshold and label each (question, budget) pair.
LabelingRunResult run_budget_labeling(const std::vector<Question>& dataset, Backend& backend,
                                      const PromptTemplates& templates, int b_d,
                                      int budgets_per_q, const LabelingOptions& opts = {});

// Concatenates the two halves; duplicate (question_id, budget) keys are a
// validation error naming the pair.
std::vector<LabeledInstance> build_final_dataset(const std::vector<LabeledInstance>& instance_labels,
                                                 const std::vector<LabeledInstance>& budget_labels);

} // namespace switchcot
