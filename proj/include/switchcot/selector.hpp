#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/domain.hpp"

namespace switchcot {

struct StrategyDecision {
    Strategy strategy = Strategy::short_cot;
    std::optional<double> prob_short; // present for probabilistic selectors
    std::string selector_id;
    bool parse_fallback = false; // prompted selector could not read an A/B answer
};

// Stage-I strategy selection. Implementations must be safe to call from
// concurrent workers and deterministic for a fixed (state, q, budget, seed).
class Selector {
public:
    virtual ~Selector() = default;
    virtual StrategyDecision select(const Question& q, const std::optional<Budget>& budget) = 0;
    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// baseline selectors
// ---------------------------------------------------------------------------

class FixedSelector : public Selector {
public:
    explicit FixedSelector(Strategy s) : strategy_(s) {}
    StrategyDecision select(const Question&, const std::optional<Budget>&) override;
    std::string id() const override { return "fixed-" + to_string(strategy_); }

private:
    Strategy strategy_;
};

// Picks long with probability p_long from a stream keyed by (seed, question
// id), so decisions are reproducible and order-independent.
class RandomSelector : public Selector {
public:
    RandomSelector(double p_long, long long seed);
    StrategyDecision select(const Question& q, const std::optional<Budget>&) override;
    std::string id() const override;

private:
    double p_long_;
    long long seed_;
};

// Fixed per-dataset strategy table; unmapped datasets are a config error.
class DifficultyTableSelector : public Selector {
public:
    explicit DifficultyTableSelector(std::map<std::string, Strategy> mapping);
    StrategyDecision select(const Question& q, const std::optional<Budget>&) override;
    std::string id() const override { return "table"; }

private:
    std::map<std::string, Strategy> mapping_;
};

// Replays labels. A budget-specific label (question_id, budget) wins;
// otherwise the instance-based label (question_id, no budget) applies;
// a question with neither is a missing-label error.
class OracleSelector : public Selector {
public:
    explicit OracleSelector(const std::vector<LabeledInstance>& labels);
    StrategyDecision select(const Question& q, const std::optional<Budget>& budget) override;
    std::string id() const override { return "oracle"; }

private:
    std::map<std::pair<std::string, long long>, Strategy> by_budget_;
    std::map<std::string, Strategy> by_question_;
};

// ---------------------------------------------------------------------------
// prompted selector
// ---------------------------------------------------------------------------

// First standalone A/B token, case-insensitive, tolerating "(A)" and "A."
// shapes. Empty optional = no readable choice.
std::optional<Strategy> extract_choice_ab(const std::string& text);

struct PromptedSelectorOptions {
    std::string model_id;
    double temperature = 0.0;
    Strategy fallback = Strategy::long_cot; // used when parsing fails
};

// Asks the backend the A-or-B method question. Returns a hard decision
// without probabilities; parse failures fall back and are flagged.
class PromptedSelector : public Selector {
public:
    PromptedSelector(std::shared_ptr<Backend> backend, PromptedSelectorOptions opts = {});
    StrategyDecision select(const Question& q, const std::optional<Budget>&) override;
    std::string id() const override { return "prompted"; }

private:
    std::shared_ptr<Backend> backend_;
    PromptedSelectorOptions opts_;
};

// ---------------------------------------------------------------------------
// trainable logistic selector
// ---------------------------------------------------------------------------

struct FeatureConfig {
    double token_norm = 256.0; // question length divisor
    double budget_norm = 4096.0; // budget divisor; unbounded maps to 1.0

    bool operator==(const FeatureConfig&) const = default;
};

// Dimensions: token length, digit density, math-marker flag, choice count,
// seven category one-hots, normalized budget.
constexpr int kFeatureDim = 12;

std::vector<double> featurize(const Question& q, const std::optional<Budget>& budget,
                              const FeatureConfig& cfg);

struct LogisticSelectorModel {
    FeatureConfig feature_config;
    std::vector<double> weights; // kFeatureDim entries
    double bias = 0.0;
};

nlohmann::json to_json(const LogisticSelectorModel& m, const nlohmann::json& training_meta);
LogisticSelectorModel logistic_model_from_json(const nlohmann::json& j);

// prob_short = sigmoid(w.x + bias); 0.5 ties resolve to short (the cheaper
// strategy, consistent with the both-correct labeling rule).
class LogisticSelector : public Selector {
public:
    explicit LogisticSelector(LogisticSelectorModel model);
    StrategyDecision select(const Question& q, const std::optional<Budget>& budget) override;
    std::string id() const override { return "logistic"; }

    const LogisticSelectorModel& model() const { return model_; }

private:
    LogisticSelectorModel model_;
};

// ---------------------------------------------------------------------------
// training: cross-entropy between predicted strategy and the label
// ---------------------------------------------------------------------------

struct TrainExample {
    std::vector<double> features;
    Strategy label = Strategy::short_cot; // short encodes as y=1
};

struct TrainConfig {
    double learning_rate = 0.5;
    int epochs = 500;
    double l2 = 0.0;
    long long seed = 0; // reserved; zero-init training does not draw
};

// L = -mean[y log p + (1-y) log(1-p)] + l2 * |w|^2, p = sigmoid(w.x + b).
double logistic_loss(const LogisticSelectorModel& m, const std::vector<TrainExample>& data,
                     double l2);

void logistic_gradient(const LogisticSelectorModel& m, const std::vector<TrainExample>& data,
                       double l2, std::vector<double>& grad_w, double& grad_b);

struct TrainResult {
    LogisticSelectorModel model;
    std::vector<double> loss_trace; // entry 0 = initial loss, then one per epoch
};

// Full-batch gradient descent from zero initialization. Data must contain
// both classes.
TrainResult train_logistic(const std::vector<TrainExample>& data, const FeatureConfig& fc,
                           const TrainConfig& cfg);

// -mean log P(label | q, budget) under the selector's probabilities.
// Probabilities are clamped at 1e-12; clamp events are counted.
double selector_loss(Selector& selector, const std::vector<LabeledInstance>& labeled,
                     const std::map<std::string, Question>& questions, int answer_reserve = 32,
                     int* clamped = nullptr);

} // namespace switchcot
