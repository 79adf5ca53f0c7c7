#include "switchcot/selector.hpp"

#include <cctype>
#include <cmath>

#include "switchcot/errors.hpp"
#include "switchcot/prompting.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

StrategyDecision FixedSelector::select(const Question&, const std::optional<Budget>&) {
    return {strategy_, std::nullopt, id(), false};
}

RandomSelector::RandomSelector(double p_long, long long seed) : p_long_(p_long), seed_(seed) {
    if (p_long < 0.0 || p_long > 1.0) throw ConfigError("p_long must be within [0,1]");
}

std::string RandomSelector::id() const {
    return "random-p" + util::format_double(p_long_);
}

StrategyDecision RandomSelector::select(const Question& q, const std::optional<Budget>&) {
    // keyed by question id so the decision is independent of visit order
    uint64_t key = util::fnv1a64(q.id, util::fnv1a64("random-selector") ^ uint64_t(seed_));
    double u = util::SplitMix64(key).next_unit();
    Strategy s = u < p_long_ ? Strategy::long_cot : Strategy::short_cot;
    // sampled, not argmaxed, so no prob_short: the decision would contradict
    // the probability half the time
    return {s, std::nullopt, id(), false};
}

DifficultyTableSelector::DifficultyTableSelector(std::map<std::string, Strategy> mapping)
    : mapping_(std::move(mapping)) {}

StrategyDecision DifficultyTableSelector::select(const Question& q,
                                                 const std::optional<Budget>&) {
    auto it = mapping_.find(q.dataset);
    if (it == mapping_.end()) {
        throw ConfigError("difficulty table has no entry for dataset: " + q.dataset);
    }
    return {it->second, std::nullopt, id(), false};
}

namespace {
constexpr long long kNoBudgetKey = -1;
}

OracleSelector::OracleSelector(const std::vector<LabeledInstance>& labels) {
    for (const auto& inst : labels) {
        validate(inst);
        if (inst.budget) {
            by_budget_[{inst.question_id, *inst.budget}] = inst.label;
        } else {
            by_question_[inst.question_id] = inst.label;
        }
    }
}

StrategyDecision OracleSelector::select(const Question& q, const std::optional<Budget>& budget) {
    if (budget && budget->bounded()) {
        auto it = by_budget_.find({q.id, *budget->max_total_tokens});
        if (it != by_budget_.end()) return {it->second, std::nullopt, id(), false};
    }
    auto it = by_question_.find(q.id);
    if (it != by_question_.end()) return {it->second, std::nullopt, id(), false};
    throw DataError("oracle selector has no label for question " + q.id);
}

std::optional<Strategy> extract_choice_ab(const std::string& text) {
    for (const std::string& raw : util::split_ws(text)) {
        std::string_view tok = raw;
        while (!tok.empty() && tok.front() == '(') tok.remove_prefix(1);
        while (!tok.empty()) {
            char c = tok.back();
            if (c == '.' || c == ',' || c == ':' || c == ';' || c == ')' || c == '!' ||
                c == '?') {
                tok.remove_suffix(1);
            } else {
                break;
            }
        }
        if (tok.size() != 1) continue;
        char c = char(std::tolower(static_cast<unsigned char>(tok[0])));
        if (c == 'a') return Strategy::short_cot;
        if (c == 'b') return Strategy::long_cot;
    }
    return std::nullopt;
}

PromptedSelector::PromptedSelector(std::shared_ptr<Backend> backend, PromptedSelectorOptions opts)
    : backend_(std::move(backend)), opts_(std::move(opts)) {
    if (!backend_) throw ConfigError("prompted selector needs a backend");
}

StrategyDecision PromptedSelector::select(const Question& q, const std::optional<Budget>&) {
    GenerationRequest req;
    req.prompt = build_selection_prompt(q);
    req.model_id = opts_.model_id;
    req.temperature = opts_.temperature;
    req.question_id = q.id;
    req.route = "selection";
    Generation gen = backend_->generate(req);
    if (auto choice = extract_choice_ab(gen.text)) {
        return {*choice, std::nullopt, id(), false};
    }
    return {opts_.fallback, std::nullopt, id(), true};
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

std::vector<double> featurize(const Question& q, const std::optional<Budget>& budget,
                              const FeatureConfig& cfg) {
    std::string body = question_body(q);
    std::vector<double> x;
    x.reserve(kFeatureDim);

    x.push_back(double(whitespace_token_count(body)) / cfg.token_norm);

    long digits = 0;
    for (unsigned char c : body) {
        if (std::isdigit(c)) ++digits;
    }
    x.push_back(body.empty() ? 0.0 : double(digits) / double(body.size()));

    bool math_marker = digits >= 3 || body.find('$') != std::string::npos ||
                       body.find("\\boxed") != std::string::npos ||
                       body.find('=') != std::string::npos || body.find('+') != std::string::npos;
    x.push_back(math_marker ? 1.0 : 0.0);

    x.push_back(double(q.choices.size()));

    for (Category c : all_categories()) x.push_back(c == q.category ? 1.0 : 0.0);

    double b = 1.0; // unbounded saturates the budget feature
    if (budget && budget->bounded()) b = double(*budget->max_total_tokens) / cfg.budget_norm;
    x.push_back(b);

    return x;
}

// ---------------------------------------------------------------------------
// logistic selector
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(const std::vector<double>& w, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
}

} // namespace

LogisticSelector::LogisticSelector(LogisticSelectorModel model) : model_(std::move(model)) {
    if (int(model_.weights.size()) != kFeatureDim) {
        throw ConfigError("logistic model has " + std::to_string(model_.weights.size()) +
                          " weights, expected " + std::to_string(kFeatureDim));
    }
}

StrategyDecision LogisticSelector::select(const Question& q,
                                          const std::optional<Budget>& budget) {
    std::vector<double> x = featurize(q, budget, model_.feature_config);
    double p_short = sigmoid(dot(model_.weights, x) + model_.bias);
    Strategy s = p_short >= 0.5 ? Strategy::short_cot : Strategy::long_cot;
    return {s, p_short, id(), false};
}

nlohmann::json to_json(const LogisticSelectorModel& m, const nlohmann::json& training_meta) {
    return nlohmann::json{
        {"feature_config",
         {{"token_norm", m.feature_config.token_norm}, {"budget_norm", m.feature_config.budget_norm}}},
        {"weights", m.weights},
        {"bias", m.bias},
        {"training_meta", training_meta}};
}

LogisticSelectorModel logistic_model_from_json(const nlohmann::json& j) {
    LogisticSelectorModel m;
    try {
        const auto& fc = j.at("feature_config");
        m.feature_config.token_norm = fc.at("token_norm").get<double>();
        m.feature_config.budget_norm = fc.at("budget_norm").get<double>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed logistic model file: ") + e.what());
    }
    if (int(m.weights.size()) != kFeatureDim) {
        throw DataError("logistic model has " + std::to_string(m.weights.size()) +
                        " weights, expected " + std::to_string(kFeatureDim));
    }
    for (double w : m.weights) {
        if (!std::isfinite(w)) throw DataError("logistic model weight not finite");
    }
    if (!std::isfinite(m.bias)) throw DataError("logistic model bias not finite");
    return m;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

double logistic_loss(const LogisticSelectorModel& m, const std::vector<TrainExample>& data,
                     double l2) {
    double sum = 0.0;
    for (const auto& ex : data) {
        double p = sigmoid(dot(m.weights, ex.features) + m.bias);
        double y = ex.label == Strategy::short_cot ? 1.0 : 0.0;
        double py = y > 0.5 ? p : 1.0 - p;
        sum += -std::log(std::max(py, 1e-300));
    }
    double loss = sum / double(data.size());
    double penalty = 0.0;
    for (double w : m.weights) penalty += w * w;
    return loss + l2 * penalty;
}

void logistic_gradient(const LogisticSelectorModel& m, const std::vector<TrainExample>& data,
                       double l2, std::vector<double>& grad_w, double& grad_b) {
    grad_w.assign(m.weights.size(), 0.0);
    grad_b = 0.0;
    for (const auto& ex : data) {
        double p = sigmoid(dot(m.weights, ex.features) + m.bias);
        double y = ex.label == Strategy::short_cot ? 1.0 : 0.0;
        double d = p - y;
        for (std::size_t i = 0; i < grad_w.size(); ++i) grad_w[i] += d * ex.features[i];
        grad_b += d;
    }
    double inv = 1.0 / double(data.size());
    for (std::size_t i = 0; i < grad_w.size(); ++i) {
        grad_w[i] = grad_w[i] * inv + 2.0 * l2 * m.weights[i];
    }
    grad_b *= inv;
}

TrainResult train_logistic(const std::vector<TrainExample>& data, const FeatureConfig& fc,
                           const TrainConfig& cfg) {
    if (data.empty()) throw DataError("training data is empty");
    bool any_short = false, any_long = false;
    for (const auto& ex : data) {
        if (int(ex.features.size()) != kFeatureDim) {
            throw DataError("training example has wrong feature dimension");
        }
        (ex.label == Strategy::short_cot ? any_short : any_long) = true;
    }
    if (!any_short || !any_long) {
        throw DataError("training data contains a single class; both strategies are required");
    }

    TrainResult result;
    result.model.feature_config = fc;
    result.model.weights.assign(kFeatureDim, 0.0);
    result.model.bias = 0.0;

    result.loss_trace.push_back(logistic_loss(result.model, data, cfg.l2));
    std::vector<double> grad_w;
    double grad_b = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        logistic_gradient(result.model, data, cfg.l2, grad_w, grad_b);
        for (int i = 0; i < kFeatureDim; ++i) {
            result.model.weights[i] -= cfg.learning_rate * grad_w[i];
        }
        result.model.bias -= cfg.learning_rate * grad_b;
        result.loss_trace.push_back(logistic_loss(result.model, data, cfg.l2));
    }
    return result;
}

double selector_loss(Selector& selector, const std::vector<LabeledInstance>& labeled,
                     const std::map<std::string, Question>& questions, int answer_reserve,
                     int* clamped) {
    if (labeled.empty()) throw DataError("selector_loss needs at least one labeled instance");
    double sum = 0.0;
    int clamp_count = 0;
    for (const auto& inst : labeled) {
        auto qit = questions.find(inst.question_id);
        if (qit == questions.end()) {
            throw DataError("selector_loss: no question for labeled id " + inst.question_id);
        }
        std::optional<Budget> budget;
        if (inst.budget) {
            budget = Budget{*inst.budget, std::min(answer_reserve, *inst.budget - 1)};
        }
        StrategyDecision d = selector.select(qit->second, budget);
        if (!d.prob_short) {
            throw ConfigError("selector " + d.selector_id + " yields no probabilities");
        }
        double p = inst.label == Strategy::short_cot ? *d.prob_short : 1.0 - *d.prob_short;
        if (p < 1e-12) {
            p = 1e-12;
            ++clamp_count;
        }
        sum += -std::log(p);
    }
    if (clamped) *clamped = clamp_count;
    return sum / double(labeled.size());
}

} // namespace switchcot
