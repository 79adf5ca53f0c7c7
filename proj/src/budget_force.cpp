#include "switchcot/budget_force.hpp"

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

nlohmann::json to_json(const Outcome& o) {
    return nlohmann::json{{"question_id", o.question_id},
                          {"strategy", to_string(o.strategy)},
                          {"transcript", o.transcript},
                          {"think_text", o.think_text},
                          {"answer_text", o.answer_text},
                          {"think_tokens", o.think_tokens},
                          {"answer_tokens", o.answer_tokens},
                          {"total_tokens", o.total_tokens},
                          {"truncated", o.truncated},
                          {"forced_final", o.forced_final}};
}

Outcome outcome_from_json(const nlohmann::json& j) {
    Outcome o;
    try {
        o.question_id = j.at("question_id").get<std::string>();
        o.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        o.transcript = j.at("transcript").get<std::string>();
        o.think_text = j.at("think_text").get<std::string>();
        o.answer_text = j.at("answer_text").get<std::string>();
        o.think_tokens = j.at("think_tokens").get<int>();
        o.answer_tokens = j.at("answer_tokens").get<int>();
        o.total_tokens = j.at("total_tokens").get<int>();
        o.truncated = j.at("truncated").get<bool>();
        o.forced_final = j.at("forced_final").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed outcome record: ") + e.what());
    }
    return o;
}

std::pair<std::string, std::string> split_transcript(const std::string& text) {
    static const std::string open_tag = "<think>";
    static const std::string close_tag = "</think>";

    std::size_t close = text.find(close_tag);
    if (close != std::string::npos &&
        text.find(close_tag, close + close_tag.size()) != std::string::npos) {
        throw DataError("malformed transcript: multiple </think> tags");
    }

    std::size_t open = text.find(open_tag);
    std::size_t think_begin = (open == std::string::npos) ? 0 : open + open_tag.size();

    if (close == std::string::npos) {
        if (open == std::string::npos) return {"", text};
        return {text.substr(think_begin), ""};
    }
    std::string think =
        close >= think_begin ? text.substr(think_begin, close - think_begin) : std::string();
    std::string answer = text.substr(close + close_tag.size());
    return {std::move(think), std::move(answer)};
}

namespace {

GenerationRequest make_request(const Question& q, const PromptBundle& bundle,
                               std::optional<int> max_new, const std::string& route,
                               const StrategyRunOptions& opts) {
    GenerationRequest req;
    req.prompt = bundle;
    req.max_new_tokens = max_new;
    req.temperature = opts.temperature;
    req.model_id = opts.model_id;
    req.seed = opts.seed;
    req.question_id = q.id;
    req.route = route;
    return req;
}

Outcome finish_outcome(const Question& q, Strategy strategy, std::string transcript,
                       Backend& backend, const std::optional<Budget>& budget, bool truncated,
                       bool forced_final) {
    Outcome o;
    o.question_id = q.id;
    o.strategy = strategy;
    o.truncated = truncated;
    o.forced_final = forced_final;

    auto [think, answer] = split_transcript(transcript);
    int think_tokens = backend.count_tokens(think);
    int answer_tokens = backend.count_tokens(answer);

    if (budget) {
        // defensive clamp: construction already keeps token-exact backends
        // inside the budget, but estimated counts (HTTP) can overshoot
        int cap = budget->max_total_tokens.value();
        if (think_tokens > cap) {
            TokenTruncation t = truncate_to_tokens(think, cap);
            think = t.text;
            think_tokens = backend.count_tokens(think);
            answer.clear();
            answer_tokens = 0;
            transcript = think_open() + think;
            o.truncated = true;
        } else if (think_tokens + answer_tokens > cap) {
            TokenTruncation t = truncate_to_tokens(answer, cap - think_tokens);
            answer = t.text;
            answer_tokens = backend.count_tokens(answer);
            transcript = think_open() + think + "</think>" + answer;
            o.truncated = true;
        }
    }

    o.transcript = std::move(transcript);
    o.think_text = std::move(think);
    o.answer_text = std::move(answer);
    o.think_tokens = think_tokens;
    o.answer_tokens = answer_tokens;
    o.total_tokens = think_tokens + answer_tokens;
    return o;
}

} // namespace

Outcome run_strategy(const Question& q, Strategy strategy, const std::optional<Budget>& budget,
                     Backend& backend, const PromptTemplates& templates,
                     const StrategyRunOptions& opts) {
    validate(q);
    PromptBundle bundle = build_prompt(q, strategy, templates);
    const std::string route = to_string(strategy);

    if (!budget || !budget->bounded()) {
        GenerationRequest req = make_request(q, bundle, std::nullopt, route, opts);
        Generation gen = backend.generate(req);
        return finish_outcome(q, strategy, bundle.assistant_prefix + gen.text, backend,
                              std::nullopt, false, false);
    }

    const int cap = budget->max_total_tokens.value();
    const int reserve = budget->answer_reserve;
    if (reserve < 0) throw ConfigError("answer_reserve must be non-negative");
    if (reserve >= cap) {
        throw ConfigError("answer_reserve " + std::to_string(reserve) +
                          " must be smaller than the budget " + std::to_string(cap));
    }

    if (strategy == Strategy::short_cot) {
        // the supplied placeholder think block counts against the budget;
        // whatever remains is for the answer, no second phase needed
        auto [placeholder_think, rest] = split_transcript(bundle.assistant_prefix);
        int placeholder_tokens = backend.count_tokens(placeholder_think);
        if (cap <= placeholder_tokens) {
            throw ConfigError("budget " + std::to_string(cap) +
                              " cannot cover the short-CoT placeholder (" +
                              std::to_string(placeholder_tokens) + " tokens)");
        }
        GenerationRequest req = make_request(q, bundle, cap - placeholder_tokens, route, opts);
        Generation gen = backend.generate(req);
        return finish_outcome(q, strategy, bundle.assistant_prefix + gen.text, backend, budget,
                              gen.finish_reason == FinishReason::length, false);
    }

    // long CoT, phase 1: think within the budget minus the reserve
    GenerationRequest req1 = make_request(q, bundle, cap - reserve, route, opts);
    Generation gen1 = backend.generate(req1);

    if (gen1.text.find("</think>") != std::string::npos) {
        // the think block closed on its own; what follows is the answer
        return finish_outcome(q, strategy, bundle.assistant_prefix + gen1.text, backend, budget,
                              gen1.finish_reason == FinishReason::length, false);
    }

    // phase 2: close the think block and force a final answer out of the
    // reserve. The two suffix words sit in the answer segment, so they are
    // paid for out of the reserve as well.
    std::string so_far = bundle.assistant_prefix + gen1.text + final_answer_suffix();
    auto [ignored, suffix_answer] = split_transcript(final_answer_suffix());
    int suffix_tokens = backend.count_tokens(suffix_answer);
    int allowance = reserve - suffix_tokens;

    std::string phase2_text;
    if (allowance > 0) {
        PromptBundle continued{bundle.user_text, so_far, bundle.stop_sequences};
        GenerationRequest req2 = make_request(q, continued, allowance, "final", opts);
        Generation gen2 = backend.generate(req2);
        phase2_text = gen2.text;
    }
    return finish_outcome(q, strategy, so_far + phase2_text, backend, budget, true, true);
}

} // namespace switchcot
