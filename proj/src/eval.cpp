#include "switchcot/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <regex>
#include <sstream>

#include "switchcot/errors.hpp"
#include "switchcot/prompting.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

// ---------------------------------------------------------------------------
// normalization / extraction
// ---------------------------------------------------------------------------

std::string normalize_answer(const std::string& s) {
    std::string t = util::trim(s);
    // peel whole-string wrappers: bold markers and $ math delimiters
    while (true) {
        if (t.size() >= 4 && util::starts_with(t, "**") && util::ends_with(t, "**")) {
            t = util::trim(t.substr(2, t.size() - 4));
        } else if (t.size() >= 2 && t.front() == '$' && t.back() == '$') {
            t = util::trim(t.substr(1, t.size() - 2));
        } else {
            break;
        }
    }
    while (!t.empty() && t.back() == '.') t.pop_back();
    t = util::to_lower(util::trim(t));
    // drop thousands separators: a comma flanked by digits
    std::string out;
    out.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == ',' && i > 0 && i + 1 < t.size() &&
            std::isdigit(static_cast<unsigned char>(t[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(t[i + 1]))) {
            continue;
        }
        out.push_back(t[i]);
    }
    return out;
}

ExtractionContext ExtractionContext::for_question(const Question& q) {
    ExtractionContext ctx;
    for (const auto& c : q.choices) ctx.choice_letters.push_back(c.letter);
    ctx.scale_min = q.scale_min;
    ctx.scale_max = q.scale_max;
    return ctx;
}

namespace {

bool letter_in_range(char c, const std::vector<std::string>& letters) {
    if (letters.empty()) return true;
    for (const auto& l : letters) {
        if (l.size() == 1 &&
            std::tolower(static_cast<unsigned char>(l[0])) ==
                std::tolower(static_cast<unsigned char>(c))) {
            return true;
        }
    }
    return false;
}

Extraction extract_multiple_choice(const std::string& text, const ExtractionContext& ctx) {
    const std::string lower = util::to_lower(text);
    static const std::string phrase = "the answer is";

    std::optional<char> found;
    std::size_t pos = 0;
    while ((pos = lower.find(phrase, pos)) != std::string::npos) {
        std::size_t i = pos + phrase.size();
        while (i < text.size() &&
               (text[i] == ' ' || text[i] == ':' || text[i] == '*' || text[i] == '(')) {
            ++i;
        }
        if (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
            bool standalone =
                i + 1 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
            if (standalone) found = text[i];
        }
        pos += phrase.size();
    }
    if (found) {
        return {true, std::string(1, char(std::tolower(static_cast<unsigned char>(*found))))};
    }

    // last parenthesized single letter, e.g. "(B)"
    for (std::size_t i = text.size(); i-- > 2;) {
        if (text[i] == ')' && std::isalpha(static_cast<unsigned char>(text[i - 1])) &&
            text[i - 2] == '(') {
            char c = text[i - 1];
            if (letter_in_range(c, ctx.choice_letters)) {
                return {true, std::string(1, char(std::tolower(static_cast<unsigned char>(c))))};
            }
        }
    }

    // last standalone letter inside the declared choice range
    if (!ctx.choice_letters.empty()) {
        std::optional<char> last;
        for (const std::string& raw : util::split_ws(text)) {
            std::string_view tok = raw;
            while (!tok.empty() && (tok.front() == '(' || tok.front() == '*')) tok.remove_prefix(1);
            while (!tok.empty()) {
                char c = tok.back();
                if (c == '.' || c == ',' || c == ':' || c == ';' || c == ')' || c == '!' ||
                    c == '?' || c == '*') {
                    tok.remove_suffix(1);
                } else {
                    break;
                }
            }
            if (tok.size() == 1 && std::isalpha(static_cast<unsigned char>(tok[0])) &&
                letter_in_range(tok[0], ctx.choice_letters)) {
                last = tok[0];
            }
        }
        if (last) {
            return {true, std::string(1, char(std::tolower(static_cast<unsigned char>(*last))))};
        }
    }
    return {};
}

Extraction extract_short_answer(const std::string& text) {
    std::size_t p = text.rfind("\\boxed{");
    if (p != std::string::npos) {
        std::string content;
        int depth = 1;
        for (std::size_t i = p + 7; i < text.size(); ++i) {
            char c = text[i];
            if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    std::string v = normalize_answer(content);
                    if (!v.empty()) return {true, v};
                    break;
                }
            }
            content.push_back(c);
        }
    }
    // fallback: the last number anywhere in the text
    static const std::regex number_re(R"([-+]?[0-9][0-9,]*(\.[0-9]+)?)");
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), number_re);
         it != std::sregex_iterator(); ++it) {
        last = it->str();
    }
    if (last) return {true, normalize_answer(*last)};
    return {};
}

Extraction extract_numeric_scale(const std::string& text, const ExtractionContext& ctx) {
    std::optional<long> best;
    for (std::size_t i = 0; i < text.size();) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;

        // skip decimals ("0.5") and either end of a recited range ("0-4")
        char prev = i > 0 ? text[i - 1] : '\0';
        bool decimal_tail = prev == '.' && i >= 2 &&
                            std::isdigit(static_cast<unsigned char>(text[i - 2]));
        bool decimal_head = j + 1 < text.size() && text[j] == '.' &&
                            std::isdigit(static_cast<unsigned char>(text[j + 1]));
        bool range_tail =
            prev == '-' && i >= 2 && std::isdigit(static_cast<unsigned char>(text[i - 2]));
        bool range_head = j + 1 < text.size() && text[j] == '-' &&
                          std::isdigit(static_cast<unsigned char>(text[j + 1]));
        if (!decimal_tail && !decimal_head && !range_tail && !range_head && j - i <= 9) {
            long v = std::strtol(text.substr(i, j - i).c_str(), nullptr, 10);
            if (v >= ctx.scale_min && v <= ctx.scale_max) best = v;
        }
        i = j;
    }
    if (best) return {true, std::to_string(*best)};
    return {};
}

} // namespace

Extraction extract_answer(const std::string& text, AnswerFormat format,
                          const ExtractionContext& ctx) {
    switch (format) {
        case AnswerFormat::multiple_choice: return extract_multiple_choice(text, ctx);
        case AnswerFormat::short_answer: return extract_short_answer(text);
        case AnswerFormat::numeric_scale: return extract_numeric_scale(text, ctx);
        case AnswerFormat::free_text: {
            std::string v = normalize_answer(text);
            if (v.empty()) return {};
            return {true, v};
        }
    }
    return {};
}

bool score(const std::string& predicted, const std::string& gold, AnswerFormat format) {
    std::string p = normalize_answer(predicted);
    std::string g = normalize_answer(gold);
    if (p == g) return true;
    if (format == AnswerFormat::short_answer) {
        char* pend = nullptr;
        char* gend = nullptr;
        double pv = std::strtod(p.c_str(), &pend);
        double gv = std::strtod(g.c_str(), &gend);
        bool both_numeric = !p.empty() && !g.empty() && pend == p.c_str() + p.size() &&
                            gend == g.c_str() + g.size();
        if (both_numeric) {
            double scale = std::max({std::fabs(pv), std::fabs(gv), 1e-300});
            return std::fabs(pv - gv) <= 1e-6 * scale;
        }
    }
    return false;
}

Scored score_outcome(const Question& q, const Outcome& o) {
    Extraction ext = extract_answer(o.answer_text, q.answer_format,
                                    ExtractionContext::for_question(q));
    Scored s;
    s.extraction_ok = ext.ok;
    s.extracted = ext.value;
    s.correct = ext.ok && score(ext.value, q.gold, q.answer_format);
    return s;
}

// ---------------------------------------------------------------------------
// eval runs
// ---------------------------------------------------------------------------

nlohmann::json to_json(const EvalRecord& r) {
    nlohmann::json j{{"question_id", r.question_id},
                     {"selector_id", r.selector_id},
                     {"strategy_used", to_string(r.strategy_used)},
                     {"correct", r.correct},
                     {"total_tokens", r.total_tokens},
                     {"extraction_ok", r.extraction_ok}};
    j["budget"] = r.budget ? nlohmann::json(*r.budget) : nlohmann::json(nullptr);
    return j;
}

EvalRecord eval_record_from_json(const nlohmann::json& j) {
    EvalRecord r;
    try {
        r.question_id = j.at("question_id").get<std::string>();
        r.selector_id = j.at("selector_id").get<std::string>();
        r.strategy_used = strategy_from_string(j.at("strategy_used").get<std::string>());
        r.correct = j.at("correct").get<bool>();
        r.total_tokens = j.at("total_tokens").get<int>();
        r.extraction_ok = j.at("extraction_ok").get<bool>();
        if (auto it = j.find("budget"); it != j.end() && !it->is_null()) {
            r.budget = it->get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed eval record: ") + e.what());
    }
    return r;
}

namespace {

std::vector<std::size_t> id_order(const std::vector<Question>& dataset) {
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return dataset[a].id < dataset[b].id; });
    return idx;
}

} // namespace

EvalRunResult run_eval(const std::vector<Question>& dataset, Selector& selector,
                       Backend& backend, const std::optional<Budget>& budget_policy,
                       const PromptTemplates& templates, const EvalOptions& opts) {
    struct Slot {
        std::optional<EvalRecord> record;
        std::optional<Outcome> outcome;
        bool backend_error = false;
    };
    std::vector<Slot> slots(dataset.size());
    StrategyRunOptions run_opts{opts.model_id, opts.temperature, std::nullopt};
    std::optional<int> budget_field;
    if (budget_policy && budget_policy->bounded()) budget_field = *budget_policy->max_total_tokens;

    util::parallel_for(dataset.size(), opts.workers, [&](std::size_t i) {
        const Question& q = dataset[i];
        try {
            StrategyDecision d = selector.select(q, budget_policy);
            Outcome o = run_strategy(q, d.strategy, budget_policy, backend, templates, run_opts);
            Scored s = score_outcome(q, o);
            EvalRecord r;
            r.question_id = q.id;
            r.selector_id = d.selector_id;
            r.strategy_used = d.strategy;
            r.correct = s.correct;
            r.total_tokens = o.total_tokens;
            r.budget = budget_field;
            r.extraction_ok = s.extraction_ok;
            slots[i].record = std::move(r);
            slots[i].outcome = std::move(o);
        } catch (const BackendError&) {
            slots[i].backend_error = true;
        }
    });

    EvalRunResult result;
    for (std::size_t i : id_order(dataset)) {
        if (slots[i].backend_error) {
            result.backend_error_ids.push_back(dataset[i].id);
        } else {
            result.records.push_back(std::move(*slots[i].record));
            result.outcomes.push_back(std::move(*slots[i].outcome));
        }
    }
    return result;
}

ConfusionResult confusion_report(const std::vector<Question>& dataset, Backend& backend,
                                 const std::optional<Budget>& budget,
                                 const PromptTemplates& templates, const EvalOptions& opts) {
    struct Slot {
        std::optional<ConfusionCell> cell;
        std::optional<Outcome> out_short;
        std::optional<Outcome> out_long;
        bool backend_error = false;
    };
    std::vector<Slot> slots(dataset.size());
    StrategyRunOptions run_opts{opts.model_id, opts.temperature, std::nullopt};

    util::parallel_for(dataset.size(), opts.workers, [&](std::size_t i) {
        const Question& q = dataset[i];
        try {
            Outcome os = run_strategy(q, Strategy::short_cot, budget, backend, templates, run_opts);
            Outcome ol = run_strategy(q, Strategy::long_cot, budget, backend, templates, run_opts);
            bool sc = score_outcome(q, os).correct;
            bool lc = score_outcome(q, ol).correct;
            slots[i].cell = confusion_cell(sc, lc);
            slots[i].out_short = std::move(os);
            slots[i].out_long = std::move(ol);
        } catch (const BackendError&) {
            slots[i].backend_error = true;
        }
    });

    ConfusionResult result;
    for (std::size_t i : id_order(dataset)) {
        if (slots[i].backend_error) {
            result.backend_error_ids.push_back(dataset[i].id);
            continue;
        }
        ConfusionCell cell = *slots[i].cell;
        switch (cell) {
            case ConfusionCell::TT: ++result.counts.tt; break;
            case ConfusionCell::TF: ++result.counts.tf; break;
            case ConfusionCell::FT: ++result.counts.ft; break;
            case ConfusionCell::FF: ++result.counts.ff; break;
        }
        result.cells.emplace_back(dataset[i].id, cell);
        result.outcomes.push_back(std::move(*slots[i].out_short));
        result.outcomes.push_back(std::move(*slots[i].out_long));
    }
    return result;
}

std::vector<SweepRow> budget_sweep(const std::vector<Question>& dataset,
                                   const std::vector<std::shared_ptr<Selector>>& selectors,
                                   const std::vector<int>& budgets, int answer_reserve,
                                   Backend& backend, const PromptTemplates& templates,
                                   const EvalOptions& opts) {
    if (budgets.empty()) throw ConfigError("budget sweep needs at least one budget");
    if (!std::is_sorted(budgets.begin(), budgets.end())) {
        throw ConfigError("sweep budgets must be ascending");
    }
    if (selectors.empty()) throw ConfigError("budget sweep needs at least one selector");

    std::vector<SweepRow> rows;
    for (const auto& selector : selectors) {
        for (int b : budgets) {
            if (b < 2) throw ConfigError("sweep budgets must be at least 2 tokens");
            Budget budget{b, std::min(answer_reserve, b - 1)};
            EvalRunResult r = run_eval(dataset, *selector, backend, budget, templates, opts);
            SweepRow row;
            row.selector_id = selector->id();
            row.budget = b;
            row.n = long(r.records.size());
            long correct = 0;
            long long tokens = 0;
            for (const auto& rec : r.records) {
                correct += rec.correct ? 1 : 0;
                tokens += rec.total_tokens;
            }
            row.accuracy = row.n ? double(correct) / double(row.n) : 0.0;
            row.mean_tokens = row.n ? double(tokens) / double(row.n) : 0.0;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "selector,budget,accuracy,mean_tokens,n\n";
    for (const auto& r : rows) {
        out += r.selector_id + "," + std::to_string(r.budget) + "," +
               util::format_double(r.accuracy) + "," + util::format_double(r.mean_tokens) + "," +
               std::to_string(r.n) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

Report aggregate(const std::vector<EvalRecord>& records, const std::vector<Question>& dataset) {
    std::map<std::string, Category> category_of;
    for (const auto& q : dataset) category_of[q.id] = q.category;

    struct Tally {
        long n = 0;
        long correct = 0;
        long long tokens = 0;
    };
    std::map<Category, Tally> per_cat;
    Tally all;
    for (const auto& r : records) {
        Category c = Category::other;
        if (auto it = category_of.find(r.question_id); it != category_of.end()) c = it->second;
        Tally& t = per_cat[c];
        ++t.n;
        ++all.n;
        if (r.correct) {
            ++t.correct;
            ++all.correct;
        }
        t.tokens += r.total_tokens;
        all.tokens += r.total_tokens;
    }

    auto to_row = [](std::string name, const Tally& t) {
        ReportRow row;
        row.category = std::move(name);
        row.n = t.n;
        row.correct = t.correct;
        row.accuracy = t.n ? double(t.correct) / double(t.n) : 0.0;
        row.mean_tokens = t.n ? double(t.tokens) / double(t.n) : 0.0;
        return row;
    };

    Report report;
    for (Category c : all_categories()) {
        auto it = per_cat.find(c);
        if (it != per_cat.end() && it->second.n > 0) {
            report.rows.push_back(to_row(to_string(c), it->second));
        }
    }
    report.rows.push_back(to_row("ALL", all));
    report.manifest = nlohmann::json::object();
    return report;
}

namespace {

nlohmann::json report_to_json_value(const Report& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"category", row.category},
                        {"n", row.n},
                        {"correct", row.correct},
                        {"accuracy", row.accuracy},
                        {"mean_tokens", row.mean_tokens}});
    }
    return nlohmann::json{{"rows", std::move(rows)},
                          {"confusion",
                           {{"TT", r.confusion.tt},
                            {"TF", r.confusion.tf},
                            {"FT", r.confusion.ft},
                            {"FF", r.confusion.ff}}},
                          {"manifest", r.manifest}};
}

} // namespace

std::string render_report_json(const Report& r) {
    return report_to_json_value(r).dump(2) + "\n";
}

std::string render_report_csv(const Report& r) {
    std::string out = "category,n,correct,accuracy,mean_tokens\n";
    for (const auto& row : r.rows) {
        out += row.category + "," + std::to_string(row.n) + "," + std::to_string(row.correct) +
               "," + util::format_double(row.accuracy) + "," +
               util::format_double(row.mean_tokens) + "\n";
    }
    return out;
}

std::string render_report_markdown(const Report& r) {
    std::string out = "| Category | Acc % | Token | n |\n| --- | --- | --- | --- |\n";
    for (const auto& row : r.rows) {
        out += "| " + row.category + " | " + util::format_fixed(row.accuracy, 1, 100.0) + " | " +
               std::to_string(llround(row.mean_tokens)) + " | " + std::to_string(row.n) + " |\n";
    }
    if (r.confusion.total() > 0) {
        out += "\nConfusion: TT=" + std::to_string(r.confusion.tt) +
               ", TF=" + std::to_string(r.confusion.tf) + ", FT=" + std::to_string(r.confusion.ft) +
               ", FF=" + std::to_string(r.confusion.ff) + "\n";
    }
    return out;
}

Report report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("report is not valid JSON");
    Report r;
    try {
        for (const auto& row : j.at("rows")) {
            ReportRow rr;
            rr.category = row.at("category").get<std::string>();
            rr.n = row.at("n").get<long>();
            rr.correct = row.at("correct").get<long>();
            rr.accuracy = row.at("accuracy").get<double>();
            rr.mean_tokens = row.at("mean_tokens").get<double>();
            r.rows.push_back(std::move(rr));
        }
        const auto& c = j.at("confusion");
        r.confusion.tt = c.at("TT").get<long>();
        r.confusion.tf = c.at("TF").get<long>();
        r.confusion.ft = c.at("FT").get<long>();
        r.confusion.ff = c.at("FF").get<long>();
        r.manifest = j.at("manifest");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
    return r;
}

Report report_from_csv(const std::string& text) {
    Report r;
    r.manifest = nlohmann::json::object();
    std::istringstream in(text);
    std::string line;
    bool header = true;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        if (header) {
            if (util::trim(line) != "category,n,correct,accuracy,mean_tokens") {
                throw DataError("report csv: unexpected header: " + line);
            }
            header = false;
            continue;
        }
        auto parts = util::split_on(line, ',');
        if (parts.size() != 5) {
            throw DataError("report csv line " + std::to_string(lineno) + ": expected 5 fields");
        }
        ReportRow row;
        row.category = parts[0];
        try {
            row.n = std::stol(parts[1]);
            row.correct = std::stol(parts[2]);
            row.accuracy = std::strtod(parts[3].c_str(), nullptr);
            row.mean_tokens = std::strtod(parts[4].c_str(), nullptr);
        } catch (const std::exception&) {
            throw DataError("report csv line " + std::to_string(lineno) + ": bad number");
        }
        r.rows.push_back(std::move(row));
    }
    if (header) throw DataError("report csv: missing header");
    return r;
}

} // namespace switchcot
