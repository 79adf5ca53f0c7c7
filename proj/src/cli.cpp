#include "switchcot/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/budget_force.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/errors.hpp"
#include "switchcot/eval.hpp"
#include "switchcot/labeling.hpp"
#include "switchcot/prompting.hpp"
#include "switchcot/selector.hpp"
#include "switchcot/util.hpp"

namespace switchcot::cli {

namespace {

// ---------------------------------------------------------------------------
// configuration: flag > environment > config file > default
// ---------------------------------------------------------------------------

struct Flags {
    std::string config_path;
    std::string dataset;
    std::string cache_dir;
    std::string output_dir;
    std::string selector;
    std::string labels; // oracle selector label file
    std::string model; // logistic selector model file
    std::string templates;
    std::optional<int> budget;
    std::optional<int> reserve;
    std::optional<long long> seed;
    std::optional<int> workers;
    std::optional<int> reps;

    // subcommand-specific
    std::string mode = "both"; // label
    std::string threshold_file; // label
    std::string budgets; // sweep, comma separated
    std::string selectors; // sweep, comma separated names
    std::string data; // train-selector
    std::optional<double> learning_rate;
    std::optional<int> epochs;
    std::optional<double> l2;
    std::string from; // report
    std::string format = "md"; // report
    std::string out; // report
};

struct RunConfig {
    nlohmann::json backend = {{"type", "mock"}};
    std::string cache_dir = ".switchcot_cache";
    std::string dataset;
    std::string output_dir = "runs";
    nlohmann::json selector = {{"type", "fixed"}, {"strategy", "short"}};
    std::optional<int> budget_max;
    int answer_reserve = 32;
    long long seed = 0;
    int workers = 4;
    int reps = 1;
    std::string model_id;
    double temperature = 0.0;
    std::string templates_path;
    std::vector<int> threshold_grid = {100, 200, 400, 800, 1600};
    int budgets_per_question = 10;
    int min_threshold_sample = 20;
    nlohmann::json sweep_selectors = nlohmann::json::array({"short", "long"});
    std::vector<int> sweep_budgets;
    nlohmann::json train = nlohmann::json::object();

    nlohmann::json resolved; // full resolved view, embedded in manifests
};

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    for (const std::string& part : util::split_on(csv, ',')) {
        std::string t = util::trim(part);
        if (t.empty()) continue;
        try {
            out.push_back(std::stoi(t));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": not an integer: " + t);
        }
    }
    return out;
}

RunConfig load_config(const Flags& f) {
    RunConfig c;
    nlohmann::json j = nlohmann::json::object();
    if (!f.config_path.empty()) {
        j = nlohmann::json::parse(util::read_file(f.config_path), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("config file is not a JSON object: " + f.config_path);
        }
    }
    auto get_str = [&](const char* key, std::string& into) {
        if (auto it = j.find(key); it != j.end() && it->is_string()) into = it->get<std::string>();
    };
    if (auto it = j.find("backend"); it != j.end()) c.backend = *it;
    get_str("cache_dir", c.cache_dir);
    get_str("dataset", c.dataset);
    get_str("output_dir", c.output_dir);
    if (auto it = j.find("selector"); it != j.end()) c.selector = *it;
    if (auto it = j.find("budget"); it != j.end() && it->is_object()) {
        if (auto m = it->find("max_total_tokens"); m != it->end() && !m->is_null()) {
            c.budget_max = m->get<int>();
        }
        if (auto r = it->find("answer_reserve"); r != it->end()) {
            c.answer_reserve = r->get<int>();
        }
    }
    if (auto it = j.find("seed"); it != j.end()) c.seed = it->get<long long>();
    if (auto it = j.find("workers"); it != j.end()) c.workers = it->get<int>();
    if (auto it = j.find("reps"); it != j.end()) c.reps = it->get<int>();
    get_str("model_id", c.model_id);
    if (auto it = j.find("temperature"); it != j.end()) c.temperature = it->get<double>();
    get_str("templates", c.templates_path);
    if (auto it = j.find("threshold_grid"); it != j.end()) {
        c.threshold_grid = it->get<std::vector<int>>();
    }
    if (auto it = j.find("budgets_per_question"); it != j.end()) {
        c.budgets_per_question = it->get<int>();
    }
    if (auto it = j.find("min_threshold_sample"); it != j.end()) {
        c.min_threshold_sample = it->get<int>();
    }
    if (auto it = j.find("sweep_selectors"); it != j.end()) c.sweep_selectors = *it;
    if (auto it = j.find("sweep_budgets"); it != j.end()) {
        c.sweep_budgets = it->get<std::vector<int>>();
    }
    if (auto it = j.find("train"); it != j.end()) c.train = *it;

    // environment sits between config and flags
    if (const char* env = std::getenv("SWITCHCOT_CACHE_DIR"); env && *env) c.cache_dir = env;

    if (!f.dataset.empty()) c.dataset = f.dataset;
    if (!f.cache_dir.empty()) c.cache_dir = f.cache_dir;
    if (!f.output_dir.empty()) c.output_dir = f.output_dir;
    if (!f.templates.empty()) c.templates_path = f.templates;
    if (f.budget) c.budget_max = *f.budget;
    if (f.reserve) c.answer_reserve = *f.reserve;
    if (f.seed) c.seed = *f.seed;
    if (f.workers) c.workers = *f.workers;
    if (f.reps) c.reps = *f.reps;

    if (!f.selector.empty()) {
        // a bare name keeps compatible parameters from the config selector
        nlohmann::json base =
            c.selector.is_object() ? c.selector : nlohmann::json::object();
        std::string name = f.selector;
        nlohmann::json spec = nlohmann::json::object();
        if (name == "short" || name == "fixed-short") {
            spec = {{"type", "fixed"}, {"strategy", "short"}};
        } else if (name == "long" || name == "fixed-long") {
            spec = {{"type", "fixed"}, {"strategy", "long"}};
        } else if (name == "random" || name == "oracle" || name == "prompted" ||
                   name == "logistic" || name == "table") {
            spec = base;
            spec["type"] = name;
        } else {
            throw ConfigError("unknown selector name: " + name);
        }
        c.selector = spec;
    }
    if (!f.labels.empty()) c.selector["labels"] = f.labels;
    if (!f.model.empty()) c.selector["model"] = f.model;

    c.resolved = nlohmann::json{{"backend", c.backend},
                                {"cache_dir", c.cache_dir},
                                {"dataset", c.dataset},
                                {"output_dir", c.output_dir},
                                {"selector", c.selector},
                                {"budget",
                                 {{"max_total_tokens", c.budget_max
                                                           ? nlohmann::json(*c.budget_max)
                                                           : nlohmann::json(nullptr)},
                                  {"answer_reserve", c.answer_reserve}}},
                                {"seed", c.seed},
                                {"workers", c.workers},
                                {"reps", c.reps},
                                {"model_id", c.model_id},
                                {"temperature", c.temperature},
                                {"templates", c.templates_path},
                                {"threshold_grid", c.threshold_grid},
                                {"budgets_per_question", c.budgets_per_question},
                                {"min_threshold_sample", c.min_threshold_sample}};
    return c;
}

std::optional<Budget> budget_policy(const RunConfig& c) {
    if (!c.budget_max) return std::nullopt;
    int cap = *c.budget_max;
    if (cap < 2) throw ConfigError("budget must be at least 2 tokens");
    return Budget{cap, std::min(c.answer_reserve, cap - 1)};
}

PromptTemplates load_templates(const RunConfig& c) {
    if (c.templates_path.empty()) return PromptTemplates();
    return PromptTemplates::from_file(c.templates_path);
}

std::vector<Question> load_required_dataset(const RunConfig& c) {
    if (c.dataset.empty()) throw ConfigError("no dataset configured (use --dataset or config)");
    return load_dataset(c.dataset);
}

std::vector<LabeledInstance> load_labels_file(const std::string& path) {
    std::vector<LabeledInstance> out;
    util::for_each_jsonl(path, [&](const nlohmann::json& row, int lineno) {
        try {
            out.push_back(labeled_instance_from_json(row));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

std::shared_ptr<Selector> make_selector(const nlohmann::json& spec,
                                        const std::shared_ptr<Backend>& backend,
                                        const RunConfig& c) {
    if (!spec.is_object() || !spec.contains("type")) {
        throw ConfigError("selector spec must be an object with a type field");
    }
    std::string type = spec.at("type").get<std::string>();
    if (type == "fixed") {
        std::string s = spec.value("strategy", "short");
        return std::make_shared<FixedSelector>(strategy_from_string(s));
    }
    if (type == "random") {
        double p = spec.value("p_long", 0.5);
        long long seed = spec.value("seed", c.seed);
        return std::make_shared<RandomSelector>(p, seed);
    }
    if (type == "table") {
        if (!spec.contains("mapping") || !spec.at("mapping").is_object()) {
            throw ConfigError("table selector needs a mapping object");
        }
        std::map<std::string, Strategy> mapping;
        for (const auto& [k, v] : spec.at("mapping").items()) {
            mapping[k] = strategy_from_string(v.get<std::string>());
        }
        return std::make_shared<DifficultyTableSelector>(std::move(mapping));
    }
    if (type == "oracle") {
        if (!spec.contains("labels")) {
            throw ConfigError("oracle selector needs a labels file (--labels)");
        }
        return std::make_shared<OracleSelector>(
            load_labels_file(spec.at("labels").get<std::string>()));
    }
    if (type == "prompted") {
        PromptedSelectorOptions opts;
        opts.model_id = c.model_id;
        opts.temperature = c.temperature;
        opts.fallback = strategy_from_string(spec.value("fallback", "long"));
        return std::make_shared<PromptedSelector>(backend, opts);
    }
    if (type == "logistic") {
        if (!spec.contains("model")) {
            throw ConfigError("logistic selector needs a model file (--model)");
        }
        std::string path = spec.at("model").get<std::string>();
        nlohmann::json j = nlohmann::json::parse(util::read_file(path), nullptr, false);
        if (j.is_discarded()) throw DataError("logistic model file is not valid JSON: " + path);
        return std::make_shared<LogisticSelector>(logistic_model_from_json(j));
    }
    throw ConfigError("unknown selector type: " + type);
}

// ---------------------------------------------------------------------------
// run directories and manifests
// ---------------------------------------------------------------------------

std::string make_run_dir(const RunConfig& c, const std::string& command) {
    std::filesystem::path base = c.output_dir;
    std::string stem = util::utc_timestamp_compact() + "-" + command;
    std::filesystem::path dir = base / stem;
    for (int i = 2; std::filesystem::exists(dir); ++i) {
        dir = base / (stem + "-" + std::to_string(i)); // append-only, never reuse
    }
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string digest_of_file(const std::string& path) {
    return util::sha256_hex(util::read_file(path));
}

nlohmann::json base_manifest(const std::string& command, const RunConfig& c) {
    nlohmann::json input_digests = nlohmann::json::object();
    auto add_digest = [&](const std::string& path) {
        if (!path.empty() && std::filesystem::exists(path)) {
            input_digests[path] = digest_of_file(path);
        }
    };
    add_digest(c.dataset);
    add_digest(c.templates_path);
    if (c.backend.is_object()) {
        for (const char* key : {"fixtures", "config"}) {
            if (auto it = c.backend.find(key); it != c.backend.end() && it->is_string()) {
                add_digest(it->get<std::string>());
            }
        }
    }
    if (c.selector.is_object()) {
        for (const char* key : {"labels", "model"}) {
            if (auto it = c.selector.find(key); it != c.selector.end() && it->is_string()) {
                add_digest(it->get<std::string>());
            }
        }
    }

    return nlohmann::json{
        {"command", command},
        {"config", c.resolved},
        {"config_digest", util::sha256_hex(c.resolved.dump())},
        {"input_digests", std::move(input_digests)},
        {"seed", c.seed},
        {"workers", c.workers},
        {"budget_policy",
         {{"max_total_tokens",
           c.budget_max ? nlohmann::json(*c.budget_max) : nlohmann::json(nullptr)},
          {"answer_reserve", c.answer_reserve}}},
        {"token_accounting",
         "completion tokens only; a bounded budget covers think plus answer, with "
         "answer_reserve held back for the forced final answer"}};
}

void attach_cache_stats(nlohmann::json& manifest, const CachedBackend& cached) {
    CacheStats s = cached.stats();
    manifest["cache"] = {{"hits", s.hits},
                         {"misses", s.misses},
                         {"backend_calls", s.backend_calls},
                         {"warnings", s.warnings}};
}

void write_outcomes(const std::filesystem::path& dir, const std::vector<Outcome>& outcomes) {
    std::string text;
    for (const auto& o : outcomes) text += to_json(o).dump() + "\n";
    util::write_file_atomic(dir / "outcomes.jsonl", text);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

Result cmd_validate(const RunConfig& c) {
    std::vector<Question> qs = load_required_dataset(c);
    std::map<std::string, long> by_category;
    std::map<std::string, long> by_format;
    for (const auto& q : qs) {
        ++by_category[to_string(q.category)];
        ++by_format[to_string(q.answer_format)];
    }
    std::string out = std::to_string(qs.size()) + " questions, " +
                      std::to_string(by_category.size()) + " categories\n";
    for (const auto& [cat, n] : by_category) {
        out += "  category " + cat + ": " + std::to_string(n) + "\n";
    }
    for (const auto& [fmt, n] : by_format) {
        out += "  format " + fmt + ": " + std::to_string(n) + "\n";
    }
    return {0, "", out};
}

Result cmd_eval(const RunConfig& c) {
    std::vector<Question> qs = load_required_dataset(c);
    auto inner = make_backend(c.backend);
    auto backend = std::make_shared<CachedBackend>(inner, c.cache_dir);
    auto selector = make_selector(c.selector, backend, c);
    PromptTemplates templates = load_templates(c);
    std::optional<Budget> budget = budget_policy(c);

    EvalOptions opts;
    opts.model_id = c.model_id;
    opts.temperature = c.temperature;
    opts.workers = c.workers;
    EvalRunResult run = run_eval(qs, *selector, *backend, budget, templates, opts);

    Report report = aggregate(run.records, qs);
    nlohmann::json manifest = base_manifest("eval", c);
    manifest["backend_id"] = backend->id();
    manifest["selector_id"] = selector->id();
    manifest["backend_errors"] = run.backend_error_ids;
    attach_cache_stats(manifest, *backend);
    report.manifest = manifest;

    std::string dir = make_run_dir(c, "eval");
    std::filesystem::path d = dir;
    util::write_file_atomic(d / "report.json", render_report_json(report));
    util::write_file_atomic(d / "report.csv", render_report_csv(report));
    util::write_file_atomic(d / "report.md", render_report_markdown(report));
    std::string records_text;
    for (const auto& r : run.records) records_text += to_json(r).dump() + "\n";
    util::write_file_atomic(d / "records.jsonl", records_text);
    write_outcomes(d, run.outcomes);
    util::write_file_atomic(d / "manifest.json", manifest.dump(2) + "\n");

    const ReportRow& all = report.rows.back();
    std::string out = "eval: n=" + std::to_string(all.n) +
                      " accuracy=" + util::format_double(all.accuracy) +
                      " mean_tokens=" + util::format_double(all.mean_tokens) +
                      " backend_errors=" + std::to_string(run.backend_error_ids.size()) +
                      "\nrun_dir: " + dir + "\n";
    return {0, dir, out};
}

Result cmd_confusion(const RunConfig& c) {
    std::vector<Question> qs = load_required_dataset(c);
    auto inner = make_backend(c.backend);
    auto backend = std::make_shared<CachedBackend>(inner, c.cache_dir);
    PromptTemplates templates = load_templates(c);
    std::optional<Budget> budget = budget_policy(c);

    EvalOptions opts;
    opts.model_id = c.model_id;
    opts.temperature = c.temperature;
    opts.workers = c.workers;
    ConfusionResult res = confusion_report(qs, *backend, budget, templates, opts);

    nlohmann::json manifest = base_manifest("confusion", c);
    manifest["backend_id"] = backend->id();
    manifest["backend_errors"] = res.backend_error_ids;
    attach_cache_stats(manifest, *backend);

    nlohmann::json counts{{"TT", res.counts.tt},
                          {"TF", res.counts.tf},
                          {"FT", res.counts.ft},
                          {"FF", res.counts.ff}};

    std::string dir = make_run_dir(c, "confusion");
    std::filesystem::path d = dir;
    util::write_file_atomic(d / "confusion.json",
                            nlohmann::json{{"counts", counts}, {"manifest", manifest}}.dump(2) +
                                "\n");
    std::string cells_text;
    for (const auto& [qid, cell] : res.cells) {
        cells_text +=
            nlohmann::json{{"question_id", qid}, {"cell", to_string(cell)}}.dump() + "\n";
    }
    util::write_file_atomic(d / "cells.jsonl", cells_text);
    write_outcomes(d, res.outcomes);
    util::write_file_atomic(d / "manifest.json", manifest.dump(2) + "\n");

    std::string out = "confusion: TT=" + std::to_string(res.counts.tt) +
                      " TF=" + std::to_string(res.counts.tf) +
                      " FT=" + std::to_string(res.counts.ft) +
                      " FF=" + std::to_string(res.counts.ff) +
                      " backend_errors=" + std::to_string(res.backend_error_ids.size()) +
                      "\nrun_dir: " + dir + "\n";
    return {0, dir, out};
}

Result cmd_sweep(const RunConfig& c, const Flags& f) {
    std::vector<Question> qs = load_required_dataset(c);
    auto inner = make_backend(c.backend);
    auto backend = std::make_shared<CachedBackend>(inner, c.cache_dir);
    PromptTemplates templates = load_templates(c);

    std::vector<int> budgets = c.sweep_budgets;
    if (!f.budgets.empty()) budgets = parse_int_list(f.budgets, "--budgets");
    if (budgets.empty()) throw ConfigError("sweep needs --budgets or sweep_budgets in config");

    nlohmann::json selector_specs = c.sweep_selectors;
    if (!f.selectors.empty()) {
        selector_specs = nlohmann::json::array();
        for (const std::string& name : util::split_on(f.selectors, ',')) {
            selector_specs.push_back(util::trim(name));
        }
    }
    std::vector<std::shared_ptr<Selector>> selectors;
    for (const auto& item : selector_specs) {
        nlohmann::json spec;
        if (item.is_string()) {
            std::string name = item.get<std::string>();
            if (name == "short" || name == "fixed-short") {
                spec = {{"type", "fixed"}, {"strategy", "short"}};
            } else if (name == "long" || name == "fixed-long") {
                spec = {{"type", "fixed"}, {"strategy", "long"}};
            } else {
                spec = c.selector.is_object() ? c.selector : nlohmann::json::object();
                spec["type"] = name;
            }
        } else {
            spec = item;
        }
        selectors.push_back(make_selector(spec, backend, c));
    }

    EvalOptions opts;
    opts.model_id = c.model_id;
    opts.temperature = c.temperature;
    opts.workers = c.workers;
    std::vector<SweepRow> rows =
        budget_sweep(qs, selectors, budgets, c.answer_reserve, *backend, templates, opts);

    nlohmann::json manifest = base_manifest("sweep", c);
    manifest["backend_id"] = backend->id();
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& s : selectors) ids.push_back(s->id());
    manifest["selector_ids"] = ids;
    manifest["budgets"] = budgets;
    attach_cache_stats(manifest, *backend);

    std::string dir = make_run_dir(c, "sweep");
    std::filesystem::path d = dir;
    util::write_file_atomic(d / "sweep.csv", render_sweep_csv(rows));
    util::write_file_atomic(d / "manifest.json", manifest.dump(2) + "\n");

    std::string out = "sweep: " + std::to_string(rows.size()) + " rows (" +
                      std::to_string(selectors.size()) + " selectors x " +
                      std::to_string(budgets.size()) + " budgets)\nrun_dir: " + dir + "\n";
    return {0, dir, out};
}

Result cmd_label(const RunConfig& c, const Flags& f) {
    if (f.mode != "instance" && f.mode != "budget" && f.mode != "both") {
        throw ConfigError("label --mode must be instance, budget, or both");
    }
    std::vector<Question> qs = load_required_dataset(c);
    auto inner = make_backend(c.backend);
    auto backend = std::make_shared<CachedBackend>(inner, c.cache_dir);
    PromptTemplates templates = load_templates(c);

    LabelingOptions opts;
    opts.reps = c.reps;
    opts.workers = c.workers;
    opts.answer_reserve = c.answer_reserve;
    opts.model_id = c.model_id;
    opts.temperature = c.temperature;
    opts.seed = c.seed;

    std::vector<LabeledInstance> instance_labels;
    std::vector<LabeledInstance> budget_labels;
    std::vector<DiscardRecord> discards;
    std::vector<std::string> errors;
    std::vector<Outcome> outcomes;
    std::optional<BudgetThreshold> threshold;

    if (f.mode == "instance" || f.mode == "both") {
        LabelingRunResult r = run_instance_labeling(qs, *backend, templates, opts);
        instance_labels = std::move(r.labeled);
        for (auto& d : r.discarded) discards.push_back(std::move(d));
        for (auto& e : r.errors) errors.push_back(std::move(e));
        for (auto& o : r.outcomes) outcomes.push_back(std::move(o));
    }
    if (f.mode == "budget" || f.mode == "both") {
        if (!f.threshold_file.empty()) {
            nlohmann::json j =
                nlohmann::json::parse(util::read_file(f.threshold_file), nullptr, false);
            if (j.is_discarded()) {
                throw DataError("threshold file is not valid JSON: " + f.threshold_file);
            }
            threshold = budget_threshold_from_json(j);
        } else {
            ThresholdOptions topts;
            topts.workers = c.workers;
            topts.answer_reserve = c.answer_reserve;
            topts.min_sample = c.min_threshold_sample;
            topts.model_id = c.model_id;
            topts.temperature = c.temperature;
            threshold =
                estimate_budget_threshold(qs, *backend, templates, c.threshold_grid, topts);
        }
        LabelingRunResult r = run_budget_labeling(qs, *backend, templates, threshold->b_d,
                                                  c.budgets_per_question, opts);
        budget_labels = std::move(r.labeled);
        for (auto& d : r.discarded) discards.push_back(std::move(d));
        for (auto& e : r.errors) errors.push_back(std::move(e));
        for (auto& o : r.outcomes) outcomes.push_back(std::move(o));
    }

    std::vector<LabeledInstance> d_final = build_final_dataset(instance_labels, budget_labels);

    nlohmann::json manifest = base_manifest("label", c);
    manifest["backend_id"] = backend->id();
    manifest["mode"] = f.mode;
    manifest["counts"] = {{"labeled", d_final.size()},
                          {"instance_labeled", instance_labels.size()},
                          {"budget_labeled", budget_labels.size()},
                          {"discarded", discards.size()},
                          {"errors", errors.size()}};
    if (threshold) manifest["threshold"] = to_json(*threshold);
    attach_cache_stats(manifest, *backend);

    std::string dir = make_run_dir(c, "label");
    std::filesystem::path d = dir;
    std::string d_final_text;
    for (const auto& inst : d_final) d_final_text += to_json(inst).dump() + "\n";
    util::write_file_atomic(d / "d_final.jsonl", d_final_text);

    std::string discard_text;
    for (const auto& rec : discards) {
        nlohmann::json row{{"question_id", rec.question_id}, {"cell", "FF"}};
        row["budget"] = rec.budget ? nlohmann::json(*rec.budget) : nlohmann::json(nullptr);
        discard_text += row.dump() + "\n";
    }
    util::write_file_atomic(d / "discards.jsonl", discard_text);

    if (threshold) {
        util::write_file_atomic(d / "thresholds.json", to_json(*threshold).dump(2) + "\n");
    }

    // training-data export for external fine-tuning pipelines
    std::map<std::string, const Question*> by_id;
    for (const auto& q : qs) by_id[q.id] = &q;
    std::string export_text;
    for (const auto& inst : d_final) {
        auto it = by_id.find(inst.question_id);
        if (it == by_id.end()) continue;
        nlohmann::json row{{"question_id", inst.question_id},
                           {"text", it->second->text},
                           {"category", to_string(it->second->category)},
                           {"label", to_string(inst.label)}};
        row["budget"] = inst.budget ? nlohmann::json(*inst.budget) : nlohmann::json(nullptr);
        export_text += row.dump() + "\n";
    }
    util::write_file_atomic(d / "train_export.jsonl", export_text);

    write_outcomes(d, outcomes);
    util::write_file_atomic(d / "manifest.json", manifest.dump(2) + "\n");

    std::string out = "label: labeled=" + std::to_string(d_final.size()) +
                      " (instance=" + std::to_string(instance_labels.size()) +
                      ", budget=" + std::to_string(budget_labels.size()) +
                      ") discarded=" + std::to_string(discards.size()) +
                      " errors=" + std::to_string(errors.size());
    if (threshold) {
        out += " b_d=" + std::to_string(threshold->b_d) + " (" + threshold->method + ")";
    }
    out += "\nrun_dir: " + dir + "\n";
    return {0, dir, out};
}

Result cmd_train_selector(const RunConfig& c, const Flags& f) {
    std::string data_path = f.data;
    if (data_path.empty() && c.train.contains("data")) {
        data_path = c.train.at("data").get<std::string>();
    }
    if (data_path.empty()) throw ConfigError("train-selector needs --data <d_final.jsonl>");
    std::vector<LabeledInstance> labels = load_labels_file(data_path);
    if (labels.empty()) throw DataError("training data is empty: " + data_path);

    std::vector<Question> qs = load_required_dataset(c);
    std::map<std::string, const Question*> by_id;
    for (const auto& q : qs) by_id[q.id] = &q;

    FeatureConfig fc;
    TrainConfig tc;
    if (c.train.is_object()) {
        if (auto it = c.train.find("learning_rate"); it != c.train.end()) {
            tc.learning_rate = it->get<double>();
        }
        if (auto it = c.train.find("epochs"); it != c.train.end()) tc.epochs = it->get<int>();
        if (auto it = c.train.find("l2"); it != c.train.end()) tc.l2 = it->get<double>();
    }
    if (f.learning_rate) tc.learning_rate = *f.learning_rate;
    if (f.epochs) tc.epochs = *f.epochs;
    if (f.l2) tc.l2 = *f.l2;
    tc.seed = c.seed;

    std::vector<TrainExample> data;
    long n_short = 0, n_long = 0;
    for (const auto& inst : labels) {
        auto it = by_id.find(inst.question_id);
        if (it == by_id.end()) {
            throw DataError("training row references unknown question " + inst.question_id);
        }
        std::optional<Budget> b;
        if (inst.budget) {
            b = Budget{*inst.budget, std::max(0, std::min(c.answer_reserve, *inst.budget - 1))};
        }
        TrainExample ex;
        ex.features = featurize(*it->second, b, fc);
        ex.label = inst.label;
        (inst.label == Strategy::short_cot ? n_short : n_long) += 1;
        data.push_back(std::move(ex));
    }

    TrainResult result = train_logistic(data, fc, tc);

    nlohmann::json training_meta{{"learning_rate", tc.learning_rate},
                                 {"epochs", tc.epochs},
                                 {"l2", tc.l2},
                                 {"seed", tc.seed},
                                 {"n_train", data.size()},
                                 {"n_short", n_short},
                                 {"n_long", n_long},
                                 {"final_loss", result.loss_trace.back()},
                                 {"data", data_path}};

    std::string dir = make_run_dir(c, "train-selector");
    std::filesystem::path d = dir;
    util::write_file_atomic(d / "model.json",
                            to_json(result.model, training_meta).dump(2) + "\n");
    std::string loss_csv = "epoch,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
        loss_csv += std::to_string(i) + "," + util::format_double(result.loss_trace[i]) + "\n";
    }
    util::write_file_atomic(d / "loss.csv", loss_csv);

    nlohmann::json manifest = base_manifest("train-selector", c);
    manifest["training_meta"] = training_meta;
    if (std::filesystem::exists(data_path)) {
        manifest["input_digests"][data_path] = digest_of_file(data_path);
    }
    util::write_file_atomic(d / "manifest.json", manifest.dump(2) + "\n");

    std::string out = "train-selector: n=" + std::to_string(data.size()) +
                      " final_loss=" + util::format_double(result.loss_trace.back()) +
                      "\nrun_dir: " + dir + "\n";
    return {0, dir, out};
}

Result cmd_report(const Flags& f) {
    if (f.from.empty()) throw ConfigError("report needs --from <report.json|report.csv|run dir>");
    // run directories are what the other subcommands print, so accept them too
    std::string from = f.from;
    if (std::filesystem::is_directory(from)) {
        from = (std::filesystem::path(from) / "report.json").string();
    }
    std::string text = util::read_file(from);
    Report report;
    if (util::ends_with(from, ".csv")) {
        report = report_from_csv(text);
    } else {
        report = report_from_json(text);
    }
    std::string rendered;
    if (f.format == "json") {
        rendered = render_report_json(report);
    } else if (f.format == "csv") {
        rendered = render_report_csv(report);
    } else if (f.format == "md" || f.format == "markdown") {
        rendered = render_report_markdown(report);
    } else {
        throw ConfigError("report --format must be json, csv, or md");
    }
    if (!f.out.empty()) {
        util::write_file_atomic(f.out, rendered);
        return {0, "", "report: wrote " + f.out + "\n"};
    }
    return {0, "", rendered};
}

Result cmd_cache(const RunConfig& c, const std::string& action) {
    std::filesystem::path dir = c.cache_dir;
    if (action == "stats") {
        CacheDiskStats s = cache_disk_stats(dir);
        return {0, "",
                "cache: dir=" + dir.string() + " entries=" + std::to_string(s.entries) +
                    " bytes=" + std::to_string(s.bytes) + "\n"};
    }
    long removed = cache_clear(dir);
    return {0, "", "cache: cleared " + std::to_string(removed) + " entries\n"};
}

} // namespace

Result run(const std::vector<std::string>& args) {
    CLI::App app{"Budget-aware routing between short and long chain-of-thought"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config_path, "JSON config file");
        sub->add_option("--dataset", f.dataset, "questions JSONL file");
        sub->add_option("--cache-dir", f.cache_dir, "generation cache directory");
        sub->add_option("--output-dir", f.output_dir, "root for run directories");
        sub->add_option("--seed", f.seed, "global seed");
        sub->add_option("--workers", f.workers, "concurrent items");
        sub->add_option("--budget", f.budget, "max total tokens per generation");
        sub->add_option("--reserve", f.reserve, "tokens reserved for the forced final answer");
        sub->add_option("--templates", f.templates, "prompt template override file");
    };

    CLI::App* validate = app.add_subcommand("validate", "check a dataset file");
    add_common(validate);

    CLI::App* label = app.add_subcommand("label", "build strategy labels");
    add_common(label);
    label->add_option("--mode", f.mode, "instance, budget, or both")->default_val("both");
    label->add_option("--threshold-file", f.threshold_file, "reuse an estimated threshold");
    label->add_option("--reps", f.reps, "repetitions per strategy (majority vote)");

    CLI::App* train = app.add_subcommand("train-selector", "train the logistic selector");
    add_common(train);
    train->add_option("--data", f.data, "labeled data (d_final.jsonl)");
    train->add_option("--learning-rate", f.learning_rate, "gradient descent step size");
    train->add_option("--epochs", f.epochs, "full-batch epochs");
    train->add_option("--l2", f.l2, "l2 penalty weight");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a selector on a dataset");
    add_common(eval_cmd);
    eval_cmd->add_option("--selector", f.selector,
                         "short, long, random, oracle, prompted, logistic, table");
    eval_cmd->add_option("--labels", f.labels, "labels file for the oracle selector");
    eval_cmd->add_option("--model", f.model, "model file for the logistic selector");

    CLI::App* sweep = app.add_subcommand("sweep", "accuracy/token curves over budgets");
    add_common(sweep);
    sweep->add_option("--budgets", f.budgets, "comma-separated budget list");
    sweep->add_option("--selectors", f.selectors, "comma-separated selector names");
    sweep->add_option("--labels", f.labels, "labels file for the oracle selector");
    sweep->add_option("--model", f.model, "model file for the logistic selector");

    CLI::App* confusion = app.add_subcommand("confusion", "short/long confusion matrix");
    add_common(confusion);

    CLI::App* report = app.add_subcommand("report", "re-render a stored report");
    report->add_option("--from", f.from, "report.json, report.csv, or a run directory");
    report->add_option("--format", f.format, "json, csv, or md")->default_val("md");
    report->add_option("--out", f.out, "write here instead of stdout");

    CLI::App* cache = app.add_subcommand("cache", "generation cache administration");
    add_common(cache);
    cache->fallthrough(); // stats/clear share the parent's options
    cache->require_subcommand(1);
    CLI::App* cache_stats = cache->add_subcommand("stats", "entry count and byte size");
    CLI::App* cache_clear_cmd = cache->add_subcommand("clear", "drop every cache entry");

    std::vector<std::string> argv(args);
    std::reverse(argv.begin(), argv.end()); // CLI11 parses reversed vectors
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        int code = app.exit(e, msg, msg);
        Result r{code == 0 ? 0 : 2, "", msg.str()};
        std::cout << r.output;
        return r;
    }

    Result result;
    try {
        RunConfig c = load_config(f);
        if (validate->parsed()) {
            result = cmd_validate(c);
        } else if (label->parsed()) {
            result = cmd_label(c, f);
        } else if (train->parsed()) {
            result = cmd_train_selector(c, f);
        } else if (eval_cmd->parsed()) {
            result = cmd_eval(c);
        } else if (sweep->parsed()) {
            result = cmd_sweep(c, f);
        } else if (confusion->parsed()) {
            result = cmd_confusion(c);
        } else if (report->parsed()) {
            result = cmd_report(f);
        } else if (cache->parsed()) {
            result = cmd_cache(c, cache_stats->parsed() ? "stats" : "clear");
            (void)cache_clear_cmd;
        } else {
            result = {2, "", "no command given\n"};
        }
    } catch (const ConfigError& e) {
        result = {2, "", std::string("config error: ") + e.what() + "\n"};
    } catch (const DataError& e) {
        result = {1, "", std::string("data error: ") + e.what() + "\n"};
    } catch (const BackendError& e) {
        result = {1, "", std::string("backend error: ") + e.what() + "\n"};
    } catch (const std::exception& e) {
        result = {1, "", std::string("error: ") + e.what() + "\n"};
    }
    std::cout << result.output;
    return result;
}

} // namespace switchcot::cli
