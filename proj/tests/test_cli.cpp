#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "support/fixtures.hpp"
#include "switchcot/cli.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/labeling.hpp"
#include "switchcot/selector.hpp"
#include "switchcot/util.hpp"

using namespace switchcot;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

// run() echoes its output to stdout; keep the test log clean
cli::Result run_quiet(const std::vector<std::string>& args) {
    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    cli::Result r = cli::run(args);
    std::cout.rdbuf(old);
    CHECK(sink.str() == r.output); // the echo mirrors the returned output
    return r;
}

// A ready-to-run synthetic workspace: questions, reasoner specs, config.
struct CliHarness {
    TempDir tmp{"cli"};
    testsupport::SyntheticPopulation pop;
    std::string config_path;

    explicit CliHarness(int n, nlohmann::json extra = nlohmann::json::object())
        : pop(testsupport::make_routing_population(n)) {
        std::vector<nlohmann::json> qrows;
        for (const auto& q : pop.questions) qrows.push_back(to_json(q));
        testsupport::write_jsonl(tmp.file("questions.jsonl"), qrows);
        testsupport::write_jsonl(tmp.file("specs.jsonl"), pop.specs);

        nlohmann::json config{
            {"backend", {{"type", "synthetic"}, {"config", tmp.file("specs.jsonl")}}},
            {"dataset", tmp.file("questions.jsonl")},
            {"cache_dir", tmp.file("cache")},
            {"output_dir", tmp.file("runs")},
            {"workers", 2},
        };
        for (auto& [k, v] : extra.items()) config[k] = v;
        testsupport::write_text(tmp.file("config.json"), config.dump(2) + "\n");
        config_path = tmp.file("config.json");
    }

    cli::Result run(std::vector<std::string> args) {
        args.push_back("--config");
        args.push_back(config_path);
        return run_quiet(args);
    }
};

std::string slurp(const fs::path& p) { return util::read_file(p); }

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::vector<nlohmann::json> rows;
    util::for_each_jsonl(p, [&](const nlohmann::json& row, int) { rows.push_back(row); });
    return rows;
}

} // namespace

TEST_CASE("validate reports dataset composition") {
    CliHarness h(6);
    cli::Result r = h.run({"validate"});
    CHECK(r.exit_code == 0);
    CHECK(r.run_dir.empty()); // validation writes nothing
    CHECK(r.output.find("6 questions, 1 categories") != std::string::npos);
    CHECK(r.output.find("category math: 6") != std::string::npos);
    CHECK(r.output.find("format short_answer: 6") != std::string::npos);
}

TEST_CASE("exit codes separate usage, config, and data failures") {
    CliHarness h(2);

    cli::Result help = run_quiet({"--help"});
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("chain-of-thought") != std::string::npos);

    CHECK(run_quiet({}).exit_code == 2); // a subcommand is required
    CHECK(run_quiet({"validate", "--no-such-flag"}).exit_code == 2);
    CHECK(run_quiet({"frobnicate"}).exit_code == 2);

    // configuration problems: no dataset, or a dataset that cannot be opened
    cli::Result unconfigured = run_quiet({"validate"});
    CHECK(unconfigured.exit_code == 2);
    CHECK(unconfigured.output.find("config error") != std::string::npos);
    cli::Result missing =
        run_quiet({"validate", "--dataset", h.tmp.file("does-not-exist.jsonl")});
    CHECK(missing.exit_code == 2);

    // a present but malformed dataset is a data failure
    testsupport::write_text(h.tmp.file("broken.jsonl"), "this is not json\n");
    cli::Result malformed = run_quiet({"validate", "--dataset", h.tmp.file("broken.jsonl")});
    CHECK(malformed.exit_code == 1);
    CHECK(malformed.output.find("data error") != std::string::npos);
}

TEST_CASE("eval writes a complete, replayable run directory") {
    CliHarness h(6);
    cli::Result r = h.run({"eval", "--selector", "long"});
    REQUIRE(r.exit_code == 0);
    REQUIRE_FALSE(r.run_dir.empty());
    CHECK(r.run_dir.find(h.tmp.file("runs")) == 0);
    CHECK(r.output.find("eval: n=6 accuracy=1") != std::string::npos);

    fs::path d = r.run_dir;
    for (const char* name :
         {"report.json", "report.csv", "report.md", "records.jsonl", "outcomes.jsonl",
          "manifest.json"}) {
        CHECK(fs::exists(d / name));
    }

    auto records = read_jsonl(d / "records.jsonl");
    REQUIRE(records.size() == 6);
    for (const auto& row : records) {
        CHECK(row.at("strategy_used") == "long");
        CHECK(row.at("correct") == true);
        CHECK(row.at("budget").is_null());
    }
    CHECK(read_jsonl(d / "outcomes.jsonl").size() == 6);

    nlohmann::json manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
    CHECK(manifest.at("command") == "eval");
    CHECK(manifest.at("selector_id") == "fixed-long");
    CHECK(manifest.at("backend_id") == "synthetic");
    CHECK(manifest.at("config_digest").get<std::string>().size() == 64);
    CHECK(manifest.at("input_digests").contains(h.tmp.file("questions.jsonl")));
    CHECK(manifest.at("cache").at("misses") == 6); // cold cache
    CHECK(manifest.at("cache").at("backend_calls") == 6);
    // reruns must be able to compare manifests byte for byte
    CHECK(manifest.dump().find("timestamp") == std::string::npos);

    nlohmann::json report = nlohmann::json::parse(slurp(d / "report.json"));
    CHECK(report.at("rows").back().at("category") == "ALL");
    CHECK(report.at("rows").back().at("n") == 6);
    CHECK(report.at("rows").back().at("accuracy") == 1.0);

    // warm reruns replay from cache and reproduce every artifact byte
    cli::Result warm1 = h.run({"eval", "--selector", "long"});
    cli::Result warm2 = h.run({"eval", "--selector", "long"});
    REQUIRE(warm1.exit_code == 0);
    REQUIRE(warm2.exit_code == 0);
    CHECK(warm1.run_dir != r.run_dir);
    CHECK(warm2.run_dir != warm1.run_dir);
    nlohmann::json wm = nlohmann::json::parse(slurp(fs::path(warm1.run_dir) / "manifest.json"));
    CHECK(wm.at("cache").at("backend_calls") == 0);
    CHECK(wm.at("cache").at("hits") == 6);
    for (const char* name : {"report.json", "report.csv", "report.md", "records.jsonl",
                             "outcomes.jsonl", "manifest.json"}) {
        CHECK(slurp(fs::path(warm1.run_dir) / name) == slurp(fs::path(warm2.run_dir) / name));
    }
}

TEST_CASE("eval under a budget caps every record") {
    CliHarness h(6);
    cli::Result r = h.run({"eval", "--selector", "long", "--budget", "100"});
    REQUIRE(r.exit_code == 0);
    auto records = read_jsonl(fs::path(r.run_dir) / "records.jsonl");
    REQUIRE(records.size() == 6);
    for (const auto& row : records) {
        CHECK(row.at("budget") == 100);
        CHECK(row.at("total_tokens").get<int>() <= 100);
    }
    // only the no-think half solves within 100 tokens
    nlohmann::json report = nlohmann::json::parse(slurp(fs::path(r.run_dir) / "report.json"));
    CHECK(report.at("rows").back().at("accuracy") == 0.5);
}

TEST_CASE("label produces the labeled dataset, discards, and threshold") {
    CliHarness h(6, {{"threshold_grid", {100, 400}}, {"budgets_per_question", 4}});
    cli::Result r = h.run({"label", "--mode", "both"});
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("b_d=100 (crossover)") != std::string::npos);

    fs::path d = r.run_dir;
    auto d_final = read_jsonl(d / "d_final.jsonl");
    auto manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
    CHECK(manifest.at("mode") == "both");
    CHECK(manifest.at("counts").at("labeled") == d_final.size());
    CHECK(manifest.at("counts").at("instance_labeled") == 6);

    // the instance half leads and matches the population's known cells
    for (int i = 0; i < 6; ++i) {
        LabeledInstance inst = labeled_instance_from_json(d_final[i]);
        CHECK_FALSE(inst.budget.has_value());
        CHECK(to_json(inst) == h.pop.labels[i]);
    }
    std::size_t budget_labeled = manifest.at("counts").at("budget_labeled").get<std::size_t>();
    CHECK(d_final.size() == 6 + budget_labeled);
    for (std::size_t i = 6; i < d_final.size(); ++i) {
        LabeledInstance inst = labeled_instance_from_json(d_final[i]);
        CHECK(inst.provenance == Provenance::budget_aware);
        REQUIRE(inst.budget.has_value());
        CHECK(*inst.budget <= 200); // within [1, 2*b_d]
    }

    nlohmann::json thresholds = nlohmann::json::parse(slurp(d / "thresholds.json"));
    CHECK(thresholds.at("b_d") == 100);
    CHECK(thresholds.at("method") == "crossover");

    for (const auto& row : read_jsonl(d / "discards.jsonl")) {
        CHECK(row.at("cell") == "FF");
        CHECK(row.contains("budget"));
    }
    auto exported = read_jsonl(d / "train_export.jsonl");
    CHECK(exported.size() == d_final.size());
    CHECK(exported[0].at("category") == "math");
    CHECK(exported[0].contains("text"));
    CHECK(fs::exists(d / "outcomes.jsonl"));
}

TEST_CASE("label modes restrict the pipeline halves") {
    CliHarness h(4, {{"threshold_grid", {100, 400}}, {"budgets_per_question", 3}});

    cli::Result inst = h.run({"label", "--mode", "instance"});
    REQUIRE(inst.exit_code == 0);
    CHECK_FALSE(fs::exists(fs::path(inst.run_dir) / "thresholds.json"));
    CHECK(read_jsonl(fs::path(inst.run_dir) / "d_final.jsonl").size() == 4);

    // a stored threshold skips re-estimation and pins the sampling range
    BudgetThreshold t;
    t.dataset = "synthetic";
    t.b_d = 50;
    t.method = "crossover";
    t.grid_evaluated = {{50, 0.5, 0.5}};
    testsupport::write_text(h.tmp.file("threshold.json"), to_json(t).dump() + "\n");
    cli::Result budget = h.run(
        {"label", "--mode", "budget", "--threshold-file", h.tmp.file("threshold.json")});
    REQUIRE(budget.exit_code == 0);
    CHECK(budget.output.find("b_d=50") != std::string::npos);
    for (const auto& row : read_jsonl(fs::path(budget.run_dir) / "d_final.jsonl")) {
        LabeledInstance i = labeled_instance_from_json(row);
        CHECK(i.provenance == Provenance::budget_aware);
        REQUIRE(i.budget.has_value());
        CHECK(*i.budget <= 100);
        CHECK(i.label == Strategy::short_cot); // 100 tokens never fits 300 thoughts
    }

    CHECK(h.run({"label", "--mode", "sideways"}).exit_code == 2);
}

TEST_CASE("train-selector fits, logs, and reproduces a model") {
    CliHarness h(6);
    std::vector<nlohmann::json> rows(h.pop.labels.begin(), h.pop.labels.end());
    testsupport::write_jsonl(h.tmp.file("d_final.jsonl"), rows);

    std::vector<std::string> args = {"train-selector", "--data", h.tmp.file("d_final.jsonl"),
                                     "--epochs", "200"};
    cli::Result r = h.run(args);
    REQUIRE(r.exit_code == 0);
    fs::path d = r.run_dir;

    LogisticSelectorModel model =
        logistic_model_from_json(nlohmann::json::parse(slurp(d / "model.json")));
    CHECK(model.weights.size() == std::size_t(kFeatureDim));

    std::string loss = slurp(d / "loss.csv");
    CHECK(loss.rfind("epoch,loss\n", 0) == 0);
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 202); // header + 201 epochs

    nlohmann::json manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
    CHECK(manifest.at("training_meta").at("n_train") == 6);
    CHECK(manifest.at("training_meta").at("n_short") == 3);
    CHECK(manifest.at("training_meta").at("n_long") == 3);
    CHECK(manifest.at("training_meta").at("epochs") == 200);
    CHECK(manifest.at("input_digests").contains(h.tmp.file("d_final.jsonl")));

    // same seed, same data: the fitted model is identical to the byte
    cli::Result again = h.run(args);
    REQUIRE(again.exit_code == 0);
    CHECK(slurp(fs::path(again.run_dir) / "model.json") == slurp(d / "model.json"));
    CHECK(slurp(fs::path(again.run_dir) / "loss.csv") == slurp(d / "loss.csv"));

    CHECK(h.run({"train-selector"}).exit_code == 2); // no data file
    testsupport::write_jsonl(h.tmp.file("stray.jsonl"),
                             {{{"question_id", "ghost"},
                               {"budget", nullptr},
                               {"label", "short"},
                               {"provenance", "instance_based"}}});
    CHECK(h.run({"train-selector", "--data", h.tmp.file("stray.jsonl")}).exit_code == 1);
}

TEST_CASE("trained selector closes the loop through eval") {
    CliHarness h(6);
    std::vector<nlohmann::json> rows(h.pop.labels.begin(), h.pop.labels.end());
    testsupport::write_jsonl(h.tmp.file("d_final.jsonl"), rows);
    cli::Result train = h.run({"train-selector", "--data", h.tmp.file("d_final.jsonl")});
    REQUIRE(train.exit_code == 0);

    std::string model_path = (fs::path(train.run_dir) / "model.json").string();
    cli::Result eval = h.run({"eval", "--selector", "logistic", "--model", model_path});
    REQUIRE(eval.exit_code == 0);
    nlohmann::json manifest =
        nlohmann::json::parse(slurp(fs::path(eval.run_dir) / "manifest.json"));
    CHECK(manifest.at("selector_id") == "logistic");
    CHECK(manifest.at("input_digests").contains(model_path));
}

TEST_CASE("oracle selector routes by stored labels through the CLI") {
    CliHarness h(6);
    std::vector<nlohmann::json> rows(h.pop.labels.begin(), h.pop.labels.end());
    testsupport::write_jsonl(h.tmp.file("labels.jsonl"), rows);

    cli::Result r =
        h.run({"eval", "--selector", "oracle", "--labels", h.tmp.file("labels.jsonl")});
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("accuracy=1") != std::string::npos);
    for (const auto& row : read_jsonl(fs::path(r.run_dir) / "records.jsonl")) {
        int idx = row.at("question_id").get<std::string>().back() - '0';
        CHECK(row.at("strategy_used") == (idx % 2 == 0 ? "short" : "long"));
    }
}

TEST_CASE("sweep crosses selectors with budgets") {
    CliHarness h(6);
    cli::Result r = h.run({"sweep", "--budgets", "100,400", "--selectors", "short,long"});
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("4 rows (2 selectors x 2 budgets)") != std::string::npos);

    std::string csv = slurp(fs::path(r.run_dir) / "sweep.csv");
    CHECK(csv.rfind("selector,budget,accuracy,mean_tokens,n\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("fixed-long,400,1,") != std::string::npos); // long solves all at 400
    CHECK(csv.find("fixed-short,100,0.5,") != std::string::npos);

    nlohmann::json manifest = nlohmann::json::parse(slurp(fs::path(r.run_dir) / "manifest.json"));
    CHECK(manifest.at("selector_ids") == nlohmann::json({"fixed-short", "fixed-long"}));
    CHECK(manifest.at("budgets") == nlohmann::json({100, 400}));

    CHECK(h.run({"sweep", "--selectors", "short"}).exit_code == 2); // budgets are required
}

TEST_CASE("report re-renders stored artifacts in any format") {
    CliHarness h(4);
    cli::Result eval = h.run({"eval", "--selector", "short"});
    REQUIRE(eval.exit_code == 0);
    std::string json_path = (fs::path(eval.run_dir) / "report.json").string();
    std::string csv_path = (fs::path(eval.run_dir) / "report.csv").string();

    cli::Result md = run_quiet({"report", "--from", json_path});
    CHECK(md.exit_code == 0);
    CHECK(md.output.rfind("| Category | Acc % | Token | n |", 0) == 0);

    // the run directory the eval printed works as a source too
    cli::Result from_dir = run_quiet({"report", "--from", eval.run_dir});
    CHECK(from_dir.exit_code == 0);
    CHECK(from_dir.output == md.output);

    cli::Result csv = run_quiet({"report", "--from", json_path, "--format", "csv"});
    CHECK(csv.exit_code == 0);
    CHECK(csv.output == slurp(csv_path)); // both renderings agree

    // csv input round-trips back out through the json renderer
    cli::Result back = run_quiet({"report", "--from", csv_path, "--format", "json"});
    CHECK(back.exit_code == 0);
    nlohmann::json parsed = nlohmann::json::parse(back.output);
    CHECK(parsed.at("rows").back().at("category") == "ALL");

    cli::Result to_file = run_quiet(
        {"report", "--from", json_path, "--format", "md", "--out", h.tmp.file("out.md")});
    CHECK(to_file.exit_code == 0);
    CHECK(slurp(h.tmp.file("out.md")) == md.output);

    CHECK(run_quiet({"report"}).exit_code == 2);
    CHECK(run_quiet({"report", "--from", json_path, "--format", "pdf"}).exit_code == 2);
}

TEST_CASE("cache stats and clear administer the configured directory") {
    CliHarness h(4);
    cli::Result before = h.run({"cache", "stats"});
    CHECK(before.exit_code == 0);
    CHECK(before.output.find("entries=0") != std::string::npos);

    REQUIRE(h.run({"eval", "--selector", "short"}).exit_code == 0);
    cli::Result after = h.run({"cache", "stats"});
    CHECK(after.output.find("entries=4") != std::string::npos);

    cli::Result cleared = h.run({"cache", "clear"});
    CHECK(cleared.output.find("cleared 4") != std::string::npos);
    CHECK(h.run({"cache", "stats"}).output.find("entries=0") != std::string::npos);
}

TEST_CASE("cache directory resolution prefers flag over environment over config") {
    CliHarness h(2);
    TempDir env_dir("cli-env");
    ::setenv("SWITCHCOT_CACHE_DIR", env_dir.file("envcache").c_str(), 1);

    cli::Result via_env = h.run({"cache", "stats"});
    CHECK(via_env.output.find("dir=" + env_dir.file("envcache")) != std::string::npos);

    cli::Result via_flag = h.run({"cache", "stats", "--cache-dir", h.tmp.file("flagcache")});
    CHECK(via_flag.output.find("dir=" + h.tmp.file("flagcache")) != std::string::npos);

    ::unsetenv("SWITCHCOT_CACHE_DIR");
    cli::Result via_config = h.run({"cache", "stats"});
    CHECK(via_config.output.find("dir=" + h.tmp.file("cache")) != std::string::npos);
}
