#include <doctest.h>

#include "support/fixtures.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

using namespace switchcot;
using testsupport::TempDir;

TEST_CASE("enum string round-trips") {
    for (AnswerFormat f : {AnswerFormat::short_answer, AnswerFormat::multiple_choice,
                           AnswerFormat::numeric_scale, AnswerFormat::free_text}) {
        CHECK(answer_format_from_string(to_string(f)) == f);
    }
    for (Category c : all_categories()) {
        CHECK(category_from_string(to_string(c)) == c);
    }
    CHECK(to_string(Strategy::short_cot) == "short");
    CHECK(to_string(Strategy::long_cot) == "long");
    CHECK(strategy_from_string("short") == Strategy::short_cot);
    CHECK(strategy_from_string("long") == Strategy::long_cot);
    CHECK_THROWS_AS(strategy_from_string("medium"), DataError);
    CHECK_THROWS_AS(category_from_string("unknown-cat"), DataError);
    CHECK(all_categories().size() == 7);
}

TEST_CASE("confusion cell mapping is exhaustive") {
    CHECK(confusion_cell(true, true) == ConfusionCell::TT);
    CHECK(confusion_cell(true, false) == ConfusionCell::TF);
    CHECK(confusion_cell(false, true) == ConfusionCell::FT);
    CHECK(confusion_cell(false, false) == ConfusionCell::FF);

    CHECK(cell_to_label(ConfusionCell::TT) == Strategy::short_cot);
    CHECK(cell_to_label(ConfusionCell::TF) == Strategy::short_cot);
    CHECK(cell_to_label(ConfusionCell::FT) == Strategy::long_cot);
    CHECK(cell_to_label(ConfusionCell::FF) == std::nullopt);

    CHECK(confusion_cell_from_string("TT") == ConfusionCell::TT);
    CHECK(to_string(ConfusionCell::FF) == "FF");
}

TEST_CASE("question json round-trip preserves every field") {
    Question q = testsupport::make_mc_question("q-7", "Which way is up?", "B");
    nlohmann::json j = to_json(q);
    Question back = question_from_json(j);
    CHECK(back.id == q.id);
    CHECK(back.text == q.text);
    CHECK(back.answer_format == q.answer_format);
    REQUIRE(back.choices.size() == 4);
    CHECK(back.choices[1].letter == "B");
    CHECK(back.choices[1].text == "option two");
    CHECK(back.gold == "B");
    CHECK(back.dataset == q.dataset);
    CHECK(back.category == q.category);

    Question scale;
    scale.id = "s1";
    scale.text = "how positive?";
    scale.answer_format = AnswerFormat::numeric_scale;
    scale.gold = "3";
    scale.dataset = "sst";
    scale.category = Category::sentiment;
    scale.scale_min = 1;
    scale.scale_max = 5;
    Question scale_back = question_from_json(to_json(scale));
    CHECK(scale_back.scale_min == 1);
    CHECK(scale_back.scale_max == 5);
}

TEST_CASE("question validation rejects malformed records") {
    Question q = testsupport::make_mc_question("q", "text", "A");
    CHECK_NOTHROW(validate(q));

    Question no_choices = q;
    no_choices.choices.clear();
    CHECK_THROWS_AS(validate(no_choices), DataError);

    Question bad_gold = q;
    bad_gold.gold = "Z";
    CHECK_THROWS_AS(validate(bad_gold), DataError);

    Question empty_id = q;
    empty_id.id = "";
    CHECK_THROWS_AS(validate(empty_id), DataError);

    Question scale;
    scale.id = "s";
    scale.text = "t";
    scale.answer_format = AnswerFormat::numeric_scale;
    scale.gold = "7"; // outside 0..4
    scale.dataset = "d";
    scale.category = Category::sentiment;
    CHECK_THROWS_AS(validate(scale), DataError);
    scale.gold = "4";
    CHECK_NOTHROW(validate(scale));
}

TEST_CASE("labeled instance validation ties budgets to provenance") {
    LabeledInstance inst;
    inst.question_id = "q1";
    inst.label = Strategy::short_cot;
    inst.provenance = Provenance::instance_based;
    CHECK_NOTHROW(validate(inst));

    inst.budget = 128; // instance-based rows must not carry budgets
    CHECK_THROWS_AS(validate(inst), DataError);

    inst.provenance = Provenance::budget_aware;
    CHECK_NOTHROW(validate(inst));

    inst.budget = std::nullopt; // budget-aware rows must carry one
    CHECK_THROWS_AS(validate(inst), DataError);

    inst.budget = 0; // and it must be positive
    CHECK_THROWS_AS(validate(inst), DataError);
}

TEST_CASE("labeled instance json keeps a null budget for instance rows") {
    LabeledInstance inst;
    inst.question_id = "q1";
    inst.label = Strategy::long_cot;
    inst.provenance = Provenance::instance_based;
    nlohmann::json j = to_json(inst);
    CHECK(j.at("budget").is_null());
    LabeledInstance back = labeled_instance_from_json(j);
    CHECK(back.question_id == "q1");
    CHECK(back.label == Strategy::long_cot);
    CHECK_FALSE(back.budget.has_value());

    inst.provenance = Provenance::budget_aware;
    inst.budget = 512;
    LabeledInstance back2 = labeled_instance_from_json(to_json(inst));
    CHECK(back2.budget == 512);
    CHECK(back2.provenance == Provenance::budget_aware);
}

TEST_CASE("load_dataset reads the worked-example questions") {
    auto qs = load_dataset(testsupport::data_file("worked_examples_questions.jsonl"));
    REQUIRE(qs.size() == 3);
    CHECK(qs[0].id == "arc-iced-tea");
    CHECK(qs[0].answer_format == AnswerFormat::multiple_choice);
    CHECK(qs[0].choices.size() == 4);
    CHECK(qs[1].answer_format == AnswerFormat::short_answer);
    CHECK(qs[1].gold == "720");
    CHECK(qs[2].answer_format == AnswerFormat::numeric_scale);
    CHECK(qs[2].category == Category::sentiment);
}

TEST_CASE("load_dataset errors carry the line number") {
    TempDir tmp("domain-load");
    std::string path = tmp.file("bad.jsonl");

    util::write_file_atomic(path, R"({"id":"a","text":"t","answer_format":"short_answer","gold":"1","dataset":"d","category":"math"}
{"id":"b","text":"t"}
)");
    CHECK_THROWS_AS((void)load_dataset(path), DataError);
    try {
        (void)load_dataset(path);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }

    // duplicate ids name both lines
    util::write_file_atomic(path, R"({"id":"a","text":"t","answer_format":"short_answer","gold":"1","dataset":"d","category":"math"}
{"id":"a","text":"t","answer_format":"short_answer","gold":"2","dataset":"d","category":"math"}
)");
    try {
        (void)load_dataset(path);
        FAIL("duplicate id accepted");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("a") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("budget bounded flag") {
    Budget unbounded;
    CHECK_FALSE(unbounded.bounded());
    Budget b{512, 32};
    CHECK(b.bounded());
    CHECK(b.max_total_tokens == 512);
    CHECK(b.answer_reserve == 32);
}
