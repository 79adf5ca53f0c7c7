#include "fixtures.hpp"

#include <atomic>
#include <functional>

#include <unistd.h>

#include "switchcot/util.hpp"

namespace testsupport {

using switchcot::Question;

TempDir::TempDir(const std::string& prefix) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           (prefix + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

std::string data_file(const std::string& name) {
    return std::string(SWITCHCOT_TEST_DATA_DIR) + "/" + name;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
    std::string text;
    for (const auto& row : rows) text += row.dump() + "\n";
    switchcot::util::write_file_atomic(path, text);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    switchcot::util::write_file_atomic(path, text);
}

Question make_mc_question(const std::string& id, const std::string& text,
                          const std::string& gold) {
    Question q;
    q.id = id;
    q.text = text;
    q.answer_format = switchcot::AnswerFormat::multiple_choice;
    q.choices = {{"A", "option one"}, {"B", "option two"}, {"C", "option three"},
                 {"D", "option four"}};
    q.gold = gold;
    q.dataset = "fixture";
    q.category = switchcot::Category::knowledge;
    return q;
}

Question make_math_question(const std::string& id, const std::string& text,
                            const std::string& gold) {
    Question q;
    q.id = id;
    q.text = text;
    q.answer_format = switchcot::AnswerFormat::short_answer;
    q.gold = gold;
    q.dataset = "fixture";
    q.category = switchcot::Category::math;
    return q;
}

namespace {

SyntheticPopulation make_population(int n, const std::function<int(int)>& required_for,
                                    const std::function<bool(int)>& short_correct_for) {
    SyntheticPopulation pop;
    for (int i = 0; i < n; ++i) {
        std::string id = "syn-" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") +
                         std::to_string(i);
        std::string gold = std::to_string(100 + i);
        Question q = make_math_question(
            id, "Work out the value of problem number " + std::to_string(i) + ".", gold);
        q.dataset = "synthetic";
        pop.questions.push_back(q);

        int required = required_for(i);
        bool short_ok = short_correct_for(i);
        pop.specs.push_back({{"question_id", id},
                             {"required_think_tokens", required},
                             {"correct_answer", "\\boxed{" + gold + "}"},
                             {"wrong_answer", "\\boxed{" + std::to_string(200 + n + i) + "}"},
                             {"short_correct", short_ok}});
        // the cell the unbounded confusion run lands in: long always succeeds
        // unbounded, so short_correct decides TT (short) vs FT (long)
        pop.labels.push_back({{"question_id", id},
                              {"budget", nullptr},
                              {"label", short_ok ? "short" : "long"},
                              {"provenance", "instance_based"}});
    }
    return pop;
}

} // namespace

SyntheticPopulation make_routing_population(int n) {
    return make_population(
        n, [](int i) { return i % 2 == 0 ? 40 : 300; },
        [](int i) { return i % 2 == 0; });
}

SyntheticPopulation make_crossover_population(int n) {
    return make_population(
        n, [](int i) { return 450 + (i * 7) % 101; },
        [](int i) { return i % 2 == 0; });
}

MockPopulation make_four_cell_population() {
    MockPopulation pop;
    auto add = [&](const std::string& id, bool short_ok, bool long_ok) {
        pop.questions.push_back(
            make_mc_question(id, "Pick the right option for item " + id + ".", "A"));
        std::string short_ans = short_ok ? "A" : "B";
        std::string long_ans = long_ok ? "A" : "B";
        pop.fixtures.push_back(
            {{"question_id", id},
             {"strategy", "short"},
             {"text", "\nThe answer is (" + short_ans + ")."}});
        pop.fixtures.push_back(
            {{"question_id", id},
             {"strategy", "long"},
             {"text", "Let me weigh the options carefully before committing.</think>\n\nthe "
                      "answer is (" +
                          long_ans + ")"}});
    };
    add("cell-tt-1", true, true);
    add("cell-tt-2", true, true);
    add("cell-tf-1", true, false);
    add("cell-tf-2", true, false);
    add("cell-ft-1", false, true);
    add("cell-ft-2", false, true);
    add("cell-ff-1", false, false);
    add("cell-ff-2", false, false);
    return pop;
}

} // namespace testsupport
