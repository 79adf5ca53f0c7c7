#include <doctest.h>

#include "support/fixtures.hpp"
#include "switchcot/backend.hpp"
#include "switchcot/errors.hpp"
#include "switchcot/prompting.hpp"
#include "switchcot/util.hpp"

using namespace switchcot;
using testsupport::TempDir;

TEST_CASE("whitespace token count") {
    CHECK(whitespace_token_count("") == 0);
    CHECK(whitespace_token_count("   \n\t") == 0);
    CHECK(whitespace_token_count("one") == 1);
    CHECK(whitespace_token_count("one two  three\nfour\t five") == 5);
    CHECK(whitespace_token_count("  leading and trailing  ") == 3);
}

TEST_CASE("approx token count is ceil of length over four") {
    CHECK(approx_token_count("") == 0);
    CHECK(approx_token_count("a") == 1);
    CHECK(approx_token_count("abcd") == 1);
    CHECK(approx_token_count("abcde") == 2);
    CHECK(approx_token_count(std::string(101, 'x')) == 26);
}

TEST_CASE("truncate_to_tokens preserves original bytes") {
    TokenTruncation t = truncate_to_tokens("one  two   three", 2);
    CHECK(t.text == "one  two"); // inner spacing untouched
    CHECK(t.tokens == 2);
    CHECK(t.truncated);

    // trailing whitespace only does not count as truncation
    TokenTruncation done = truncate_to_tokens("one two  \n", 2);
    CHECK(done.tokens == 2);
    CHECK_FALSE(done.truncated);
    CHECK(done.text == "one two  \n");

    TokenTruncation all = truncate_to_tokens("one two", 5);
    CHECK(all.text == "one two");
    CHECK_FALSE(all.truncated);
    CHECK(all.tokens == 2);

    TokenTruncation zero = truncate_to_tokens("one two", 0);
    CHECK(zero.text == "");
    CHECK(zero.tokens == 0);
    CHECK(zero.truncated);

    TokenTruncation empty = truncate_to_tokens("", 3);
    CHECK_FALSE(empty.truncated);
    CHECK(empty.tokens == 0);
}

TEST_CASE("truncation count agrees with token count for random strings") {
    util::SplitMix64 rng{7};
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        int words = int(rng.next_in(0, 12));
        for (int w = 0; w < words; ++w) {
            int len = int(rng.next_in(1, 5));
            for (int i = 0; i < len; ++i) s += char('a' + rng.next_in(0, 25));
            int pad = int(rng.next_in(1, 3));
            for (int i = 0; i < pad; ++i) s += rng.next_in(0, 1) ? ' ' : '\n';
        }
        int cap = int(rng.next_in(0, 14));
        TokenTruncation t = truncate_to_tokens(s, cap);
        CHECK(t.tokens == whitespace_token_count(t.text));
        CHECK(t.tokens <= std::max(cap, 0));
        CHECK(t.truncated == (t.tokens < whitespace_token_count(s)));
        // the kept text is a byte prefix of the original
        CHECK(s.rfind(t.text, 0) == 0);
    }
}

namespace {

GenerationRequest make_request(const std::string& qid, const std::string& route,
                               std::optional<int> max_new = std::nullopt) {
    GenerationRequest req;
    req.question_id = qid;
    req.route = route;
    req.max_new_tokens = max_new;
    req.prompt.assistant_prefix =
        route == "short" ? short_placeholder_prefix() : think_open();
    return req;
}

} // namespace

TEST_CASE("mock backend serves scripted rows by question and route") {
    std::vector<MockFixture> rows;
    rows.push_back({"q1", "short", "\nThe answer is (A).", std::nullopt});
    rows.push_back({"q1", "long", "thinking hard</think>\n\nthe answer is (B)", std::nullopt});
    rows.push_back({"q1", "long", "seeded variant</think>\n\nthe answer is (C)", 3});
    MockBackend mock(rows);

    Generation s = mock.generate(make_request("q1", "short"));
    CHECK(s.text == "\nThe answer is (A).");
    CHECK(s.completion_tokens == 4);
    CHECK(s.finish_reason == FinishReason::stop);

    // seed-exact lookup wins over the unseeded row
    GenerationRequest seeded = make_request("q1", "long");
    seeded.seed = 3;
    CHECK(mock.generate(seeded).text == "seeded variant</think>\n\nthe answer is (C)");
    GenerationRequest other_seed = make_request("q1", "long");
    other_seed.seed = 99; // falls back to the unseeded row
    CHECK(mock.generate(other_seed).text == "thinking hard</think>\n\nthe answer is (B)");

    // a missing final row yields an empty continuation, not an error
    Generation fin = mock.generate(make_request("q1", "final"));
    CHECK(fin.text == "");
    CHECK(fin.completion_tokens == 0);

    CHECK_THROWS_AS(mock.generate(make_request("q2", "short")), BackendError);
    try {
        mock.generate(make_request("q2", "short"));
    } catch (const BackendError& e) {
        CHECK_FALSE(e.retryable());
    }

    GenerationRequest no_route = make_request("q1", "");
    CHECK_THROWS_AS(mock.generate(no_route), BackendError);
}

TEST_CASE("mock backend applies the request bound") {
    std::vector<MockFixture> rows;
    rows.push_back({"q1", "long", "a b c d e f g h", std::nullopt});
    MockBackend mock(rows);
    Generation g = mock.generate(make_request("q1", "long", 3));
    CHECK(g.text == "a b c");
    CHECK(g.completion_tokens == 3);
    CHECK(g.finish_reason == FinishReason::length);
}

TEST_CASE("mock backend loads fixture files and reports exact counts") {
    auto mock = MockBackend::from_file(
        testsupport::data_file("worked_examples_transcripts.jsonl"));
    CHECK(mock->exact_token_counts());
    Generation g = mock->generate(make_request("arc-iced-tea", "short"));
    CHECK(g.text == "\nThe answer is (A).");
    Generation sel = mock->generate(make_request("sst-no-movement", "selection"));
    CHECK(sel.text == "\nA. short chain of Thought");
}

TEST_CASE("synthetic backend plans ahead on the long route") {
    std::vector<SyntheticSpec> specs;
    SyntheticSpec s;
    s.question_id = "q1";
    s.required_think_tokens = 5;
    s.correct_answer = "\\boxed{42}";
    s.wrong_answer = "\\boxed{41}";
    specs.push_back(s);
    SyntheticBackend syn(specs);

    // unbounded: full think, closed, correct answer
    Generation unb = syn.generate(make_request("q1", "long"));
    CHECK(unb.text == "hmm hmm hmm hmm hmm</think>\n\n\\boxed{42}");
    CHECK(unb.completion_tokens == 6); // close glues onto the last filler
    CHECK(unb.finish_reason == FinishReason::stop);

    // exactly enough room: still completes
    Generation fits = syn.generate(make_request("q1", "long", 6));
    CHECK(fits.finish_reason == FinishReason::stop);
    CHECK(fits.text.find("</think>") != std::string::npos);

    // one token short: pure filler at the cap, no dangling close
    Generation cut = syn.generate(make_request("q1", "long", 5));
    CHECK(cut.text == "hmm hmm hmm hmm hmm");
    CHECK(cut.completion_tokens == 5);
    CHECK(cut.finish_reason == FinishReason::length);
    CHECK(cut.text.find("</think>") == std::string::npos);
}

TEST_CASE("synthetic backend short and selection routes") {
    std::vector<SyntheticSpec> specs;
    SyntheticSpec easy;
    easy.question_id = "easy";
    easy.required_think_tokens = 0;
    easy.correct_answer = "\\boxed{1}";
    easy.wrong_answer = "\\boxed{2}";
    easy.short_correct = true;
    SyntheticSpec hard = easy;
    hard.question_id = "hard";
    hard.required_think_tokens = 50;
    hard.short_correct = false;
    specs.push_back(easy);
    specs.push_back(hard);
    SyntheticBackend syn(specs);

    CHECK(syn.generate(make_request("easy", "short")).text == "\n\n\\boxed{1}");
    CHECK(syn.generate(make_request("hard", "short")).text == "\n\n\\boxed{2}");
    CHECK(syn.generate(make_request("easy", "selection")).text == "A. Short Chain of Thought");
    CHECK(syn.generate(make_request("hard", "selection")).text == "B. Long Chain of Thought");
    CHECK_THROWS_AS(syn.generate(make_request("missing", "short")), BackendError);
}

TEST_CASE("synthetic forced final answers from the think tokens in the prompt") {
    std::vector<SyntheticSpec> specs;
    SyntheticSpec s;
    s.question_id = "q1";
    s.required_think_tokens = 3;
    s.correct_answer = "\\boxed{9}";
    s.wrong_answer = "\\boxed{8}";
    specs.push_back(s);
    SyntheticBackend syn(specs);

    GenerationRequest enough = make_request("q1", "final");
    enough.prompt.assistant_prefix = "<think>hmm hmm hmm</think>\n\nFinal answer:";
    CHECK(syn.generate(enough).text == " \\boxed{9}");

    GenerationRequest starved = make_request("q1", "final");
    starved.prompt.assistant_prefix = "<think>hmm hmm</think>\n\nFinal answer:";
    CHECK(syn.generate(starved).text == " \\boxed{8}");
}

TEST_CASE("backend factory builds each type and validates config") {
    TempDir tmp("backend-factory");
    std::string fixture_path = tmp.file("rows.jsonl");
    testsupport::write_jsonl(fixture_path,
                             {{{"question_id", "q1"}, {"strategy", "short"}, {"text", "hi"}}});
    auto mock = make_backend({{"type", "mock"}, {"fixtures", fixture_path}});
    CHECK(mock->id() == "mock");

    std::string syn_path = tmp.file("specs.jsonl");
    testsupport::write_jsonl(syn_path, {{{"question_id", "q1"},
                                         {"required_think_tokens", 2},
                                         {"correct_answer", "a"},
                                         {"wrong_answer", "b"}}});
    auto syn = make_backend({{"type", "synthetic"}, {"config", syn_path}});
    CHECK(syn->id() == "synthetic");

    CHECK_THROWS_AS(make_backend({{"type", "mock"}}), ConfigError);
    CHECK_THROWS_AS(make_backend({{"type", "synthetic"}}), ConfigError);
    CHECK_THROWS_AS(make_backend({{"type", "nope"}}), ConfigError);
    CHECK_THROWS_AS(make_backend(nlohmann::json::array()), ConfigError);
}
