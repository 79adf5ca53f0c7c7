#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "switchcot/backend.hpp"
#include "switchcot/budget_force.hpp"
#include "switchcot/cli.hpp"
#include "switchcot/domain.hpp"
#include "switchcot/errors.hpp"
#include "switchcot/eval.hpp"
#include "switchcot/prompting.hpp"
#include "switchcot/selector.hpp"
#include "switchcot/util.hpp"

namespace py = pybind11;
using namespace switchcot;

namespace {

nlohmann::json parse_json(const std::string& text, const char* what) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument(std::string(what) + ": invalid JSON");
    return j;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Budget-aware routing between short and long chain-of-thought";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<BackendError>(m, "BackendError");

    m.def("run_cli", [](const std::vector<std::string>& args) {
        cli::Result r = cli::run(args);
        return py::make_tuple(r.exit_code, r.run_dir, r.output);
    },
        py::arg("args"), "Run a CLI command in-process; returns (exit_code, run_dir, output)");

    m.def("load_dataset_summary", [](const std::string& path) {
        std::vector<Question> qs = load_dataset(path);
        py::list ids;
        for (const auto& q : qs) ids.append(q.id);
        return ids;
    },
        py::arg("path"), "Validate a questions file and return its question ids");

    m.def("build_prompt_text", [](const std::string& question_json, const std::string& strategy) {
        Question q = question_from_json(parse_json(question_json, "question"));
        PromptTemplates t;
        PromptBundle b = build_prompt(q, strategy_from_string(strategy), t);
        return py::make_tuple(b.user_text, b.assistant_prefix);
    },
        py::arg("question_json"), py::arg("strategy"),
        "Return (user_text, assistant_prefix) for a question and strategy");

    m.def("split_think_answer", [](const std::string& transcript) {
        auto [think, answer] = split_transcript(transcript);
        return py::make_tuple(think, answer);
    },
        py::arg("transcript"), "Split a transcript into (think_text, answer_text)");

    m.def("count_tokens", &whitespace_token_count, py::arg("text"),
          "Whitespace-delimited token count");

    m.def("truncate_tokens", [](const std::string& text, int max_tokens) {
        TokenTruncation t = truncate_to_tokens(text, max_tokens);
        return py::make_tuple(t.text, t.tokens, t.truncated);
    },
        py::arg("text"), py::arg("max_tokens"),
        "Truncate to a token budget; returns (text, tokens, truncated)");

    m.def("extract_final_answer",
          [](const std::string& question_json, const std::string& answer_text) -> py::object {
              Question q = question_from_json(parse_json(question_json, "question"));
              Extraction got = extract_answer(answer_text, q.answer_format,
                                              ExtractionContext::for_question(q));
              if (!got.ok) return py::none();
              return py::cast(got.value);
          },
          py::arg("question_json"), py::arg("answer_text"),
          "Extract the final answer for a question, or None");

    m.def("sha256_hex", [](const std::string& data) { return util::sha256_hex(data); },
          py::arg("data"), "Hex SHA-256 digest of a byte string");
}
