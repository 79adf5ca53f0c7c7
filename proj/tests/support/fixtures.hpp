#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcot/domain.hpp"

namespace testsupport {

// Self-deleting scratch directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& prefix);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Absolute path of a committed fixture file.
std::string data_file(const std::string& name);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
void write_text(const std::filesystem::path& path, const std::string& text);

switchcot::Question make_mc_question(const std::string& id, const std::string& text,
                                     const std::string& gold);
switchcot::Question make_math_question(const std::string& id, const std::string& text,
                                       const std::string& gold);

// A scripted-reasoner population plus everything needed to drive it: backend
// specs, and the instance labels its confusion cells imply.
struct SyntheticPopulation {
    std::vector<switchcot::Question> questions;
    std::vector<nlohmann::json> specs;
    std::vector<nlohmann::json> labels;
};

// Alternating easy/hard items: even index answers correctly without thinking
// (40 think tokens when routed long), odd index needs 300 think tokens and
// fails the direct route. Routing is the whole game here.
SyntheticPopulation make_routing_population(int n);

// Every item needs roughly 500 think tokens (spread over [450, 550]); half
// answer correctly without thinking. Long overtakes short only once the
// budget clears the think requirement.
SyntheticPopulation make_crossover_population(int n);

// Mock-scripted population covering each confusion cell twice: q1/q2 both
// strategies correct, q3/q4 short only, q5/q6 long only, q7/q8 neither.
struct MockPopulation {
    std::vector<switchcot::Question> questions;
    std::vector<nlohmann::json> fixtures;
};
MockPopulation make_four_cell_population();

} // namespace testsupport
