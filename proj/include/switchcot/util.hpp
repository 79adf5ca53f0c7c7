#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace switchcot::util {

// ---------------------------------------------------------------------------
// hashing / deterministic randomness
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view data);

uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull);

// Counter-free PRNG stream. Stable across platforms and stdlib versions;
// std::uniform_int_distribution is not, so all sampling goes through this.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next();
    // uniform in [0,1)
    double next_unit();
    // uniform integer in [lo, hi], inclusive
    int64_t next_in(int64_t lo, int64_t hi);
};

// ---------------------------------------------------------------------------
// strings
// ---------------------------------------------------------------------------

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_on(std::string_view s, char sep);

// Shortest representation that round-trips the exact double value.
std::string format_double(double v);
// Fixed decimal places, e.g. format_fixed(0.5623, 1, 100.0) -> "56.2".
std::string format_fixed(double v, int digits, double scale = 1.0);

// ---------------------------------------------------------------------------
// filesystem / jsonl
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& p);
// Write via temp file + rename so concurrent readers never see partial content.
void write_file_atomic(const std::filesystem::path& p, std::string_view content);

// Calls fn(parsed_object, line_number) for each non-empty line. Throws
// DataError naming the line on parse failure or non-object rows.
void for_each_jsonl(const std::filesystem::path& p,
                    const std::function<void(const nlohmann::json&, int)>& fn);

std::string utc_timestamp_compact();

// ---------------------------------------------------------------------------
// concurrency
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0,n) on up to `workers` threads. fn must only touch
// slot i of any shared output so results are position-deterministic.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace switchcot::util
