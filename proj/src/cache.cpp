#include "switchcot/backend.hpp"

#include "switchcot/errors.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
}

std::string CachedBackend::cache_key(const GenerationRequest& req, const std::string& backend_id) {
    // canonical form: object keys sort lexicographically in nlohmann's dump
    nlohmann::json j{
        {"assistant_prefix", req.prompt.assistant_prefix},
        {"backend_id", backend_id},
        {"max_new_tokens",
         req.max_new_tokens ? nlohmann::json(*req.max_new_tokens) : nlohmann::json(nullptr)},
        {"model_id", req.model_id},
        {"question_id", req.question_id},
        {"route", req.route},
        {"seed", req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr)},
        {"stop_sequences", req.prompt.stop_sequences},
        {"temperature", util::format_double(req.temperature)},
        {"user_text", req.prompt.user_text},
    };
    return util::sha256_hex(j.dump());
}

std::filesystem::path CachedBackend::entry_path(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
}

Generation CachedBackend::generate(const GenerationRequest& req) {
    const std::string key = cache_key(req, inner_->id());
    const auto path = entry_path(key);

    if (std::filesystem::exists(path)) {
        std::string warning;
        try {
            nlohmann::json j = nlohmann::json::parse(util::read_file(path));
            if (j.at("request_digest").get<std::string>() != key) {
                warning = "cache entry digest mismatch: " + path.string();
            } else {
                Generation g;
                g.text = j.at("text").get<std::string>();
                g.completion_tokens = j.at("completion_tokens").get<int>();
                g.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
                g.cache_hit = true;
                std::lock_guard<std::mutex> lk(mu_);
                ++stats_.hits;
                return g;
            }
        } catch (const std::exception& e) {
            warning = "corrupt cache entry treated as miss: " + path.string() + ": " + e.what();
        }
        if (!warning.empty()) {
            std::lock_guard<std::mutex> lk(mu_);
            stats_.warnings.push_back(warning);
        }
    }

    Generation g;
    {
        std::lock_guard<std::mutex> lk(mu_);
        ++stats_.misses;
        ++stats_.backend_calls;
    }
    g = inner_->generate(req);
    g.cache_hit = false;

    nlohmann::json j{{"request_digest", key},
                     {"text", g.text},
                     {"completion_tokens", g.completion_tokens},
                     {"finish_reason", to_string(g.finish_reason)},
                     {"timestamp", util::utc_timestamp_compact()}};
    util::write_file_atomic(path, j.dump());
    return g;
}

CacheStats CachedBackend::stats() const {
    std::lock_guard<std::mutex> lk(mu_);
    return stats_;
}

CacheDiskStats cache_disk_stats(const std::filesystem::path& dir) {
    CacheDiskStats s;
    if (!std::filesystem::exists(dir)) return s;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ++s.entries;
            s.bytes += static_cast<long long>(entry.file_size());
        }
    }
    return s;
}

long cache_clear(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) return 0;
    long removed = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") ++removed;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::filesystem::remove_all(entry.path());
    }
    return removed;
}

} // namespace switchcot
