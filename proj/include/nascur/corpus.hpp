#pragma once

// Repository metadata acquisition: one search query per day over the
// collection window, top-N selection by star count. The fetcher is an
// interface so the whole pipeline runs offline against a fixture
// directory; the live client talks to the search endpoint with paging
// and disk caching.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "nascur/errors.hpp"

namespace nascur {

struct Date {
    int year = 0, month = 0, day = 0;

    auto operator<=>(const Date&) const = default;

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(const std::string& s) {
        Date d;
        if (std::sscanf(s.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
            throw Error(errkind::invalid_range, "bad date: " + s);
        return d;
    }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} /
               std::chrono::day{static_cast<unsigned>(day)};
    }

    static Date from_ymd(std::chrono::year_month_day d) {
        return {static_cast<int>(d.year()), static_cast<int>(static_cast<unsigned>(d.month())),
                static_cast<int>(static_cast<unsigned>(d.day()))};
    }
};

struct RepoMeta {
    std::string full_name;
    std::string url;
    long stars = 0;
    Date created;
};

inline constexpr const char* kSearchHost = "https://api.github.com";
inline constexpr const char* kSearchPath = "/search/repositories";

// One query per day, formatted exactly as the search endpoint template:
// q=keras+language:python+created:yyyy-mm-dd.
inline std::vector<std::string> build_queries(Date start, Date end,
                                              const std::string& keyword = "keras") {
    if (end < start)
        throw Error(errkind::invalid_range, start.str() + " > " + end.str());
    std::vector<std::string> out;
    auto day = std::chrono::sys_days{start.ymd()};
    const auto last = std::chrono::sys_days{end.ymd()};
    for (; day <= last; day += std::chrono::days{1}) {
        Date d = Date::from_ymd(std::chrono::year_month_day{day});
        out.push_back("q=" + keyword + "+language:python+created:" + d.str());
    }
    return out;
}

// The n highest-star repos; ties break by full_name ascending.
inline std::vector<RepoMeta> select_top_starred(std::vector<RepoMeta> repos, long n) {
    if (n < 0) throw Error(errkind::invalid_range, "n must be >= 0");
    std::sort(repos.begin(), repos.end(), [](const RepoMeta& a, const RepoMeta& b) {
        if (a.stars != b.stars) return a.stars > b.stars;
        return a.full_name < b.full_name;
    });
    if (static_cast<long>(repos.size()) > n) repos.resize(static_cast<std::size_t>(n));
    return repos;
}

inline std::vector<RepoMeta> repos_from_json(const nlohmann::json& body) {
    std::vector<RepoMeta> out;
    if (!body.contains("items")) return out;
    for (const auto& item : body.at("items")) {
        RepoMeta r;
        r.full_name = item.value("full_name", "");
        r.url = item.value("html_url", "");
        r.stars = item.value("stargazers_count", 0L);
        std::string created = item.value("created_at", "");
        if (created.size() >= 10) r.created = Date::parse(created.substr(0, 10));
        out.push_back(std::move(r));
    }
    return out;
}

// Filesystem key for a query string: everything outside [A-Za-z0-9._-]
// becomes '_', so q=keras+language:python+created:2015-01-01 maps to
// q_keras_language_python_created_2015-01-01.json.
inline std::string query_cache_key(const std::string& query) {
    std::string key = query;
    for (char& c : key)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_')
            c = '_';
    return key;
}

class RepoFetcher {
public:
    virtual ~RepoFetcher() = default;
    virtual std::vector<RepoMeta> fetch(const std::string& query) = 0;
};

// Reads {query}.json fixture files (same body schema as the live
// endpoint) from a directory. Missing files mean an empty result.
class OfflineFetcher : public RepoFetcher {
public:
    explicit OfflineFetcher(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::vector<RepoMeta> fetch(const std::string& query) override {
        auto path = dir_ / (query_cache_key(query) + ".json");
        std::ifstream in(path);
        if (!in) return {};
        nlohmann::json j;
        in >> j;
        return repos_from_json(j);
    }

private:
    std::filesystem::path dir_;
};

// Live HTTP client with paging, Retry-After handling and an optional
// response cache keyed by query string. Token comes from NC_API_TOKEN.
class LiveFetcher : public RepoFetcher {
public:
    explicit LiveFetcher(std::string base_url = kSearchHost,
                         std::optional<std::filesystem::path> cache_dir = std::nullopt)
        : base_url_(std::move(base_url)), cache_dir_(std::move(cache_dir)) {
        if (const char* tok = std::getenv("NC_API_TOKEN")) token_ = tok;
    }

    std::vector<RepoMeta> fetch(const std::string& query) override {
        if (cache_dir_) {
            std::ifstream in(*cache_dir_ / (query_cache_key(query) + ".json"));
            if (in) {
                nlohmann::json j;
                in >> j;
                return repos_from_json(j);
            }
        }
        nlohmann::json merged;
        merged["items"] = nlohmann::json::array();
        httplib::Client client(base_url_);
        client.set_read_timeout(30, 0);
        for (int page = 1; page <= max_pages_; ++page) {
            std::string path = std::string(kSearchPath) + "?" + query +
                               "&per_page=100&page=" + std::to_string(page);
            httplib::Headers headers = {{"Accept", "application/vnd.github+json"},
                                        {"User-Agent", "nas-curator"}};
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
            auto res = request_with_retry(client, path, headers);
            if (!res || res->status != 200)
                throw Error(errkind::bad_artifact,
                            "search request failed for query: " + query);
            auto body = nlohmann::json::parse(res->body);
            std::size_t got = 0;
            for (auto& item : body.at("items")) {
                merged["items"].push_back(std::move(item));
                ++got;
            }
            if (got < 100) break;
        }
        merged["total_count"] = merged["items"].size();
        if (cache_dir_) {
            std::filesystem::create_directories(*cache_dir_);
            std::ofstream out(*cache_dir_ / (query_cache_key(query) + ".json"));
            out << merged.dump(2) << "\n";
        }
        return repos_from_json(merged);
    }

private:
    httplib::Result request_with_retry(httplib::Client& client, const std::string& path,
                                       const httplib::Headers& headers) {
        for (int attempt = 0; attempt < 3; ++attempt) {
            auto res = client.Get(path, headers);
            if (res && (res->status == 403 || res->status == 429) &&
                res->has_header("Retry-After")) {
                int wait = std::stoi(res->get_header_value("Retry-After"));
                std::this_thread::sleep_for(std::chrono::seconds(std::min(wait, 60)));
                continue;
            }
            return res;
        }
        return client.Get(path, headers);
    }

    std::string base_url_;
    std::optional<std::filesystem::path> cache_dir_;
    std::string token_;
    int max_pages_ = 10;
};

// Full collection step: all day queries, aggregated, then the global
// star cap. Aggregation is order-independent; the sort makes it
// canonical.
inline std::vector<RepoMeta> collect_repos(RepoFetcher& fetcher, Date start, Date end, long top_n,
                                           const std::string& keyword = "keras") {
    std::vector<RepoMeta> all;
    for (const auto& q : build_queries(start, end, keyword)) {
        auto batch = fetcher.fetch(q);
        all.insert(all.end(), batch.begin(), batch.end());
    }
    return select_top_starred(std::move(all), top_n);
}

inline nlohmann::ordered_json repos_to_json(const std::vector<RepoMeta>& repos) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : repos) {
        nlohmann::ordered_json o;
        o["full_name"] = r.full_name;
        o["url"] = r.url;
        o["stars"] = r.stars;
        o["created"] = r.created.str();
        j.push_back(std::move(o));
    }
    return j;
}

}  // namespace nascur
