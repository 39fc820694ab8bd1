#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tweetstudy/ingest.hpp"
#include "tweetstudy/io.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::store {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

/// Canonical on-disk store: one candle file per symbol, one tweet file,
/// one screen_name -> symbol mapping file.
struct Store {
    std::map<std::string, CandleSeries> candles;             // by symbol
    std::vector<TweetRecord> tweets;                          // sorted by (created_at, tweet_id)
    std::map<std::string, std::string> mapping;               // screen_name -> symbol
    std::map<std::string, std::vector<std::string>> tokens;   // tweet_id -> featurized tokens
};

inline bool valid_symbol(const std::string& symbol) {
    if (symbol.empty()) return false;
    for (char c : symbol) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

inline std::string candle_file_name(const std::string& symbol) {
    return "candles_" + symbol + ".csv";
}

inline void sort_tweets(std::vector<TweetRecord>& tweets) {
    std::sort(tweets.begin(), tweets.end(), [](const TweetRecord& a, const TweetRecord& b) {
        if (a.created_at != b.created_at) return a.created_at < b.created_at;
        return a.tweet_id < b.tweet_id;
    });
}

inline void write_candles(const std::string& path, const CandleSeries& series) {
    std::ofstream out = open_output(path);
    out << ingest::kCandleHeader << '\n';
    for (const Candle& bar : series.bars) {
        out << bar.open_time << ',' << format_double(bar.open) << ',' << format_double(bar.high)
            << ',' << format_double(bar.low) << ',' << format_double(bar.close) << ','
            << format_double(bar.volume) << '\n';
    }
}

namespace detail {

inline void put_opt(ordered_json& row, const char* key, const std::optional<std::string>& v) {
    if (v) row[key] = *v;
    else row[key] = nullptr;
}

inline void put_opt(ordered_json& row, const char* key, const std::optional<std::int64_t>& v) {
    if (v) row[key] = *v;
    else row[key] = nullptr;
}

} // namespace detail

/// Canonical JSON form: fixed key order, explicit nulls for absent
/// optionals. is_retweet/is_quote are derived at parse time and not stored.
inline std::string serialize_tweet(const TweetRecord& rec,
                                   const std::vector<std::string>* tokens = nullptr) {
    ordered_json row;
    row["tweet_id"] = rec.tweet_id;
    row["created_at"] = rec.created_at;
    row["screen_name"] = rec.screen_name;
    row["text"] = rec.text;
    row["language"] = rec.language;
    row["followers_count"] = rec.followers_count;
    row["friends_count"] = rec.friends_count;
    row["statuses_count"] = rec.statuses_count;
    row["favorites_count"] = rec.favorites_count;
    row["hashtags"] = rec.hashtags;
    row["mentions_screen_names"] = rec.mentions_screen_names;
    if (rec.media_type) row["media_type"] = to_string(*rec.media_type);
    else row["media_type"] = nullptr;
    detail::put_opt(row, "retweet_text", rec.retweet_text);
    detail::put_opt(row, "retweet_screen_name", rec.retweet_screen_name);
    detail::put_opt(row, "retweet_followers_count", rec.retweet_followers_count);
    detail::put_opt(row, "retweet_friends_count", rec.retweet_friends_count);
    detail::put_opt(row, "retweet_lag_ms", rec.retweet_lag_ms);
    detail::put_opt(row, "quoted_text", rec.quoted_text);
    detail::put_opt(row, "quoted_screen_name", rec.quoted_screen_name);
    detail::put_opt(row, "quoted_followers_count", rec.quoted_followers_count);
    detail::put_opt(row, "quoted_friends_count", rec.quoted_friends_count);
    detail::put_opt(row, "quoted_lag_ms", rec.quoted_lag_ms);
    if (rec.sentiment) row["sentiment"] = *rec.sentiment;
    else row["sentiment"] = nullptr;
    if (tokens) row["tokens"] = *tokens;
    return row.dump();
}

inline void write_tweets(const std::string& path, const Store& s) {
    std::ofstream out = open_output(path);
    for (const TweetRecord& rec : s.tweets) {
        auto tok = s.tokens.find(rec.tweet_id);
        out << serialize_tweet(rec, tok == s.tokens.end() ? nullptr : &tok->second) << '\n';
    }
}

inline void write_mapping(const std::string& path, const std::map<std::string, std::string>& mapping) {
    std::ofstream out = open_output(path);
    out << "screen_name,symbol\n";
    for (const auto& [name, symbol] : mapping)
        out << csv_escape(name) << ',' << csv_escape(symbol) << '\n';
}

inline std::map<std::string, std::string> read_mapping(const std::string& path) {
    std::map<std::string, std::string> mapping;
    std::ifstream in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header_seen) {
            if (stripped != "screen_name,symbol")
                throw MalformedRow(line_no, "expected header 'screen_name,symbol'");
            header_seen = true;
            continue;
        }
        auto fields = csv_split(stripped, line_no);
        if (fields.size() != 2) throw MalformedRow(line_no, "expected 2 fields");
        mapping[fields[0]] = fields[1];
    }
    return mapping;
}

inline void save(const Store& s, const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& [symbol, series] : s.candles) {
        if (!valid_symbol(symbol)) throw IoFailure("symbol not filename-safe: " + symbol);
        write_candles((fs::path(dir) / candle_file_name(symbol)).string(), series);
    }
    write_tweets((fs::path(dir) / "tweets.ndjson").string(), s);
    write_mapping((fs::path(dir) / "mapping.csv").string(), s.mapping);
}

inline Store load(const std::string& dir) {
    Store s;
    if (!fs::is_directory(dir)) throw IoFailure("store directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.rfind("candles_", 0) == 0 && name.size() > 12 && name.ends_with(".csv")) {
            std::string symbol = name.substr(8, name.size() - 12);
            s.candles[symbol] = ingest::parse_candles(entry.path().string(), symbol);
        }
    }
    fs::path tweets_path = fs::path(dir) / "tweets.ndjson";
    if (fs::exists(tweets_path)) {
        s.tweets = ingest::parse_tweets(tweets_path.string());
        // Recover the featurized token column, if present.
        std::ifstream in = open_input(tweets_path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto stripped = trim(line);
            if (stripped.empty()) continue;
            auto row = nlohmann::json::parse(stripped);
            auto tok = row.find("tokens");
            if (tok != row.end() && tok->is_array()) {
                std::vector<std::string> tokens;
                for (const auto& t : *tok) tokens.push_back(t.get<std::string>());
                s.tokens[row["tweet_id"].is_string() ? row["tweet_id"].get<std::string>()
                                                     : std::to_string(row["tweet_id"].get<std::int64_t>())] =
                    std::move(tokens);
            }
        }
        sort_tweets(s.tweets);
    }
    fs::path mapping_path = fs::path(dir) / "mapping.csv";
    if (fs::exists(mapping_path)) s.mapping = read_mapping(mapping_path.string());
    return s;
}

} // namespace tweetstudy::store
