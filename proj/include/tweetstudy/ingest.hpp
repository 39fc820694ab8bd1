#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tweetstudy/io.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::ingest {

inline constexpr const char* kCandleHeader = "open_time_ms,open,high,low,close,volume";

/// Parses one candle file. Rows out of order are rejected, not sorted.
inline CandleSeries parse_candles(const std::string& path, const std::string& symbol) {
    std::ifstream in = open_input(path);
    CandleSeries series;
    series.symbol = symbol;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header_seen) {
            if (stripped != kCandleHeader)
                throw MalformedRow(line_no, "expected header '" + std::string(kCandleHeader) + "'");
            header_seen = true;
            continue;
        }
        auto fields = split(stripped, ',');
        if (fields.size() != 6) throw MalformedRow(line_no, "expected 6 fields");
        auto open_time = parse_i64(trim(fields[0]));
        auto open = parse_f64(trim(fields[1]));
        auto high = parse_f64(trim(fields[2]));
        auto low = parse_f64(trim(fields[3]));
        auto close = parse_f64(trim(fields[4]));
        auto volume = parse_f64(trim(fields[5]));
        if (!open_time || !open || !high || !low || !close || !volume)
            throw MalformedRow(line_no, "unparseable field");
        if (*open_time % kMinuteMs != 0)
            throw MalformedRow(line_no, "open_time not on the minute grid");
        if (!(*open > 0.0) || !(*high > 0.0) || !(*low > 0.0) || !(*close > 0.0))
            throw NonPositivePrice(line_no);
        if (*volume < 0.0) throw MalformedRow(line_no, "negative volume");
        if (*low > std::min(*open, *close) || *high < std::max(*open, *close))
            throw MalformedRow(line_no, "low/high outside open/close envelope");
        if (!series.bars.empty() && *open_time <= series.bars.back().open_time)
            throw NonMonotonicTimestamp(line_no);
        series.bars.push_back({*open_time, *open, *high, *low, *close, *volume});
    }
    if (!header_seen) throw MalformedRow(1, "missing header");
    return series;
}

namespace detail {

using json = nlohmann::json;

inline std::string require_string(const json& row, const char* key, std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) throw MalformedRow(line_no, std::string("missing ") + key);
    if (it->is_string()) return it->get<std::string>();
    throw MalformedRow(line_no, std::string(key) + " must be a string");
}

inline std::int64_t require_int(const json& row, const char* key, std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) throw MalformedRow(line_no, std::string("missing ") + key);
    if (!it->is_number_integer()) throw MalformedRow(line_no, std::string(key) + " must be an integer");
    return it->get<std::int64_t>();
}

inline std::int64_t optional_count(const json& row, const char* key, std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) return 0;
    if (!it->is_number_integer()) throw MalformedRow(line_no, std::string(key) + " must be an integer");
    auto v = it->get<std::int64_t>();
    if (v < 0) throw MalformedRow(line_no, std::string(key) + " must be non-negative");
    return v;
}

inline std::optional<std::string> optional_string(const json& row, const char* key, std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw MalformedRow(line_no, std::string(key) + " must be a string");
    return it->get<std::string>();
}

inline std::optional<std::int64_t> optional_int(const json& row, const char* key, std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) throw MalformedRow(line_no, std::string(key) + " must be an integer");
    return it->get<std::int64_t>();
}

inline std::vector<std::string> optional_string_list(const json& row, const char* key,
                                                     std::size_t line_no) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) return {};
    if (!it->is_array()) throw MalformedRow(line_no, std::string(key) + " must be an array");
    std::vector<std::string> out;
    for (const auto& el : *it) {
        if (!el.is_string()) throw MalformedRow(line_no, std::string(key) + " entries must be strings");
        out.push_back(to_lower_ascii(el.get<std::string>()));
    }
    return out;
}

inline TweetRecord parse_tweet_row(const json& row, std::size_t line_no) {
    TweetRecord rec;
    auto id = row.find("tweet_id");
    if (id == row.end() || id->is_null()) throw MalformedRow(line_no, "missing tweet_id");
    if (id->is_string()) rec.tweet_id = id->get<std::string>();
    else if (id->is_number_integer()) rec.tweet_id = std::to_string(id->get<std::int64_t>());
    else throw MalformedRow(line_no, "tweet_id must be a string or integer");
    rec.created_at = require_int(row, "created_at", line_no);
    rec.screen_name = require_string(row, "screen_name", line_no);
    rec.text = require_string(row, "text", line_no);
    rec.language = optional_string(row, "language", line_no).value_or("und");
    rec.followers_count = optional_count(row, "followers_count", line_no);
    rec.friends_count = optional_count(row, "friends_count", line_no);
    rec.statuses_count = optional_count(row, "statuses_count", line_no);
    rec.favorites_count = optional_count(row, "favorites_count", line_no);
    rec.hashtags = optional_string_list(row, "hashtags", line_no);
    rec.mentions_screen_names = optional_string_list(row, "mentions_screen_names", line_no);
    if (auto media = optional_string(row, "media_type", line_no)) {
        rec.media_type = media_type_from_string(*media);
        if (!rec.media_type) throw MalformedRow(line_no, "media_type must be photo or video");
    }
    rec.retweet_text = optional_string(row, "retweet_text", line_no);
    rec.retweet_screen_name = optional_string(row, "retweet_screen_name", line_no);
    rec.retweet_followers_count = optional_int(row, "retweet_followers_count", line_no);
    rec.retweet_friends_count = optional_int(row, "retweet_friends_count", line_no);
    rec.retweet_lag_ms = optional_int(row, "retweet_lag_ms", line_no);
    rec.quoted_text = optional_string(row, "quoted_text", line_no);
    rec.quoted_screen_name = optional_string(row, "quoted_screen_name", line_no);
    rec.quoted_followers_count = optional_int(row, "quoted_followers_count", line_no);
    rec.quoted_friends_count = optional_int(row, "quoted_friends_count", line_no);
    rec.quoted_lag_ms = optional_int(row, "quoted_lag_ms", line_no);
    if (rec.retweet_lag_ms && *rec.retweet_lag_ms < 0)
        throw MalformedRow(line_no, "retweet_lag_ms must be non-negative");
    if (rec.quoted_lag_ms && *rec.quoted_lag_ms < 0)
        throw MalformedRow(line_no, "quoted_lag_ms must be non-negative");
    auto sentiment = row.find("sentiment");
    if (sentiment != row.end() && !sentiment->is_null()) {
        if (!sentiment->is_number()) throw MalformedRow(line_no, "sentiment must be a number");
        rec.sentiment = sentiment->get<double>();
    }
    rec.is_retweet = rec.retweet_text.has_value();
    rec.is_quote = rec.quoted_text.has_value();
    return rec;
}

} // namespace detail

/// Parses one tweet object; `line_no` is only used in error messages.
inline TweetRecord parse_tweet_json(const nlohmann::json& row, std::size_t line_no = 0) {
    if (!row.is_object()) throw MalformedRow(line_no, "row must be an object");
    return detail::parse_tweet_row(row, line_no);
}

/// Parses a tweet file (one JSON object per line). Derived booleans are
/// set from the presence of retweet_text / quoted_text.
inline std::vector<TweetRecord> parse_tweets(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<TweetRecord> out;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        detail::json row;
        try {
            row = detail::json::parse(stripped);
        } catch (const detail::json::parse_error&) {
            throw MalformedRow(line_no, "invalid JSON");
        }
        TweetRecord rec = parse_tweet_json(row, line_no);
        if (!seen_ids.insert(rec.tweet_id).second) throw DuplicateTweetId(line_no, rec.tweet_id);
        out.push_back(std::move(rec));
    }
    return out;
}

/// Every absent minute between the first and last bar lands in exactly
/// one gap interval.
inline GapReport scan_gaps(const CandleSeries& series) {
    GapReport report;
    report.symbol = series.symbol;
    for (std::size_t i = 1; i < series.bars.size(); ++i) {
        std::int64_t prev = series.bars[i - 1].open_time;
        std::int64_t cur = series.bars[i].open_time;
        std::int64_t missing = (cur - prev) / kMinuteMs - 1;
        if (missing > 0)
            report.gaps.push_back({prev + kMinuteMs, cur - kMinuteMs, missing});
    }
    return report;
}

} // namespace tweetstudy::ingest
