#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tweetstudy {

constexpr std::int64_t kMinuteMs = 60'000;
constexpr int kEventPeriods = 15;   // minutes tracked after a message
constexpr int kBaselineReturns = 30; // moving-average depth for excess returns

/// One 1-minute OHLCV bar, timestamped at bar open (epoch ms UTC).
struct Candle {
    std::int64_t open_time = 0;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;
};

/// Time-ordered bars for one exchange pair. Gaps are permitted but
/// duplicate or out-of-order timestamps are not.
struct CandleSeries {
    std::string symbol;
    std::vector<Candle> bars;
};

enum class MediaType { photo, video };

/// One timeline message with the retained variable set. Optional fields
/// absent in the input stay disengaged; they are never empty-string
/// sentinels, so presence statistics stay well defined.
struct TweetRecord {
    std::string tweet_id;
    std::int64_t created_at = 0; // epoch ms UTC
    std::string screen_name;
    std::string text;
    std::string language;
    std::int64_t followers_count = 0;
    std::int64_t friends_count = 0;
    std::int64_t statuses_count = 0;
    std::int64_t favorites_count = 0;
    std::vector<std::string> hashtags;
    std::vector<std::string> mentions_screen_names;
    std::optional<MediaType> media_type;
    bool is_retweet = false; // derived: retweet_text present
    bool is_quote = false;   // derived: quoted_text present
    std::optional<std::string> retweet_text;
    std::optional<std::string> retweet_screen_name;
    std::optional<std::int64_t> retweet_followers_count;
    std::optional<std::int64_t> retweet_friends_count;
    std::optional<std::int64_t> retweet_lag_ms;
    std::optional<std::string> quoted_text;
    std::optional<std::string> quoted_screen_name;
    std::optional<std::int64_t> quoted_followers_count;
    std::optional<std::int64_t> quoted_friends_count;
    std::optional<std::int64_t> quoted_lag_ms;
    std::optional<double> sentiment; // filled by the featurize step
};

/// Missing-minute intervals inside a candle series.
struct GapReport {
    struct Gap {
        std::int64_t gap_start_ms = 0; // first missing minute
        std::int64_t gap_end_ms = 0;   // last missing minute (inclusive)
        std::int64_t missing_bar_count = 0;
    };
    std::string symbol;
    std::vector<Gap> gaps;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class MalformedRow : public ParseError {
public:
    explicit MalformedRow(std::size_t line, const std::string& detail = "malformed row")
        : ParseError(detail, line) {}
};

class NonMonotonicTimestamp : public ParseError {
public:
    explicit NonMonotonicTimestamp(std::size_t line)
        : ParseError("non-monotonic open_time", line) {}
};

class NonPositivePrice : public ParseError {
public:
    explicit NonPositivePrice(std::size_t line)
        : ParseError("non-positive price", line) {}
};

class DuplicateTweetId : public ParseError {
public:
    DuplicateTweetId(std::size_t line, const std::string& id)
        : ParseError("duplicate tweet_id '" + id + "'", line) {}
};

class IoFailure : public std::runtime_error {
public:
    explicit IoFailure(const std::string& what) : std::runtime_error(what) {}
};

inline const char* to_string(MediaType m) {
    return m == MediaType::photo ? "photo" : "video";
}

inline std::optional<MediaType> media_type_from_string(const std::string& s) {
    if (s == "photo") return MediaType::photo;
    if (s == "video") return MediaType::video;
    return std::nullopt;
}

} // namespace tweetstudy
