#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tweetstudy/io.hpp"
#include "tweetstudy/numeric.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::eventstudy {

class InsufficientHistory : public std::runtime_error {
public:
    InsufficientHistory() : std::runtime_error("fewer than 30 returns before the anchor") {}
};

class InsufficientOverlap : public std::runtime_error {
public:
    InsufficientOverlap() : std::runtime_error("no overlapping minutes between series") {}
};

/// Per-minute log returns. An entry is timestamped at the later bar;
/// a gap breaks the chain, so no return spans missing minutes.
struct ReturnSeries {
    struct Entry {
        std::int64_t open_time = 0;
        double log_return = 0.0;
    };
    std::string symbol;
    std::vector<Entry> entries;
};

inline ReturnSeries log_returns(const CandleSeries& series) {
    ReturnSeries out;
    out.symbol = series.symbol;
    for (std::size_t i = 1; i < series.bars.size(); ++i) {
        const Candle& prev = series.bars[i - 1];
        const Candle& cur = series.bars[i];
        if (cur.open_time - prev.open_time != kMinuteMs) continue;
        out.entries.push_back({cur.open_time, std::log(cur.open / prev.open)});
    }
    return out;
}

/// A tweet joined to the 15 one-minute returns after its anchor bar.
struct EventWindow {
    std::string tweet_id;
    std::string symbol;
    std::int64_t anchor_bar_time = 0;
    std::int64_t alignment_offset_ms = 0; // in [0, 60000)
    std::array<double, kEventPeriods> returns{};
    std::array<double, kEventPeriods> cumret{};
    std::optional<std::array<double, kEventPeriods>> excess;

    std::array<double, kEventPeriods> cumulative_excess() const {
        std::array<double, kEventPeriods> out{};
        double acc = 0.0;
        for (int k = 0; k < kEventPeriods; ++k) {
            acc += (*excess)[k];
            out[k] = acc;
        }
        return out;
    }
};

namespace detail {

/// Index of the bar with exactly this open_time, if present.
inline std::optional<std::size_t> bar_at(const CandleSeries& series, std::int64_t open_time) {
    auto it = std::lower_bound(series.bars.begin(), series.bars.end(), open_time,
                               [](const Candle& c, std::int64_t t) { return c.open_time < t; });
    if (it == series.bars.end() || it->open_time != open_time) return std::nullopt;
    return static_cast<std::size_t>(it - series.bars.begin());
}

inline std::int64_t anchor_minute(std::int64_t created_at) {
    std::int64_t m = created_at / kMinuteMs;
    if (created_at % kMinuteMs != 0) ++m;
    return m * kMinuteMs;
}

} // namespace detail

/// Aligns a creation time to its anchor bar (first bar open at or after
/// the timestamp) and collects the 15 following returns. Disengaged when
/// any of the 16 needed bars is missing; cumret telescopes by
/// construction.
inline std::optional<EventWindow> align_event(std::int64_t created_at, const CandleSeries& series) {
    std::int64_t m0 = detail::anchor_minute(created_at);
    auto anchor_idx = detail::bar_at(series, m0);
    if (!anchor_idx) return std::nullopt;
    std::size_t idx = *anchor_idx;
    // The 15 bars after the anchor must sit on consecutive minutes.
    for (int k = 1; k <= kEventPeriods; ++k) {
        if (idx + k >= series.bars.size() ||
            series.bars[idx + k].open_time != m0 + k * kMinuteMs)
            return std::nullopt;
    }
    EventWindow window;
    window.symbol = series.symbol;
    window.anchor_bar_time = m0;
    window.alignment_offset_ms = m0 - created_at;
    double acc = 0.0;
    for (int k = 1; k <= kEventPeriods; ++k) {
        double r = std::log(series.bars[idx + k].open / series.bars[idx + k - 1].open);
        window.returns[k - 1] = r;
        acc += r;
        window.cumret[k - 1] = acc;
    }
    return window;
}

/// Excess returns under the SMA market model. The baseline is the mean
/// of the n returns immediately preceding each period, so it rolls
/// forward with k and post-tweet returns enter it as k grows.
inline std::array<double, kEventPeriods> sma_excess(std::span<const double> prior,
                                                    std::span<const double, kEventPeriods> window,
                                                    int n = kBaselineReturns) {
    if (static_cast<int>(prior.size()) < n) throw InsufficientHistory();
    std::vector<double> chain(prior.end() - n, prior.end());
    chain.insert(chain.end(), window.begin(), window.end());
    std::array<double, kEventPeriods> excess{};
    for (int k = 0; k < kEventPeriods; ++k) {
        double baseline = 0.0;
        for (int j = 0; j < n; ++j) baseline += chain[k + j];
        baseline /= static_cast<double>(n);
        excess[k] = window[k] - baseline;
    }
    return excess;
}

struct EventPanel {
    std::vector<EventWindow> windows; // sorted by (symbol, tweet_id)
};

struct DropReport {
    std::uint64_t no_symbol_mapping = 0;
    std::uint64_t incomplete_window = 0;
    std::uint64_t insufficient_history = 0; // window kept; excess block missing
    std::uint64_t accepted = 0;
    std::uint64_t with_excess = 0;
};

namespace detail {

/// Returns the 30 returns before the anchor (oldest first) when the
/// bars m0-30min .. m0 are all present on consecutive minutes.
inline std::optional<std::vector<double>> prior_returns(const CandleSeries& series,
                                                        std::int64_t anchor_time) {
    auto anchor_idx = bar_at(series, anchor_time);
    if (!anchor_idx) return std::nullopt;
    std::size_t idx = *anchor_idx;
    if (idx < static_cast<std::size_t>(kBaselineReturns)) return std::nullopt;
    for (int k = 1; k <= kBaselineReturns; ++k) {
        if (series.bars[idx - k].open_time != anchor_time - k * kMinuteMs) return std::nullopt;
    }
    std::vector<double> prior(kBaselineReturns);
    for (int k = 0; k < kBaselineReturns; ++k) {
        std::size_t later = idx - kBaselineReturns + 1 + k;
        prior[k] = std::log(series.bars[later].open / series.bars[later - 1].open);
    }
    return prior;
}

} // namespace detail

/// Joins tweets to their event windows across all mapped symbols.
/// Windows lacking 30-minute pre-history keep raw returns but carry no
/// excess block.
inline std::pair<EventPanel, DropReport> build_panel(
    const std::vector<TweetRecord>& tweets,
    const std::map<std::string, CandleSeries>& candles,
    const std::map<std::string, std::string>& mapping) {
    EventPanel panel;
    DropReport drops;
    for (const TweetRecord& tweet : tweets) {
        auto mapped = mapping.find(tweet.screen_name);
        if (mapped == mapping.end()) {
            ++drops.no_symbol_mapping;
            continue;
        }
        auto series_it = candles.find(mapped->second);
        if (series_it == candles.end()) {
            ++drops.no_symbol_mapping;
            continue;
        }
        const CandleSeries& series = series_it->second;
        auto window = align_event(tweet.created_at, series);
        if (!window) {
            ++drops.incomplete_window;
            continue;
        }
        window->tweet_id = tweet.tweet_id;
        if (auto prior = detail::prior_returns(series, window->anchor_bar_time)) {
            window->excess = sma_excess(*prior, std::span<const double, kEventPeriods>(window->returns));
            ++drops.with_excess;
        } else {
            ++drops.insufficient_history;
        }
        ++drops.accepted;
        panel.windows.push_back(std::move(*window));
    }
    std::sort(panel.windows.begin(), panel.windows.end(),
              [](const EventWindow& a, const EventWindow& b) {
                  if (a.symbol != b.symbol) return a.symbol < b.symbol;
                  return a.tweet_id < b.tweet_id;
              });
    return {std::move(panel), drops};
}

/// Why the CAPM-style market models were rejected: per-symbol Pearson
/// correlation of minutely returns against BTC-USD and against the
/// equal-weighted altcoin average, with cross-symbol means.
struct MarketModelReport {
    struct Row {
        std::string symbol;
        std::optional<double> corr_btc_usd;
        std::optional<double> corr_market_avg;
    };
    std::vector<Row> rows;
    std::optional<double> mean_corr_btc_usd;
    std::optional<double> mean_corr_market_avg;
};

inline MarketModelReport market_model_diagnostics(
    const std::map<std::string, CandleSeries>& alt_series,
    const CandleSeries& btc_usd) {
    std::map<std::string, std::map<std::int64_t, double>> by_symbol;
    for (const auto& [symbol, series] : alt_series) {
        auto rs = log_returns(series);
        auto& m = by_symbol[symbol];
        for (const auto& e : rs.entries) m[e.open_time] = e.log_return;
    }
    std::map<std::int64_t, double> btc_returns;
    for (const auto& e : log_returns(btc_usd).entries) btc_returns[e.open_time] = e.log_return;

    // Equal-weighted average return per minute over the altcoins present.
    std::map<std::int64_t, std::pair<double, int>> market_acc;
    for (const auto& [symbol, rets] : by_symbol)
        for (const auto& [t, r] : rets) {
            auto& acc = market_acc[t];
            acc.first += r;
            ++acc.second;
        }

    MarketModelReport report;
    std::vector<double> btc_corrs, market_corrs;
    for (const auto& [symbol, rets] : by_symbol) {
        MarketModelReport::Row row;
        row.symbol = symbol;
        std::vector<double> xs, ys;
        for (const auto& [t, r] : rets) {
            auto it = btc_returns.find(t);
            if (it == btc_returns.end()) continue;
            xs.push_back(r);
            ys.push_back(it->second);
        }
        row.corr_btc_usd = numeric::pearson(xs, ys);
        xs.clear();
        ys.clear();
        for (const auto& [t, r] : rets) {
            auto it = market_acc.find(t);
            if (it == market_acc.end()) continue;
            xs.push_back(r);
            ys.push_back(it->second.first / it->second.second);
        }
        row.corr_market_avg = numeric::pearson(xs, ys);
        if (row.corr_btc_usd) btc_corrs.push_back(*row.corr_btc_usd);
        if (row.corr_market_avg) market_corrs.push_back(*row.corr_market_avg);
        report.rows.push_back(std::move(row));
    }
    if (btc_corrs.empty() && market_corrs.empty()) throw InsufficientOverlap();
    if (!btc_corrs.empty()) report.mean_corr_btc_usd = numeric::mean(btc_corrs);
    if (!market_corrs.empty()) report.mean_corr_market_avg = numeric::mean(market_corrs);
    return report;
}

// ---------------------------------------------------------------------------
// Panel file: one row per window with returns, excess returns and
// cumulative returns for t1..t15.

inline void write_panel(const EventPanel& panel, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "tweet_id,symbol,anchor_bar_time,offset_ms";
    for (int k = 1; k <= kEventPeriods; ++k) out << ",r" << k;
    for (int k = 1; k <= kEventPeriods; ++k) out << ",er" << k;
    for (int k = 1; k <= kEventPeriods; ++k) out << ",c" << k;
    out << '\n';
    for (const EventWindow& w : panel.windows) {
        out << csv_escape(w.tweet_id) << ',' << csv_escape(w.symbol) << ',' << w.anchor_bar_time
            << ',' << w.alignment_offset_ms;
        for (double r : w.returns) out << ',' << format_double(r);
        for (int k = 0; k < kEventPeriods; ++k) {
            out << ',';
            if (w.excess) out << format_double((*w.excess)[k]);
        }
        for (double c : w.cumret) out << ',' << format_double(c);
        out << '\n';
    }
}

inline EventPanel read_panel(const std::string& path) {
    std::ifstream in = open_input(path);
    EventPanel panel;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        auto fields = csv_split(stripped, line_no);
        if (fields.size() != static_cast<std::size_t>(4 + 3 * kEventPeriods))
            throw MalformedRow(line_no, "wrong panel column count");
        EventWindow w;
        w.tweet_id = fields[0];
        w.symbol = fields[1];
        auto anchor = parse_i64(fields[2]);
        auto offset = parse_i64(fields[3]);
        if (!anchor || !offset) throw MalformedRow(line_no, "bad panel timestamps");
        w.anchor_bar_time = *anchor;
        w.alignment_offset_ms = *offset;
        for (int k = 0; k < kEventPeriods; ++k) {
            auto v = parse_f64(fields[4 + k]);
            if (!v) throw MalformedRow(line_no, "bad return value");
            w.returns[k] = *v;
        }
        bool has_excess = !fields[4 + kEventPeriods].empty();
        if (has_excess) {
            std::array<double, kEventPeriods> er{};
            for (int k = 0; k < kEventPeriods; ++k) {
                auto v = parse_f64(fields[4 + kEventPeriods + k]);
                if (!v) throw MalformedRow(line_no, "bad excess value");
                er[k] = *v;
            }
            w.excess = er;
        }
        for (int k = 0; k < kEventPeriods; ++k) {
            auto v = parse_f64(fields[4 + 2 * kEventPeriods + k]);
            if (!v) throw MalformedRow(line_no, "bad cumulative value");
            w.cumret[k] = *v;
        }
        panel.windows.push_back(std::move(w));
    }
    return panel;
}

inline void write_drop_report(const DropReport& drops, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "cause,count\n";
    out << "no_symbol_mapping," << drops.no_symbol_mapping << '\n';
    out << "incomplete_window," << drops.incomplete_window << '\n';
    out << "insufficient_history," << drops.insufficient_history << '\n';
    out << "accepted_windows," << drops.accepted << '\n';
    out << "windows_with_excess," << drops.with_excess << '\n';
}

} // namespace tweetstudy::eventstudy
