#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "tweetstudy/eventstudy.hpp"
#include "tweetstudy/ingest.hpp"
#include "tweetstudy/io.hpp"
#include "tweetstudy/miner.hpp"
#include "tweetstudy/store.hpp"
#include "tweetstudy/strategy.hpp"
#include "tweetstudy/textlab.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::trader {

class InsufficientBalance : public std::runtime_error {
public:
    InsufficientBalance() : std::runtime_error("wallet cannot cover cost plus fee") {}
};

class MissingBar : public std::runtime_error {
public:
    explicit MissingBar(std::int64_t t)
        : std::runtime_error("no bar at open_time " + std::to_string(t)) {}
};

class ClientUnavailable : public std::runtime_error {
public:
    explicit ClientUnavailable(const std::string& what) : std::runtime_error(what) {}
};

struct WalletState {
    double btc_balance = 0.0;
    std::map<std::string, double> holdings; // symbol -> base-asset quantity
};

struct FeeSchedule {
    double taker_rate = 0.001; // 0.00075 with the exchange's discount
};

enum class Side { buy, sell };

inline const char* to_string(Side s) { return s == Side::buy ? "buy" : "sell"; }

struct Fill {
    std::string symbol;
    Side side = Side::buy;
    double quantity = 0.0; // base units
    double price = 0.0;    // quote units per base unit
    double fee_paid = 0.0; // quote units (BTC)
    std::int64_t timestamp = 0;
};

/// Inter-cycle pause: (window / limit) x timeline count. With the
/// 900-per-900-seconds budget this is exactly N seconds.
inline double sleep_duration(int timeline_count) {
    if (timeline_count < 1) throw std::invalid_argument("timeline_count must be >= 1");
    constexpr double kWindowSeconds = 900.0;
    constexpr double kRequestLimit = 900.0;
    return kWindowSeconds / kRequestLimit * static_cast<double>(timeline_count);
}

/// Admits only messages younger than 60 seconds. Negative age (clock
/// skew) passes; the caller may log it.
inline bool freshness_gate(const TweetRecord& tweet, std::int64_t now_ms) {
    return now_ms - tweet.created_at < kMinuteMs;
}

/// Sliding-window request budget: at most `limit` requests in any
/// rolling `window_ms` interval.
class RateLimiter {
public:
    explicit RateLimiter(std::size_t limit = 900, std::int64_t window_ms = 900'000)
        : limit_(limit), window_ms_(window_ms) {}

    bool try_acquire(std::int64_t now_ms) {
        evict(now_ms);
        if (stamps_.size() >= limit_) return false;
        stamps_.push_back(now_ms);
        return true;
    }

    /// Earliest time a request could be admitted.
    std::int64_t next_allowed(std::int64_t now_ms) {
        evict(now_ms);
        if (stamps_.size() < limit_) return now_ms;
        return stamps_.front() + window_ms_;
    }

private:
    void evict(std::int64_t now_ms) {
        while (!stamps_.empty() && stamps_.front() <= now_ms - window_ms_) stamps_.pop_front();
    }

    std::size_t limit_;
    std::int64_t window_ms_;
    std::deque<std::int64_t> stamps_;
};

/// First datasheet row (highest spread) whose predicates all hold.
/// Retweets and quotes never match.
inline const strategy::TradePlan* match_condition(const TweetRecord& tweet,
                                                  const std::vector<std::string>& tokens,
                                                  const miner::BinContext& bins,
                                                  const strategy::Datasheet& sheet) {
    if (tweet.is_retweet || tweet.is_quote) return nullptr;
    for (const auto& plan : sheet.plans)
        if (miner::condition_matches(plan.condition, tweet, tokens, bins)) return &plan;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Trade log.

struct TradeLogEntry {
    enum class Outcome {
        traded,
        skipped_open_position,
        skipped_missing_bar,
        skipped_insufficient_balance,
        skipped_no_mapping,
    };
    std::string tweet_id;
    std::string condition_id;
    std::string symbol;
    Outcome outcome = Outcome::traded;
    std::optional<Fill> buy;
    std::optional<Fill> sell;
    double pnl = 0.0; // BTC, net of fees
};

inline const char* to_string(TradeLogEntry::Outcome o) {
    switch (o) {
        case TradeLogEntry::Outcome::traded: return "traded";
        case TradeLogEntry::Outcome::skipped_open_position: return "skipped_open_position";
        case TradeLogEntry::Outcome::skipped_missing_bar: return "skipped_missing_bar";
        case TradeLogEntry::Outcome::skipped_insufficient_balance:
            return "skipped_insufficient_balance";
        case TradeLogEntry::Outcome::skipped_no_mapping: return "skipped_no_mapping";
    }
    return "?";
}

struct TradeLog {
    std::vector<TradeLogEntry> entries;
};

struct RunSummary {
    std::uint64_t tweets_scanned = 0;
    std::uint64_t rejected_retweet_quote = 0;
    std::uint64_t rejected_stale = 0; // live loop only
    std::uint64_t unmatched = 0;
    std::uint64_t matched = 0;
    std::uint64_t trades = 0;
    std::uint64_t skipped_open_position = 0;
    std::uint64_t skipped_missing_bar = 0;
    std::uint64_t skipped_insufficient_balance = 0;
    std::uint64_t skipped_no_mapping = 0;
    std::uint64_t clock_skew_passes = 0;
    double initial_btc = 0.0;
    double final_btc = 0.0;
    double gross_pnl = 0.0; // before fees
    double fees_paid = 0.0;
    double net_pnl = 0.0;
    double hit_rate = 0.0; // profitable trades / trades
    std::map<std::string, std::pair<std::uint64_t, double>> by_condition; // id -> (trades, net pnl)
};

// ---------------------------------------------------------------------------
// Backtest execution against bar opens.

namespace detail {

inline std::optional<double> open_price_at(const CandleSeries& series, std::int64_t open_time) {
    auto it = std::lower_bound(series.bars.begin(), series.bars.end(), open_time,
                               [](const Candle& c, std::int64_t t) { return c.open_time < t; });
    if (it == series.bars.end() || it->open_time != open_time) return std::nullopt;
    return it->open;
}

inline std::int64_t anchor_minute(std::int64_t created_at) {
    std::int64_t m = created_at / kMinuteMs;
    if (created_at % kMinuteMs != 0) ++m;
    return m * kMinuteMs;
}

} // namespace detail

struct ExecutionResult {
    Fill buy;
    Fill sell;
    double pnl = 0.0;
    WalletState wallet;
};

/// Executes one plan against bar opens: buy at the open of the bar
/// buy_offset - 1 minutes after the anchor (capturing r[buy_offset]),
/// sell at the open sell_offset minutes after. Fees are charged in BTC
/// on both legs. Both bars are checked before any money moves.
inline ExecutionResult execute_plan(const strategy::TradePlan& plan, std::int64_t anchor_time,
                                    const CandleSeries& series, WalletState wallet,
                                    const FeeSchedule& fees, double spend_rate) {
    if (!(spend_rate > 0.0) || spend_rate > 1.0)
        throw std::invalid_argument("spend_rate must be in (0, 1]");
    std::int64_t buy_time = anchor_time + static_cast<std::int64_t>(plan.buy_offset - 1) * kMinuteMs;
    std::int64_t sell_time = anchor_time + static_cast<std::int64_t>(plan.sell_offset) * kMinuteMs;
    auto buy_price = detail::open_price_at(series, buy_time);
    if (!buy_price) throw MissingBar(buy_time);
    auto sell_price = detail::open_price_at(series, sell_time);
    if (!sell_price) throw MissingBar(sell_time);

    double cost = wallet.btc_balance * spend_rate;
    double buy_fee = cost * fees.taker_rate;
    if (!(cost > 0.0) || cost + buy_fee > wallet.btc_balance) throw InsufficientBalance();
    double quantity = cost / *buy_price;

    ExecutionResult res;
    res.buy = {series.symbol, Side::buy, quantity, *buy_price, buy_fee, buy_time};
    wallet.btc_balance -= cost + buy_fee;
    wallet.holdings[series.symbol] += quantity;

    double proceeds = quantity * *sell_price;
    double sell_fee = proceeds * fees.taker_rate;
    res.sell = {series.symbol, Side::sell, quantity, *sell_price, sell_fee, sell_time};
    wallet.btc_balance += proceeds - sell_fee;
    wallet.holdings.erase(series.symbol);

    res.pnl = proceeds - sell_fee - cost - buy_fee;
    res.wallet = std::move(wallet);
    return res;
}

struct BacktestConfig {
    FeeSchedule fees;
    double spend_rate = 0.5;
    double initial_btc = 1.0;
};

/// Replays the three-phase algorithm over the store: tweets in timestamp
/// order, every tweet treated as fresh, first matching datasheet row
/// wins, one open position per symbol.
inline std::pair<TradeLog, RunSummary> backtest(const strategy::Datasheet& sheet,
                                                const store::Store& s,
                                                const miner::BinContext& bins,
                                                const BacktestConfig& config = {}) {
    static const std::vector<std::string> kNoTokens;
    TradeLog log;
    RunSummary summary;
    summary.initial_btc = config.initial_btc;
    WalletState wallet{config.initial_btc, {}};
    std::map<std::string, std::int64_t> busy_until; // symbol -> sell time of open position
    std::uint64_t profitable = 0;

    std::vector<const TweetRecord*> ordered;
    ordered.reserve(s.tweets.size());
    for (const auto& rec : s.tweets) ordered.push_back(&rec);
    std::sort(ordered.begin(), ordered.end(), [](const TweetRecord* a, const TweetRecord* b) {
        if (a->created_at != b->created_at) return a->created_at < b->created_at;
        return a->tweet_id < b->tweet_id;
    });

    for (const TweetRecord* rec : ordered) {
        ++summary.tweets_scanned;
        if (rec->is_retweet || rec->is_quote) {
            ++summary.rejected_retweet_quote;
            continue;
        }
        auto tok = s.tokens.find(rec->tweet_id);
        const auto& tokens = tok == s.tokens.end() ? kNoTokens : tok->second;
        const strategy::TradePlan* plan = match_condition(*rec, tokens, bins, sheet);
        if (!plan) {
            ++summary.unmatched;
            continue;
        }
        ++summary.matched;
        TradeLogEntry entry;
        entry.tweet_id = rec->tweet_id;
        entry.condition_id = plan->condition_id;

        auto mapped = s.mapping.find(rec->screen_name);
        if (mapped == s.mapping.end() || !s.candles.count(mapped->second)) {
            entry.outcome = TradeLogEntry::Outcome::skipped_no_mapping;
            ++summary.skipped_no_mapping;
            log.entries.push_back(std::move(entry));
            continue;
        }
        const std::string& symbol = mapped->second;
        entry.symbol = symbol;

        auto busy = busy_until.find(symbol);
        if (busy != busy_until.end() && rec->created_at < busy->second) {
            entry.outcome = TradeLogEntry::Outcome::skipped_open_position;
            ++summary.skipped_open_position;
            log.entries.push_back(std::move(entry));
            continue;
        }

        std::int64_t anchor = detail::anchor_minute(rec->created_at);
        try {
            ExecutionResult res =
                execute_plan(*plan, anchor, s.candles.at(symbol), wallet, config.fees,
                             config.spend_rate);
            wallet = res.wallet;
            busy_until[symbol] = res.sell.timestamp;
            entry.outcome = TradeLogEntry::Outcome::traded;
            entry.buy = res.buy;
            entry.sell = res.sell;
            entry.pnl = res.pnl;
            ++summary.trades;
            if (res.pnl > 0.0) ++profitable;
            summary.gross_pnl += res.sell.quantity * res.sell.price - res.buy.quantity * res.buy.price;
            summary.fees_paid += res.buy.fee_paid + res.sell.fee_paid;
            summary.net_pnl += res.pnl;
            auto& attrib = summary.by_condition[plan->condition_id];
            ++attrib.first;
            attrib.second += res.pnl;
        } catch (const MissingBar&) {
            entry.outcome = TradeLogEntry::Outcome::skipped_missing_bar;
            ++summary.skipped_missing_bar;
        } catch (const InsufficientBalance&) {
            entry.outcome = TradeLogEntry::Outcome::skipped_insufficient_balance;
            ++summary.skipped_insufficient_balance;
        }
        log.entries.push_back(std::move(entry));
    }
    summary.final_btc = wallet.btc_balance;
    summary.hit_rate =
        summary.trades == 0 ? 0.0 : static_cast<double>(profitable) / static_cast<double>(summary.trades);
    return {std::move(log), summary};
}

// ---------------------------------------------------------------------------
// Trade log / summary files.

inline void write_trade_log(const TradeLog& log, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "tweet_id,condition_id,symbol,action,timestamp,price,quantity,fee,pnl\n";
    for (const auto& e : log.entries) {
        if (e.outcome == TradeLogEntry::Outcome::traded) {
            out << csv_escape(e.tweet_id) << ',' << e.condition_id << ',' << csv_escape(e.symbol)
                << ",buy," << e.buy->timestamp << ',' << format_double(e.buy->price) << ','
                << format_double(e.buy->quantity) << ',' << format_double(e.buy->fee_paid) << ",\n";
            out << csv_escape(e.tweet_id) << ',' << e.condition_id << ',' << csv_escape(e.symbol)
                << ",sell," << e.sell->timestamp << ',' << format_double(e.sell->price) << ','
                << format_double(e.sell->quantity) << ',' << format_double(e.sell->fee_paid) << ','
                << format_double(e.pnl) << '\n';
        } else {
            out << csv_escape(e.tweet_id) << ',' << e.condition_id << ',' << csv_escape(e.symbol)
                << ',' << to_string(e.outcome) << ",,,,,\n";
        }
    }
}

inline void write_summary(const RunSummary& s, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "tweets_scanned " << s.tweets_scanned << '\n';
    out << "rejected_retweet_quote " << s.rejected_retweet_quote << '\n';
    out << "rejected_stale " << s.rejected_stale << '\n';
    out << "unmatched " << s.unmatched << '\n';
    out << "matched " << s.matched << '\n';
    out << "trades " << s.trades << '\n';
    out << "skipped_open_position " << s.skipped_open_position << '\n';
    out << "skipped_missing_bar " << s.skipped_missing_bar << '\n';
    out << "skipped_insufficient_balance " << s.skipped_insufficient_balance << '\n';
    out << "skipped_no_mapping " << s.skipped_no_mapping << '\n';
    out << "clock_skew_passes " << s.clock_skew_passes << '\n';
    out << "initial_btc " << format_double(s.initial_btc) << '\n';
    out << "final_btc " << format_double(s.final_btc) << '\n';
    out << "gross_pnl " << format_double(s.gross_pnl) << '\n';
    out << "fees_paid " << format_double(s.fees_paid) << '\n';
    out << "net_pnl " << format_double(s.net_pnl) << '\n';
    out << "hit_rate " << format_double(s.hit_rate) << '\n';
    out << "per_condition:\n";
    for (const auto& [id, attrib] : s.by_condition)
        out << "  " << id << " trades " << attrib.first << " net_pnl " << format_double(attrib.second)
            << '\n';
}

// ---------------------------------------------------------------------------
// Live loop over abstract clients, driven by a (mockable) clock.

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

/// Deterministic clock for tests and scenario replay; sleeping simply
/// advances time.
class MockClock : public Clock {
public:
    explicit MockClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() override { return now_; }
    void sleep_ms(std::int64_t ms) override {
        if (ms > 0) now_ += ms;
    }

private:
    std::int64_t now_;
};

class TimelineClient {
public:
    virtual ~TimelineClient() = default;
    /// Newest message of the timeline, if any. Counted against the rate
    /// budget by the caller.
    virtual std::optional<TweetRecord> latest_message(const std::string& screen_name) = 0;
    /// True when the source can never produce a newer message (mock
    /// scripts); a real client would always return false.
    virtual bool finished() const { return false; }
};

class ExchangeClient {
public:
    virtual ~ExchangeClient() = default;
    virtual double best_ask(const std::string& symbol) = 0;
    virtual Fill market_order(const std::string& symbol, Side side, double quantity) = 0;
};

/// Scripted timeline: each tweet becomes visible at its `available_at`
/// time and stays the latest until a newer one appears.
class MockTimelineClient : public TimelineClient {
public:
    struct Scripted {
        std::int64_t available_at = 0;
        TweetRecord tweet;
    };

    MockTimelineClient(Clock& clock, std::map<std::string, std::vector<Scripted>> scripts)
        : clock_(clock), scripts_(std::move(scripts)) {
        for (auto& [name, tweets] : scripts_)
            std::sort(tweets.begin(), tweets.end(),
                      [](const Scripted& a, const Scripted& b) { return a.available_at < b.available_at; });
    }

    std::optional<TweetRecord> latest_message(const std::string& screen_name) override {
        auto it = scripts_.find(screen_name);
        if (it == scripts_.end()) return std::nullopt;
        std::int64_t now = clock_.now_ms();
        const Scripted* latest = nullptr;
        for (const auto& s : it->second) {
            if (s.available_at > now) break;
            latest = &s;
        }
        if (!latest) return std::nullopt;
        return latest->tweet;
    }

    bool finished() const override {
        // The const_cast-free road: the clock interface is non-const by design.
        std::int64_t now = const_cast<Clock&>(clock_).now_ms();
        for (const auto& [name, tweets] : scripts_)
            if (!tweets.empty() && tweets.back().available_at > now) return false;
        return true;
    }

private:
    Clock& clock_;
    std::map<std::string, std::vector<Scripted>> scripts_;
};

/// Scripted order book: best ask follows a right-continuous step
/// function per symbol; market orders fill at the current ask.
class MockExchangeClient : public ExchangeClient {
public:
    using AskSeries = std::vector<std::pair<std::int64_t, double>>; // (time, ask), sorted

    MockExchangeClient(Clock& clock, std::map<std::string, AskSeries> asks, FeeSchedule fees)
        : clock_(clock), asks_(std::move(asks)), fees_(fees) {}

    double best_ask(const std::string& symbol) override {
        auto it = asks_.find(symbol);
        if (it == asks_.end() || it->second.empty()) throw ClientUnavailable("no ask for " + symbol);
        std::int64_t now = clock_.now_ms();
        const auto& series = it->second;
        if (now < series.front().first) throw ClientUnavailable("ask not yet quoted for " + symbol);
        double price = series.front().second;
        for (const auto& [t, ask] : series) {
            if (t > now) break;
            price = ask;
        }
        return price;
    }

    Fill market_order(const std::string& symbol, Side side, double quantity) override {
        double price = best_ask(symbol);
        Fill fill;
        fill.symbol = symbol;
        fill.side = side;
        fill.quantity = quantity;
        fill.price = price;
        fill.fee_paid = quantity * price * fees_.taker_rate;
        fill.timestamp = clock_.now_ms();
        return fill;
    }

private:
    Clock& clock_;
    std::map<std::string, AskSeries> asks_;
    FeeSchedule fees_;
};

struct LiveConfig {
    std::vector<std::string> timelines;          // screen names polled each cycle
    std::map<std::string, std::string> mapping;  // screen_name -> symbol
    miner::BinContext bins;
    FeeSchedule fees;
    double spend_rate = 0.5;
    double initial_btc = 1.0;
    std::uint64_t max_cycles = 0; // 0: run until the mock scripts are exhausted
    const textlab::SentimentLexicon* lexicon = nullptr; // optional live featurization
    const textlab::Stoplist* stoplist = nullptr;
    std::size_t rate_limit = 900;
    std::int64_t rate_window_ms = 900'000;
};

struct LiveResult {
    TradeLog log;
    RunSummary summary;
    WalletState wallet;
    std::vector<std::int64_t> request_times; // one stamp per timeline fetch
};

namespace detail {

struct ScheduledAction {
    std::int64_t due = 0;
    std::uint64_t seq = 0; // stable tiebreak
    Side side = Side::buy;
    std::string symbol;
    std::string tweet_id;
    std::string condition_id;

    bool operator>(const ScheduledAction& other) const {
        if (due != other.due) return due > other.due;
        return seq > other.seq;
    }
};

} // namespace detail

/// Single logical control thread: sleep the rate-limit pause, poll each
/// timeline, gate on freshness, match, and schedule the buy/sell pair at
/// the mined offsets. Scheduled actions fire at their exact due times
/// while the loop sleeps.
inline LiveResult live_loop(TimelineClient& timelines, ExchangeClient& exchange,
                            const strategy::Datasheet& sheet, Clock& clock,
                            const LiveConfig& config) {
    LiveResult result;
    result.summary.initial_btc = config.initial_btc;
    WalletState wallet{config.initial_btc, {}};
    RateLimiter limiter(config.rate_limit, config.rate_window_ms);
    std::priority_queue<detail::ScheduledAction, std::vector<detail::ScheduledAction>,
                        std::greater<>>
        pending;
    std::uint64_t seq = 0;
    std::uint64_t profitable = 0;
    std::map<std::string, std::int64_t> busy_until;
    std::map<std::string, std::pair<Fill, std::string>> open_buys; // symbol -> (buy fill, tweet_id)
    std::unordered_set<std::string> seen;

    auto run_action = [&](const detail::ScheduledAction& action) {
        if (action.side == Side::buy) {
            double cost = wallet.btc_balance * config.spend_rate;
            double ask = exchange.best_ask(action.symbol);
            double quantity = cost / ask;
            double fee = cost * config.fees.taker_rate;
            if (!(cost > 0.0) || cost + fee > wallet.btc_balance) {
                TradeLogEntry entry;
                entry.tweet_id = action.tweet_id;
                entry.condition_id = action.condition_id;
                entry.symbol = action.symbol;
                entry.outcome = TradeLogEntry::Outcome::skipped_insufficient_balance;
                ++result.summary.skipped_insufficient_balance;
                result.log.entries.push_back(std::move(entry));
                busy_until.erase(action.symbol);
                return;
            }
            Fill fill = exchange.market_order(action.symbol, Side::buy, quantity);
            wallet.btc_balance -= fill.quantity * fill.price + fill.fee_paid;
            wallet.holdings[action.symbol] += fill.quantity;
            open_buys[action.symbol] = {fill, action.tweet_id};
        } else {
            auto held = wallet.holdings.find(action.symbol);
            if (held == wallet.holdings.end() || !(held->second > 0.0)) return;
            Fill fill = exchange.market_order(action.symbol, Side::sell, held->second);
            wallet.btc_balance += fill.quantity * fill.price - fill.fee_paid;
            wallet.holdings.erase(held);
            auto open = open_buys.find(action.symbol);
            TradeLogEntry entry;
            entry.tweet_id = action.tweet_id;
            entry.condition_id = action.condition_id;
            entry.symbol = action.symbol;
            entry.outcome = TradeLogEntry::Outcome::traded;
            entry.sell = fill;
            if (open != open_buys.end()) {
                entry.buy = open->second.first;
                open_buys.erase(open);
            }
            if (entry.buy) {
                double cost = entry.buy->quantity * entry.buy->price;
                double proceeds = fill.quantity * fill.price;
                entry.pnl = proceeds - fill.fee_paid - cost - entry.buy->fee_paid;
                result.summary.gross_pnl += proceeds - cost;
                result.summary.fees_paid += entry.buy->fee_paid + fill.fee_paid;
                result.summary.net_pnl += entry.pnl;
                ++result.summary.trades;
                if (entry.pnl > 0.0) ++profitable;
                auto& attrib = result.summary.by_condition[entry.condition_id];
                ++attrib.first;
                attrib.second += entry.pnl;
            }
            result.log.entries.push_back(std::move(entry));
        }
    };

    // Advances the clock to `target`, firing due actions at their exact
    // due times along the way.
    auto advance_to = [&](std::int64_t target) {
        while (!pending.empty() && pending.top().due <= target) {
            detail::ScheduledAction action = pending.top();
            pending.pop();
            if (action.due > clock.now_ms()) clock.sleep_ms(action.due - clock.now_ms());
            run_action(action);
        }
        if (target > clock.now_ms()) clock.sleep_ms(target - clock.now_ms());
    };

    const int timeline_count = static_cast<int>(config.timelines.size());
    std::uint64_t cycles = 0;
    while (true) {
        if (config.max_cycles > 0 && cycles >= config.max_cycles) break;
        if (config.max_cycles == 0 && timelines.finished() && pending.empty()) break;
        ++cycles;
        std::int64_t pause_ms =
            static_cast<std::int64_t>(sleep_duration(std::max(timeline_count, 1)) * 1000.0);
        advance_to(clock.now_ms() + pause_ms);

        for (const auto& name : config.timelines) {
            std::int64_t now = clock.now_ms();
            if (!limiter.try_acquire(now)) {
                advance_to(limiter.next_allowed(now));
                limiter.try_acquire(clock.now_ms());
            }
            result.request_times.push_back(clock.now_ms());
            std::optional<TweetRecord> tweet;
            try {
                tweet = timelines.latest_message(name);
            } catch (const ClientUnavailable&) {
                continue; // retried on the next cycle
            }
            if (!tweet) continue;
            if (!seen.insert(tweet->tweet_id).second) continue;
            ++result.summary.tweets_scanned;
            std::int64_t now_ms = clock.now_ms();
            if (!freshness_gate(*tweet, now_ms)) {
                ++result.summary.rejected_stale;
                continue;
            }
            if (now_ms < tweet->created_at) ++result.summary.clock_skew_passes;
            if (tweet->is_retweet || tweet->is_quote) {
                ++result.summary.rejected_retweet_quote;
                continue;
            }
            std::vector<std::string> tokens = textlab::tokenize(tweet->text);
            if (config.stoplist) tokens = textlab::remove_stopwords(tokens, *config.stoplist);
            if (!tweet->sentiment && config.lexicon)
                tweet->sentiment = textlab::sentiment_score(tweet->text, *config.lexicon);
            const strategy::TradePlan* plan = match_condition(*tweet, tokens, config.bins, sheet);
            if (!plan) {
                ++result.summary.unmatched;
                continue;
            }
            ++result.summary.matched;
            auto mapped = config.mapping.find(tweet->screen_name);
            if (mapped == config.mapping.end()) {
                TradeLogEntry entry;
                entry.tweet_id = tweet->tweet_id;
                entry.condition_id = plan->condition_id;
                entry.outcome = TradeLogEntry::Outcome::skipped_no_mapping;
                ++result.summary.skipped_no_mapping;
                result.log.entries.push_back(std::move(entry));
                continue;
            }
            const std::string& symbol = mapped->second;
            auto busy = busy_until.find(symbol);
            if (busy != busy_until.end() && now_ms < busy->second) {
                TradeLogEntry entry;
                entry.tweet_id = tweet->tweet_id;
                entry.condition_id = plan->condition_id;
                entry.symbol = symbol;
                entry.outcome = TradeLogEntry::Outcome::skipped_open_position;
                ++result.summary.skipped_open_position;
                result.log.entries.push_back(std::move(entry));
                continue;
            }
            std::int64_t buy_due = std::max(
                now_ms, tweet->created_at + static_cast<std::int64_t>(plan->buy_offset - 1) * kMinuteMs);
            std::int64_t sell_due =
                tweet->created_at + static_cast<std::int64_t>(plan->sell_offset) * kMinuteMs;
            busy_until[symbol] = sell_due;
            pending.push({buy_due, seq++, Side::buy, symbol, tweet->tweet_id, plan->condition_id});
            pending.push({sell_due, seq++, Side::sell, symbol, tweet->tweet_id, plan->condition_id});
        }
    }
    // Drain whatever is still scheduled.
    while (!pending.empty()) {
        std::int64_t due = pending.top().due;
        advance_to(due);
    }
    result.summary.final_btc = wallet.btc_balance;
    result.summary.hit_rate = result.summary.trades == 0
                                  ? 0.0
                                  : static_cast<double>(profitable) /
                                        static_cast<double>(result.summary.trades);
    result.wallet = std::move(wallet);
    return result;
}

// ---------------------------------------------------------------------------
// Scenario files for the deterministic live-loop simulation.

struct Scenario {
    LiveConfig config;
    std::map<std::string, std::vector<MockTimelineClient::Scripted>> scripts;
    std::map<std::string, MockExchangeClient::AskSeries> asks;
    std::int64_t start_ms = 0;
};

inline Scenario load_scenario(const std::string& path) {
    auto text = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoFailure("scenario parse error: " + std::string(e.what()));
    }
    Scenario sc;
    if (doc.contains("config")) {
        const auto& c = doc["config"];
        if (c.contains("spend_rate")) sc.config.spend_rate = c["spend_rate"].get<double>();
        if (c.contains("taker_rate")) sc.config.fees.taker_rate = c["taker_rate"].get<double>();
        if (c.contains("initial_btc")) sc.config.initial_btc = c["initial_btc"].get<double>();
        if (c.contains("max_cycles")) sc.config.max_cycles = c["max_cycles"].get<std::uint64_t>();
        if (c.contains("start_ms")) sc.start_ms = c["start_ms"].get<std::int64_t>();
        if (c.contains("rate_limit")) sc.config.rate_limit = c["rate_limit"].get<std::size_t>();
        if (c.contains("rate_window_ms"))
            sc.config.rate_window_ms = c["rate_window_ms"].get<std::int64_t>();
    }
    if (doc.contains("bins")) {
        for (const auto& b : doc["bins"]) {
            auto var = miner::variable_from_string(b.at("variable").get<std::string>());
            if (!var) throw IoFailure("scenario: unknown bin variable");
            miner::BinScheme scheme;
            scheme.variable = *var;
            scheme.min = b.at("min").get<double>();
            scheme.max = b.at("max").get<double>();
            if (b.contains("k")) scheme.k = b.at("k").get<int>();
            sc.config.bins.emplace(*var, scheme);
        }
    }
    if (!doc.contains("timelines")) throw IoFailure("scenario: missing timelines");
    for (const auto& tl : doc["timelines"]) {
        std::string name = tl.at("screen_name").get<std::string>();
        sc.config.timelines.push_back(name);
        if (tl.contains("symbol")) sc.config.mapping[name] = tl.at("symbol").get<std::string>();
        auto& script = sc.scripts[name];
        if (tl.contains("tweets")) {
            for (const auto& t : tl["tweets"]) {
                MockTimelineClient::Scripted entry;
                entry.available_at = t.at("available_at").get<std::int64_t>();
                entry.tweet = ingest::parse_tweet_json(t);
                script.push_back(std::move(entry));
            }
        }
    }
    if (doc.contains("asks")) {
        for (const auto& [symbol, series] : doc["asks"].items()) {
            MockExchangeClient::AskSeries out;
            for (const auto& point : series)
                out.emplace_back(point.at(0).get<std::int64_t>(), point.at(1).get<double>());
            std::sort(out.begin(), out.end());
            sc.asks[symbol] = std::move(out);
        }
    }
    return sc;
}

inline LiveResult run_scenario(const Scenario& sc) {
    MockClock clock(sc.start_ms);
    MockTimelineClient timelines(clock, sc.scripts);
    MockExchangeClient exchange(clock, sc.asks, sc.config.fees);
    return live_loop(timelines, exchange, strategy::Datasheet{}, clock, sc.config);
}

} // namespace tweetstudy::trader
