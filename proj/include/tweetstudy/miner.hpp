#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tweetstudy/eventstudy.hpp"
#include "tweetstudy/io.hpp"
#include "tweetstudy/numeric.hpp"
#include "tweetstudy/textlab.hpp"
#include "tweetstudy/types.hpp"

namespace tweetstudy::miner {

class EmptySample : public std::invalid_argument {
public:
    EmptySample() : std::invalid_argument("summary statistics need at least one sample") {}
};

// ---------------------------------------------------------------------------
// Predicates over the retained tweet variables.

enum class Variable : std::uint8_t {
    screen_name,
    language,
    media_type,
    sentiment,
    followers_count,
    friends_count,
    statuses_count,
    favorites_count,
    retweet_followers_count,
    retweet_friends_count,
    quoted_followers_count,
    quoted_friends_count,
    tweet_word,
    hashtag,
    mentions_screen_name,
    retweet_text,
    retweet_screen_name,
    quoted_text,
    quoted_screen_name,
};

inline constexpr std::array<const char*, 19> kVariableNames = {
    "screen_name",         "language",
    "media_type",          "sentiment",
    "followers_count",     "friends_count",
    "statuses_count",      "favorites_count",
    "retweet_followers_count", "retweet_friends_count",
    "quoted_followers_count",  "quoted_friends_count",
    "tweet_word",          "hashtag",
    "mentions_screen_name", "retweet_text",
    "retweet_screen_name", "quoted_text",
    "quoted_screen_name",
};

inline const char* to_string(Variable v) { return kVariableNames[static_cast<std::size_t>(v)]; }

inline std::optional<Variable> variable_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kVariableNames.size(); ++i)
        if (name == kVariableNames[i]) return static_cast<Variable>(i);
    return std::nullopt;
}

/// Variables whose predicates mark a retweet or quote; the datasheet
/// selection excludes conditions touching any of them.
inline bool is_retweet_or_quote_variable(Variable v) {
    switch (v) {
        case Variable::retweet_followers_count:
        case Variable::retweet_friends_count:
        case Variable::retweet_text:
        case Variable::retweet_screen_name:
        case Variable::quoted_followers_count:
        case Variable::quoted_friends_count:
        case Variable::quoted_text:
        case Variable::quoted_screen_name:
            return true;
        default:
            return false;
    }
}

enum class PredicateKind : std::uint8_t {
    equals_category,
    in_numeric_bin,
    contains_word,
    contains_hashtag,
    contains_mention,
    has_media,
};

struct Predicate {
    Variable variable{};
    PredicateKind kind{};
    std::string category; // equals/contains value
    int bin = 0;          // 1..5 for in_numeric_bin

    friend auto operator<=>(const Predicate&, const Predicate&) = default;
};

/// A conjunction of predicates, kept sorted in canonical order.
struct Condition {
    std::vector<Predicate> predicates;

    friend auto operator<=>(const Condition&, const Condition&) = default;

    bool references_retweet_or_quote() const {
        for (const auto& p : predicates)
            if (is_retweet_or_quote_variable(p.variable)) return true;
        return false;
    }
};

inline std::string serialize_predicate(const Predicate& p) {
    std::string name = to_string(p.variable);
    switch (p.kind) {
        case PredicateKind::equals_category:
            return name + "=" + nlohmann::json(p.category).dump();
        case PredicateKind::in_numeric_bin:
            return name + "@" + std::to_string(p.bin);
        case PredicateKind::contains_word:
        case PredicateKind::contains_hashtag:
        case PredicateKind::contains_mention:
            return name + "~" + nlohmann::json(p.category).dump();
        case PredicateKind::has_media:
            return "has_media";
    }
    return {};
}

inline std::string serialize_condition(const Condition& c) {
    std::string out;
    for (std::size_t i = 0; i < c.predicates.size(); ++i) {
        if (i > 0) out += " & ";
        out += serialize_predicate(c.predicates[i]);
    }
    return out;
}

namespace detail {

inline std::string parse_quoted_value(std::string_view text, std::size_t& pos) {
    if (pos >= text.size() || text[pos] != '"') throw std::invalid_argument("expected quoted value");
    std::size_t end = pos + 1;
    while (end < text.size()) {
        if (text[end] == '\\') end += 2;
        else if (text[end] == '"') break;
        else ++end;
    }
    if (end >= text.size()) throw std::invalid_argument("unterminated quoted value");
    auto parsed = nlohmann::json::parse(text.substr(pos, end - pos + 1));
    pos = end + 1;
    return parsed.get<std::string>();
}

} // namespace detail

inline Condition parse_condition(std::string_view text) {
    Condition cond;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t name_end = pos;
        while (name_end < text.size() && (std::isalnum(static_cast<unsigned char>(text[name_end])) ||
                                          text[name_end] == '_'))
            ++name_end;
        std::string name(text.substr(pos, name_end - pos));
        Predicate p;
        if (name == "has_media") {
            p.variable = Variable::media_type;
            p.kind = PredicateKind::has_media;
            pos = name_end;
        } else {
            auto var = variable_from_string(name);
            if (!var || name_end >= text.size())
                throw std::invalid_argument("bad predicate: " + std::string(text));
            p.variable = *var;
            char op = text[name_end];
            pos = name_end + 1;
            if (op == '=') {
                p.kind = PredicateKind::equals_category;
                p.category = detail::parse_quoted_value(text, pos);
            } else if (op == '~') {
                switch (*var) {
                    case Variable::tweet_word: p.kind = PredicateKind::contains_word; break;
                    case Variable::hashtag: p.kind = PredicateKind::contains_hashtag; break;
                    case Variable::mentions_screen_name: p.kind = PredicateKind::contains_mention; break;
                    default: throw std::invalid_argument("'~' only applies to word-like variables");
                }
                p.category = detail::parse_quoted_value(text, pos);
            } else if (op == '@') {
                p.kind = PredicateKind::in_numeric_bin;
                std::size_t dig_end = pos;
                while (dig_end < text.size() && std::isdigit(static_cast<unsigned char>(text[dig_end])))
                    ++dig_end;
                auto bin = parse_i64(text.substr(pos, dig_end - pos));
                if (!bin || *bin < 1) throw std::invalid_argument("bad bin index");
                p.bin = static_cast<int>(*bin);
                pos = dig_end;
            } else {
                throw std::invalid_argument("bad predicate operator");
            }
        }
        cond.predicates.push_back(std::move(p));
        if (pos < text.size()) {
            if (text.substr(pos, 3) != " & ")
                throw std::invalid_argument("expected ' & ' between predicates");
            pos += 3;
        }
    }
    std::sort(cond.predicates.begin(), cond.predicates.end());
    return cond;
}

// ---------------------------------------------------------------------------
// Equal-range binning.

/// Five equally ranged groups between the observed minimum and maximum.
/// The maximum lands in the top bin; a degenerate range collapses to
/// bin 1. Out-of-range values (live tweets) clamp to the edge bins.
struct BinScheme {
    Variable variable{};
    double min = 0.0;
    double max = 0.0;
    int k = 5;

    int bin_of(double v) const {
        if (!(max > min)) return 1;
        if (v >= max) return k;
        if (v <= min) return 1;
        int b = static_cast<int>(std::floor(static_cast<double>(k) * (v - min) / (max - min))) + 1;
        return std::clamp(b, 1, k);
    }

    std::vector<double> interior_edges() const {
        std::vector<double> edges;
        if (max > min)
            for (int i = 1; i < k; ++i)
                edges.push_back(min + static_cast<double>(i) * (max - min) / static_cast<double>(k));
        return edges;
    }
};

inline std::pair<BinScheme, std::vector<int>> bin_numeric(std::span<const double> values, int k = 5) {
    if (values.empty()) throw EmptySample();
    BinScheme scheme;
    scheme.k = k;
    scheme.min = *std::min_element(values.begin(), values.end());
    scheme.max = *std::max_element(values.begin(), values.end());
    std::vector<int> assignments;
    assignments.reserve(values.size());
    for (double v : values) assignments.push_back(scheme.bin_of(v));
    return {scheme, assignments};
}

/// Numeric value of a bin-eligible variable, when present on the record.
inline std::optional<double> numeric_value(const TweetRecord& rec, Variable v) {
    switch (v) {
        case Variable::sentiment: return rec.sentiment;
        case Variable::followers_count: return static_cast<double>(rec.followers_count);
        case Variable::friends_count: return static_cast<double>(rec.friends_count);
        case Variable::statuses_count: return static_cast<double>(rec.statuses_count);
        case Variable::favorites_count: return static_cast<double>(rec.favorites_count);
        case Variable::retweet_followers_count:
            if (rec.retweet_followers_count) return static_cast<double>(*rec.retweet_followers_count);
            return std::nullopt;
        case Variable::retweet_friends_count:
            if (rec.retweet_friends_count) return static_cast<double>(*rec.retweet_friends_count);
            return std::nullopt;
        case Variable::quoted_followers_count:
            if (rec.quoted_followers_count) return static_cast<double>(*rec.quoted_followers_count);
            return std::nullopt;
        case Variable::quoted_friends_count:
            if (rec.quoted_friends_count) return static_cast<double>(*rec.quoted_friends_count);
            return std::nullopt;
        default: return std::nullopt;
    }
}

inline std::optional<std::string> category_value(const TweetRecord& rec, Variable v) {
    switch (v) {
        case Variable::screen_name: return rec.screen_name;
        case Variable::language: return rec.language;
        case Variable::media_type:
            if (rec.media_type) return std::string(tweetstudy::to_string(*rec.media_type));
            return std::nullopt;
        case Variable::retweet_text: return rec.retweet_text;
        case Variable::retweet_screen_name: return rec.retweet_screen_name;
        case Variable::quoted_text: return rec.quoted_text;
        case Variable::quoted_screen_name: return rec.quoted_screen_name;
        default: return std::nullopt;
    }
}

inline constexpr std::array<Variable, 9> kNumericVariables = {
    Variable::sentiment,
    Variable::followers_count,
    Variable::friends_count,
    Variable::statuses_count,
    Variable::favorites_count,
    Variable::retweet_followers_count,
    Variable::retweet_friends_count,
    Variable::quoted_followers_count,
    Variable::quoted_friends_count,
};

inline constexpr std::array<Variable, 7> kCategoryVariables = {
    Variable::screen_name,       Variable::language,
    Variable::media_type,        Variable::retweet_text,
    Variable::retweet_screen_name, Variable::quoted_text,
    Variable::quoted_screen_name,
};

/// Global bin schemes, computed once over the full featurized dataset.
using BinContext = std::map<Variable, BinScheme>;

inline BinContext compute_bin_schemes(const std::vector<TweetRecord>& tweets, int k = 5) {
    BinContext ctx;
    for (Variable var : kNumericVariables) {
        std::vector<double> values;
        for (const auto& rec : tweets)
            if (auto v = numeric_value(rec, var)) values.push_back(*v);
        if (values.empty()) continue;
        auto [scheme, _] = bin_numeric(values, k);
        scheme.variable = var;
        ctx.emplace(var, scheme);
    }
    return ctx;
}

/// Evaluates one predicate against a featurized record. `tokens` is the
/// stopword-filtered token list from the featurize step.
inline bool predicate_matches(const Predicate& p, const TweetRecord& rec,
                              const std::vector<std::string>& tokens, const BinContext& bins) {
    switch (p.kind) {
        case PredicateKind::equals_category: {
            auto v = category_value(rec, p.variable);
            return v && *v == p.category;
        }
        case PredicateKind::in_numeric_bin: {
            auto v = numeric_value(rec, p.variable);
            if (!v) return false;
            auto scheme = bins.find(p.variable);
            if (scheme == bins.end()) return false;
            return scheme->second.bin_of(*v) == p.bin;
        }
        case PredicateKind::contains_word:
            return std::find(tokens.begin(), tokens.end(), p.category) != tokens.end();
        case PredicateKind::contains_hashtag:
            return std::find(rec.hashtags.begin(), rec.hashtags.end(), p.category) !=
                   rec.hashtags.end();
        case PredicateKind::contains_mention:
            return std::find(rec.mentions_screen_names.begin(), rec.mentions_screen_names.end(),
                             p.category) != rec.mentions_screen_names.end();
        case PredicateKind::has_media:
            return rec.media_type.has_value();
    }
    return false;
}

inline bool condition_matches(const Condition& c, const TweetRecord& rec,
                              const std::vector<std::string>& tokens, const BinContext& bins) {
    for (const auto& p : c.predicates)
        if (!predicate_matches(p, rec, tokens, bins)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Summary statistics.

struct SummaryStats {
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double mean = 0.0;
    double median = 0.0;
    std::optional<double> sd; // disengaged for n < 2
};

inline SummaryStats summary_stats(std::span<const double> samples) {
    if (samples.empty()) throw EmptySample();
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    SummaryStats out;
    out.min = sorted.front();
    out.max = sorted.back();
    out.q1 = numeric::quantile_sorted(sorted, 0.25);
    out.median = numeric::quantile_sorted(sorted, 0.5);
    out.q3 = numeric::quantile_sorted(sorted, 0.75);
    out.mean = numeric::mean(sorted);
    out.sd = numeric::sample_sd(sorted);
    return out;
}

// ---------------------------------------------------------------------------
// Dimension-reduction diagnostics: two correlation matrices.

struct CorrelationReport {
    std::vector<std::string> variables;
    std::vector<std::vector<std::optional<double>>> matrix; // symmetric, diag = 1
    std::vector<std::pair<std::size_t, std::size_t>> flagged;
    double flag_threshold = 1.0;
};

namespace detail {

inline CorrelationReport correlate_columns(
    const std::vector<std::string>& names,
    const std::vector<std::vector<std::optional<double>>>& columns, double flag_threshold,
    bool flag_exact_only) {
    CorrelationReport report;
    report.variables = names;
    report.flag_threshold = flag_threshold;
    std::size_t n = names.size();
    report.matrix.assign(n, std::vector<std::optional<double>>(n));
    for (std::size_t i = 0; i < n; ++i) {
        report.matrix[i][i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            std::vector<double> xs, ys;
            for (std::size_t r = 0; r < columns[i].size(); ++r) {
                if (columns[i][r] && columns[j][r]) {
                    xs.push_back(*columns[i][r]);
                    ys.push_back(*columns[j][r]);
                }
            }
            auto corr = numeric::pearson(xs, ys);
            report.matrix[i][j] = report.matrix[j][i] = corr;
            if (corr) {
                bool flag = flag_exact_only ? *corr >= 1.0 - 1e-12 : *corr > flag_threshold;
                if (flag) report.flagged.emplace_back(i, j);
            }
        }
    }
    return report;
}

} // namespace detail

/// Presence indicators (value unequal to null) correlated pairwise;
/// pairs at exactly 1.0 are derivable-drop candidates.
inline CorrelationReport presence_correlation(const std::vector<TweetRecord>& tweets) {
    struct Col {
        const char* name;
        std::function<bool(const TweetRecord&)> present;
    };
    const std::vector<Col> cols = {
        {"text", [](const TweetRecord&) { return true; }},
        {"media_type", [](const TweetRecord& r) { return r.media_type.has_value(); }},
        {"hashtags", [](const TweetRecord& r) { return !r.hashtags.empty(); }},
        {"mentions_screen_names", [](const TweetRecord& r) { return !r.mentions_screen_names.empty(); }},
        {"is_retweet", [](const TweetRecord& r) { return r.is_retweet; }},
        {"is_quote", [](const TweetRecord& r) { return r.is_quote; }},
        {"retweet_text", [](const TweetRecord& r) { return r.retweet_text.has_value(); }},
        {"retweet_screen_name", [](const TweetRecord& r) { return r.retweet_screen_name.has_value(); }},
        {"retweet_followers_count",
         [](const TweetRecord& r) { return r.retweet_followers_count.has_value(); }},
        {"retweet_friends_count",
         [](const TweetRecord& r) { return r.retweet_friends_count.has_value(); }},
        {"retweet_lag_ms", [](const TweetRecord& r) { return r.retweet_lag_ms.has_value(); }},
        {"quoted_text", [](const TweetRecord& r) { return r.quoted_text.has_value(); }},
        {"quoted_screen_name", [](const TweetRecord& r) { return r.quoted_screen_name.has_value(); }},
        {"quoted_followers_count",
         [](const TweetRecord& r) { return r.quoted_followers_count.has_value(); }},
        {"quoted_friends_count",
         [](const TweetRecord& r) { return r.quoted_friends_count.has_value(); }},
        {"quoted_lag_ms", [](const TweetRecord& r) { return r.quoted_lag_ms.has_value(); }},
        {"sentiment", [](const TweetRecord& r) { return r.sentiment.has_value(); }},
    };
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> columns;
    for (const auto& col : cols) {
        names.emplace_back(col.name);
        std::vector<std::optional<double>> values;
        values.reserve(tweets.size());
        for (const auto& rec : tweets) values.emplace_back(col.present(rec) ? 1.0 : 0.0);
        columns.push_back(std::move(values));
    }
    return detail::correlate_columns(names, columns, 1.0, /*flag_exact_only=*/true);
}

/// Raw-value correlations with pairwise deletion of nulls; pairs above
/// the drop threshold are flagged.
inline CorrelationReport value_correlation(const std::vector<TweetRecord>& tweets,
                                           double drop_threshold = 0.9) {
    struct Col {
        const char* name;
        std::function<std::optional<double>(const TweetRecord&)> value;
    };
    const std::vector<Col> cols = {
        {"created_at", [](const TweetRecord& r) { return std::optional<double>(static_cast<double>(r.created_at)); }},
        {"followers_count", [](const TweetRecord& r) { return std::optional<double>(static_cast<double>(r.followers_count)); }},
        {"friends_count", [](const TweetRecord& r) { return std::optional<double>(static_cast<double>(r.friends_count)); }},
        {"statuses_count", [](const TweetRecord& r) { return std::optional<double>(static_cast<double>(r.statuses_count)); }},
        {"favorites_count", [](const TweetRecord& r) { return std::optional<double>(static_cast<double>(r.favorites_count)); }},
        {"retweet_followers_count",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.retweet_followers_count) return static_cast<double>(*r.retweet_followers_count);
             return std::nullopt;
         }},
        {"retweet_friends_count",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.retweet_friends_count) return static_cast<double>(*r.retweet_friends_count);
             return std::nullopt;
         }},
        {"retweet_lag_ms",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.retweet_lag_ms) return static_cast<double>(*r.retweet_lag_ms);
             return std::nullopt;
         }},
        {"quoted_followers_count",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.quoted_followers_count) return static_cast<double>(*r.quoted_followers_count);
             return std::nullopt;
         }},
        {"quoted_friends_count",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.quoted_friends_count) return static_cast<double>(*r.quoted_friends_count);
             return std::nullopt;
         }},
        {"quoted_lag_ms",
         [](const TweetRecord& r) -> std::optional<double> {
             if (r.quoted_lag_ms) return static_cast<double>(*r.quoted_lag_ms);
             return std::nullopt;
         }},
        {"sentiment", [](const TweetRecord& r) { return r.sentiment; }},
    };
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> columns;
    for (const auto& col : cols) {
        names.emplace_back(col.name);
        std::vector<std::optional<double>> values;
        values.reserve(tweets.size());
        for (const auto& rec : tweets) values.push_back(col.value(rec));
        columns.push_back(std::move(values));
    }
    return detail::correlate_columns(names, columns, drop_threshold, /*flag_exact_only=*/false);
}

// ---------------------------------------------------------------------------
// Condition enumeration.

struct ConditionStats {
    std::string id;
    Condition condition;
    std::uint32_t n = 0;        // support: matching windows
    std::uint32_t n_excess = 0; // matching windows carrying an excess block
    std::array<SummaryStats, kEventPeriods> returns{};
    std::array<std::optional<SummaryStats>, kEventPeriods> excess{};
    std::array<double, kEventPeriods> cum_return_mean{};
    std::array<std::optional<double>, kEventPeriods> cum_excess_mean{};
};

struct MinerConfig {
    int max_arity = 2;
    std::uint32_t min_support = 50;
    int bin_count = 5;
};

namespace detail {

struct WindowRow {
    std::array<double, kEventPeriods> returns{};
    std::array<double, kEventPeriods> cumret{};
    std::optional<std::array<double, kEventPeriods>> excess;
    std::optional<std::array<double, kEventPeriods>> cumex;
};

inline ConditionStats aggregate(const Condition& cond, std::span<const std::uint32_t> idx,
                                std::span<const WindowRow> rows) {
    ConditionStats cs;
    cs.condition = cond;
    cs.n = static_cast<std::uint32_t>(idx.size());
    std::vector<double> ret, er, cumex;
    ret.reserve(idx.size());
    for (std::uint32_t i : idx)
        if (rows[i].excess) ++cs.n_excess;
    for (int k = 0; k < kEventPeriods; ++k) {
        ret.clear();
        er.clear();
        cumex.clear();
        double cum_sum = 0.0;
        for (std::uint32_t i : idx) {
            const WindowRow& row = rows[i];
            ret.push_back(row.returns[k]);
            cum_sum += row.cumret[k];
            if (row.excess) {
                er.push_back((*row.excess)[k]);
                cumex.push_back((*row.cumex)[k]);
            }
        }
        cs.returns[k] = summary_stats(ret);
        cs.cum_return_mean[k] = cum_sum / static_cast<double>(idx.size());
        if (!er.empty()) {
            cs.excess[k] = summary_stats(er);
            cs.cum_excess_mean[k] = numeric::mean(cumex);
        }
    }
    return cs;
}

struct Root {
    Predicate predicate;
    std::vector<std::uint32_t> support; // sorted window indices
};

inline bool compatible(const std::vector<Predicate>& existing, const Predicate& next) {
    for (const auto& p : existing) {
        if (p.variable == next.variable && p.kind == next.kind) {
            if (next.kind == PredicateKind::contains_word && p.category != next.category) continue;
            return false;
        }
    }
    return true;
}

} // namespace detail

/// Breadth-first enumeration of predicate conjunctions with
/// support-based pruning: a conjunction can never exceed any subset's
/// support, so branches below min_support stop growing.
inline std::vector<ConditionStats> enumerate_conditions(
    const eventstudy::EventPanel& panel, const std::vector<TweetRecord>& tweets,
    const std::map<std::string, std::vector<std::string>>& tokens, const BinContext& bins,
    const textlab::Vocabulary& vocab, const MinerConfig& config = {}) {
    // Join windows to their featurized tweets.
    std::unordered_map<std::string, const TweetRecord*> by_id;
    for (const auto& rec : tweets) by_id.emplace(rec.tweet_id, &rec);

    std::vector<detail::WindowRow> rows;
    std::vector<const TweetRecord*> row_tweets;
    std::vector<const std::vector<std::string>*> row_tokens;
    static const std::vector<std::string> kNoTokens;
    rows.reserve(panel.windows.size());
    for (const auto& w : panel.windows) {
        auto rec = by_id.find(w.tweet_id);
        if (rec == by_id.end()) continue;
        detail::WindowRow row;
        row.returns = w.returns;
        row.cumret = w.cumret;
        if (w.excess) {
            row.excess = w.excess;
            row.cumex = w.cumulative_excess();
        }
        rows.push_back(row);
        row_tweets.push_back(rec->second);
        auto tok = tokens.find(w.tweet_id);
        row_tokens.push_back(tok == tokens.end() ? &kNoTokens : &tok->second);
    }
    const auto window_count = static_cast<std::uint32_t>(rows.size());

    // Root predicates with their support sets.
    std::map<Predicate, std::vector<std::uint32_t>> support;
    auto add = [&](Predicate p, std::uint32_t idx) {
        auto& vec = support[std::move(p)];
        if (vec.empty() || vec.back() != idx) vec.push_back(idx);
    };
    for (std::uint32_t i = 0; i < window_count; ++i) {
        const TweetRecord& rec = *row_tweets[i];
        for (Variable var : kCategoryVariables)
            if (auto v = category_value(rec, var))
                add({var, PredicateKind::equals_category, *v, 0}, i);
        for (Variable var : kNumericVariables) {
            auto v = numeric_value(rec, var);
            if (!v) continue;
            auto scheme = bins.find(var);
            if (scheme == bins.end()) continue;
            add({var, PredicateKind::in_numeric_bin, "", scheme->second.bin_of(*v)}, i);
        }
        for (const auto& word : *row_tokens[i])
            if (vocab.contains(word)) add({Variable::tweet_word, PredicateKind::contains_word, word, 0}, i);
        for (const auto& tag : rec.hashtags)
            add({Variable::hashtag, PredicateKind::contains_hashtag, tag, 0}, i);
        for (const auto& mention : rec.mentions_screen_names)
            add({Variable::mentions_screen_name, PredicateKind::contains_mention, mention, 0}, i);
        if (rec.media_type) add({Variable::media_type, PredicateKind::has_media, "", 0}, i);
    }

    std::vector<detail::Root> roots;
    for (auto& [pred, idx] : support)
        if (idx.size() >= config.min_support) roots.push_back({pred, std::move(idx)});

    struct Open {
        std::vector<Predicate> predicates;
        std::vector<std::uint32_t> support;
        std::size_t last_root; // index into roots of the last extension
    };

    std::vector<ConditionStats> results;
    std::vector<Open> level;
    for (std::size_t r = 0; r < roots.size(); ++r)
        level.push_back({{roots[r].predicate}, roots[r].support, r});

    std::vector<std::uint32_t> scratch;
    for (int arity = 1; arity <= config.max_arity && !level.empty(); ++arity) {
        for (const auto& open : level) {
            Condition cond{open.predicates};
            results.push_back(detail::aggregate(cond, open.support, rows));
        }
        if (arity == config.max_arity) break;
        std::vector<Open> next;
        for (const auto& open : level) {
            for (std::size_t r = open.last_root + 1; r < roots.size(); ++r) {
                if (!detail::compatible(open.predicates, roots[r].predicate)) continue;
                scratch.clear();
                std::set_intersection(open.support.begin(), open.support.end(),
                                      roots[r].support.begin(), roots[r].support.end(),
                                      std::back_inserter(scratch));
                if (scratch.size() < config.min_support) continue;
                Open child;
                child.predicates = open.predicates;
                child.predicates.push_back(roots[r].predicate);
                child.support = scratch;
                child.last_root = r;
                next.push_back(std::move(child));
            }
        }
        level = std::move(next);
    }

    std::sort(results.begin(), results.end(), [](const ConditionStats& a, const ConditionStats& b) {
        return a.condition < b.condition;
    });
    char buf[16];
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "c%06zu", i);
        results[i].id = buf;
    }
    return results;
}

// ---------------------------------------------------------------------------
// Stats files: a condition master plus one row per (condition, period).

inline void write_condition_master(const std::vector<ConditionStats>& stats, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "id,predicates,n,n_excess\n";
    for (const auto& cs : stats)
        out << cs.id << ',' << csv_escape(serialize_condition(cs.condition)) << ',' << cs.n << ','
            << cs.n_excess << '\n';
}

namespace detail {

inline void write_block(std::ofstream& out, const SummaryStats& s) {
    out << ',' << format_double(s.min) << ',' << format_double(s.max) << ',' << format_double(s.q1)
        << ',' << format_double(s.q3) << ',' << format_double(s.mean) << ','
        << format_double(s.median) << ',';
    if (s.sd) out << format_double(*s.sd);
}

} // namespace detail

inline void write_condition_stats(const std::vector<ConditionStats>& stats, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "id,period,ret_min,ret_max,ret_q1,ret_q3,ret_mean,ret_median,ret_sd,"
           "er_min,er_max,er_q1,er_q3,er_mean,er_median,er_sd,cum_return_mean,cum_excess_mean\n";
    for (const auto& cs : stats) {
        for (int k = 0; k < kEventPeriods; ++k) {
            out << cs.id << ',' << (k + 1);
            detail::write_block(out, cs.returns[k]);
            if (cs.excess[k]) {
                detail::write_block(out, *cs.excess[k]);
            } else {
                out << ",,,,,,,";
            }
            out << ',' << format_double(cs.cum_return_mean[k]) << ',';
            if (cs.cum_excess_mean[k]) out << format_double(*cs.cum_excess_mean[k]);
            out << '\n';
        }
    }
}

namespace detail {

inline std::optional<double> opt_field(const std::string& field, std::size_t line_no) {
    if (field.empty()) return std::nullopt;
    auto v = parse_f64(field);
    if (!v) throw MalformedRow(line_no, "bad numeric field");
    return v;
}

inline double req_field(const std::string& field, std::size_t line_no) {
    auto v = parse_f64(field);
    if (!v) throw MalformedRow(line_no, "bad numeric field");
    return *v;
}

} // namespace detail

inline std::vector<ConditionStats> read_condition_stats(const std::string& master_path,
                                                        const std::string& stats_path) {
    std::vector<ConditionStats> out;
    std::unordered_map<std::string, std::size_t> index;
    {
        std::ifstream in = open_input(master_path);
        std::string line;
        std::size_t line_no = 0;
        bool header = false;
        while (std::getline(in, line)) {
            ++line_no;
            auto stripped = trim(line);
            if (stripped.empty()) continue;
            if (!header) { header = true; continue; }
            auto fields = csv_split(stripped, line_no);
            if (fields.size() != 4) throw MalformedRow(line_no, "expected 4 master fields");
            ConditionStats cs;
            cs.id = fields[0];
            cs.condition = parse_condition(fields[1]);
            auto n = parse_i64(fields[2]);
            auto ne = parse_i64(fields[3]);
            if (!n || !ne) throw MalformedRow(line_no, "bad support count");
            cs.n = static_cast<std::uint32_t>(*n);
            cs.n_excess = static_cast<std::uint32_t>(*ne);
            index.emplace(cs.id, out.size());
            out.push_back(std::move(cs));
        }
    }
    {
        std::ifstream in = open_input(stats_path);
        std::string line;
        std::size_t line_no = 0;
        bool header = false;
        while (std::getline(in, line)) {
            ++line_no;
            auto stripped = trim(line);
            if (stripped.empty()) continue;
            if (!header) { header = true; continue; }
            auto fields = csv_split(stripped, line_no);
            if (fields.size() != 18) throw MalformedRow(line_no, "expected 18 stats fields");
            auto it = index.find(fields[0]);
            if (it == index.end()) throw MalformedRow(line_no, "unknown condition id");
            auto period = parse_i64(fields[1]);
            if (!period || *period < 1 || *period > kEventPeriods)
                throw MalformedRow(line_no, "bad period");
            ConditionStats& cs = out[it->second];
            int k = static_cast<int>(*period) - 1;
            SummaryStats ret;
            ret.min = detail::req_field(fields[2], line_no);
            ret.max = detail::req_field(fields[3], line_no);
            ret.q1 = detail::req_field(fields[4], line_no);
            ret.q3 = detail::req_field(fields[5], line_no);
            ret.mean = detail::req_field(fields[6], line_no);
            ret.median = detail::req_field(fields[7], line_no);
            ret.sd = detail::opt_field(fields[8], line_no);
            cs.returns[k] = ret;
            if (!fields[9].empty()) {
                SummaryStats er;
                er.min = detail::req_field(fields[9], line_no);
                er.max = detail::req_field(fields[10], line_no);
                er.q1 = detail::req_field(fields[11], line_no);
                er.q3 = detail::req_field(fields[12], line_no);
                er.mean = detail::req_field(fields[13], line_no);
                er.median = detail::req_field(fields[14], line_no);
                er.sd = detail::opt_field(fields[15], line_no);
                cs.excess[k] = er;
            }
            cs.cum_return_mean[k] = detail::req_field(fields[16], line_no);
            cs.cum_excess_mean[k] = detail::opt_field(fields[17], line_no);
        }
    }
    return out;
}

/// Bin scheme sidecar so live matching can reuse the mining-time bins.
inline void write_bin_schemes(const BinContext& bins, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "variable,min,max,k\n";
    for (const auto& [var, scheme] : bins)
        out << to_string(var) << ',' << format_double(scheme.min) << ',' << format_double(scheme.max)
            << ',' << scheme.k << '\n';
}

inline BinContext read_bin_schemes(const std::string& path) {
    BinContext ctx;
    std::ifstream in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header) { header = true; continue; }
        auto fields = csv_split(stripped, line_no);
        if (fields.size() != 4) throw MalformedRow(line_no, "expected 4 bin fields");
        auto var = variable_from_string(fields[0]);
        auto lo = parse_f64(fields[1]);
        auto hi = parse_f64(fields[2]);
        auto k = parse_i64(fields[3]);
        if (!var || !lo || !hi || !k) throw MalformedRow(line_no, "bad bin scheme row");
        BinScheme scheme;
        scheme.variable = *var;
        scheme.min = *lo;
        scheme.max = *hi;
        scheme.k = static_cast<int>(*k);
        ctx.emplace(*var, scheme);
    }
    return ctx;
}

} // namespace tweetstudy::miner
