#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tweetstudy/io.hpp"
#include "tweetstudy/miner.hpp"

namespace tweetstudy::strategy {

/// One row of the prepared datasheet: a beneficial condition with its
/// buy/sell minute offsets and expected spread.
struct TradePlan {
    std::string condition_id;
    miner::Condition condition;
    std::uint32_t n = 0;
    int buy_offset = 0;  // argmin of mean cumulative return, in {1,2,3}
    int sell_offset = 0; // argmax of mean cumulative return
    double expected_spread = 0.0;
    std::optional<double> sd_at_sell;
};

/// Plans sorted by min-max spread, highest first; the trading loop takes
/// the first matching row.
struct Datasheet {
    std::vector<TradePlan> plans;
};

enum class ExcessRequirement {
    positive_all_periods, // mean cumulative excess return > 0 for every period
    positive_at_sell,     // only at the sell offset
};

struct SelectionConfig {
    double min_spread = 0.005;
    int max_buy_offset = 3;
    int min_lag = 5;
    ExcessRequirement excess_requirement = ExcessRequirement::positive_all_periods;
};

/// Applies the beneficial-condition criteria: spread of the mean
/// cumulative return >= min_spread, positive cumulative excess return,
/// minimum inside the first three periods, maximum lagging the minimum
/// by at least five periods, and no retweet/quote predicates. Ties in
/// argmin/argmax break toward the earlier period.
inline Datasheet select_beneficial(const std::vector<miner::ConditionStats>& stats,
                                   const SelectionConfig& config = {}) {
    Datasheet sheet;
    for (const auto& cs : stats) {
        if (cs.condition.references_retweet_or_quote()) continue;
        if (cs.n_excess == 0) continue;
        int argmin = 0, argmax = 0;
        for (int k = 1; k < kEventPeriods; ++k) {
            if (cs.cum_return_mean[k] < cs.cum_return_mean[argmin]) argmin = k;
            if (cs.cum_return_mean[k] > cs.cum_return_mean[argmax]) argmax = k;
        }
        double spread = cs.cum_return_mean[argmax] - cs.cum_return_mean[argmin];
        if (spread < config.min_spread) continue;
        if (argmin + 1 > config.max_buy_offset) continue;
        if (argmax - argmin < config.min_lag) continue;
        bool excess_ok = true;
        if (config.excess_requirement == ExcessRequirement::positive_all_periods) {
            for (int k = 0; k < kEventPeriods; ++k)
                if (!cs.cum_excess_mean[k] || !(*cs.cum_excess_mean[k] > 0.0)) excess_ok = false;
        } else {
            excess_ok = cs.cum_excess_mean[argmax] && *cs.cum_excess_mean[argmax] > 0.0;
        }
        if (!excess_ok) continue;
        TradePlan plan;
        plan.condition_id = cs.id;
        plan.condition = cs.condition;
        plan.n = cs.n;
        plan.buy_offset = argmin + 1;
        plan.sell_offset = argmax + 1;
        plan.expected_spread = spread;
        plan.sd_at_sell = cs.returns[argmax].sd;
        sheet.plans.push_back(std::move(plan));
    }
    std::sort(sheet.plans.begin(), sheet.plans.end(), [](const TradePlan& a, const TradePlan& b) {
        if (a.expected_spread != b.expected_spread) return a.expected_spread > b.expected_spread;
        return a.condition < b.condition;
    });
    return sheet;
}

inline void emit_datasheet(const Datasheet& sheet, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "condition_id,predicates,n,buy_offset,sell_offset,expected_spread,sd_at_sell\n";
    for (const auto& plan : sheet.plans) {
        out << plan.condition_id << ',' << csv_escape(miner::serialize_condition(plan.condition))
            << ',' << plan.n << ',' << plan.buy_offset << ',' << plan.sell_offset << ','
            << format_double(plan.expected_spread) << ',';
        if (plan.sd_at_sell) out << format_double(*plan.sd_at_sell);
        out << '\n';
    }
}

inline Datasheet parse_datasheet(const std::string& path) {
    Datasheet sheet;
    std::ifstream in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header) {
            header = true;
            continue;
        }
        auto fields = csv_split(stripped, line_no);
        if (fields.size() != 7) throw MalformedRow(line_no, "expected 7 datasheet fields");
        TradePlan plan;
        plan.condition_id = fields[0];
        plan.condition = miner::parse_condition(fields[1]);
        auto n = parse_i64(fields[2]);
        auto buy = parse_i64(fields[3]);
        auto sell = parse_i64(fields[4]);
        auto spread = parse_f64(fields[5]);
        if (!n || !buy || !sell || !spread) throw MalformedRow(line_no, "bad datasheet row");
        plan.n = static_cast<std::uint32_t>(*n);
        plan.buy_offset = static_cast<int>(*buy);
        plan.sell_offset = static_cast<int>(*sell);
        plan.expected_spread = *spread;
        if (!fields[6].empty()) {
            auto sd = parse_f64(fields[6]);
            if (!sd) throw MalformedRow(line_no, "bad sd_at_sell");
            plan.sd_at_sell = sd;
        }
        sheet.plans.push_back(std::move(plan));
    }
    return sheet;
}

} // namespace tweetstudy::strategy
