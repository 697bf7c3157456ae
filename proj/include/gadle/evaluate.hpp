#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/ingest.hpp"
#include "json.hpp"

namespace gadle {

using ActionVector = std::vector<std::uint8_t>;  // 1 = buy twice, 0 = no buy

inline int purchase_days(std::span<const std::uint8_t> genes) {
    int n = 0;
    for (auto g : genes) n += g ? 1 : 0;
    return n;
}

// Return over Daily, in percent. Flagged zero when the agent never bought.
struct RodResult {
    double value = 0.0;
    bool no_purchases = false;
};

inline RodResult rod(std::span<const double> prices, std::span<const std::uint8_t> genes) {
    const int n = purchase_days(genes);
    if (n == 0) return {0.0, true};
    double dot = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        sum += prices[i];
        if (genes[i]) dot += prices[i];
    }
    const double daily_avg = sum / static_cast<double>(prices.size());
    const double agent_avg = dot / static_cast<double>(n);
    return {(1.0 - agent_avg / daily_avg) * 100.0, false};
}

// Purchase Count over Daily: units bought (2 per buy-twice day) minus the
// daily agent's one-per-day units.
inline int pcod(std::span<const std::uint8_t> genes) {
    return 2 * purchase_days(genes) - static_cast<int>(genes.size());
}

struct WindowResult {
    std::string label;
    double agent_avg_price = 0.0;
    double daily_avg_price = 0.0;
    double rod = 0.0;
    int agent_purchases = 0;  // units (2 per buy-twice day)
    int daily_purchases = 0;  // 30 units per window
    int pcod = 0;
    bool rod_flagged_zero = false;
};

struct BacktestReport {
    std::vector<WindowResult> windows;
    WindowResult overall;
};

// Overall row: purchase-weighted agent average, unweighted mean of window
// daily averages. This is the only aggregation under which the per-window
// rows and the overall row stay mutually consistent.
inline WindowResult aggregate_windows(const std::vector<WindowResult>& windows) {
    WindowResult overall;
    overall.label = "Overall";
    double agent_weighted = 0.0;
    double daily_sum = 0.0;
    for (const auto& w : windows) {
        agent_weighted += w.agent_avg_price * w.agent_purchases;
        daily_sum += w.daily_avg_price;
        overall.agent_purchases += w.agent_purchases;
        overall.daily_purchases += w.daily_purchases;
    }
    overall.daily_avg_price = daily_sum / static_cast<double>(windows.size());
    if (overall.agent_purchases > 0) {
        overall.agent_avg_price = agent_weighted / overall.agent_purchases;
        overall.rod = (1.0 - overall.agent_avg_price / overall.daily_avg_price) * 100.0;
    } else {
        overall.rod_flagged_zero = true;
    }
    overall.pcod = overall.agent_purchases - overall.daily_purchases;
    return overall;
}

inline WindowResult make_window_result(std::span<const double> prices,
                                       std::span<const std::uint8_t> genes,
                                       const std::string& label) {
    WindowResult w;
    w.label = label;
    const int days = static_cast<int>(prices.size());
    const int buys = purchase_days(genes);
    w.agent_purchases = 2 * buys;
    w.daily_purchases = days;
    w.pcod = w.agent_purchases - w.daily_purchases;
    w.daily_avg_price =
        std::accumulate(prices.begin(), prices.end(), 0.0) / static_cast<double>(days);
    if (buys > 0) {
        double dot = 0.0;
        for (int i = 0; i < days; ++i)
            if (genes[i]) dot += prices[i];
        w.agent_avg_price = dot / static_cast<double>(buys);
        w.rod = (1.0 - w.agent_avg_price / w.daily_avg_price) * 100.0;
    } else {
        w.rod_flagged_zero = true;
    }
    return w;
}

using PolicyFn = std::function<ActionVector(const Episode&)>;

// Rolling back-test: consecutive non-overlapping 30-day decision windows over
// the date range, each preceded by the 30 days before it as scaling context.
// The first 30 bars of the range serve only as context; a trailing partial
// window is dropped.
inline BacktestReport backtest(const PolicyFn& policy, const PriceSeries& series, Date start,
                               Date end, DailyPriceMode mode) {
    PriceSeries ranged = slice_range(series, start, end);
    const int total = static_cast<int>(ranged.size());
    if (total < kContextDays + kDecisionDays)
        throw RangeTooShort("back-test range holds " + std::to_string(total) +
                            " trading days; need at least " +
                            std::to_string(kContextDays + kDecisionDays));

    const std::vector<double> prices = daily_prices(ranged, mode);
    BacktestReport report;
    long long id = 0;
    for (int s = 0; s + kContextDays + kDecisionDays <= total; s += kDecisionDays) {
        RawWindow w;
        w.start_index = s;
        w.context_prices.assign(prices.begin() + s, prices.begin() + s + kContextDays);
        w.decision_prices.assign(prices.begin() + s + kContextDays,
                                 prices.begin() + s + kContextDays + kDecisionDays);
        for (int i = 0; i < kDecisionDays; ++i)
            w.decision_dates.push_back(ranged.bars[s + kContextDays + i].date);
        Episode ep = build_episode(w, id++);
        ActionVector actions = policy(ep);
        std::string label =
            w.decision_dates.front().str() + " - " + w.decision_dates.back().str();
        report.windows.push_back(make_window_result(w.decision_prices, actions, label));
    }
    if (report.windows.empty())
        throw RangeTooShort("no complete decision window in back-test range");
    report.overall = aggregate_windows(report.windows);
    return report;
}

// --- consistency / sensitivity harnesses ------------------------------------

// One full train+back-test pipeline outcome, as produced by a method runner.
struct RunOutcome {
    double rod = 0.0;   // overall RoD, percent
    double pcod = 0.0;  // overall PCoD per 30-day window (mean across windows)
    double agent_avg = 0.0;
    bool failed = false;
    std::string fail_reason;
};

using MethodRunner = std::function<RunOutcome(std::uint64_t seed)>;

struct ConsistencyReport {
    std::vector<RunOutcome> runs;
    double mean_rod = 0, std_rod = 0;
    double mean_pcod = 0, std_pcod = 0;
    double fail_percent = 0;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double sd = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
    return {mean, sd};
}
}  // namespace detail

inline ConsistencyReport consistency_run(const MethodRunner& runner, int n_seeds,
                                         std::uint64_t master_seed = 1) {
    ConsistencyReport report;
    std::vector<double> rods, pcods;
    int failed = 0;
    for (int i = 0; i < n_seeds; ++i) {
        RunOutcome out = runner(derive_seed(master_seed, static_cast<std::uint64_t>(i)));
        report.runs.push_back(out);
        if (out.failed) {
            ++failed;
        } else {
            rods.push_back(out.rod);
            pcods.push_back(out.pcod);
        }
    }
    std::tie(report.mean_rod, report.std_rod) = detail::mean_std(rods);
    std::tie(report.mean_pcod, report.std_pcod) = detail::mean_std(pcods);
    report.fail_percent = 100.0 * failed / static_cast<double>(n_seeds);
    return report;
}

struct Perturbation {
    std::string name;  // e.g. "population size dec"
    MethodRunner runner;
};

struct SensitivityRow {
    std::string name;
    RunOutcome outcome;
};

struct SensitivityReport {
    RunOutcome baseline;
    std::vector<SensitivityRow> rows;
    double avg_abs_dev_agent_avg = 0;
    double avg_abs_dev_rod = 0;
    double avg_abs_dev_pcod = 0;
    int failed = 0;
};

inline SensitivityReport sensitivity_run(const MethodRunner& baseline,
                                         const std::vector<Perturbation>& perturbations,
                                         std::uint64_t seed) {
    SensitivityReport report;
    report.baseline = baseline(seed);
    double dev_agent = 0, dev_rod = 0, dev_pcod = 0;
    int ok = 0;
    for (const auto& p : perturbations) {
        RunOutcome out = p.runner(seed);
        report.rows.push_back({p.name, out});
        if (out.failed) {
            ++report.failed;
        } else {
            dev_agent += std::abs(out.agent_avg - report.baseline.agent_avg);
            dev_rod += std::abs(out.rod - report.baseline.rod);
            dev_pcod += std::abs(out.pcod - report.baseline.pcod);
            ++ok;
        }
    }
    if (ok > 0) {
        report.avg_abs_dev_agent_avg = dev_agent / ok;
        report.avg_abs_dev_rod = dev_rod / ok;
        report.avg_abs_dev_pcod = dev_pcod / ok;
    }
    return report;
}

struct ThroughputReport {
    double total_seconds = 0;
    std::size_t episodes = 0;
    double episodes_per_hour = 0;
};

inline ThroughputReport throughput_report(double total_seconds, std::size_t episodes) {
    ThroughputReport r;
    r.total_seconds = total_seconds;
    r.episodes = episodes;
    r.episodes_per_hour =
        total_seconds > 0 ? episodes / (total_seconds / 3600.0) : 0.0;
    return r;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json to_json(const WindowResult& w) {
    return {{"label", w.label},
            {"agent_avg_price", w.agent_avg_price},
            {"daily_avg_price", w.daily_avg_price},
            {"rod", w.rod},
            {"agent_purchases", w.agent_purchases},
            {"daily_purchases", w.daily_purchases},
            {"pcod", w.pcod},
            {"rod_flagged_zero", w.rod_flagged_zero}};
}

inline nlohmann::json to_json(const BacktestReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    auto rows = nlohmann::json::array();
    for (const auto& w : report.windows) rows.push_back(to_json(w));
    j["windows"] = rows;
    j["overall"] = to_json(report.overall);
    return j;
}

inline nlohmann::json to_json(const ConsistencyReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    auto runs = nlohmann::json::array();
    for (const auto& run : r.runs)
        runs.push_back({{"rod", run.rod},
                        {"pcod", run.pcod},
                        {"agent_avg", run.agent_avg},
                        {"failed", run.failed},
                        {"fail_reason", run.fail_reason}});
    j["runs"] = runs;
    j["mean_rod"] = r.mean_rod;
    j["std_rod"] = r.std_rod;
    j["mean_pcod"] = r.mean_pcod;
    j["std_pcod"] = r.std_pcod;
    j["fail_percent"] = r.fail_percent;
    return j;
}

inline nlohmann::json to_json(const SensitivityReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["baseline"] = {{"rod", r.baseline.rod},
                     {"pcod", r.baseline.pcod},
                     {"agent_avg", r.baseline.agent_avg}};
    auto rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json o = {{"parameter", row.name}};
        if (row.outcome.failed) {
            o["result"] = "FAIL";
            o["fail_reason"] = row.outcome.fail_reason;
        } else {
            o["agent_avg"] = row.outcome.agent_avg;
            o["rod"] = row.outcome.rod;
            o["pcod"] = row.outcome.pcod;
        }
        rows.push_back(o);
    }
    j["rows"] = rows;
    j["avg_abs_dev_agent_avg"] = r.avg_abs_dev_agent_avg;
    j["avg_abs_dev_rod"] = r.avg_abs_dev_rod;
    j["avg_abs_dev_pcod"] = r.avg_abs_dev_pcod;
    j["failed"] = r.failed;
    return j;
}

inline std::string render_backtest_text(const BacktestReport& report) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %10s %10s %8s %8s %8s %6s\n", "Period", "Agent",
                  "Daily", "RoD%", "AgentN", "DailyN", "PCoD");
    out << buf;
    auto line = [&](const WindowResult& w) {
        std::snprintf(buf, sizeof(buf), "%-28s %10.2f %10.2f %8.2f %8d %8d %6d\n",
                      w.label.c_str(), w.agent_avg_price, w.daily_avg_price, w.rod,
                      w.agent_purchases, w.daily_purchases, w.pcod);
        out << buf;
    };
    for (const auto& w : report.windows) line(w);
    line(report.overall);
    return out.str();
}

}  // namespace gadle
