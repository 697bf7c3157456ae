#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/ingest.hpp"
#include "json.hpp"

namespace gadle {

inline constexpr int kContextDays = 30;
inline constexpr int kDecisionDays = 30;
inline constexpr int kFeatureCount = 6;

struct RawWindow {
    int start_index = 0;  // offset of the first context day in the source series
    std::vector<double> context_prices;   // 30 raw prices
    std::vector<double> decision_prices;  // 30 raw prices
    std::vector<Date> decision_dates;     // 30 dates
};

struct ContextScaler {
    double p_min = 0.0;
    double p_max = 0.0;

    double scale(double p) const { return (p - p_min) / (p_max - p_min); }
};

struct FeatureRow {
    int day = 0;  // 1..30
    double scaled_price = 0;
    double price_change_1d = 0;
    double ma5 = 0, ma10 = 0, ma20 = 0;
    double episode_progress = 0;

    std::array<double, kFeatureCount> values() const {
        return {scaled_price, price_change_1d, ma5, ma10, ma20, episode_progress};
    }
};

struct Episode {
    long long id = 0;
    RawWindow window;
    std::vector<double> scaled_prices;  // scaled decision prices
    double daily_mean_raw = 0.0;        // mean of the 30 raw decision prices
    std::vector<FeatureRow> features;

    Date start_date() const {
        return window.decision_dates.empty() ? Date{} : window.decision_dates.front();
    }
};

inline ContextScaler fit_scaler(std::span<const double> context_prices) {
    auto [lo, hi] = std::minmax_element(context_prices.begin(), context_prices.end());
    ContextScaler s{*lo, *hi};
    if (s.p_max - s.p_min < 1e-12 * s.p_max)
        throw DegenerateContext("constant context window (min == max)");
    return s;
}

// Samples 60-day windows: `count` distinct starts drawn without replacement,
// or every valid start in order when count is not given.
inline std::vector<RawWindow> sample_windows(const PriceSeries& series, DailyPriceMode mode,
                                             std::optional<int> count, std::uint64_t rng_seed) {
    const int total = static_cast<int>(series.size());
    const int window_len = kContextDays + kDecisionDays;
    if (total < window_len)
        throw SeriesTooShort("need at least " + std::to_string(window_len) + " bars, have " +
                             std::to_string(total));
    const int max_starts = total - window_len + 1;
    if (count && *count > max_starts)
        throw CountExceedsMaximum("requested " + std::to_string(*count) + " windows, maximum is " +
                                  std::to_string(max_starts));

    std::vector<int> starts(max_starts);
    std::iota(starts.begin(), starts.end(), 0);
    if (count) {
        // partial Fisher-Yates: first *count entries are a uniform draw
        Rng rng(rng_seed);
        for (int i = 0; i < *count; ++i) {
            std::size_t j = i + rng.next_index(starts.size() - i);
            std::swap(starts[i], starts[j]);
        }
        starts.resize(*count);
    }

    const std::vector<double> prices = daily_prices(series, mode);
    std::vector<RawWindow> windows;
    windows.reserve(starts.size());
    for (int s : starts) {
        RawWindow w;
        w.start_index = s;
        w.context_prices.assign(prices.begin() + s, prices.begin() + s + kContextDays);
        w.decision_prices.assign(prices.begin() + s + kContextDays,
                                 prices.begin() + s + window_len);
        w.decision_dates.reserve(kDecisionDays);
        for (int i = 0; i < kDecisionDays; ++i)
            w.decision_dates.push_back(series.bars[s + kContextDays + i].date);
        windows.push_back(std::move(w));
    }
    return windows;
}

// Builds one episode: min-max scaling fit on the context, features on scaled
// prices with moving-average windows borrowing context days at the start.
inline Episode build_episode(const RawWindow& window, long long id) {
    ContextScaler scaler = fit_scaler(window.context_prices);

    Episode ep;
    ep.id = id;
    ep.window = window;
    ep.scaled_prices.reserve(kDecisionDays);
    for (double p : window.decision_prices) ep.scaled_prices.push_back(scaler.scale(p));
    ep.daily_mean_raw = std::accumulate(window.decision_prices.begin(),
                                        window.decision_prices.end(), 0.0) /
                        static_cast<double>(window.decision_prices.size());

    // combined scaled sequence: 30 context days then 30 decision days
    std::vector<double> q;
    q.reserve(kContextDays + kDecisionDays);
    for (double p : window.context_prices) q.push_back(scaler.scale(p));
    q.insert(q.end(), ep.scaled_prices.begin(), ep.scaled_prices.end());

    auto trailing_mean = [&](int end_idx, int len) {
        double sum = 0.0;
        for (int k = end_idx - len + 1; k <= end_idx; ++k) sum += q[k];
        return sum / len;
    };

    ep.features.reserve(kDecisionDays);
    for (int i = 0; i < kDecisionDays; ++i) {
        const int qi = kContextDays + i;
        FeatureRow row;
        row.day = i + 1;
        row.scaled_price = q[qi];
        row.price_change_1d = q[qi] - q[qi - 1];
        row.ma5 = trailing_mean(qi, 5);
        row.ma10 = trailing_mean(qi, 10);
        row.ma20 = trailing_mean(qi, 20);
        row.episode_progress = static_cast<double>(i + 1) / kDecisionDays;
        ep.features.push_back(row);
    }
    return ep;
}

// Full pipeline step: sample windows, skip degenerate contexts with a note,
// number episodes sequentially.
inline std::vector<Episode> build_episodes(const PriceSeries& series, DailyPriceMode mode,
                                           std::optional<int> count, std::uint64_t rng_seed,
                                           std::vector<std::string>* warnings = nullptr) {
    auto windows = sample_windows(series, mode, count, rng_seed);
    std::vector<Episode> episodes;
    episodes.reserve(windows.size());
    long long id = 0;
    for (const auto& w : windows) {
        try {
            episodes.push_back(build_episode(w, id));
            ++id;
        } catch (const DegenerateContext&) {
            if (warnings)
                warnings->push_back("skipped degenerate window at start index " +
                                    std::to_string(w.start_index));
        }
    }
    return episodes;
}

// --- JSONL interchange ------------------------------------------------------

inline nlohmann::json episode_to_json(const Episode& ep) {
    nlohmann::json j;
    j["id"] = ep.id;
    j["start_date"] = ep.start_date().str();
    j["raw_prices"] = ep.window.decision_prices;
    j["scaled_prices"] = ep.scaled_prices;
    auto feats = nlohmann::json::array();
    for (const auto& row : ep.features) {
        auto v = row.values();
        feats.push_back(std::vector<double>(v.begin(), v.end()));
    }
    j["features"] = feats;
    return j;
}

inline Episode episode_from_json(const nlohmann::json& j) {
    Episode ep;
    ep.id = j.at("id").get<long long>();
    ep.window.decision_prices = j.at("raw_prices").get<std::vector<double>>();
    ep.scaled_prices = j.at("scaled_prices").get<std::vector<double>>();
    auto date = Date::parse(j.at("start_date").get<std::string>());
    ep.window.decision_dates.assign(1, date.value_or(Date{}));
    ep.daily_mean_raw = std::accumulate(ep.window.decision_prices.begin(),
                                        ep.window.decision_prices.end(), 0.0) /
                        static_cast<double>(ep.window.decision_prices.size());
    const auto& feats = j.at("features");
    int day = 0;
    for (const auto& f : feats) {
        FeatureRow row;
        row.day = ++day;
        row.scaled_price = f.at(0).get<double>();
        row.price_change_1d = f.at(1).get<double>();
        row.ma5 = f.at(2).get<double>();
        row.ma10 = f.at(3).get<double>();
        row.ma20 = f.at(4).get<double>();
        row.episode_progress = f.at(5).get<double>();
        ep.features.push_back(row);
    }
    return ep;
}

// One record per line; an optional leading header object carries the
// effective run configuration.
inline void write_episodes_jsonl(std::ostream& out, const std::vector<Episode>& episodes,
                                 const nlohmann::json* config_echo = nullptr) {
    if (config_echo) {
        nlohmann::json hdr;
        hdr["schema_version"] = 1;
        hdr["config"] = *config_echo;
        out << hdr.dump() << '\n';
    }
    for (const auto& ep : episodes) out << episode_to_json(ep).dump() << '\n';
}

inline std::vector<Episode> read_episodes_jsonl(std::istream& in) {
    std::vector<Episode> episodes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("schema_version")) continue;  // header record
        episodes.push_back(episode_from_json(j));
    }
    return episodes;
}

}  // namespace gadle
