#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "gadle/episodes.hpp"
#include "gadle/synthetic.hpp"

using namespace gadle;

namespace {

PriceSeries synth(int days, std::uint64_t seed = 42) {
    SynthConfig cfg;
    cfg.days = days;
    cfg.seed = seed;
    return generate_series("SYN", cfg);
}

RawWindow make_window(std::vector<double> context, std::vector<double> decision) {
    RawWindow w;
    w.context_prices = std::move(context);
    w.decision_prices = std::move(decision);
    Date d{2010, 1, 1};
    for (int i = 0; i < kDecisionDays; ++i) {
        w.decision_dates.push_back(d);
        d = dateutil::next_weekday(d);
    }
    return w;
}

}  // namespace

TEST_CASE("sample_windows boundary and error cases") {
    CHECK(sample_windows(synth(60), DailyPriceMode::Ohlc4, std::nullopt, 1).size() == 1);
    CHECK_THROWS_AS(sample_windows(synth(59), DailyPriceMode::Ohlc4, std::nullopt, 1),
                    SeriesTooShort);
    CHECK_THROWS_AS(sample_windows(synth(100), DailyPriceMode::Ohlc4, 42, 1),
                    CountExceedsMaximum);
}

TEST_CASE("a 4304-bar history yields 4245 unique windows") {
    CHECK(sample_windows(synth(4304), DailyPriceMode::Ohlc4, std::nullopt, 1).size() == 4245);
}

TEST_CASE("count equal to the maximum is a permutation of all starts") {
    PriceSeries s = synth(160);
    const int max_starts = 160 - 59;
    auto windows = sample_windows(s, DailyPriceMode::Ohlc4, max_starts, 99);
    REQUIRE(windows.size() == static_cast<std::size_t>(max_starts));
    std::set<int> starts;
    for (const auto& w : windows) starts.insert(w.start_index);
    CHECK(starts.size() == windows.size());
    CHECK(*starts.begin() == 0);
    CHECK(*starts.rbegin() == max_starts - 1);
}

TEST_CASE("sample_windows is deterministic under a fixed seed") {
    PriceSeries s = synth(300);
    auto a = sample_windows(s, DailyPriceMode::Ohlc4, 40, 7);
    auto b = sample_windows(s, DailyPriceMode::Ohlc4, 40, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].start_index == b[i].start_index);
}

TEST_CASE("fit_scaler takes the context min and max") {
    std::vector<double> context(kContextDays, 100.0);
    context[5] = 120.0;
    ContextScaler sc = fit_scaler(context);
    CHECK(sc.p_min == 100.0);
    CHECK(sc.p_max == 120.0);
    CHECK(sc.scale(110.0) == Catch::Approx(0.5));
}

TEST_CASE("constant context is degenerate") {
    std::vector<double> context(kContextDays, 100.0);
    CHECK_THROWS_AS(fit_scaler(context), DegenerateContext);
}

TEST_CASE("build_episode basics") {
    std::vector<double> context, decision;
    for (int i = 0; i < kContextDays; ++i) context.push_back(100.0 + i);
    for (int i = 0; i < kDecisionDays; ++i) decision.push_back(130.0 + i);
    Episode ep = build_episode(make_window(context, decision), 3);

    CHECK(ep.id == 3);
    CHECK(ep.daily_mean_raw == Catch::Approx(130.0 + 14.5).epsilon(1e-12));
    // scale(x) = (x - 100) / 29
    CHECK(ep.scaled_prices[0] == Catch::Approx(30.0 / 29.0).epsilon(1e-12));
    CHECK(ep.scaled_prices[29] == Catch::Approx(59.0 / 29.0).epsilon(1e-12));

    const FeatureRow& day1 = ep.features[0];
    CHECK(day1.day == 1);
    CHECK(day1.scaled_price == Catch::Approx(30.0 / 29.0));
    CHECK(day1.price_change_1d == Catch::Approx(1.0 / 29.0));
    CHECK(day1.ma5 == Catch::Approx(28.0 / 29.0));
    CHECK(day1.ma10 == Catch::Approx(25.5 / 29.0));
    CHECK(day1.ma20 == Catch::Approx(20.5 / 29.0));
    CHECK(day1.episode_progress == Catch::Approx(1.0 / 30.0));
    CHECK(ep.features[29].episode_progress == Catch::Approx(1.0));
}

TEST_CASE("decision prices at the context mean scale to the same point") {
    std::vector<double> context;
    for (int i = 0; i < kContextDays; ++i) context.push_back(i % 2 == 0 ? 90.0 : 110.0);
    std::vector<double> decision(kDecisionDays, 100.0);
    Episode ep = build_episode(make_window(context, decision), 0);
    for (double sp : ep.scaled_prices) CHECK(sp == Catch::Approx(0.5));
}

TEST_CASE("scaling preserves ordering of decision prices") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> context, decision;
        for (int i = 0; i < kContextDays; ++i) context.push_back(90.0 + 20.0 * rng.next_double());
        for (int i = 0; i < kDecisionDays; ++i)
            decision.push_back(85.0 + 30.0 * rng.next_double());
        Episode ep = build_episode(make_window(context, decision), trial);

        std::vector<int> order_raw(kDecisionDays), order_scaled(kDecisionDays);
        std::iota(order_raw.begin(), order_raw.end(), 0);
        order_scaled = order_raw;
        std::sort(order_raw.begin(), order_raw.end(), [&](int a, int b) {
            return ep.window.decision_prices[a] < ep.window.decision_prices[b];
        });
        std::sort(order_scaled.begin(), order_scaled.end(),
                  [&](int a, int b) { return ep.scaled_prices[a] < ep.scaled_prices[b]; });
        CHECK(order_raw == order_scaled);
    }
}

TEST_CASE("contextual scaling is invariant under affine price transforms") {
    Rng rng(11);
    std::vector<double> context, decision;
    for (int i = 0; i < kContextDays; ++i) context.push_back(100.0 + 10.0 * rng.next_double());
    for (int i = 0; i < kDecisionDays; ++i) decision.push_back(95.0 + 20.0 * rng.next_double());

    auto affine = [](const std::vector<double>& xs, double a, double b) {
        std::vector<double> out;
        for (double x : xs) out.push_back(a * x + b);
        return out;
    };
    Episode base = build_episode(make_window(context, decision), 0);
    Episode moved = build_episode(
        make_window(affine(context, 3.0, 40.0), affine(decision, 3.0, 40.0)), 0);
    for (int i = 0; i < kDecisionDays; ++i)
        CHECK(moved.scaled_prices[i] == Catch::Approx(base.scaled_prices[i]).epsilon(1e-12));
}

TEST_CASE("build_episode is bit-deterministic") {
    PriceSeries s = synth(120);
    auto windows = sample_windows(s, DailyPriceMode::Ohlc4, std::nullopt, 1);
    Episode a = build_episode(windows[7], 7);
    Episode b = build_episode(windows[7], 7);
    CHECK(a.scaled_prices == b.scaled_prices);
    CHECK(a.daily_mean_raw == b.daily_mean_raw);
    for (int i = 0; i < kDecisionDays; ++i) CHECK(a.features[i].values() == b.features[i].values());
}

TEST_CASE("episode JSONL round-trips") {
    PriceSeries s = synth(200);
    auto episodes = build_episodes(s, DailyPriceMode::Ohlc4, 5, 3);
    std::ostringstream out;
    nlohmann::json echo = {{"note", "test"}};
    write_episodes_jsonl(out, episodes, &echo);
    std::istringstream in(out.str());
    auto back = read_episodes_jsonl(in);
    REQUIRE(back.size() == episodes.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == episodes[i].id);
        CHECK(back[i].window.decision_prices == episodes[i].window.decision_prices);
        CHECK(back[i].scaled_prices == episodes[i].scaled_prices);
        CHECK(back[i].start_date() == episodes[i].start_date());
        for (int d = 0; d < kDecisionDays; ++d)
            CHECK(back[i].features[d].values() == episodes[i].features[d].values());
    }
}
