#pragma once

#include <cmath>
#include <cstdint>

#include "gadle/common.hpp"
#include "gadle/ingest.hpp"

namespace gadle {

// Civil-date helpers (Howard Hinnant's algorithms), enough to step a
// synthetic calendar over weekdays.
namespace dateutil {

inline long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline Date civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

// 0 = Monday ... 6 = Sunday
inline int weekday(long days) {
    long w = (days + 3) % 7;
    return static_cast<int>(w < 0 ? w + 7 : w);
}

inline Date next_weekday(Date d) {
    long z = days_from_civil(d.year, d.month, d.day) + 1;
    while (weekday(z) >= 5) ++z;
    return civil_from_days(z);
}

}  // namespace dateutil

struct SynthConfig {
    int days = 5200;
    Date start_date{2000, 1, 3};
    double initial_price = 50.0;
    double annual_drift = 0.06;       // log-drift per ~252 trading days
    double daily_volatility = 0.015;  // std of daily log return
    // Pull of the log price toward its trailing 20-day mean; 0 gives a pure
    // geometric random walk, positive values add short-horizon mean reversion.
    double mean_reversion = 0.0;
    double intraday_range = 0.01;  // high/low spread around open/close
    std::uint64_t seed = 42;
};

// Seeded geometric-random-walk daily bar generator; stands in for real
// market data in tests and demos since the repo ships none.
inline PriceSeries generate_series(const std::string& symbol, const SynthConfig& cfg) {
    Rng rng(cfg.seed);
    PriceSeries series;
    series.symbol = symbol;
    series.bars.reserve(cfg.days);

    const double mu = cfg.annual_drift / 252.0;
    double log_p = std::log(cfg.initial_price);
    double prev_close = cfg.initial_price;
    std::vector<double> trailing;
    Date date = cfg.start_date;

    for (int i = 0; i < cfg.days; ++i) {
        double pull = 0.0;
        if (cfg.mean_reversion > 0.0 && !trailing.empty()) {
            double mean = 0.0;
            for (double v : trailing) mean += v;
            mean /= static_cast<double>(trailing.size());
            pull = cfg.mean_reversion * (mean - log_p);
        }
        log_p += mu + pull + cfg.daily_volatility * rng.next_normal();
        double close = std::exp(log_p);

        trailing.push_back(log_p);
        if (trailing.size() > 20) trailing.erase(trailing.begin());

        PriceBar bar;
        bar.date = date;
        bar.close = close;
        bar.adj_close = close;
        bar.open = prev_close * (1.0 + 0.25 * cfg.daily_volatility * rng.next_normal());
        double hi = std::max(bar.open, close);
        double lo = std::min(bar.open, close);
        bar.high = hi * (1.0 + cfg.intraday_range * rng.next_double());
        bar.low = lo * (1.0 - cfg.intraday_range * rng.next_double());
        bar.volume = 1000000 + static_cast<long long>(rng.next_index(500000));
        series.bars.push_back(bar);

        prev_close = close;
        date = dateutil::next_weekday(date);
    }
    return series;
}

}  // namespace gadle
