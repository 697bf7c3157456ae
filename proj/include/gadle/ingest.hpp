#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gadle/common.hpp"

namespace gadle {

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static std::optional<Date> parse(const std::string& s) {
        Date d;
        char dash1 = 0, dash2 = 0;
        std::istringstream in(s);
        in >> d.year >> dash1 >> d.month >> dash2 >> d.day;
        if (!in || dash1 != '-' || dash2 != '-') return std::nullopt;
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return std::nullopt;
        return d;
    }
};

struct PriceBar {
    Date date;
    double open = 0, high = 0, low = 0, close = 0, adj_close = 0;
    long long volume = 0;

    bool valid() const {
        auto pos_finite = [](double x) { return std::isfinite(x) && x > 0.0; };
        return pos_finite(open) && pos_finite(high) && pos_finite(low) &&
               pos_finite(close) && pos_finite(adj_close) && volume >= 0 &&
               low <= open && open <= high && low <= close && close <= high;
    }
};

struct PriceSeries {
    std::string symbol;
    std::vector<PriceBar> bars;

    std::size_t size() const { return bars.size(); }
};

enum class DailyPriceMode { AdjClose, Ohlc4, Hl2 };

inline const char* to_string(DailyPriceMode mode) {
    switch (mode) {
        case DailyPriceMode::AdjClose: return "adj_close";
        case DailyPriceMode::Ohlc4: return "ohlc4";
        case DailyPriceMode::Hl2: return "hl2";
    }
    return "?";
}

inline std::optional<DailyPriceMode> parse_daily_price_mode(const std::string& s) {
    if (s == "adj_close") return DailyPriceMode::AdjClose;
    if (s == "ohlc4") return DailyPriceMode::Ohlc4;
    if (s == "hl2") return DailyPriceMode::Hl2;
    return std::nullopt;
}

inline double daily_price(const PriceBar& bar, DailyPriceMode mode) {
    switch (mode) {
        case DailyPriceMode::AdjClose: return bar.adj_close;
        case DailyPriceMode::Ohlc4: return (bar.open + bar.high + bar.low + bar.close) / 4.0;
        case DailyPriceMode::Hl2: return (bar.high + bar.low) / 2.0;
    }
    return 0.0;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_ll(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

}  // namespace detail

// Parses a Yahoo-Finance-style daily history export. Any malformed row fails
// the whole file; silent row drops would shift episode windows downstream.
inline PriceSeries parse_price_csv(std::istream& in, const std::string& symbol) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedHeader("empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = detail::split_csv_line(line);
    auto find_col = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::lower(header[i]) == name) return static_cast<int>(i);
        return -1;
    };
    const int c_date = find_col("date");
    const int c_open = find_col("open");
    const int c_high = find_col("high");
    const int c_low = find_col("low");
    const int c_close = find_col("close");
    const int c_adj = find_col("adj close");
    const int c_vol = find_col("volume");
    if (c_date < 0 || c_open < 0 || c_high < 0 || c_low < 0 || c_close < 0 ||
        c_adj < 0 || c_vol < 0)
        throw MalformedHeader("expected Date,Open,High,Low,Close,Adj Close,Volume; got '" +
                              line + "'");

    PriceSeries series;
    series.symbol = symbol;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        auto fail = [&](const std::string& why) {
            throw MalformedRow("line " + std::to_string(line_no) + ": " + why);
        };
        std::size_t needed = static_cast<std::size_t>(
            std::max({c_date, c_open, c_high, c_low, c_close, c_adj, c_vol})) + 1;
        if (fields.size() < needed) fail("too few columns");

        PriceBar bar;
        auto date = Date::parse(fields[c_date]);
        if (!date) fail("bad date '" + fields[c_date] + "'");
        bar.date = *date;
        auto open = detail::parse_double(fields[c_open]);
        auto high = detail::parse_double(fields[c_high]);
        auto low = detail::parse_double(fields[c_low]);
        auto close = detail::parse_double(fields[c_close]);
        auto adj = detail::parse_double(fields[c_adj]);
        auto vol = detail::parse_ll(fields[c_vol]);
        if (!open || !high || !low || !close || !adj || !vol)
            fail("missing or non-numeric field");
        bar.open = *open;
        bar.high = *high;
        bar.low = *low;
        bar.close = *close;
        bar.adj_close = *adj;
        bar.volume = *vol;
        if (!bar.valid()) fail("price invariant violated (positive, low<=open/close<=high)");
        series.bars.push_back(bar);
    }

    std::stable_sort(series.bars.begin(), series.bars.end(),
                     [](const PriceBar& a, const PriceBar& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.bars.size(); ++i)
        if (!(series.bars[i - 1].date < series.bars[i].date))
            throw NonMonotonicDates("duplicate date " + series.bars[i].date.str());
    if (series.bars.empty()) throw EmptySeries("no data rows for " + symbol);
    return series;
}

inline PriceSeries parse_price_csv(const std::string& text, const std::string& symbol) {
    std::istringstream in(text);
    return parse_price_csv(in, symbol);
}

inline std::string serialize_price_csv(const PriceSeries& series) {
    std::ostringstream out;
    out << "Date,Open,High,Low,Close,Adj Close,Volume\n";
    out.precision(17);
    for (const auto& b : series.bars) {
        out << b.date.str() << ',' << b.open << ',' << b.high << ',' << b.low << ','
            << b.close << ',' << b.adj_close << ',' << b.volume << '\n';
    }
    return out.str();
}

inline PriceSeries slice_range(const PriceSeries& series, Date start, Date end) {
    if (end < start)
        throw InvalidRange("start " + start.str() + " after end " + end.str());
    PriceSeries out;
    out.symbol = series.symbol;
    for (const auto& b : series.bars)
        if (start <= b.date && b.date <= end) out.bars.push_back(b);
    return out;
}

inline std::vector<double> daily_prices(const PriceSeries& series, DailyPriceMode mode) {
    std::vector<double> out;
    out.reserve(series.bars.size());
    for (const auto& b : series.bars) out.push_back(daily_price(b, mode));
    return out;
}

}  // namespace gadle
