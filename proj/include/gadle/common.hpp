#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gadle {

// Base class for all library errors; subclasses carry the category name
// used by the CLI for machine-parsable exit lines.
class Error : public std::runtime_error {
public:
    Error(std::string category, std::string message)
        : std::runtime_error(category + ": " + message),
          category_(std::move(category)),
          message_(std::move(message)) {}

    const std::string& category() const noexcept { return category_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string category_;
    std::string message_;
};

#define GADLE_DEFINE_ERROR(Name)                              \
    class Name : public Error {                               \
    public:                                                   \
        explicit Name(const std::string& message)             \
            : Error(#Name, message) {}                        \
    }

GADLE_DEFINE_ERROR(MalformedHeader);
GADLE_DEFINE_ERROR(MalformedRow);
GADLE_DEFINE_ERROR(NonMonotonicDates);
GADLE_DEFINE_ERROR(EmptySeries);
GADLE_DEFINE_ERROR(InvalidRange);
GADLE_DEFINE_ERROR(SeriesTooShort);
GADLE_DEFINE_ERROR(CountExceedsMaximum);
GADLE_DEFINE_ERROR(DegenerateContext);
GADLE_DEFINE_ERROR(InstanceTooLarge);
GADLE_DEFINE_ERROR(MissingEpisode);
GADLE_DEFINE_ERROR(WidthMismatch);
GADLE_DEFINE_ERROR(NonFiniteLoss);
GADLE_DEFINE_ERROR(StepAfterTerminal);
GADLE_DEFINE_ERROR(EmptyBuffer);
GADLE_DEFINE_ERROR(RangeTooShort);
GADLE_DEFINE_ERROR(StaleState);
GADLE_DEFINE_ERROR(MissingModel);
GADLE_DEFINE_ERROR(ConfigError);

// splitmix64 finalizer; used to derive independent per-task seeds so that
// results do not depend on execution order or thread count.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task_id) {
    return mix64(mix64(master) ^ mix64(task_id + 0x5851f42d4c957f2dULL));
}

// Thin deterministic RNG wrapper around mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in [0, n)
    std::size_t next_index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    bool next_bool(double p) { return next_double() < p; }

    // uniform in [lo, hi)
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // standard normal via Box-Muller (deterministic, unlike std::normal_distribution
    // whose algorithm is implementation-defined)
    double next_normal() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_double();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace gadle
