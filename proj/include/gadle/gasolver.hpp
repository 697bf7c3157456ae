#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/evaluate.hpp"
#include "json.hpp"

namespace gadle {

enum class CrossoverType { Uniform, OnePoint, TwoPoint };

inline const char* to_string(CrossoverType t) {
    switch (t) {
        case CrossoverType::Uniform: return "uniform";
        case CrossoverType::OnePoint: return "one_point";
        case CrossoverType::TwoPoint: return "two_point";
    }
    return "?";
}

inline std::optional<CrossoverType> parse_crossover_type(const std::string& s) {
    if (s == "uniform") return CrossoverType::Uniform;
    if (s == "one_point") return CrossoverType::OnePoint;
    if (s == "two_point") return CrossoverType::TwoPoint;
    return std::nullopt;
}

struct GaConfig {
    int population_size = 100;
    double crossover_probability = 0.4;
    double mutation_probability = 0.2;
    double elite_ratio = 0.3;
    double parents_portion = 0.3;
    int max_iterations = 200;
    int no_improvement_stop = 30;
    CrossoverType crossover_type = CrossoverType::Uniform;
};

// Episode loss: relative purchase-price edge over the daily average scaled by
// units bought, plus a quadratic penalty for drifting from the target
// purchase count. The no-purchase case contributes only the penalty (loss 1).
inline double episode_loss(std::span<const double> prices, std::span<const std::uint8_t> genes,
                           double target_count) {
    const int n = purchase_days(genes);
    const double count_term = (1.0 - n / target_count) * (1.0 - n / target_count);
    if (n == 0) return count_term;
    double dot = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        sum += prices[i];
        if (genes[i]) dot += prices[i];
    }
    const double daily_avg = sum / static_cast<double>(prices.size());
    const double agent_avg = dot / static_cast<double>(n);
    return ((agent_avg - daily_avg) / daily_avg) * (2.0 * n) + count_term;
}

inline double default_target_count(std::size_t episode_length) {
    return static_cast<double>(episode_length) / 2.0;
}

// Exhaustive oracle for short instances. Ties broken toward the smallest
// gene string read as a binary number (gene 0 is the most significant bit).
inline std::pair<ActionVector, double> brute_force_solve(std::span<const double> prices,
                                                         double target_count) {
    const int len = static_cast<int>(prices.size());
    if (len > 24)
        throw InstanceTooLarge("brute force capped at 24 genes, got " + std::to_string(len));
    ActionVector best, genes(len, 0);
    double best_loss = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << len); ++mask) {
        for (int i = 0; i < len; ++i)
            genes[i] = (mask >> (len - 1 - i)) & 1u;
        double loss = episode_loss(prices, genes, target_count);
        if (best.empty() || loss < best_loss) {
            best = genes;
            best_loss = loss;
        }
    }
    return {best, best_loss};
}

struct GaResult {
    ActionVector genes;
    double loss = 0.0;
    int iterations_used = 0;
};

// Classical GA: elitism, roulette-wheel parent selection over the best
// parents_portion of the population, crossover with probability
// crossover_probability, then per-gene mutation.
inline GaResult solve_actions(std::span<const double> prices, const GaConfig& cfg,
                              std::uint64_t rng_seed, double target_count,
                              std::vector<double>* best_loss_trace = nullptr) {
    const int len = static_cast<int>(prices.size());
    const int pop_size = cfg.population_size;
    const int n_elite = static_cast<int>(std::ceil(cfg.elite_ratio * pop_size));
    const int n_parents =
        std::max(1, static_cast<int>(std::ceil(cfg.parents_portion * pop_size)));
    Rng rng(rng_seed);

    struct Member {
        ActionVector genes;
        double loss;
    };
    std::vector<Member> pop(pop_size);
    for (auto& m : pop) {
        m.genes.resize(len);
        for (auto& g : m.genes) g = static_cast<std::uint8_t>(rng.next_index(2));
        m.loss = episode_loss(prices, m.genes, target_count);
    }

    auto by_loss = [](const Member& a, const Member& b) { return a.loss < b.loss; };
    std::sort(pop.begin(), pop.end(), by_loss);

    double best_loss = pop.front().loss;
    ActionVector best_genes = pop.front().genes;
    int since_improvement = 0;
    int iterations = 0;

    std::vector<double> cumulative(n_parents);
    std::vector<Member> next;
    next.reserve(pop_size);

    while (iterations < cfg.max_iterations && since_improvement < cfg.no_improvement_stop) {
        ++iterations;

        // roulette weights over the parent pool: inverse loss, shifted so the
        // worst member of this generation has weight epsilon
        const double worst = pop.back().loss;
        double acc = 0.0;
        for (int i = 0; i < n_parents; ++i) {
            acc += (worst - pop[i].loss) + 1e-9;
            cumulative[i] = acc;
        }
        auto pick_parent = [&]() -> const Member& {
            double r = rng.next_double() * acc;
            auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
            int idx = static_cast<int>(it - cumulative.begin());
            if (idx >= n_parents) idx = n_parents - 1;
            return pop[idx];
        };

        next.clear();
        for (int i = 0; i < n_elite; ++i) next.push_back(pop[i]);
        while (static_cast<int>(next.size()) < pop_size) {
            Member child;
            if (rng.next_bool(cfg.crossover_probability)) {
                const Member& a = pick_parent();
                const Member& b = pick_parent();
                child.genes.resize(len);
                switch (cfg.crossover_type) {
                    case CrossoverType::Uniform:
                        for (int g = 0; g < len; ++g)
                            child.genes[g] = rng.next_bool(0.5) ? a.genes[g] : b.genes[g];
                        break;
                    case CrossoverType::OnePoint: {
                        std::size_t cut = rng.next_index(len + 1);
                        for (int g = 0; g < len; ++g)
                            child.genes[g] =
                                static_cast<std::size_t>(g) < cut ? a.genes[g] : b.genes[g];
                        break;
                    }
                    case CrossoverType::TwoPoint: {
                        std::size_t c1 = rng.next_index(len + 1);
                        std::size_t c2 = rng.next_index(len + 1);
                        if (c2 < c1) std::swap(c1, c2);
                        for (int g = 0; g < len; ++g) {
                            auto gi = static_cast<std::size_t>(g);
                            child.genes[g] = (gi >= c1 && gi < c2) ? b.genes[g] : a.genes[g];
                        }
                        break;
                    }
                }
            } else {
                child.genes = pick_parent().genes;
            }
            for (auto& g : child.genes)
                if (rng.next_bool(cfg.mutation_probability))
                    g = static_cast<std::uint8_t>(rng.next_index(2));
            child.loss = episode_loss(prices, child.genes, target_count);
            next.push_back(std::move(child));
        }

        pop.swap(next);
        std::sort(pop.begin(), pop.end(), by_loss);
        if (pop.front().loss < best_loss) {
            best_loss = pop.front().loss;
            best_genes = pop.front().genes;
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (best_loss_trace) best_loss_trace->push_back(best_loss);
    }
    return {std::move(best_genes), best_loss, iterations};
}

struct SolvedEpisode {
    long long episode_id = 0;
    ActionVector genes;
    double loss = 0.0;
    double return_over_daily = 0.0;  // RoD, percent
    int purchase_count = 0;          // buy-twice days
    int iterations_used = 0;
};

struct SolveStats {
    double wall_seconds = 0.0;
    std::size_t episodes = 0;
    double episodes_per_hour = 0.0;
};

struct SolvedEpisodeSet {
    std::vector<SolvedEpisode> solved;
    SolveStats stats;
};

inline SolvedEpisode solve_episode(const Episode& ep, const GaConfig& cfg,
                                   std::uint64_t rng_seed) {
    const auto& prices = ep.window.decision_prices;
    GaResult r = solve_actions(prices, cfg, rng_seed, default_target_count(prices.size()));
    SolvedEpisode s;
    s.episode_id = ep.id;
    s.genes = std::move(r.genes);
    s.loss = r.loss;
    s.return_over_daily = rod(prices, s.genes).value;
    s.purchase_count = purchase_days(s.genes);
    s.iterations_used = r.iterations_used;
    return s;
}

// Solves every episode with a per-episode seed derived from the master seed
// and episode id; output is identical for any parallelism setting.
inline SolvedEpisodeSet solve_all(const std::vector<Episode>& episodes, const GaConfig& cfg,
                                  std::uint64_t master_seed, int parallelism = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    SolvedEpisodeSet out;
    out.solved.resize(episodes.size());

    const int workers = std::max(1, parallelism);
    std::atomic<std::size_t> cursor{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= episodes.size()) break;
            const Episode& ep = episodes[i];
            out.solved[i] = solve_episode(
                ep, cfg, derive_seed(master_seed, static_cast<std::uint64_t>(ep.id)));
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    const auto t1 = std::chrono::steady_clock::now();
    out.stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.stats.episodes = episodes.size();
    out.stats.episodes_per_hour =
        out.stats.wall_seconds > 0 ? episodes.size() / (out.stats.wall_seconds / 3600.0) : 0.0;
    return out;
}

// --- JSONL interchange ------------------------------------------------------

inline void write_solved_jsonl(std::ostream& out, const SolvedEpisodeSet& set,
                               const nlohmann::json* config_echo = nullptr) {
    if (config_echo) {
        nlohmann::json hdr;
        hdr["schema_version"] = 1;
        hdr["config"] = *config_echo;
        out << hdr.dump() << '\n';
    }
    for (const auto& s : set.solved) {
        nlohmann::json j;
        j["episode_id"] = s.episode_id;
        j["genes"] = std::vector<int>(s.genes.begin(), s.genes.end());
        j["loss"] = s.loss;
        j["return_over_daily"] = s.return_over_daily;
        j["purchase_count"] = s.purchase_count;
        j["iterations_used"] = s.iterations_used;
        out << j.dump() << '\n';
    }
    nlohmann::json summary;
    summary["summary"] = {{"episodes", set.stats.episodes},
                          {"wall_seconds", set.stats.wall_seconds},
                          {"episodes_per_hour", set.stats.episodes_per_hour}};
    out << summary.dump() << '\n';
}

inline SolvedEpisodeSet read_solved_jsonl(std::istream& in) {
    SolvedEpisodeSet set;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("schema_version")) continue;
        if (j.contains("summary")) {
            const auto& s = j["summary"];
            set.stats.episodes = s.at("episodes").get<std::size_t>();
            set.stats.wall_seconds = s.at("wall_seconds").get<double>();
            set.stats.episodes_per_hour = s.at("episodes_per_hour").get<double>();
            continue;
        }
        SolvedEpisode s;
        s.episode_id = j.at("episode_id").get<long long>();
        auto genes = j.at("genes").get<std::vector<int>>();
        s.genes.assign(genes.begin(), genes.end());
        s.loss = j.at("loss").get<double>();
        s.return_over_daily = j.at("return_over_daily").get<double>();
        s.purchase_count = j.at("purchase_count").get<int>();
        s.iterations_used = j.at("iterations_used").get<int>();
        set.solved.push_back(std::move(s));
    }
    return set;
}

}  // namespace gadle
