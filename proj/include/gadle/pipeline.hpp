#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/evaluate.hpp"
#include "gadle/gasolver.hpp"
#include "gadle/ingest.hpp"
#include "gadle/neural.hpp"
#include "gadle/rl.hpp"
#include "gadle/synthetic.hpp"
#include "json.hpp"

namespace gadle {

struct RunConfig {
    // data
    std::string data_file;
    std::string symbol = "VTI";
    DailyPriceMode price_mode = DailyPriceMode::Ohlc4;

    // date ranges
    Date train_start{2000, 1, 1};
    Date train_end{2019, 12, 31};
    Date backtest_start{2019, 11, 1};  // includes the context run-up
    Date backtest_end{2020, 12, 31};

    // sampling
    std::optional<int> sample_count;  // nullopt = every unique window

    GaConfig ga;
    FitConfig fit;
    int test_episodes = 500;
    double validation_fraction = 0.33;

    DqnConfig dqn;
    A2cConfig a2c;

    int harness_seeds = 40;

    std::uint64_t master_seed = 1;
    int parallelism = 1;
    std::string out_dir = "out";
    std::string profile = "paper";
};

inline void apply_profile(RunConfig& cfg, const std::string& profile) {
    cfg.profile = profile;
    if (profile == "paper") {
        cfg.sample_count.reset();
        cfg.fit.epochs = 200;
        cfg.test_episodes = 500;
        cfg.dqn.episode_budget = 1440;
        cfg.a2c.episode_budget = 288000;
        cfg.harness_seeds = 40;
    } else if (profile == "desk") {
        cfg.sample_count = 300;
        cfg.fit.epochs = 60;
        cfg.fit.early_stopping_patience = 10;
        cfg.test_episodes = 50;
        cfg.dqn.episode_budget = 60;
        cfg.a2c.episode_budget = 2000;
        cfg.harness_seeds = 5;
    } else {
        throw ConfigError("unknown profile '" + profile + "' (expected paper or desk)");
    }
}

namespace detail {

inline int to_int(const std::string& key, const std::string& v) {
    try {
        return std::stoi(v);
    } catch (...) {
        throw ConfigError(key + ": expected integer, got '" + v + "'");
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError(key + ": expected number, got '" + v + "'");
    }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        return std::stoull(v);
    } catch (...) {
        throw ConfigError(key + ": expected unsigned integer, got '" + v + "'");
    }
}

inline Date to_date(const std::string& key, const std::string& v) {
    auto d = Date::parse(v);
    if (!d) throw ConfigError(key + ": expected YYYY-MM-DD, got '" + v + "'");
    return *d;
}

}  // namespace detail

// Applies one sectioned key ("ga.population_size = 100"). Unknown keys are
// errors so typos cannot silently fall back to defaults.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::to_date;
    using detail::to_double;
    using detail::to_int;
    using detail::to_u64;

    if (key == "data.file") { cfg.data_file = value; return; }
    if (key == "data.symbol") { cfg.symbol = value; return; }
    if (key == "data.price_mode") {
        auto m = parse_daily_price_mode(value);
        if (!m) throw ConfigError("data.price_mode: unknown mode '" + value + "'");
        cfg.price_mode = *m;
        return;
    }
    if (key == "range.train_start") { cfg.train_start = to_date(key, value); return; }
    if (key == "range.train_end") { cfg.train_end = to_date(key, value); return; }
    if (key == "range.backtest_start") { cfg.backtest_start = to_date(key, value); return; }
    if (key == "range.backtest_end") { cfg.backtest_end = to_date(key, value); return; }
    if (key == "sample.count") {
        if (value == "all") cfg.sample_count.reset();
        else cfg.sample_count = to_int(key, value);
        return;
    }
    if (key == "ga.population_size") { cfg.ga.population_size = to_int(key, value); return; }
    if (key == "ga.crossover_probability") { cfg.ga.crossover_probability = to_double(key, value); return; }
    if (key == "ga.mutation_probability") { cfg.ga.mutation_probability = to_double(key, value); return; }
    if (key == "ga.elite_ratio") { cfg.ga.elite_ratio = to_double(key, value); return; }
    if (key == "ga.parents_portion") { cfg.ga.parents_portion = to_double(key, value); return; }
    if (key == "ga.max_iterations") { cfg.ga.max_iterations = to_int(key, value); return; }
    if (key == "ga.no_improvement_stop") { cfg.ga.no_improvement_stop = to_int(key, value); return; }
    if (key == "ga.crossover_type") {
        auto t = parse_crossover_type(value);
        if (!t) throw ConfigError("ga.crossover_type: unknown type '" + value + "'");
        cfg.ga.crossover_type = *t;
        return;
    }
    if (key == "fit.epochs") { cfg.fit.epochs = to_int(key, value); return; }
    if (key == "fit.mini_batch_size") { cfg.fit.mini_batch_size = to_int(key, value); return; }
    if (key == "fit.learning_rate") { cfg.fit.learning_rate = to_double(key, value); return; }
    if (key == "fit.early_stopping_patience") { cfg.fit.early_stopping_patience = to_int(key, value); return; }
    if (key == "fit.test_episodes") { cfg.test_episodes = to_int(key, value); return; }
    if (key == "fit.validation_fraction") { cfg.validation_fraction = to_double(key, value); return; }
    if (key == "dqn.episodes") { cfg.dqn.episode_budget = to_int(key, value); return; }
    if (key == "dqn.discount") { cfg.dqn.discount = to_double(key, value); return; }
    if (key == "dqn.batch_size") { cfg.dqn.batch_size = to_int(key, value); return; }
    if (key == "dqn.replay_capacity") { cfg.dqn.replay_capacity = static_cast<std::size_t>(to_int(key, value)); return; }
    if (key == "dqn.unusual_sampling_factor") { cfg.dqn.unusual_sampling_factor = to_double(key, value); return; }
    if (key == "dqn.target_sync_episodes") { cfg.dqn.target_sync_episodes = to_int(key, value); return; }
    if (key == "dqn.learning_rate") { cfg.dqn.learning_rate.initial = to_double(key, value); return; }
    if (key == "dqn.learning_rate_decay_steps") { cfg.dqn.learning_rate.decay_steps = to_int(key, value); return; }
    if (key == "dqn.learning_rate_decay_rate") { cfg.dqn.learning_rate.decay_rate = to_double(key, value); return; }
    if (key == "dqn.epsilon_initial") { cfg.dqn.epsilon.initial = to_double(key, value); return; }
    if (key == "dqn.epsilon_min") { cfg.dqn.epsilon.minimum = to_double(key, value); return; }
    if (key == "dqn.epsilon_decay") { cfg.dqn.epsilon.decay = to_double(key, value); return; }
    if (key == "a2c.episodes") { cfg.a2c.episode_budget = to_int(key, value); return; }
    if (key == "a2c.discount") { cfg.a2c.discount = to_double(key, value); return; }
    if (key == "a2c.learning_rate") { cfg.a2c.learning_rate.initial = to_double(key, value); return; }
    if (key == "a2c.learning_rate_decay_steps") { cfg.a2c.learning_rate.decay_steps = to_int(key, value); return; }
    if (key == "a2c.learning_rate_decay_rate") { cfg.a2c.learning_rate.decay_rate = to_double(key, value); return; }
    if (key == "a2c.epsilon_initial") { cfg.a2c.epsilon.initial = to_double(key, value); return; }
    if (key == "a2c.epsilon_min") { cfg.a2c.epsilon.minimum = to_double(key, value); return; }
    if (key == "a2c.epsilon_decay") { cfg.a2c.epsilon.decay = to_double(key, value); return; }
    if (key == "harness.seeds") { cfg.harness_seeds = to_int(key, value); return; }
    if (key == "run.master_seed") { cfg.master_seed = to_u64(key, value); return; }
    if (key == "run.parallelism") { cfg.parallelism = to_int(key, value); return; }
    if (key == "run.out_dir") { cfg.out_dir = value; return; }
    if (key == "run.profile") { apply_profile(cfg, value); return; }
    throw ConfigError("unknown configuration key '" + key + "'");
}

// Flat key=value file; '#' starts a comment. A run.profile line is applied
// when encountered, so later keys can override the profile's defaults.
inline RunConfig parse_config_file(std::istream& in, RunConfig cfg = {}) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        apply_config_key(cfg, detail::trim(line.substr(0, eq)),
                         detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline nlohmann::json config_echo(const RunConfig& cfg) {
    nlohmann::json j;
    j["data"] = {{"file", cfg.data_file},
                 {"symbol", cfg.symbol},
                 {"price_mode", to_string(cfg.price_mode)}};
    j["range"] = {{"train_start", cfg.train_start.str()},
                  {"train_end", cfg.train_end.str()},
                  {"backtest_start", cfg.backtest_start.str()},
                  {"backtest_end", cfg.backtest_end.str()}};
    j["sample"] = {{"count", cfg.sample_count ? nlohmann::json(*cfg.sample_count)
                                              : nlohmann::json("all")}};
    j["ga"] = {{"population_size", cfg.ga.population_size},
               {"crossover_probability", cfg.ga.crossover_probability},
               {"mutation_probability", cfg.ga.mutation_probability},
               {"elite_ratio", cfg.ga.elite_ratio},
               {"parents_portion", cfg.ga.parents_portion},
               {"max_iterations", cfg.ga.max_iterations},
               {"no_improvement_stop", cfg.ga.no_improvement_stop},
               {"crossover_type", to_string(cfg.ga.crossover_type)}};
    j["fit"] = {{"epochs", cfg.fit.epochs},
                {"mini_batch_size", cfg.fit.mini_batch_size},
                {"learning_rate", cfg.fit.learning_rate},
                {"early_stopping_patience", cfg.fit.early_stopping_patience},
                {"test_episodes", cfg.test_episodes},
                {"validation_fraction", cfg.validation_fraction}};
    j["dqn"] = {{"episodes", cfg.dqn.episode_budget},
                {"discount", cfg.dqn.discount},
                {"batch_size", cfg.dqn.batch_size},
                {"replay_capacity", cfg.dqn.replay_capacity},
                {"unusual_sampling_factor", cfg.dqn.unusual_sampling_factor},
                {"target_sync_episodes", cfg.dqn.target_sync_episodes},
                {"learning_rate", cfg.dqn.learning_rate.initial},
                {"learning_rate_decay_steps", cfg.dqn.learning_rate.decay_steps},
                {"learning_rate_decay_rate", cfg.dqn.learning_rate.decay_rate},
                {"epsilon_initial", cfg.dqn.epsilon.initial},
                {"epsilon_min", cfg.dqn.epsilon.minimum},
                {"epsilon_decay", cfg.dqn.epsilon.decay}};
    j["a2c"] = {{"episodes", cfg.a2c.episode_budget},
                {"discount", cfg.a2c.discount},
                {"learning_rate", cfg.a2c.learning_rate.initial},
                {"learning_rate_decay_steps", cfg.a2c.learning_rate.decay_steps},
                {"learning_rate_decay_rate", cfg.a2c.learning_rate.decay_rate},
                {"epsilon_initial", cfg.a2c.epsilon.initial},
                {"epsilon_min", cfg.a2c.epsilon.minimum},
                {"epsilon_decay", cfg.a2c.epsilon.decay}};
    j["harness"] = {{"seeds", cfg.harness_seeds}};
    j["run"] = {{"master_seed", cfg.master_seed},
                {"parallelism", cfg.parallelism},
                {"out_dir", cfg.out_dir},
                {"profile", cfg.profile}};
    return j;
}

inline PriceSeries load_series(const RunConfig& cfg) {
    std::ifstream in(cfg.data_file);
    if (!in) throw ConfigError("cannot open data file '" + cfg.data_file + "'");
    return parse_price_csv(in, cfg.symbol);
}

// --- full GADLE pipeline ----------------------------------------------------

struct PipelineResult {
    std::vector<Episode> episodes;
    SolvedEpisodeSet solved;
    Mlp policy;
    FitReport fit_report;
    BacktestReport backtest_report;
    double test_accuracy = 0.0;
};

// sample -> solve -> dataset -> fit -> backtest, all seeded from the master
// seed so a rerun reproduces every artifact bit for bit.
inline PipelineResult run_gadle(const RunConfig& cfg, const PriceSeries& series,
                                std::uint64_t seed) {
    PipelineResult r;
    PriceSeries train = slice_range(series, cfg.train_start, cfg.train_end);
    r.episodes = build_episodes(train, cfg.price_mode, cfg.sample_count, derive_seed(seed, 1));
    r.solved = solve_all(r.episodes, cfg.ga, derive_seed(seed, 2), cfg.parallelism);

    Dataset ds = episodes_to_dataset(r.solved, r.episodes, derive_seed(seed, 3),
                                     cfg.test_episodes, cfg.validation_fraction);
    r.policy = make_policy_network();
    r.policy.init_glorot(derive_seed(seed, 4));
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.shuffle_seed = derive_seed(seed, 5);
    r.fit_report = fit(r.policy, ds.train, ds.validation, fit_cfg);
    if (!ds.test.empty()) r.test_accuracy = detail::bce_loss_acc(r.policy, ds.test).second;

    PolicyFn policy_fn = [&r](const Episode& ep) { return predict_actions(r.policy, ep); };
    r.backtest_report =
        backtest(policy_fn, series, cfg.backtest_start, cfg.backtest_end, cfg.price_mode);
    return r;
}

inline void write_pipeline_artifacts(const RunConfig& cfg, const PipelineResult& r) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const nlohmann::json echo = config_echo(cfg);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "episodes.jsonl");
        write_episodes_jsonl(out, r.episodes, &echo);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "solved.jsonl");
        write_solved_jsonl(out, r.solved, &echo);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "model.json");
        save_model(out, r.policy, &echo);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "training_report.csv");
        write_training_report_csv(out, r.fit_report);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "backtest.json");
        nlohmann::json j = to_json(r.backtest_report);
        j["config"] = echo;
        j["test_accuracy"] = r.test_accuracy;
        out << j.dump(2) << '\n';
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "backtest.txt");
        out << render_backtest_text(r.backtest_report);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "throughput.json");
        ThroughputReport tr =
            throughput_report(r.solved.stats.wall_seconds, r.solved.stats.episodes);
        nlohmann::json j = {{"schema_version", 1},
                            {"total_seconds", tr.total_seconds},
                            {"episodes", tr.episodes},
                            {"episodes_per_hour", tr.episodes_per_hour},
                            {"config", echo}};
        out << j.dump(2) << '\n';
    }
}

// --- method runners for the consistency / sensitivity harnesses -------------

inline RunOutcome outcome_from_backtest(const BacktestReport& report) {
    RunOutcome out;
    out.rod = report.overall.rod;
    out.agent_avg = report.overall.agent_avg_price;
    out.pcod = static_cast<double>(report.overall.pcod) /
               static_cast<double>(report.windows.size());
    return out;
}

inline MethodRunner make_gadle_runner(RunConfig cfg, const PriceSeries& series) {
    return [cfg, &series](std::uint64_t seed) {
        PipelineResult r = run_gadle(cfg, series, seed);
        return outcome_from_backtest(r.backtest_report);
    };
}

inline MethodRunner make_dqn_runner(RunConfig cfg, const PriceSeries& series) {
    return [cfg, &series](std::uint64_t seed) -> RunOutcome {
        PriceSeries train = slice_range(series, cfg.train_start, cfg.train_end);
        auto episodes =
            build_episodes(train, cfg.price_mode, cfg.sample_count, derive_seed(seed, 1));
        DqnResult agent = train_dqn(episodes, cfg.dqn, derive_seed(seed, 2));
        FailureVerdict verdict = detect_failed_run(agent.curves);
        RunOutcome out;
        if (verdict.failed) {
            out.failed = true;
            out.fail_reason = verdict.reason;
            return out;
        }
        auto report = backtest(make_agent_policy(agent.q_network, false), series,
                               cfg.backtest_start, cfg.backtest_end, cfg.price_mode);
        return outcome_from_backtest(report);
    };
}

inline MethodRunner make_a2c_runner(RunConfig cfg, const PriceSeries& series) {
    return [cfg, &series](std::uint64_t seed) -> RunOutcome {
        PriceSeries train = slice_range(series, cfg.train_start, cfg.train_end);
        auto episodes =
            build_episodes(train, cfg.price_mode, cfg.sample_count, derive_seed(seed, 1));
        A2cResult agent = train_a2c(episodes, cfg.a2c, derive_seed(seed, 2));
        FailureVerdict verdict = detect_failed_run(agent.curves);
        RunOutcome out;
        if (verdict.failed) {
            out.failed = true;
            out.fail_reason = verdict.reason;
            return out;
        }
        auto report = backtest(make_agent_policy(agent.network, true), series,
                               cfg.backtest_start, cfg.backtest_end, cfg.price_mode);
        return outcome_from_backtest(report);
    };
}

// The ten GA perturbations: every baseline hyperparameter moved by +-20%
// where the domain allows, plus the two alternative crossover types.
inline std::vector<Perturbation> gadle_perturbations(const RunConfig& baseline,
                                                     const PriceSeries& series) {
    std::vector<Perturbation> out;
    auto add = [&](const std::string& name, auto mutate) {
        RunConfig cfg = baseline;
        mutate(cfg);
        out.push_back({name, make_gadle_runner(cfg, series)});
    };
    add("population size dec", [](RunConfig& c) { c.ga.population_size = static_cast<int>(c.ga.population_size * 0.8); });
    add("population size inc", [](RunConfig& c) { c.ga.population_size = static_cast<int>(c.ga.population_size * 1.2); });
    add("crossover probability dec", [](RunConfig& c) { c.ga.crossover_probability *= 0.8; });
    add("crossover probability inc", [](RunConfig& c) { c.ga.crossover_probability *= 1.2; });
    add("mutation probability dec", [](RunConfig& c) { c.ga.mutation_probability *= 0.8; });
    add("mutation probability inc", [](RunConfig& c) { c.ga.mutation_probability *= 1.2; });
    add("elite ratio dec", [](RunConfig& c) { c.ga.elite_ratio *= 0.8; });
    add("parents portion inc", [](RunConfig& c) { c.ga.parents_portion *= 1.2; });
    add("crossover type two point", [](RunConfig& c) { c.ga.crossover_type = CrossoverType::TwoPoint; });
    add("crossover type one point", [](RunConfig& c) { c.ga.crossover_type = CrossoverType::OnePoint; });
    return out;
}

inline std::vector<Perturbation> a2c_perturbations(const RunConfig& baseline,
                                                   const PriceSeries& series) {
    std::vector<Perturbation> out;
    auto add = [&](const std::string& name, auto mutate) {
        RunConfig cfg = baseline;
        mutate(cfg);
        out.push_back({name, make_a2c_runner(cfg, series)});
    };
    add("initial epsilon dec", [](RunConfig& c) { c.a2c.epsilon.initial *= 0.8; });
    add("minimum epsilon dec", [](RunConfig& c) { c.a2c.epsilon.minimum *= 0.8; });
    add("minimum epsilon inc", [](RunConfig& c) { c.a2c.epsilon.minimum *= 1.2; });
    add("epsilon decay rate dec", [](RunConfig& c) { c.a2c.epsilon.decay *= 0.8; });
    add("epsilon decay rate inc", [](RunConfig& c) { c.a2c.epsilon.decay = std::min(1.0, c.a2c.epsilon.decay * 1.2); });
    add("initial lr dec", [](RunConfig& c) { c.a2c.learning_rate.initial *= 0.8; });
    add("initial lr inc", [](RunConfig& c) { c.a2c.learning_rate.initial *= 1.2; });
    add("lr steps dec", [](RunConfig& c) { c.a2c.learning_rate.decay_steps = static_cast<int>(c.a2c.learning_rate.decay_steps * 0.8); });
    add("lr steps inc", [](RunConfig& c) { c.a2c.learning_rate.decay_steps = static_cast<int>(c.a2c.learning_rate.decay_steps * 1.2); });
    add("lr decay rate dec", [](RunConfig& c) { c.a2c.learning_rate.decay_rate *= 0.8; });
    add("lr decay rate inc", [](RunConfig& c) { c.a2c.learning_rate.decay_rate = std::min(1.0, c.a2c.learning_rate.decay_rate * 1.2); });
    return out;
}

// --- daily-run: offline emulation of the live agent -------------------------

struct DailyEntry {
    Date date;
    double price = 0.0;
    bool has_decision = false;
    double probability = 0.0;
    bool buy_twice = false;
};

struct DailyRunState {
    std::string symbol;
    DailyPriceMode mode = DailyPriceMode::Ohlc4;
    std::vector<DailyEntry> entries;
    std::vector<WindowResult> completed_windows;

    int decision_count() const {
        int n = 0;
        for (const auto& e : entries) n += e.has_decision ? 1 : 0;
        return n;
    }
};

inline nlohmann::json to_json(const DailyRunState& s) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["symbol"] = s.symbol;
    j["price_mode"] = to_string(s.mode);
    auto entries = nlohmann::json::array();
    for (const auto& e : s.entries) {
        nlohmann::json o = {{"date", e.date.str()}, {"price", e.price}};
        if (e.has_decision) {
            o["probability"] = e.probability;
            o["decision"] = e.buy_twice ? "BUY_TWICE" : "HOLD";
        }
        entries.push_back(o);
    }
    j["entries"] = entries;
    auto windows = nlohmann::json::array();
    for (const auto& w : s.completed_windows) windows.push_back(to_json(w));
    j["completed_windows"] = windows;
    return j;
}

inline DailyRunState daily_run_state_from_json(const nlohmann::json& j) {
    DailyRunState s;
    s.symbol = j.at("symbol").get<std::string>();
    auto m = parse_daily_price_mode(j.at("price_mode").get<std::string>());
    if (!m) throw ConfigError("daily-run state: bad price mode");
    s.mode = *m;
    for (const auto& o : j.at("entries")) {
        DailyEntry e;
        e.date = Date::parse(o.at("date").get<std::string>()).value();
        e.price = o.at("price").get<double>();
        if (o.contains("decision")) {
            e.has_decision = true;
            e.probability = o.at("probability").get<double>();
            e.buy_twice = o.at("decision").get<std::string>() == "BUY_TWICE";
        }
        s.entries.push_back(e);
    }
    for (const auto& o : j.value("completed_windows", nlohmann::json::array())) {
        WindowResult w;
        w.label = o.at("label").get<std::string>();
        w.agent_avg_price = o.at("agent_avg_price").get<double>();
        w.daily_avg_price = o.at("daily_avg_price").get<double>();
        w.rod = o.at("rod").get<double>();
        w.agent_purchases = o.at("agent_purchases").get<int>();
        w.daily_purchases = o.at("daily_purchases").get<int>();
        w.pcod = o.at("pcod").get<int>();
        w.rod_flagged_zero = o.at("rod_flagged_zero").get<bool>();
        s.completed_windows.push_back(w);
    }
    return s;
}

struct DailyDecision {
    Date date;
    std::string status;  // WARMUP | BUY_TWICE | HOLD
    double probability = 0.0;
    int window_day = 0;  // 1..30 once deciding
    std::optional<WindowResult> completed_window;
};

// One offline "noon run": append today's price, decide once 30 context days
// exist, and roll the window every 30 decisions. The first decision day is
// entry index 30; window w occupies entries [30+30w, 60+30w) with entries
// [30w, 30+30w) as its scaling context.
inline DailyDecision daily_run_step(DailyRunState& state, const Mlp& policy, Date date,
                                    double price) {
    if (!state.entries.empty() && !(state.entries.back().date < date))
        throw StaleState("date " + date.str() + " not after last ledger date " +
                         state.entries.back().date.str());

    DailyEntry entry;
    entry.date = date;
    entry.price = price;

    DailyDecision decision;
    decision.date = date;

    if (state.entries.size() < kContextDays) {
        decision.status = "WARMUP";
        state.entries.push_back(entry);
        return decision;
    }

    const int d = state.decision_count();
    const int w = d / kDecisionDays;
    const int t = d % kDecisionDays + 1;  // today's day within the window

    std::vector<double> context, window_so_far;
    for (int i = kDecisionDays * w; i < kDecisionDays * w + kContextDays; ++i)
        context.push_back(state.entries[i].price);
    for (std::size_t i = kDecisionDays * w + kContextDays; i < state.entries.size(); ++i)
        window_so_far.push_back(state.entries[i].price);
    window_so_far.push_back(price);

    ContextScaler scaler = fit_scaler(context);
    std::vector<double> q;
    for (double p : context) q.push_back(scaler.scale(p));
    for (double p : window_so_far) q.push_back(scaler.scale(p));
    const int qi = static_cast<int>(q.size()) - 1;
    auto trailing_mean = [&](int len) {
        double sum = 0.0;
        for (int k = qi - len + 1; k <= qi; ++k) sum += q[k];
        return sum / len;
    };

    int purchases = 0;
    for (std::size_t i = kDecisionDays * w + kContextDays; i < state.entries.size(); ++i)
        purchases += state.entries[i].buy_twice ? 1 : 0;

    std::array<double, kInputWidth> inputs{};
    inputs[0] = q[qi];
    inputs[1] = q[qi] - q[qi - 1];
    inputs[2] = trailing_mean(5);
    inputs[3] = trailing_mean(10);
    inputs[4] = trailing_mean(20);
    inputs[5] = static_cast<double>(t) / kDecisionDays;
    inputs[6] = t == 1 ? 0.0 : static_cast<double>(purchases) / static_cast<double>(t - 1);

    entry.has_decision = true;
    entry.probability = policy.forward(inputs)[0];
    entry.buy_twice = entry.probability >= 0.5;
    state.entries.push_back(entry);

    decision.status = entry.buy_twice ? "BUY_TWICE" : "HOLD";
    decision.probability = entry.probability;
    decision.window_day = t;

    if (t == kDecisionDays) {
        std::vector<double> prices;
        ActionVector genes;
        for (int i = kDecisionDays * w + kContextDays;
             i < kDecisionDays * w + kContextDays + kDecisionDays; ++i) {
            prices.push_back(state.entries[i].price);
            genes.push_back(state.entries[i].buy_twice ? 1 : 0);
        }
        std::string label = state.entries[kDecisionDays * w + kContextDays].date.str() +
                            " - " + date.str();
        WindowResult wr = make_window_result(prices, genes, label);
        state.completed_windows.push_back(wr);
        decision.completed_window = wr;
    }
    return decision;
}

}  // namespace gadle
