// Command-line front end for the GADLE investment-agent toolkit.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gadle/gadle.hpp"

namespace {

using namespace gadle;

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> profile;
    std::optional<std::string> data_file;
};

RunConfig effective_config(const GlobalOpts& g) {
    RunConfig cfg;
    apply_profile(cfg, g.profile.value_or("paper"));
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) throw ConfigError("cannot open config file '" + g.config_path + "'");
        cfg = parse_config_file(in, cfg);
    }
    if (g.profile) apply_profile(cfg, *g.profile);  // CLI flag wins over file
    if (g.seed) cfg.master_seed = *g.seed;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    if (g.data_file) cfg.data_file = *g.data_file;
    return cfg;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return std::filesystem::path(cfg.out_dir) / name;
}

int cmd_validate(const RunConfig& cfg) {
    PriceSeries series = load_series(cfg);
    std::cout << "ok: " << series.symbol << ", " << series.size() << " bars, "
              << series.bars.front().date.str() << " .. " << series.bars.back().date.str()
              << "\n";
    return 0;
}

int cmd_synth_data(const RunConfig& cfg, const SynthConfig& synth, const std::string& file) {
    PriceSeries series = generate_series(cfg.symbol, synth);
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write '" + file + "'");
    out << serialize_price_csv(series);
    std::cout << "wrote " << series.size() << " bars to " << file << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg) {
    PriceSeries series = load_series(cfg);
    PriceSeries train = slice_range(series, cfg.train_start, cfg.train_end);
    std::vector<std::string> warnings;
    auto episodes = build_episodes(train, cfg.price_mode, cfg.sample_count,
                                   derive_seed(cfg.master_seed, 1), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    nlohmann::json echo = config_echo(cfg);
    std::ofstream out(out_path(cfg, "episodes.jsonl"));
    write_episodes_jsonl(out, episodes, &echo);
    std::cout << "wrote " << episodes.size() << " episodes\n";
    return 0;
}

std::vector<Episode> load_episode_file(const RunConfig& cfg) {
    std::ifstream in(out_path(cfg, "episodes.jsonl"));
    if (!in) throw ConfigError("missing episodes.jsonl in " + cfg.out_dir + " (run sample)");
    return read_episodes_jsonl(in);
}

int cmd_solve(const RunConfig& cfg) {
    auto episodes = load_episode_file(cfg);
    SolvedEpisodeSet solved =
        solve_all(episodes, cfg.ga, derive_seed(cfg.master_seed, 2), cfg.parallelism);
    nlohmann::json echo = config_echo(cfg);
    std::ofstream out(out_path(cfg, "solved.jsonl"));
    write_solved_jsonl(out, solved, &echo);
    std::cout << "solved " << solved.solved.size() << " episodes in "
              << solved.stats.wall_seconds << " s (" << solved.stats.episodes_per_hour
              << " ep/hr)\n";
    return 0;
}

int cmd_train_policy(const RunConfig& cfg) {
    auto episodes = load_episode_file(cfg);
    std::ifstream sin(out_path(cfg, "solved.jsonl"));
    if (!sin) throw ConfigError("missing solved.jsonl in " + cfg.out_dir + " (run solve)");
    SolvedEpisodeSet solved = read_solved_jsonl(sin);

    Dataset ds = episodes_to_dataset(solved, episodes, derive_seed(cfg.master_seed, 3),
                                     cfg.test_episodes, cfg.validation_fraction);
    Mlp policy = make_policy_network();
    policy.init_glorot(derive_seed(cfg.master_seed, 4));
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.shuffle_seed = derive_seed(cfg.master_seed, 5);
    FitReport report = fit(policy, ds.train, ds.validation, fit_cfg);

    nlohmann::json echo = config_echo(cfg);
    {
        std::ofstream out(out_path(cfg, "model.json"));
        save_model(out, policy, &echo);
    }
    {
        std::ofstream out(out_path(cfg, "training_report.csv"));
        write_training_report_csv(out, report);
    }
    double test_acc =
        ds.test.empty() ? 0.0 : detail::bce_loss_acc(policy, ds.test).second;
    std::cout << "best epoch " << report.best_epoch << ", val loss " << report.best_val_loss
              << ", test accuracy " << test_acc << "\n";
    return 0;
}

Mlp load_model_file(const RunConfig& cfg) {
    std::ifstream in(out_path(cfg, "model.json"));
    if (!in) throw MissingModel("missing model.json in " + cfg.out_dir + " (run train-policy)");
    return load_model(in);
}

int cmd_backtest(const RunConfig& cfg) {
    PriceSeries series = load_series(cfg);
    Mlp policy = load_model_file(cfg);
    PolicyFn fn = [&policy](const Episode& ep) { return predict_actions(policy, ep); };
    BacktestReport report =
        backtest(fn, series, cfg.backtest_start, cfg.backtest_end, cfg.price_mode);
    nlohmann::json j = to_json(report);
    j["config"] = config_echo(cfg);
    write_json(out_path(cfg, "backtest.json").string(), j);
    std::cout << render_backtest_text(report);
    return 0;
}

int cmd_run(const RunConfig& cfg) {
    PriceSeries series = load_series(cfg);
    PipelineResult result = run_gadle(cfg, series, cfg.master_seed);
    write_pipeline_artifacts(cfg, result);
    std::cout << render_backtest_text(result.backtest_report);
    std::cout << "test accuracy " << result.test_accuracy << "; solved "
              << result.solved.stats.episodes << " episodes at "
              << result.solved.stats.episodes_per_hour << " ep/hr\n";
    return 0;
}

int cmd_bench(const RunConfig& cfg, bool a2c) {
    PriceSeries series = load_series(cfg);
    PriceSeries train = slice_range(series, cfg.train_start, cfg.train_end);
    auto episodes = build_episodes(train, cfg.price_mode, cfg.sample_count,
                                   derive_seed(cfg.master_seed, 1));
    nlohmann::json echo = config_echo(cfg);
    TrainingCurves curves;
    Mlp net;
    bool actor_style = a2c;
    if (a2c) {
        A2cResult r = train_a2c(episodes, cfg.a2c, derive_seed(cfg.master_seed, 2));
        net = std::move(r.network);
        curves = std::move(r.curves);
    } else {
        DqnResult r = train_dqn(episodes, cfg.dqn, derive_seed(cfg.master_seed, 2));
        net = std::move(r.q_network);
        curves = std::move(r.curves);
    }
    const std::string tag = a2c ? "a2c" : "dqn";
    {
        std::ofstream out(out_path(cfg, tag + "_curves.csv"));
        write_curves_csv(out, curves);
    }
    {
        std::ofstream out(out_path(cfg, tag + "_agent.json"));
        save_model(out, net, &echo);
    }
    FailureVerdict verdict = detect_failed_run(curves);
    if (verdict.failed) {
        std::cout << "run FAILED: " << verdict.reason << "\n";
        return 0;
    }
    BacktestReport report = backtest(make_agent_policy(net, actor_style), series,
                                     cfg.backtest_start, cfg.backtest_end, cfg.price_mode);
    nlohmann::json j = to_json(report);
    j["config"] = echo;
    write_json(out_path(cfg, tag + "_backtest.json").string(), j);
    std::cout << render_backtest_text(report);
    return 0;
}

int cmd_consistency(const RunConfig& cfg, const std::string& method) {
    PriceSeries series = load_series(cfg);
    MethodRunner runner;
    if (method == "gadle") runner = make_gadle_runner(cfg, series);
    else if (method == "dqn") runner = make_dqn_runner(cfg, series);
    else if (method == "a2c") runner = make_a2c_runner(cfg, series);
    else throw ConfigError("unknown method '" + method + "'");

    ConsistencyReport report = consistency_run(runner, cfg.harness_seeds, cfg.master_seed);
    nlohmann::json j = to_json(report);
    j["method"] = method;
    j["config"] = config_echo(cfg);
    write_json(out_path(cfg, "consistency_" + method + ".json").string(), j);
    std::cout << method << ": mean RoD " << report.mean_rod << "%, std " << report.std_rod
              << "%, mean PCoD " << report.mean_pcod << ", std " << report.std_pcod
              << ", fail " << report.fail_percent << "%\n";
    return 0;
}

int cmd_sensitivity(const RunConfig& cfg, const std::string& method) {
    PriceSeries series = load_series(cfg);
    MethodRunner baseline;
    std::vector<Perturbation> perturbations;
    if (method == "gadle") {
        baseline = make_gadle_runner(cfg, series);
        perturbations = gadle_perturbations(cfg, series);
    } else if (method == "a2c") {
        baseline = make_a2c_runner(cfg, series);
        perturbations = a2c_perturbations(cfg, series);
    } else {
        throw ConfigError("sensitivity supports methods gadle and a2c, got '" + method + "'");
    }
    SensitivityReport report = sensitivity_run(baseline, perturbations, cfg.master_seed);
    nlohmann::json j = to_json(report);
    j["method"] = method;
    j["config"] = config_echo(cfg);
    write_json(out_path(cfg, "sensitivity_" + method + ".json").string(), j);
    std::cout << method << ": avg abs dev agent " << report.avg_abs_dev_agent_avg << ", RoD "
              << report.avg_abs_dev_rod << "%, PCoD " << report.avg_abs_dev_pcod << ", failed "
              << report.failed << "/" << report.rows.size() << "\n";
    return 0;
}

int cmd_daily_run(const RunConfig& cfg, const std::string& state_file, const std::string& date_s,
                  double price, const std::string& init_csv) {
    DailyRunState state;
    std::ifstream sin(state_file);
    if (sin) {
        nlohmann::json j;
        sin >> j;
        state = daily_run_state_from_json(j);
    } else {
        state.symbol = cfg.symbol;
        state.mode = cfg.price_mode;
    }

    if (!init_csv.empty()) {
        std::ifstream in(init_csv);
        if (!in) throw ConfigError("cannot open '" + init_csv + "'");
        PriceSeries series = parse_price_csv(in, cfg.symbol);
        auto prices = daily_prices(series, state.mode);
        const std::size_t n = series.size();
        const std::size_t from = n > kContextDays ? n - kContextDays : 0;
        for (std::size_t i = from; i < n; ++i) {
            DailyEntry e;
            e.date = series.bars[i].date;
            e.price = prices[i];
            state.entries.push_back(e);
        }
        std::ofstream out(state_file);
        out << to_json(state).dump(2) << '\n';
        std::cout << "initialized ledger with " << state.entries.size() << " context days\n";
        return 0;
    }

    auto date = Date::parse(date_s);
    if (!date) throw ConfigError("bad --date '" + date_s + "'");
    Mlp policy = load_model_file(cfg);
    DailyDecision decision = daily_run_step(state, policy, *date, price);
    std::ofstream out(state_file);
    out << to_json(state).dump(2) << '\n';

    std::cout << decision.date.str() << " " << decision.status;
    if (decision.status != "WARMUP")
        std::cout << " (p=" << decision.probability << ", day " << decision.window_day << "/30)";
    std::cout << "\n";
    if (decision.completed_window) {
        std::cout << "window complete: RoD " << decision.completed_window->rod << "%, PCoD "
                  << decision.completed_window->pcod << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GADLE systematic-investment research toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "configuration file (key = value lines)");
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--profile", g.profile, "paper or desk")
        ->check(CLI::IsMember({"paper", "desk"}));
    app.add_option("--data", g.data_file, "price CSV (overrides data.file from the config)");

    auto* validate = app.add_subcommand("validate", "parse and validate a price CSV");
    auto* sample = app.add_subcommand("sample", "sample and scale episodes");
    auto* solve = app.add_subcommand("solve", "solve sampled episodes with the GA");
    auto* train = app.add_subcommand("train-policy", "train the policy network on solved episodes");
    auto* bt = app.add_subcommand("backtest", "back-test the trained policy");
    auto* run = app.add_subcommand("run", "full pipeline: sample, solve, train, back-test");
    auto* dqn = app.add_subcommand("bench-dqn", "train and back-test the DQN benchmark");
    auto* a2c = app.add_subcommand("bench-a2c", "train and back-test the actor-critic benchmark");
    auto* cons = app.add_subcommand("consistency", "multi-seed consistency harness");
    auto* sens = app.add_subcommand("sensitivity", "+-20% hyperparameter sensitivity harness");
    auto* daily = app.add_subcommand("daily-run", "offline emulation of the daily live agent");
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic daily price CSV");

    std::string method = "gadle";
    cons->add_option("--method", method, "gadle, dqn or a2c");
    sens->add_option("--method", method, "gadle or a2c");

    std::string state_file = "daily_state.json", date_s, init_csv;
    double price = 0.0;
    daily->add_option("--state", state_file, "ledger file");
    daily->add_option("--date", date_s, "today's date (YYYY-MM-DD)");
    daily->add_option("--price", price, "today's observed price");
    daily->add_option("--init-csv", init_csv, "seed the ledger context from a price CSV");

    SynthConfig synth_cfg;
    std::string synth_file = "synthetic.csv";
    synth->add_option("--file", synth_file, "output CSV path");
    synth->add_option("--days", synth_cfg.days, "number of trading days");
    synth->add_option("--drift", synth_cfg.annual_drift, "annual log drift");
    synth->add_option("--volatility", synth_cfg.daily_volatility, "daily log-return std");
    synth->add_option("--mean-reversion", synth_cfg.mean_reversion,
                      "pull toward the trailing 20-day mean (0 = pure random walk)");
    synth->add_option("--start-price", synth_cfg.initial_price, "initial price");
    synth->add_option("--synth-seed", synth_cfg.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = effective_config(g);
        if (validate->parsed()) return cmd_validate(cfg);
        if (sample->parsed()) return cmd_sample(cfg);
        if (solve->parsed()) return cmd_solve(cfg);
        if (train->parsed()) return cmd_train_policy(cfg);
        if (bt->parsed()) return cmd_backtest(cfg);
        if (run->parsed()) return cmd_run(cfg);
        if (dqn->parsed()) return cmd_bench(cfg, false);
        if (a2c->parsed()) return cmd_bench(cfg, true);
        if (cons->parsed()) return cmd_consistency(cfg, method);
        if (sens->parsed()) return cmd_sensitivity(cfg, method);
        if (daily->parsed()) return cmd_daily_run(cfg, state_file, date_s, price, init_csv);
        if (synth->parsed()) return cmd_synth_data(cfg, synth_cfg, synth_file);
    } catch (const gadle::Error& e) {
        std::cerr << "error " << e.category() << ": " << e.message() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
