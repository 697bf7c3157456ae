#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "gadle/rl.hpp"
#include "gadle/synthetic.hpp"

using namespace gadle;

namespace {

std::vector<Episode> synth_episodes(int days, int count, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.days = days;
    cfg.seed = seed;
    PriceSeries s = generate_series("SYN", cfg);
    return build_episodes(s, DailyPriceMode::Ohlc4, count, seed + 1);
}

}  // namespace

TEST_CASE("environment reset and state layout") {
    auto eps = synth_episodes(120, 1, 3);
    REQUIRE(!eps.empty());
    InvestmentEnv env(eps[0]);
    EnvState s = env.reset();
    CHECK(s.day == 1);
    CHECK(s.buy_ratio() == 0.0);
    auto feats = eps[0].features[0].values();
    for (int f = 0; f < kFeatureCount; ++f) CHECK(s.inputs[f] == feats[f]);
}

TEST_CASE("intermediate rewards are zero and the buy ratio tracks actions") {
    auto eps = synth_episodes(120, 1, 4);
    InvestmentEnv env(eps[0]);
    env.reset();
    auto r1 = env.step(true);
    CHECK(r1.reward == 0.0);
    CHECK(!r1.done);
    CHECK(r1.next.day == 2);
    CHECK(r1.next.buy_ratio() == 1.0);
    auto r2 = env.step(false);
    CHECK(r2.next.buy_ratio() == 0.5);
    auto r3 = env.step(false);
    CHECK(r3.next.buy_ratio() == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("terminal reward is minus the episode loss") {
    auto eps = synth_episodes(200, 3, 9);
    Rng rng(42);
    for (const auto& ep : eps) {
        InvestmentEnv env(ep);
        env.reset();
        double reward = 0.0;
        ActionVector genes;
        for (int t = 0; t < kDecisionDays; ++t) {
            bool buy = rng.next_bool(0.5);
            genes.push_back(buy ? 1 : 0);
            reward += env.step(buy).reward;
        }
        double loss = episode_loss(ep.window.decision_prices, genes,
                                   default_target_count(kDecisionDays));
        CHECK(reward == Catch::Approx(-loss).epsilon(1e-12));
    }
}

TEST_CASE("never buying and always buying both score reward -1") {
    auto eps = synth_episodes(120, 1, 5);
    for (bool buy : {false, true}) {
        InvestmentEnv env(eps[0]);
        env.reset();
        double reward = 0.0;
        for (int t = 0; t < kDecisionDays; ++t) reward += env.step(buy).reward;
        CHECK(reward == Catch::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("stepping past the terminal state throws") {
    auto eps = synth_episodes(120, 1, 6);
    InvestmentEnv env(eps[0]);
    env.reset();
    for (int t = 0; t < kDecisionDays; ++t) env.step(false);
    CHECK_THROWS_AS(env.step(false), StepAfterTerminal);
}

TEST_CASE("replay buffer wraps at capacity") {
    ReplayBuffer buf(5, 1.0);
    for (int i = 0; i < 12; ++i) {
        Transition t;
        t.reward = i;
        buf.push(t);
    }
    CHECK(buf.size() == 5);
}

TEST_CASE("replay sampling from an empty buffer throws") {
    ReplayBuffer buf(10, 0.9);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample_one(rng), EmptyBuffer);
    CHECK_THROWS_AS(buf.sample(4, rng), EmptyBuffer);
}

TEST_CASE("replay sampling weight extremes") {
    // u = 0: zero-reward transitions never drawn while nonzero ones exist
    ReplayBuffer never_zero(100, 0.0);
    for (int i = 0; i < 50; ++i) {
        Transition t;
        t.reward = (i % 10 == 0) ? -0.5 : 0.0;
        never_zero.push(t);
    }
    Rng rng(7);
    for (int k = 0; k < 200; ++k) CHECK(never_zero.sample_one(rng).reward != 0.0);
}

TEST_CASE("replay sampling matches the closed-form category probability") {
    // 1 nonzero, 9 zero, u = 0.9: P(nonzero) = 1 / (1 + 0.9 * 9)
    ReplayBuffer buf(100, 0.9);
    Transition t;
    t.reward = -1.0;
    buf.push(t);
    for (int i = 0; i < 9; ++i) {
        Transition z;
        z.reward = 0.0;
        buf.push(z);
    }
    Rng rng(11);
    const int draws = 20000;
    int nonzero = 0;
    for (int k = 0; k < draws; ++k)
        if (buf.sample_one(rng).reward != 0.0) ++nonzero;
    const double p = 1.0 / (1.0 + 0.9 * 9.0);
    const double sigma = std::sqrt(p * (1.0 - p) * draws);
    CHECK(std::abs(nonzero - p * draws) < 3.0 * sigma);
}

TEST_CASE("learning rate schedule with and without staircase") {
    LearningRateSchedule lr;
    CHECK(lr.at(0) == 0.001);
    CHECK(lr.at(999) == 0.001);
    CHECK(lr.at(1000) == Catch::Approx(0.001 * 0.99));
    CHECK(lr.at(2500) == Catch::Approx(0.001 * 0.99 * 0.99));
    LearningRateSchedule smooth = lr;
    smooth.staircase = false;
    CHECK(smooth.at(500) == Catch::Approx(0.001 * std::pow(0.99, 0.5)));
}

TEST_CASE("epsilon schedule decays to its floor") {
    EpsilonSchedule eps;
    CHECK(eps.at(0) == 1.0);
    CHECK(eps.at(1) == Catch::Approx(0.999));
    CHECK(eps.at(10) == Catch::Approx(std::pow(0.999, 10)));
    CHECK(eps.at(100000) == 0.01);
}

TEST_CASE("DQN training is deterministic and fills the curves") {
    auto eps = synth_episodes(200, 4, 12);
    DqnConfig cfg;
    cfg.episode_budget = 20;
    DqnResult a = train_dqn(eps, cfg, 77);
    DqnResult b = train_dqn(eps, cfg, 77);
    CHECK(a.curves.running_reward.size() == 20);
    CHECK(a.curves.buy_ratio.size() == 20);
    CHECK(a.q_network.get_params() == b.q_network.get_params());
    CHECK(a.curves.running_reward == b.curves.running_reward);
}

TEST_CASE("fully random exploration buys about half the time") {
    auto eps = synth_episodes(200, 4, 13);
    DqnConfig cfg;
    cfg.episode_budget = 60;
    cfg.epsilon.initial = 1.0;
    cfg.epsilon.minimum = 1.0;  // pin epsilon at 1
    DqnResult r = train_dqn(eps, cfg, 5);
    double mean = 0.0;
    for (double x : r.curves.buy_ratio) mean += x;
    mean /= r.curves.buy_ratio.size();
    // 1800 Bernoulli(0.5) draws: 3 sigma is about 0.035
    CHECK(std::abs(mean - 0.5) < 0.05);
}

TEST_CASE("A2C training is deterministic and fills the curves") {
    auto eps = synth_episodes(200, 4, 14);
    A2cConfig cfg;
    cfg.episode_budget = 30;
    A2cResult a = train_a2c(eps, cfg, 21);
    A2cResult b = train_a2c(eps, cfg, 21);
    CHECK(a.curves.running_reward.size() == 30);
    CHECK(a.network.get_params() == b.network.get_params());
    CHECK(a.curves.running_reward == b.curves.running_reward);
}

TEST_CASE("running reward follows the smoothing recursion") {
    auto eps = synth_episodes(200, 2, 15);
    A2cConfig cfg;
    cfg.episode_budget = 10;
    A2cResult r = train_a2c(eps, cfg, 33);
    // each entry must lie between 0.95 * previous + 0.05 * min_reward and
    // the same with the best attainable reward; bound loosely via |r_ep| <= 62
    double prev = 0.0;
    for (double cur : r.curves.running_reward) {
        CHECK(std::abs(cur - 0.95 * prev) <= 0.05 * 62.0);
        prev = cur;
    }
}

TEST_CASE("greedy rollout has one action per day and matches the policy wrapper") {
    auto eps = synth_episodes(150, 2, 16);
    Mlp net = make_q_network();
    net.init_glorot(4);
    ActionVector direct = greedy_rollout(net, eps[0], false);
    CHECK(direct.size() == kDecisionDays);
    PolicyFn fn = make_agent_policy(net, false);
    CHECK(fn(eps[0]) == direct);
}

TEST_CASE("failed-run detection") {
    TrainingCurves healthy;
    for (int i = 0; i < 100; ++i) {
        healthy.buy_ratio.push_back(0.5);
        healthy.running_reward.push_back(0.01 * i);
    }
    CHECK(!detect_failed_run(healthy).failed);

    TrainingCurves collapsed_zero = healthy;
    for (int i = 75; i < 100; ++i) collapsed_zero.buy_ratio[i] = 0.0;
    CHECK(detect_failed_run(collapsed_zero).failed);

    TrainingCurves collapsed_one = healthy;
    for (int i = 75; i < 100; ++i) collapsed_one.buy_ratio[i] = 1.0;
    CHECK(detect_failed_run(collapsed_one).failed);

    TrainingCurves declining = healthy;
    for (int i = 50; i < 100; ++i) declining.running_reward[i] = 1.0 - 0.01 * i;
    auto v = detect_failed_run(declining);
    CHECK(v.failed);
    CHECK(!v.reason.empty());

    TrainingCurves empty;
    CHECK(detect_failed_run(empty).failed);
}

TEST_CASE("curves CSV has a header and one row per episode") {
    TrainingCurves c;
    c.running_reward = {0.1, 0.2};
    c.buy_ratio = {0.5, 0.6};
    std::ostringstream out;
    write_curves_csv(out, c);
    CHECK(out.str().rfind("episode,running_reward,buy_ratio\n", 0) == 0);
    int lines = 0;
    for (char ch : out.str())
        if (ch == '\n') ++lines;
    CHECK(lines == 3);
}
