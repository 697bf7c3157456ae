#include <catch2/catch_amalgamated.hpp>
#include <set>
#include <sstream>

#include "gadle/neural.hpp"
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

std::vector<TrainingRow> toy_rows(int n, std::uint64_t seed) {
    // separable: label depends on the sign of the first input
    Rng rng(seed);
    std::vector<TrainingRow> rows;
    for (int i = 0; i < n; ++i) {
        TrainingRow r;
        for (auto& x : r.inputs) x = rng.next_range(-1.0, 1.0);
        r.label = r.inputs[0] > 0.0 ? 1.0 : 0.0;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("policy network shape") {
    Mlp net = make_policy_network();
    CHECK(net.input_width() == 7);
    CHECK(net.output_width() == 1);
    CHECK(net.n_layers() == 6);
    CHECK(net.layer_sizes() == std::vector<int>{7, 64, 64, 32, 32, 16, 1});
}

TEST_CASE("zero-initialized policy outputs exactly 0.5") {
    Mlp net = make_policy_network();
    std::array<double, 7> input{0.3, -0.1, 0.7, 0.2, 0.4, 0.5, 0.1};
    CHECK(net.forward(input)[0] == 0.5);
}

TEST_CASE("forward pass matches a hand computation") {
    // 1 -> 1 -> 1 net: relu(2*1 + 0.5) = 2.5, sigmoid(-1*2.5 + 0.25)
    Mlp net({1, 1, 1}, {Activation::Relu, Activation::Sigmoid});
    net.set_params(std::array<double, 4>{2.0, 0.5, -1.0, 0.25});
    std::array<double, 1> input{1.0};
    CHECK(net.forward(input)[0] == Catch::Approx(0.09534946489910949).epsilon(1e-15));
}

TEST_CASE("forward rejects wrong input widths") {
    Mlp net = make_policy_network();
    std::vector<double> bad(6, 0.0);
    CHECK_THROWS_AS(net.forward(bad), WidthMismatch);
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Mlp net({kInputWidth, 5, 4, 1},
                {Activation::Relu, Activation::Sigmoid, Activation::Sigmoid});
        net.init_glorot(seed);
        auto rows = toy_rows(8, seed + 100);
        CHECK(gradient_check(net, rows) < 1e-4);
    }
}

TEST_CASE("gradient check detects a corrupted gradient") {
    // negative control: compare finite differences against a deliberately
    // wrong analytic vector to confirm the tolerance has teeth
    Mlp net({kInputWidth, 3, 1}, {Activation::Sigmoid, Activation::Sigmoid});
    net.init_glorot(9);
    auto rows = toy_rows(4, 55);

    Mlp::Trace trace;
    Mlp::Gradients grads;
    grads.init_like(net);
    for (const auto& row : rows) {
        double p = std::clamp(net.forward(row.inputs, &trace)[0], 1e-12, 1.0 - 1e-12);
        std::array<double, 1> g{(p - row.label) / (p * (1.0 - p))};
        net.backward(trace, g, grads);
    }
    grads.scale(1.0 / rows.size());
    grads.weights[0][0] += 0.5;  // corrupt one entry

    auto loss_at = [&]() {
        double loss = 0.0;
        for (const auto& row : rows) {
            double p = std::clamp(net.forward(row.inputs)[0], 1e-12, 1.0 - 1e-12);
            loss += -(row.label * std::log(p) + (1.0 - row.label) * std::log(1.0 - p));
        }
        return loss / rows.size();
    };
    std::vector<double> params = net.get_params();
    const double eps = 1e-5;
    params[0] += eps;
    net.set_params(params);
    double up = loss_at();
    params[0] -= 2 * eps;
    net.set_params(params);
    double down = loss_at();
    double numeric = (up - down) / (2 * eps);
    double rel = std::abs(numeric - grads.weights[0][0]) /
                 std::max({std::abs(numeric), std::abs(grads.weights[0][0]), 1e-8});
    CHECK(rel > 1e-2);
}

TEST_CASE("teacher-forced rows track the gene history") {
    auto episodes = synth_episodes(120, 2, 5);
    REQUIRE(!episodes.empty());
    ActionVector genes(kDecisionDays, 0);
    genes[0] = genes[1] = genes[2] = 1;
    auto rows = make_training_rows(episodes[0], genes);
    REQUIRE(rows.size() == kDecisionDays);
    CHECK(rows[0].inputs[kFeatureCount] == 0.0);
    CHECK(rows[1].inputs[kFeatureCount] == 1.0);      // 1 purchase over 1 day
    CHECK(rows[3].inputs[kFeatureCount] == 1.0);      // 3 over 3
    CHECK(rows[4].inputs[kFeatureCount] == 0.75);     // 3 over 4
    CHECK(rows[29].inputs[kFeatureCount] == Catch::Approx(3.0 / 29.0));
    CHECK(rows[0].label == 1.0);
    CHECK(rows[5].label == 0.0);
    for (const auto& r : rows) {
        auto feats = episodes[0].features[&r - rows.data()].values();
        for (int f = 0; f < kFeatureCount; ++f) CHECK(r.inputs[f] == feats[f]);
    }
}

TEST_CASE("dataset split partitions episodes and preserves row counts") {
    auto episodes = synth_episodes(400, 20, 2);
    GaConfig cfg;
    cfg.population_size = 20;
    cfg.max_iterations = 10;
    auto solved = solve_all(episodes, cfg, 3, 1);

    Dataset ds = episodes_to_dataset(solved, episodes, 11, 6, 0.33);
    CHECK(ds.split.test_ids.size() == 6);
    const int rest = 20 - 6;
    const int n_val = static_cast<int>(std::round(0.33 * rest));
    CHECK(ds.split.validation_ids.size() == static_cast<std::size_t>(n_val));
    CHECK(ds.split.train_ids.size() == static_cast<std::size_t>(rest - n_val));

    std::set<long long> all;
    for (auto id : ds.split.test_ids) all.insert(id);
    for (auto id : ds.split.validation_ids) all.insert(id);
    for (auto id : ds.split.train_ids) all.insert(id);
    CHECK(all.size() == 20);

    CHECK(ds.train.size() == ds.split.train_ids.size() * kDecisionDays);
    CHECK(ds.validation.size() == ds.split.validation_ids.size() * kDecisionDays);
    CHECK(ds.test.size() == ds.split.test_ids.size() * kDecisionDays);
}

TEST_CASE("dataset split rejects solved records without a matching episode") {
    auto episodes = synth_episodes(150, 3, 8);
    GaConfig cfg;
    cfg.population_size = 10;
    cfg.max_iterations = 5;
    auto solved = solve_all(episodes, cfg, 3, 1);
    solved.solved[0].episode_id = 99999;
    CHECK_THROWS_AS(episodes_to_dataset(solved, episodes, 1, 1), MissingEpisode);
}

TEST_CASE("a zero learning rate leaves parameters untouched") {
    Mlp net({kInputWidth, 4, 1}, {Activation::Relu, Activation::Sigmoid});
    net.init_glorot(3);
    auto before = net.get_params();
    auto rows = toy_rows(32, 4);
    FitConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    cfg.early_stopping_patience = 100;
    fit(net, rows, rows, cfg);
    CHECK(net.get_params() == before);
}

TEST_CASE("fit learns a separable toy problem") {
    Mlp net({kInputWidth, 16, 8, 1},
            {Activation::Relu, Activation::Relu, Activation::Sigmoid});
    net.init_glorot(1);
    auto train = toy_rows(512, 10);
    auto val = toy_rows(128, 20);
    FitConfig cfg;
    cfg.epochs = 120;
    cfg.learning_rate = 0.05;
    cfg.early_stopping_patience = 120;
    FitReport rep = fit(net, train, val, cfg);
    REQUIRE(!rep.epochs.empty());
    CHECK(rep.epochs.back().val_acc >= 0.97);
    CHECK(rep.best_epoch >= 1);
    CHECK(rep.best_val_loss < rep.epochs.front().val_loss);
}

TEST_CASE("fit restores the best-validation parameters") {
    Mlp net({kInputWidth, 8, 1}, {Activation::Relu, Activation::Sigmoid});
    net.init_glorot(2);
    auto train = toy_rows(128, 30);
    auto val = toy_rows(64, 40);
    FitConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 0.05;
    cfg.early_stopping_patience = 5;
    FitReport rep = fit(net, train, val, cfg);
    auto [loss, acc] = detail::bce_loss_acc(net, val);
    CHECK(loss == Catch::Approx(rep.best_val_loss).epsilon(1e-12));
}

TEST_CASE("predict_actions follows the output bias at the extremes") {
    auto episodes = synth_episodes(120, 1, 33);
    REQUIRE(!episodes.empty());
    Mlp net = make_policy_network();
    // zero weights: output = sigmoid(bias of the last unit)
    std::vector<double> params(net.num_params(), 0.0);
    params.back() = 3.0;
    net.set_params(params);
    ActionVector ones = predict_actions(net, episodes[0]);
    CHECK(purchase_days(ones) == kDecisionDays);

    params.back() = -3.0;
    net.set_params(params);
    ActionVector zeros = predict_actions(net, episodes[0]);
    CHECK(purchase_days(zeros) == 0);
}

TEST_CASE("model JSON round-trips bit exactly") {
    Mlp net = make_policy_network();
    net.init_glorot(77);
    std::ostringstream out;
    nlohmann::json echo = {{"profile", "desk"}};
    save_model(out, net, &echo);
    std::istringstream in(out.str());
    Mlp back = load_model(in);
    CHECK(back.layer_sizes() == net.layer_sizes());
    CHECK(back.get_params() == net.get_params());

    std::array<double, 7> input{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    CHECK(back.forward(input)[0] == net.forward(input)[0]);
}

TEST_CASE("training report CSV has one line per epoch") {
    FitReport rep;
    for (int e = 1; e <= 3; ++e) {
        EpochStats s;
        s.epoch = e;
        s.train_loss = 0.5 / e;
        rep.epochs.push_back(s);
    }
    std::ostringstream out;
    write_training_report_csv(out, rep);
    std::istringstream in(out.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 4);
    CHECK(out.str().rfind("epoch,train_loss,train_acc,val_loss,val_acc\n", 0) == 0);
}
