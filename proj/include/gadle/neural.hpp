#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/evaluate.hpp"
#include "gadle/gasolver.hpp"
#include "json.hpp"

namespace gadle {

inline constexpr int kInputWidth = kFeatureCount + 1;  // features + purchases-so-far ratio

enum class Activation { Relu, Sigmoid, Identity };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline std::optional<Activation> parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    return std::nullopt;
}

// Dense feed-forward network with hand-written backpropagation. Weight layout
// is row-major (out x in) per layer.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations)
        : sizes_(std::move(layer_sizes)), activations_(std::move(activations)) {
        weights_.resize(n_layers());
        biases_.resize(n_layers());
        for (int l = 0; l < n_layers(); ++l) {
            weights_[l].assign(static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], 0.0);
            biases_[l].assign(sizes_[l + 1], 0.0);
        }
    }

    int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    int input_width() const { return sizes_.front(); }
    int output_width() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    const std::vector<Activation>& activations() const { return activations_; }

    void init_glorot(std::uint64_t seed) {
        Rng rng(seed);
        for (int l = 0; l < n_layers(); ++l) {
            const double limit = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
            for (auto& w : weights_[l]) w = rng.next_range(-limit, limit);
            for (auto& b : biases_[l]) b = 0.0;
        }
    }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (int l = 0; l < n_layers(); ++l) n += weights_[l].size() + biases_[l].size();
        return n;
    }

    std::vector<double> get_params() const {
        std::vector<double> p;
        p.reserve(num_params());
        for (int l = 0; l < n_layers(); ++l) {
            p.insert(p.end(), weights_[l].begin(), weights_[l].end());
            p.insert(p.end(), biases_[l].begin(), biases_[l].end());
        }
        return p;
    }

    void set_params(std::span<const double> p) {
        std::size_t k = 0;
        for (int l = 0; l < n_layers(); ++l) {
            for (auto& w : weights_[l]) w = p[k++];
            for (auto& b : biases_[l]) b = p[k++];
        }
    }

    // Per-layer pre-activation and activation caches for one forward pass.
    struct Trace {
        std::vector<std::vector<double>> activations;  // [0] is the input
    };

    std::vector<double> forward(std::span<const double> input, Trace* trace = nullptr) const {
        if (static_cast<int>(input.size()) != input_width())
            throw WidthMismatch("input width " + std::to_string(input.size()) + ", expected " +
                                std::to_string(input_width()));
        std::vector<double> cur(input.begin(), input.end());
        if (trace) {
            trace->activations.clear();
            trace->activations.push_back(cur);
        }
        for (int l = 0; l < n_layers(); ++l) {
            std::vector<double> next(sizes_[l + 1]);
            const double* W = weights_[l].data();
            for (int o = 0; o < sizes_[l + 1]; ++o) {
                double z = biases_[l][o];
                const double* row = W + static_cast<std::size_t>(o) * sizes_[l];
                for (int i = 0; i < sizes_[l]; ++i) z += row[i] * cur[i];
                next[o] = activate(activations_[l], z);
            }
            cur = std::move(next);
            if (trace) trace->activations.push_back(cur);
        }
        return cur;
    }

    struct Gradients {
        std::vector<std::vector<double>> weights;
        std::vector<std::vector<double>> biases;

        void init_like(const Mlp& net) {
            weights.resize(net.n_layers());
            biases.resize(net.n_layers());
            for (int l = 0; l < net.n_layers(); ++l) {
                weights[l].assign(net.weights_[l].size(), 0.0);
                biases[l].assign(net.biases_[l].size(), 0.0);
            }
        }

        void scale(double s) {
            for (auto& w : weights)
                for (auto& v : w) v *= s;
            for (auto& b : biases)
                for (auto& v : b) v *= s;
        }
    };

    // Accumulates parameter gradients for one sample given dLoss/dOutput
    // (after the output activation). Requires the Trace of the matching
    // forward pass.
    void backward(const Trace& trace, std::span<const double> output_grad,
                  Gradients& grads) const {
        std::vector<double> delta(output_grad.begin(), output_grad.end());
        for (int l = n_layers() - 1; l >= 0; --l) {
            const auto& out_act = trace.activations[l + 1];
            const auto& in_act = trace.activations[l];
            // fold activation derivative into delta
            for (int o = 0; o < sizes_[l + 1]; ++o)
                delta[o] *= activate_grad(activations_[l], out_act[o]);
            for (int o = 0; o < sizes_[l + 1]; ++o) {
                grads.biases[l][o] += delta[o];
                double* wrow = grads.weights[l].data() + static_cast<std::size_t>(o) * sizes_[l];
                for (int i = 0; i < sizes_[l]; ++i) wrow[i] += delta[o] * in_act[i];
            }
            if (l > 0) {
                std::vector<double> prev(sizes_[l], 0.0);
                const double* W = weights_[l].data();
                for (int o = 0; o < sizes_[l + 1]; ++o) {
                    const double* row = W + static_cast<std::size_t>(o) * sizes_[l];
                    for (int i = 0; i < sizes_[l]; ++i) prev[i] += delta[o] * row[i];
                }
                delta = std::move(prev);
            }
        }
    }

    void apply_gradients(const Gradients& grads, double learning_rate) {
        for (int l = 0; l < n_layers(); ++l) {
            for (std::size_t k = 0; k < weights_[l].size(); ++k)
                weights_[l][k] -= learning_rate * grads.weights[l][k];
            for (std::size_t k = 0; k < biases_[l].size(); ++k)
                biases_[l][k] -= learning_rate * grads.biases[l][k];
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["layer_sizes"] = sizes_;
        std::vector<std::string> acts;
        for (auto a : activations_) acts.emplace_back(to_string(a));
        j["activations"] = acts;
        j["weights"] = weights_;
        j["biases"] = biases_;
        return j;
    }

    static Mlp from_json(const nlohmann::json& j) {
        Mlp net;
        net.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
        for (const auto& s : j.at("activations")) {
            auto a = parse_activation(s.get<std::string>());
            if (!a) throw ConfigError("unknown activation '" + s.get<std::string>() + "'");
            net.activations_.push_back(*a);
        }
        net.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
        net.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
        return net;
    }

private:
    static double activate(Activation a, double z) {
        switch (a) {
            case Activation::Relu: return z > 0.0 ? z : 0.0;
            case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
            case Activation::Identity: return z;
        }
        return z;
    }

    // derivative expressed through the activation output
    static double activate_grad(Activation a, double out) {
        switch (a) {
            case Activation::Relu: return out > 0.0 ? 1.0 : 0.0;
            case Activation::Sigmoid: return out * (1.0 - out);
            case Activation::Identity: return 1.0;
        }
        return 1.0;
    }

    std::vector<int> sizes_;
    std::vector<Activation> activations_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

// Policy network: 6 trainable layers, ReLU hidden, logistic output giving the
// buy-twice probability.
inline Mlp make_policy_network() {
    return Mlp({kInputWidth, 64, 64, 32, 32, 16, 1},
               {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Relu,
                Activation::Relu, Activation::Sigmoid});
}

struct TrainingRow {
    std::array<double, kInputWidth> inputs{};
    double label = 0.0;
};

// Rows for one episode under teacher forcing: the purchases-so-far ratio is
// computed from the given (optimal) gene history.
inline std::vector<TrainingRow> make_training_rows(const Episode& ep,
                                                   std::span<const std::uint8_t> genes) {
    std::vector<TrainingRow> rows;
    rows.reserve(ep.features.size());
    int purchases = 0;
    for (std::size_t t = 0; t < ep.features.size(); ++t) {
        TrainingRow row;
        auto feats = ep.features[t].values();
        std::copy(feats.begin(), feats.end(), row.inputs.begin());
        row.inputs[kFeatureCount] =
            t == 0 ? 0.0 : static_cast<double>(purchases) / static_cast<double>(t);
        row.label = genes[t] ? 1.0 : 0.0;
        rows.push_back(row);
        purchases += genes[t] ? 1 : 0;
    }
    return rows;
}

struct DatasetSplit {
    std::vector<long long> train_ids, validation_ids, test_ids;
};

struct Dataset {
    std::vector<TrainingRow> train, validation, test;
    DatasetSplit split;
};

// Splits at episode granularity: test episodes held out first, then the
// remainder divided into train/validation.
inline Dataset episodes_to_dataset(const SolvedEpisodeSet& solved,
                                   const std::vector<Episode>& episodes,
                                   std::uint64_t split_seed, int test_episodes = 500,
                                   double validation_fraction = 0.33) {
    std::unordered_map<long long, const Episode*> index;
    for (const auto& ep : episodes) index[ep.id] = &ep;

    std::vector<long long> ids;
    ids.reserve(solved.solved.size());
    for (const auto& s : solved.solved) {
        if (!index.count(s.episode_id))
            throw MissingEpisode("no episode with id " + std::to_string(s.episode_id));
        ids.push_back(s.episode_id);
    }

    Rng rng(split_seed);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.next_index(i)]);

    const int n = static_cast<int>(ids.size());
    const int n_test = std::min(test_episodes, std::max(0, n - 2));
    const int n_rest = n - n_test;
    const int n_val = static_cast<int>(std::round(validation_fraction * n_rest));

    Dataset ds;
    for (int i = 0; i < n; ++i) {
        if (i < n_test) ds.split.test_ids.push_back(ids[i]);
        else if (i < n_test + n_val) ds.split.validation_ids.push_back(ids[i]);
        else ds.split.train_ids.push_back(ids[i]);
    }

    std::unordered_map<long long, const SolvedEpisode*> solved_index;
    for (const auto& s : solved.solved) solved_index[s.episode_id] = &s;
    auto emit = [&](const std::vector<long long>& id_list, std::vector<TrainingRow>& out) {
        for (long long id : id_list) {
            auto rows = make_training_rows(*index[id], solved_index[id]->genes);
            out.insert(out.end(), rows.begin(), rows.end());
        }
    };
    emit(ds.split.train_ids, ds.train);
    emit(ds.split.validation_ids, ds.validation);
    emit(ds.split.test_ids, ds.test);
    return ds;
}

struct FitConfig {
    int epochs = 200;
    int mini_batch_size = 64;
    double learning_rate = 0.01;
    std::uint64_t shuffle_seed = 7;
    int early_stopping_patience = 20;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
};

struct FitReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_loss = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::pair<double, double> bce_loss_acc(const Mlp& net,
                                              std::span<const TrainingRow> rows) {
    double loss = 0.0;
    int correct = 0;
    for (const auto& row : rows) {
        double p = net.forward(row.inputs)[0];
        p = std::clamp(p, 1e-12, 1.0 - 1e-12);
        loss += -(row.label * std::log(p) + (1.0 - row.label) * std::log(1.0 - p));
        correct += ((p >= 0.5) == (row.label >= 0.5)) ? 1 : 0;
    }
    const double n = static_cast<double>(rows.size());
    return {loss / n, correct / n};
}

}  // namespace detail

// Mini-batch gradient descent on binary cross-entropy; keeps the parameters
// with the best validation loss.
inline FitReport fit(Mlp& net, std::span<const TrainingRow> train,
                     std::span<const TrainingRow> validation, const FitConfig& cfg) {
    Rng rng(cfg.shuffle_seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    FitReport report;
    std::vector<double> best_params = net.get_params();
    int since_best = 0;

    Mlp::Trace trace;
    Mlp::Gradients grads;
    grads.init_like(net);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_index(i)]);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.mini_batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.mini_batch_size));
            for (auto& w : grads.weights) std::fill(w.begin(), w.end(), 0.0);
            for (auto& b : grads.biases) std::fill(b.begin(), b.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const TrainingRow& row = train[order[k]];
                double p = net.forward(row.inputs, &trace)[0];
                p = std::clamp(p, 1e-12, 1.0 - 1e-12);
                // dBCE/dp; the sigmoid derivative is folded in by backward()
                const double g = (p - row.label) / (p * (1.0 - p));
                const std::array<double, 1> out_grad{g};
                net.backward(trace, out_grad, grads);
            }
            grads.scale(1.0 / static_cast<double>(stop - start));
            net.apply_gradients(grads, cfg.learning_rate);
        }

        EpochStats stats;
        stats.epoch = epoch;
        std::tie(stats.train_loss, stats.train_acc) = detail::bce_loss_acc(net, train);
        std::tie(stats.val_loss, stats.val_acc) = detail::bce_loss_acc(net, validation);
        report.epochs.push_back(stats);
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
            throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch));

        if (stats.val_loss < report.best_val_loss) {
            report.best_val_loss = stats.val_loss;
            report.best_epoch = epoch;
            best_params = net.get_params();
            since_best = 0;
        } else if (++since_best >= cfg.early_stopping_patience) {
            break;
        }
    }
    net.set_params(best_params);
    return report;
}

// Central-difference check of the analytic BCE gradient over every parameter;
// returns the maximum relative error.
inline double gradient_check(Mlp& net, std::span<const TrainingRow> rows,
                             double epsilon = 1e-5) {
    auto loss_at = [&]() {
        double loss = 0.0;
        for (const auto& row : rows) {
            double p = std::clamp(net.forward(row.inputs)[0], 1e-12, 1.0 - 1e-12);
            loss += -(row.label * std::log(p) + (1.0 - row.label) * std::log(1.0 - p));
        }
        return loss / static_cast<double>(rows.size());
    };

    Mlp::Trace trace;
    Mlp::Gradients grads;
    grads.init_like(net);
    for (const auto& row : rows) {
        double p = std::clamp(net.forward(row.inputs, &trace)[0], 1e-12, 1.0 - 1e-12);
        const double g = (p - row.label) / (p * (1.0 - p));
        const std::array<double, 1> out_grad{g};
        net.backward(trace, out_grad, grads);
    }
    grads.scale(1.0 / static_cast<double>(rows.size()));

    std::vector<double> analytic;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        analytic.insert(analytic.end(), grads.weights[l].begin(), grads.weights[l].end());
        analytic.insert(analytic.end(), grads.biases[l].begin(), grads.biases[l].end());
    }

    std::vector<double> params = net.get_params();
    double max_rel = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        params[k] = orig + epsilon;
        net.set_params(params);
        const double up = loss_at();
        params[k] = orig - epsilon;
        net.set_params(params);
        const double down = loss_at();
        params[k] = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic[k]) / denom);
    }
    net.set_params(params);
    return max_rel;
}

// Sequential inference over an episode: the purchases-so-far ratio uses the
// policy's own decisions, unlike training which is teacher forced.
inline ActionVector predict_actions(const Mlp& policy, const Episode& ep) {
    ActionVector actions;
    actions.reserve(ep.features.size());
    int purchases = 0;
    for (std::size_t t = 0; t < ep.features.size(); ++t) {
        std::array<double, kInputWidth> inputs{};
        auto feats = ep.features[t].values();
        std::copy(feats.begin(), feats.end(), inputs.begin());
        inputs[kFeatureCount] =
            t == 0 ? 0.0 : static_cast<double>(purchases) / static_cast<double>(t);
        const double p = policy.forward(inputs)[0];
        const std::uint8_t gene = p >= 0.5 ? 1 : 0;
        actions.push_back(gene);
        purchases += gene;
    }
    return actions;
}

inline void write_training_report_csv(std::ostream& out, const FitReport& report) {
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    out.precision(10);
    for (const auto& e : report.epochs)
        out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ','
            << e.val_acc << '\n';
}

inline void save_model(std::ostream& out, const Mlp& net,
                       const nlohmann::json* config_echo = nullptr) {
    nlohmann::json j = net.to_json();
    if (config_echo) j["config"] = *config_echo;
    out << j.dump(2) << '\n';
}

inline Mlp load_model(std::istream& in) {
    nlohmann::json j;
    in >> j;
    return Mlp::from_json(j);
}

}  // namespace gadle
