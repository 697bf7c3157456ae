#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/evaluate.hpp"
#include "gadle/gasolver.hpp"
#include "gadle/neural.hpp"
#include "json.hpp"

namespace gadle {

// State for day t: the day's feature row (which already carries episode
// progress) plus the buy ratio over days 1..t-1.
struct EnvState {
    int day = 1;  // 1..30
    std::array<double, kInputWidth> inputs{};

    double episode_progress() const { return inputs[kFeatureCount - 1]; }
    double buy_ratio() const { return inputs[kFeatureCount]; }
};

// Episodic environment: 30 daily buy-twice / no-buy decisions, zero reward on
// intermediate steps, terminal reward equal to minus the episode loss of the
// full action sequence.
class InvestmentEnv {
public:
    explicit InvestmentEnv(const Episode& episode) : episode_(&episode) { reset(); }

    EnvState reset() {
        genes_.clear();
        done_ = false;
        return state_for_day(1);
    }

    struct StepResult {
        EnvState next;
        double reward = 0.0;
        bool done = false;
    };

    StepResult step(bool buy_twice) {
        if (done_) throw StepAfterTerminal("episode already terminal");
        genes_.push_back(buy_twice ? 1 : 0);
        StepResult r;
        if (static_cast<int>(genes_.size()) == kDecisionDays) {
            done_ = true;
            r.done = true;
            r.reward = -episode_loss(episode_->window.decision_prices, genes_,
                                     default_target_count(kDecisionDays));
        } else {
            r.next = state_for_day(static_cast<int>(genes_.size()) + 1);
        }
        return r;
    }

    const ActionVector& genes() const { return genes_; }
    const Episode& episode() const { return *episode_; }

private:
    EnvState state_for_day(int day) const {
        EnvState s;
        s.day = day;
        auto feats = episode_->features[day - 1].values();
        std::copy(feats.begin(), feats.end(), s.inputs.begin());
        s.inputs[kFeatureCount] =
            day == 1 ? 0.0
                     : static_cast<double>(purchase_days(genes_)) / static_cast<double>(day - 1);
        return s;
    }

    const Episode* episode_;
    ActionVector genes_;
    bool done_ = false;
};

struct Transition {
    EnvState state;
    int action = 0;  // 0 = no buy, 1 = buy twice (env maps 1 to a=2)
    double reward = 0.0;
    EnvState next_state;
    bool terminal = false;
};

// Ring buffer with weighted sampling: nonzero-reward transitions carry weight
// 1, zero-reward transitions weight u (the unusual sampling factor).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 7500, double unusual_sampling_factor = 0.9)
        : capacity_(capacity), u_(unusual_sampling_factor) {}

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }

    const Transition& sample_one(Rng& rng) const {
        if (data_.empty()) throw EmptyBuffer("replay buffer is empty");
        std::vector<std::size_t> nonzero, zero;
        index_categories(nonzero, zero);
        return data_[pick(rng, nonzero, zero)];
    }

    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
        if (data_.empty()) throw EmptyBuffer("replay buffer is empty");
        std::vector<std::size_t> nonzero, zero;
        index_categories(nonzero, zero);
        std::vector<const Transition*> out;
        out.reserve(batch);
        for (std::size_t k = 0; k < batch; ++k) out.push_back(&data_[pick(rng, nonzero, zero)]);
        return out;
    }

private:
    void index_categories(std::vector<std::size_t>& nonzero, std::vector<std::size_t>& zero) const {
        for (std::size_t i = 0; i < data_.size(); ++i)
            (data_[i].reward != 0.0 ? nonzero : zero).push_back(i);
    }

    std::size_t pick(Rng& rng, const std::vector<std::size_t>& nonzero,
                     const std::vector<std::size_t>& zero) const {
        const double w_nonzero = static_cast<double>(nonzero.size());
        const double w_zero = u_ * static_cast<double>(zero.size());
        const double total = w_nonzero + w_zero;
        if (total <= 0.0) throw EmptyBuffer("all sampling weights are zero");
        if (rng.next_double() * total < w_nonzero && !nonzero.empty())
            return nonzero[rng.next_index(nonzero.size())];
        if (zero.empty()) return nonzero[rng.next_index(nonzero.size())];
        return zero[rng.next_index(zero.size())];
    }

    std::size_t capacity_;
    double u_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct LearningRateSchedule {
    double initial = 0.001;
    int decay_steps = 1000;
    double decay_rate = 0.99;
    bool staircase = true;

    double at(long long step) const {
        const double e = staircase
                             ? static_cast<double>(step / decay_steps)
                             : static_cast<double>(step) / static_cast<double>(decay_steps);
        return initial * std::pow(decay_rate, e);
    }
};

struct EpsilonSchedule {
    double initial = 1.0;
    double minimum = 0.01;
    double decay = 0.999;  // per episode

    double at(long long episode) const {
        return std::max(minimum, initial * std::pow(decay, static_cast<double>(episode)));
    }
};

struct DqnConfig {
    LearningRateSchedule learning_rate;
    EpsilonSchedule epsilon;
    double discount = 0.95;
    int batch_size = 32;
    std::size_t replay_capacity = 7500;
    double unusual_sampling_factor = 0.9;
    int target_sync_episodes = 2;
    int episode_budget = 1440;
};

struct A2cConfig {
    LearningRateSchedule learning_rate;
    EpsilonSchedule epsilon;
    double discount = 0.97;
    double running_reward_alpha = 0.05;
    int episode_budget = 2000;
};

struct TrainingCurves {
    std::vector<double> running_reward;  // per episode
    std::vector<double> buy_ratio;       // per episode
};

inline void write_curves_csv(std::ostream& out, const TrainingCurves& curves) {
    out << "episode,running_reward,buy_ratio\n";
    out.precision(10);
    for (std::size_t i = 0; i < curves.running_reward.size(); ++i)
        out << i + 1 << ',' << curves.running_reward[i] << ',' << curves.buy_ratio[i] << '\n';
}

// Q network shares the policy backbone with a 2-wide linear head.
inline Mlp make_q_network() {
    return Mlp({kInputWidth, 64, 64, 32, 32, 16, 2},
               {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Relu,
                Activation::Relu, Activation::Identity});
}

// Actor-critic network: shared backbone, outputs [logit_no_buy,
// logit_buy_twice, value].
inline Mlp make_a2c_network() {
    return Mlp({kInputWidth, 64, 64, 32, 32, 16, 3},
               {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Relu,
                Activation::Relu, Activation::Identity});
}

struct DqnResult {
    Mlp q_network;
    TrainingCurves curves;
};

inline DqnResult train_dqn(const std::vector<Episode>& episodes, const DqnConfig& cfg,
                           std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    DqnResult result;
    result.q_network = make_q_network();
    result.q_network.init_glorot(mix64(rng_seed));
    Mlp target = result.q_network;

    ReplayBuffer buffer(cfg.replay_capacity, cfg.unusual_sampling_factor);
    Mlp::Trace trace;
    Mlp::Gradients grads;
    grads.init_like(result.q_network);

    double running_reward = 0.0;
    long long global_step = 0;

    for (int e = 0; e < cfg.episode_budget; ++e) {
        const double eps = cfg.epsilon.at(e);
        const Episode& ep = episodes[rng.next_index(episodes.size())];
        InvestmentEnv env(ep);
        EnvState state = env.reset();
        double episode_reward = 0.0;

        for (int t = 0; t < kDecisionDays; ++t) {
            int action;
            if (rng.next_bool(eps)) {
                action = static_cast<int>(rng.next_index(2));
            } else {
                auto q = result.q_network.forward(state.inputs);
                action = q[1] > q[0] ? 1 : 0;
            }
            auto step = env.step(action == 1);
            episode_reward += step.reward;

            Transition tr;
            tr.state = state;
            tr.action = action;
            tr.reward = step.reward;
            tr.terminal = step.done;
            if (!step.done) tr.next_state = step.next;
            buffer.push(std::move(tr));
            if (!step.done) state = step.next;

            if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
                auto batch = buffer.sample(cfg.batch_size, rng);
                for (auto& w : grads.weights) std::fill(w.begin(), w.end(), 0.0);
                for (auto& b : grads.biases) std::fill(b.begin(), b.end(), 0.0);
                double batch_loss = 0.0;
                for (const Transition* tr_p : batch) {
                    double y = tr_p->reward;
                    if (!tr_p->terminal) {
                        auto qn = target.forward(tr_p->next_state.inputs);
                        y += cfg.discount * std::max(qn[0], qn[1]);
                    }
                    auto q = result.q_network.forward(tr_p->state.inputs, &trace);
                    const double diff = q[tr_p->action] - y;
                    batch_loss += diff * diff;
                    std::array<double, 2> out_grad{0.0, 0.0};
                    out_grad[tr_p->action] = 2.0 * diff;
                    result.q_network.backward(trace, out_grad, grads);
                }
                if (!std::isfinite(batch_loss))
                    throw NonFiniteLoss("DQN batch loss diverged at episode " +
                                        std::to_string(e));
                grads.scale(1.0 / static_cast<double>(cfg.batch_size));
                result.q_network.apply_gradients(grads, cfg.learning_rate.at(global_step));
            }
            ++global_step;
        }

        running_reward = 0.05 * episode_reward + 0.95 * running_reward;
        result.curves.running_reward.push_back(running_reward);
        result.curves.buy_ratio.push_back(purchase_days(env.genes()) /
                                          static_cast<double>(kDecisionDays));
        if ((e + 1) % cfg.target_sync_episodes == 0) target = result.q_network;
    }
    return result;
}

struct A2cResult {
    Mlp network;
    TrainingCurves curves;
};

namespace detail {

inline double huber(double x, double delta = 1.0) {
    const double a = std::abs(x);
    return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

inline double huber_grad(double x, double delta = 1.0) {
    if (x > delta) return delta;
    if (x < -delta) return -delta;
    return x;
}

}  // namespace detail

inline A2cResult train_a2c(const std::vector<Episode>& episodes, const A2cConfig& cfg,
                           std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    A2cResult result;
    result.network = make_a2c_network();
    result.network.init_glorot(mix64(rng_seed));

    Mlp::Trace trace;
    Mlp::Gradients grads;
    grads.init_like(result.network);

    double running_reward = 0.0;

    struct StepRecord {
        std::array<double, kInputWidth> inputs;
        int action;
        double reward;
    };
    std::vector<StepRecord> history;
    history.reserve(kDecisionDays);

    for (int e = 0; e < cfg.episode_budget; ++e) {
        const double eps = cfg.epsilon.at(e);
        const Episode& ep = episodes[rng.next_index(episodes.size())];
        InvestmentEnv env(ep);
        EnvState state = env.reset();
        history.clear();
        double episode_reward = 0.0;

        for (int t = 0; t < kDecisionDays; ++t) {
            auto out = result.network.forward(state.inputs);
            const double m = std::max(out[0], out[1]);
            const double e0 = std::exp(out[0] - m), e1 = std::exp(out[1] - m);
            const double p1 = e1 / (e0 + e1);
            int action;
            if (rng.next_bool(eps)) {
                action = rng.next_bool(p1) ? 1 : 0;  // sample from actor probabilities
            } else {
                action = p1 >= 0.5 ? 1 : 0;
            }
            auto step = env.step(action == 1);
            episode_reward += step.reward;
            history.push_back({state.inputs, action, step.reward});
            if (!step.done) state = step.next;
        }

        // discounted returns, normalized to zero mean and unit variance
        std::vector<double> returns(history.size());
        double g = 0.0;
        for (std::size_t i = history.size(); i-- > 0;) {
            g = history[i].reward + cfg.discount * g;
            returns[i] = g;
        }
        const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) /
                            static_cast<double>(returns.size());
        double ss = 0.0;
        for (double r : returns) ss += (r - mean) * (r - mean);
        const double pstd = std::sqrt(ss / static_cast<double>(returns.size()));
        for (double& r : returns) r = (r - mean) / (pstd + 1e-8);

        for (auto& w : grads.weights) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : grads.biases) std::fill(b.begin(), b.end(), 0.0);
        double total_loss = 0.0;
        for (std::size_t i = 0; i < history.size(); ++i) {
            auto out = result.network.forward(history[i].inputs, &trace);
            const double m = std::max(out[0], out[1]);
            const double e0 = std::exp(out[0] - m), e1 = std::exp(out[1] - m);
            const double z = e0 + e1;
            const double p[2] = {e0 / z, e1 / z};
            const int a = history[i].action;
            const double value = out[2];
            const double advantage = returns[i] - value;

            total_loss += -std::log(std::max(p[a], 1e-12)) * advantage +
                          detail::huber(value - returns[i]);

            std::array<double, 3> out_grad{};
            // actor: d(-log p_a * adv)/dlogit_k = (p_k - [k==a]) * adv
            out_grad[0] = (p[0] - (a == 0 ? 1.0 : 0.0)) * advantage;
            out_grad[1] = (p[1] - (a == 1 ? 1.0 : 0.0)) * advantage;
            // critic: Huber on (value - return)
            out_grad[2] = detail::huber_grad(value - returns[i]);
            result.network.backward(trace, out_grad, grads);
        }
        if (!std::isfinite(total_loss))
            throw NonFiniteLoss("A2C loss diverged at episode " + std::to_string(e));
        grads.scale(1.0 / static_cast<double>(history.size()));
        result.network.apply_gradients(grads, cfg.learning_rate.at(e));

        running_reward = cfg.running_reward_alpha * episode_reward +
                         (1.0 - cfg.running_reward_alpha) * running_reward;
        result.curves.running_reward.push_back(running_reward);
        result.curves.buy_ratio.push_back(purchase_days(env.genes()) /
                                          static_cast<double>(kDecisionDays));
    }
    return result;
}

// Greedy (epsilon = 0) rollout of a trained agent over one episode.
// `actor_style` selects between Q-argmax and actor-probability argmax.
inline ActionVector greedy_rollout(const Mlp& net, const Episode& ep, bool actor_style) {
    InvestmentEnv env(ep);
    EnvState state = env.reset();
    for (int t = 0; t < kDecisionDays; ++t) {
        auto out = net.forward(state.inputs);
        const bool buy = actor_style ? out[1] >= out[0] : out[1] > out[0];
        auto step = env.step(buy);
        if (!step.done) state = step.next;
    }
    return env.genes();
}

inline PolicyFn make_agent_policy(const Mlp& net, bool actor_style) {
    return [&net, actor_style](const Episode& ep) {
        return greedy_rollout(net, ep, actor_style);
    };
}

struct FailureVerdict {
    bool failed = false;
    std::string reason;
};

// A run fails when the agent degenerates to (almost) never or always buying
// over its final quarter, or when the running reward trends down over the
// final half.
inline FailureVerdict detect_failed_run(const TrainingCurves& curves) {
    const std::size_t n = curves.buy_ratio.size();
    if (n == 0) return {true, "empty curves"};

    const std::size_t q_start = n - std::max<std::size_t>(1, n / 4);
    double ratio_sum = 0.0;
    for (std::size_t i = q_start; i < n; ++i) ratio_sum += curves.buy_ratio[i];
    const double mean_ratio = ratio_sum / static_cast<double>(n - q_start);
    if (mean_ratio < 0.05) return {true, "buy ratio collapsed to 0"};
    if (mean_ratio > 0.95) return {true, "buy ratio collapsed to 1"};

    const std::size_t h_start = n / 2;
    const std::size_t m = n - h_start;
    if (m >= 2) {
        // least-squares slope of running reward over the final half
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = h_start; i < n; ++i) {
            const double x = static_cast<double>(i - h_start);
            const double y = curves.running_reward[i];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = m * sxx - sx * sx;
        if (denom != 0.0) {
            const double slope = (m * sxy - sx * sy) / denom;
            if (slope < 0.0) return {true, "running reward trending down"};
        }
    }
    return {false, ""};
}

}  // namespace gadle
