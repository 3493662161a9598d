#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "mlp.hpp"
#include "replay.hpp"
#include "rng.hpp"

namespace binq {

enum class Algo { Dqn, Ddqn };

// Per-episode multiplicative exploration decay with a floor; never increases.
struct EpsilonSchedule {
  double start = 1.0;
  double floor = 0.01;
  double decay = 0.995;
  double value = 1.0;

  EpsilonSchedule() = default;
  EpsilonSchedule(double start_, double floor_, double decay_)
      : start(start_), floor(floor_), decay(decay_), value(start_) {
    if (!(floor >= 0.0 && floor <= start && start <= 1.0))
      throw ConfigError("epsilon: need 0 <= floor <= start <= 1");
    if (!(decay >= 0.0 && decay <= 1.0))
      throw ConfigError("epsilon: decay must be in [0,1]");
  }

  void step() { value = std::max(floor, value * decay); }
};

struct QLearnerOptions {
  double gamma = 0.99;
  int sync_period = 200;  // gradient steps between hard target copies
  Algo algo = Algo::Dqn;
  EpsilonSchedule epsilon{};
  std::size_t buffer_capacity = 10000;
  AdamParams adam{};
};

// One Q-learning agent: an online network, a periodically synced target
// network, a replay buffer and an epsilon-greedy policy. DQN bootstraps with
// max_a' Q(s',a'; target); Double DQN picks a' with the online network and
// evaluates it with the target network.
class QLearner {
 public:
  QLearner(const std::vector<int>& layer_sizes, std::uint64_t init_seed,
           QLearnerOptions opt)
      : online_(layer_sizes, init_seed),
        target_(online_),
        eps_(opt.epsilon),
        opt_(std::move(opt)),
        buffer_(opt_.buffer_capacity),
        adam_(init_adam(online_, opt_.adam)) {
    if (!(opt_.gamma >= 0.0 && opt_.gamma <= 1.0))
      throw ConfigError("QLearner: gamma must be in [0,1]");
    if (opt_.sync_period < 1)
      throw ConfigError("QLearner: sync_period must be positive");
  }

  int state_dim() const { return online_.input_dim(); }
  int action_count() const { return online_.output_dim(); }
  double gamma() const { return opt_.gamma; }
  Algo algo() const { return opt_.algo; }
  double epsilon() const { return eps_.value; }
  long step_count() const { return steps_; }
  const QLearnerOptions& options() const { return opt_; }

  Mlp& online() { return online_; }
  const Mlp& online() const { return online_; }
  Mlp& target() { return target_; }
  const Mlp& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  // Epsilon-greedy over the online network; greedy ties break to the lowest
  // action index.
  int select_action(std::span<const double> state, Rng& rng) const {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps_.value)
      return std::uniform_int_distribution<int>(0, action_count() - 1)(rng);
    return argmax(online_.forward(state));
  }

  double dqn_target(double reward, std::span<const double> next_state,
                    bool done) const {
    if (done) return reward;
    const auto q = target_.forward(next_state);
    return checked_target(reward + opt_.gamma * q[argmax(q)]);
  }

  double ddqn_target(double reward, std::span<const double> next_state,
                     bool done) const {
    if (done) return reward;
    const int pick = argmax(online_.forward(next_state));
    const auto q = target_.forward(next_state);
    return checked_target(reward + opt_.gamma * q[pick]);
  }

  double bootstrap_target(double reward, std::span<const double> next_state,
                          bool done) const {
    return opt_.algo == Algo::Dqn ? dqn_target(reward, next_state, done)
                                  : ddqn_target(reward, next_state, done);
  }

  void record(Transition t) {
    if (t.action >= action_count())
      throw ContractError("QLearner: action index out of range");
    buffer_.push(std::move(t));
  }

  // One minibatch update. Returns the minibatch loss, or nothing while the
  // buffer is still warming up (no mutation happens in that case).
  std::optional<double> train_step(int batch_size, Rng& rng) {
    if (batch_size < 1) throw ContractError("QLearner: batch_size must be >= 1");
    if (!buffer_.ready(static_cast<std::size_t>(batch_size))) return std::nullopt;
    const auto batch = buffer_.sample(static_cast<std::size_t>(batch_size), rng);
    const std::size_t b_n = batch.size();
    const std::size_t in = static_cast<std::size_t>(state_dim());
    const std::size_t out = static_cast<std::size_t>(action_count());
    inputs_.resize(b_n, in);
    targets_.resize(b_n, out);
    masks_.resize(b_n, out);
    for (std::size_t b = 0; b < b_n; ++b) {
      const Transition& t = batch[b];
      std::copy(t.state.begin(), t.state.end(), inputs_.row(b).begin());
      const double y = bootstrap_target(t.reward, t.next_state, t.done);
      targets_(b, static_cast<std::size_t>(t.action)) = y;
      masks_(b, static_cast<std::size_t>(t.action)) = 1.0;
    }
    const double loss = online_.backward(inputs_, targets_, masks_, grads_);
    if (!std::isfinite(loss)) throw NumericError("QLearner: non-finite loss");
    adam_step(online_, grads_, adam_);
    ++steps_;
    if (steps_ % opt_.sync_period == 0) sync_target();
    return loss;
  }

  // Hard copy; idempotent.
  void sync_target() { target_ = online_; }

  void decay_epsilon() { eps_.step(); }

 private:
  double checked_target(double v) const {
    if (!std::isfinite(v)) throw NumericError("QLearner: non-finite target");
    return v;
  }

  Mlp online_;
  Mlp target_;
  EpsilonSchedule eps_;
  QLearnerOptions opt_;
  ReplayBuffer buffer_;
  AdamState adam_;
  long steps_ = 0;
  Matrix inputs_, targets_, masks_;
  Gradients grads_;
};

}  // namespace binq
