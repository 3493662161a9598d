#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace binq {

// One stored experience step. `done` marks episode termination so bootstrap
// targets can be truncated.
struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

// Bounded FIFO experience store with uniform, with-replacement sampling.
// When full, a push evicts exactly the oldest entry. Sampling never mutates
// the buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
  }

  void push(Transition t) {
    if (t.state.size() != t.next_state.size())
      throw ShapeError("ReplayBuffer: state/next_state length mismatch");
    if (state_dim_ != 0 && t.state.size() != state_dim_)
      throw ShapeError("ReplayBuffer: state length differs from stored transitions");
    if (!std::isfinite(t.reward))
      throw NumericError("ReplayBuffer: non-finite reward");
    if (t.action < 0) throw ContractError("ReplayBuffer: negative action index");
    state_dim_ = t.state.size();
    if (data_.size() == capacity_) data_.pop_front();
    data_.push_back(std::move(t));
    ++total_pushed_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return total_pushed_; }
  bool ready(std::size_t batch_size) const {
    return batch_size >= 1 && data_.size() >= batch_size;
  }

  // `batch_size` independent uniform draws with replacement. Callers gate on
  // ready(); sampling an undersized buffer is a contract violation.
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const {
    if (!ready(batch_size))
      throw ContractError("ReplayBuffer: not enough transitions to sample");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(data_[pick(rng)]);
    return batch;
  }

  // Oldest-first access.
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  const Transition& newest() const { return data_.back(); }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
  std::size_t state_dim_ = 0;
  std::uint64_t total_pushed_ = 0;
};

}  // namespace binq
