// Copyright 2026 The edgetrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "edgetrack/drl/mlp.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"

namespace edgetrack::drl {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Fixed-capacity ring; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorKind::kInvalidConfig, "replay capacity must be positive");
    ring_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void push(Transition t) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(t));
    } else {
      ring_[static_cast<std::size_t>(inserted_ % capacity_)] = std::move(t);
    }
    ++inserted_;
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  long inserted() const { return inserted_; }
  const Transition& at(std::size_t i) const { return ring_[i]; }

  // `count` distinct slots, uniformly at random (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    const std::size_t n = ring_.size();
    if (count > n) throw Error(ErrorKind::kBufferTooSmall, "buffer holds fewer transitions than the batch");
    std::vector<std::size_t> picked;
    picked.reserve(count);
    for (std::size_t j = n - count; j < n; ++j) {
      const auto t = static_cast<std::size_t>(rng.uniform_index(j + 1));
      if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
        picked.push_back(t);
      } else {
        picked.push_back(j);
      }
    }
    return picked;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  long inserted_ = 0;
};

struct TrainerConfig {
  double gamma = 0.95;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int target_sync_every = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long epsilon_decay_steps = 20000;
  std::size_t buffer_capacity = 50000;
  int episodes = 400;
  int hidden_layers = 5;
  int hidden_width = 64;
  bool clip_td_error = true;
  int warmup = 500;  // transitions collected before the first update
  int train_every = 1;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0) || !(learning_rate > 0.0) || batch_size <= 0 ||
        target_sync_every <= 0 || !(epsilon_end >= 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0) ||
        epsilon_decay_steps <= 0 || buffer_capacity == 0 || episodes <= 0 || hidden_layers < 0 ||
        hidden_width <= 0 || warmup < 0 || train_every <= 0) {
      throw Error(ErrorKind::kInvalidConfig, "trainer configuration out of range");
    }
  }
};

// Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps decisions.
inline double epsilon_at(const TrainerConfig& cfg, long decisions) {
  if (decisions >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
  const double f = static_cast<double>(decisions) / static_cast<double>(cfg.epsilon_decay_steps);
  return cfg.epsilon_start + f * (cfg.epsilon_end - cfg.epsilon_start);
}

// First index of the maximum.
inline int argmax(std::span<const double> values) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(values.size()); ++a) {
    if (values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

inline int select_action(const Mlp& online, std::span<const double> state, double epsilon, Rng& rng) {
  const double u = rng.uniform();
  if (u < epsilon) return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(online.output_size())));
  const auto q = online.forward(state);
  return argmax(q);
}

// Double-DQN targets: the online network picks the next action, the target
// network scores it.
inline std::vector<double> td_target(std::span<const Transition* const> batch, const Mlp& online,
                                     const Mlp& target, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition* t : batch) {
    if (t->terminal || gamma == 0.0) {
      y.push_back(t->reward);
      continue;
    }
    const int next = argmax(online.forward(t->next_state));
    const auto q_next = target.forward(t->next_state);
    y.push_back(t->reward + gamma * q_next[static_cast<std::size_t>(next)]);
  }
  return y;
}

// Mean over the batch of (Q(s, a) - y)^2; with `clip_td_error` the error is
// clipped to [-1, 1] in the gradient and the loss continues linearly beyond
// it. Gradients are accumulated into `grads` (which is zeroed first).
inline double loss_and_gradient(const Mlp& net, std::span<const Transition* const> batch,
                                std::span<const double> targets, bool clip_td_error, Gradients& grads) {
  grads.zero();
  Mlp::Cache cache;
  std::vector<double> grad_out(static_cast<std::size_t>(net.output_size()), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto q = net.forward(batch[k]->state, cache);
    const auto a = static_cast<std::size_t>(batch[k]->action);
    const double err = q[a] - targets[k];
    double g = err;
    if (clip_td_error && std::abs(err) > 1.0) {
      g = err > 0.0 ? 1.0 : -1.0;
      loss += 2.0 * std::abs(err) - 1.0;
    } else {
      loss += err * err;
    }
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    grad_out[a] = 2.0 * g * scale;
    net.backward(cache, grad_out, grads);
  }
  return loss * scale;
}

// Online/target network pair plus the replay memory and update counter.
class DqnLearner {
 public:
  DqnLearner(int state_size, int action_count, TrainerConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), buffer_(cfg_.buffer_capacity), rng_(Rng::stream(seed, 11)) {
    cfg_.validate();
    online_ = Mlp(Mlp::q_layout(state_size, cfg_.hidden_layers, cfg_.hidden_width, action_count));
    Rng init = Rng::stream(seed, 10);
    online_.init_glorot(init);
    target_ = online_;
    grads_ = online_.zero_gradients();
  }

  DqnLearner(Mlp online, TrainerConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), buffer_(cfg_.buffer_capacity), online_(std::move(online)), rng_(Rng::stream(seed, 11)) {
    cfg_.validate();
    target_ = online_;
    grads_ = online_.zero_gradients();
  }

  int act(std::span<const double> state, double epsilon) { return select_action(online_, state, epsilon, rng_); }

  void remember(Transition t) { buffer_.push(std::move(t)); }

  // One gradient step on a uniformly sampled batch; hard target sync every
  // target_sync_every steps.
  double train_step() {
    if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
      throw Error(ErrorKind::kBufferTooSmall, "need " + std::to_string(cfg_.batch_size) + " transitions");
    }
    const auto idx = buffer_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
    std::vector<const Transition*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&buffer_.at(i));
    const auto y = td_target(batch, online_, target_, cfg_.gamma);
    const double loss = loss_and_gradient(online_, batch, y, cfg_.clip_td_error, grads_);
    online_.apply_sgd(grads_, cfg_.learning_rate);
    ++steps_;
    if (steps_ % cfg_.target_sync_every == 0) target_ = online_;
    return loss;
  }

  bool ready() const {
    return buffer_.size() >= static_cast<std::size_t>(std::max(cfg_.batch_size, cfg_.warmup));
  }

  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  Mlp& online_mut() { return online_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainerConfig& config() const { return cfg_; }
  long steps() const { return steps_; }
  Rng& rng() { return rng_; }

 private:
  TrainerConfig cfg_;
  ReplayBuffer buffer_;
  Mlp online_;
  Mlp target_;
  Gradients grads_;
  Rng rng_;
  long steps_ = 0;
};

}  // namespace edgetrack::drl
