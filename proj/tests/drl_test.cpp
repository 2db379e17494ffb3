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

#include <cmath>
#include <algorithm>
#include <functional>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "edgetrack/drl/dqn.hpp"
#include "edgetrack/drl/mlp.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"
#include "oracles.hpp"

namespace edgetrack::drl {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

Mlp random_net(const std::vector<int>& sizes, std::uint64_t seed) {
  Rng rng(seed);
  Mlp net(sizes);
  net.init_glorot(rng);
  return net;
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  Mlp net(Mlp::q_layout(8, 5, 64, 18));
  const std::vector<double> x(8, 3.5);
  for (double q : net.forward(x)) EXPECT_EQ(q, 0.0);
}

TEST(Mlp, DefaultLayoutShape) {
  const auto sizes = Mlp::q_layout(64, 5, 64, 18);
  EXPECT_EQ(sizes, (std::vector<int>{64, 64, 64, 64, 64, 64, 18}));
}

TEST(Mlp, HandComputedForward) {
  Mlp net({2, 2, 1});
  net.weights(0) = {1.0, -2.0, 0.5, 0.25};
  net.biases(0) = {0.1, -0.3};
  net.weights(1) = {2.0, -1.0};
  net.biases(1) = {0.05};
  // Hidden: relu(1*0.4 - 2*0.3 + 0.1) = 0, relu(0.5*0.4 + 0.25*0.3 - 0.3) = 0 -> 0.05.
  EXPECT_NEAR(net.forward(std::vector<double>{0.4, 0.3})[0], 0.05, 1e-12);
  // Hidden: relu(3 - 2 + 0.1) = 1.1, relu(1.5 + 0.25 - 0.3) = 1.45 -> 2.2 - 1.45 + 0.05.
  EXPECT_NEAR(net.forward(std::vector<double>{3.0, 1.0})[0], 0.8, 1e-12);
}

TEST(Mlp, PositiveHomogeneityWithoutBias) {
  const auto net = random_net({4, 8, 8, 3}, 5);
  const std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  std::vector<double> scaled;
  for (double v : x) scaled.push_back(2.5 * v);
  const auto a = net.forward(x);
  const auto b = net.forward(scaled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.5 * a[i], 1e-12);
}

TEST(Mlp, DimensionMismatch) {
  const auto net = random_net({4, 8, 3}, 1);
  EXPECT_EQ(kind_of([&] { net.forward(std::vector<double>(5, 0.0)); }), ErrorKind::kDimensionMismatch);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (int width : {3, 8, 64}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      EXPECT_LT(oracle::gradient_check({6, width, width, width, 4}, seed * 100 + width), 1e-4)
          << "width " << width << " seed " << seed;
    }
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto net = random_net(Mlp::q_layout(16, 5, 64, 18), 9);
  std::stringstream io;
  write_checkpoint(io, net);
  const auto back = read_checkpoint(io, net.sizes());
  EXPECT_TRUE(back == net);
}

TEST(Checkpoint, RejectsArchitectureMismatch) {
  const auto net = random_net({4, 8, 3}, 2);
  std::stringstream io;
  write_checkpoint(io, net);
  EXPECT_EQ(kind_of([&] { read_checkpoint(io, {4, 8, 8, 3}); }), ErrorKind::kCheckpoint);
}

TEST(Checkpoint, RejectsGarbageAndMissingFile) {
  std::stringstream io("hello 1");
  EXPECT_EQ(kind_of([&] { read_checkpoint(io); }), ErrorKind::kCheckpoint);
  std::stringstream truncated("edgetrack-qnet 1\nlayers 2 2 1\nW 0 1.0\n");
  EXPECT_EQ(kind_of([&] { read_checkpoint(truncated); }), ErrorKind::kCheckpoint);
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/x.qnet"); }), ErrorKind::kMissingCheckpoint);
}

TEST(TdTarget, TerminalIsReward) {
  const auto net = random_net({2, 4, 3}, 3);
  Transition t{{0.1, 0.2}, 1, 1.0, {0.5, 0.5}, true};
  const Transition* batch[] = {&t};
  EXPECT_EQ(td_target(batch, net, net, 0.9)[0], 1.0);
}

TEST(TdTarget, DoubleDqnBellman) {
  // Online argmax is action 1; the target network scores action 1 at 2.
  Mlp online({1, 3});
  online.weights(0) = {0.0, 0.0, 0.0};
  online.biases(0) = {0.0, 5.0, 1.0};
  Mlp target({1, 3});
  target.weights(0) = {0.0, 0.0, 0.0};
  target.biases(0) = {9.0, 2.0, 7.0};
  Transition t{{0.0}, 0, 1.0, {0.0}, false};
  const Transition* batch[] = {&t};
  EXPECT_NEAR(td_target(batch, online, target, 0.9)[0], 2.8, 1e-12);
  EXPECT_EQ(td_target(batch, online, target, 0.0)[0], 1.0);
}

TEST(Loss, FixedPointLeavesParametersUnchanged) {
  auto net = random_net({3, 5, 2}, 4);
  std::vector<Transition> store;
  for (int i = 0; i < 4; ++i) store.push_back({{0.1 * i, -0.2, 0.3}, i % 2, 0.0, {0.0, 0.0, 0.0}, true});
  std::vector<const Transition*> batch;
  std::vector<double> y;
  for (auto& t : store) {
    batch.push_back(&t);
    y.push_back(net.forward(t.state)[static_cast<std::size_t>(t.action)]);
  }
  auto grads = net.zero_gradients();
  EXPECT_EQ(loss_and_gradient(net, batch, y, true, grads), 0.0);
  const auto before = net;
  net.apply_sgd(grads, 0.1);
  EXPECT_TRUE(net == before);
}

TEST(Loss, ClippedGradientIsBounded) {
  Mlp net({1, 2});
  net.biases(0) = {10.0, 0.0};
  Transition t{{0.0}, 0, 0.0, {0.0}, true};
  const Transition* batch[] = {&t};
  const double y[] = {0.0};
  auto grads = net.zero_gradients();
  EXPECT_NEAR(loss_and_gradient(net, batch, y, true, grads), 19.0, 1e-12);
  EXPECT_NEAR(grads.biases[0][0], 2.0, 1e-12);
  EXPECT_NEAR(loss_and_gradient(net, batch, y, false, grads), 100.0, 1e-12);
  EXPECT_NEAR(grads.biases[0][0], 20.0, 1e-12);
}

TEST(Learner, RegressesSingleTransitionToReward) {
  TrainerConfig cfg;
  cfg.gamma = 0.0;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 1;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.warmup = 0;
  DqnLearner learner(4, 18, cfg, 7);
  const std::vector<double> s{0.5, -0.25, 1.0, 0.0};
  learner.remember({s, 11, 0.73, s, false});
  int steps = 0;
  while (steps < 10000 && std::abs(learner.online().forward(s)[11] - 0.73) >= 1e-3) {
    learner.train_step();
    ++steps;
  }
  EXPECT_LT(std::abs(learner.online().forward(s)[11] - 0.73), 1e-3);
  EXPECT_LE(steps, 10000);
}

TEST(Learner, BufferTooSmall) {
  TrainerConfig cfg;
  cfg.batch_size = 4;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  DqnLearner learner(2, 3, cfg, 1);
  learner.remember({{0.0, 0.0}, 0, 0.0, {0.0, 0.0}, true});
  EXPECT_EQ(kind_of([&] { learner.train_step(); }), ErrorKind::kBufferTooSmall);
  EXPECT_FALSE(learner.ready());
}

TEST(Learner, TargetConstantBetweenSyncs) {
  TrainerConfig cfg;
  cfg.batch_size = 4;
  cfg.target_sync_every = 5;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.learning_rate = 0.05;
  DqnLearner learner(3, 4, cfg, 2);
  Rng rng(3);
  for (int i = 0; i < 32; ++i) {
    learner.remember({{rng.uniform(), rng.uniform(), rng.uniform()}, i % 4, rng.uniform(),
                      {rng.uniform(), rng.uniform(), rng.uniform()}, i % 7 == 0});
  }
  Mlp frozen = learner.target();
  for (int step = 1; step <= 20; ++step) {
    learner.train_step();
    if (step % 5 == 0) {
      EXPECT_TRUE(learner.target() == learner.online());
      frozen = learner.target();
    } else {
      EXPECT_TRUE(learner.target() == frozen);
      EXPECT_FALSE(learner.online() == frozen);
    }
  }
}

TEST(Learner, TrainingIsDeterministic) {
  auto run = [] {
    TrainerConfig cfg;
    cfg.batch_size = 8;
    cfg.target_sync_every = 10;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 16;
    DqnLearner learner(3, 18, cfg, 42);
    Rng env(5);
    std::vector<double> s{0.0, 0.0, 0.0};
    for (int i = 0; i < 200; ++i) {
      const int a = learner.act(s, 0.5);
      std::vector<double> n{env.uniform(), env.uniform(), env.uniform()};
      learner.remember({s, a, env.uniform(), n, false});
      if (learner.buffer().size() >= 8) learner.train_step();
      s = n;
    }
    return learner.online();
  };
  EXPECT_TRUE(run() == run());
}

TEST(Learner, ToyMdpConvergesToValueIteration) {
  const auto result = oracle::train_toy_mdp(1);
  EXPECT_TRUE(result.policy_matches);
  EXPECT_LT(result.max_error, 0.05);
}

TEST(Replay, FifoEviction) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push({{static_cast<double>(i)}, 0, 0.0, {0.0}, false});
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.inserted(), 5);
  std::vector<double> held;
  for (std::size_t i = 0; i < buf.size(); ++i) held.push_back(buf.at(i).state[0]);
  std::sort(held.begin(), held.end());
  EXPECT_EQ(held, (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(Replay, SamplesAreDistinctAndUniform) {
  const std::size_t n = 50;
  ReplayBuffer buf(n);
  for (std::size_t i = 0; i < n; ++i) buf.push({{0.0}, 0, 0.0, {0.0}, false});
  Rng rng(17);
  std::vector<double> counts(n, 0.0);
  const int draws = 20000;
  for (int d = 0; d < draws; ++d) {
    auto idx = buf.sample_indices(10, rng);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
    for (auto i : idx) counts[i] += 1.0;
  }
  const double expected = draws * 10.0 / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 49 degrees of freedom.
  EXPECT_LT(chi2, 74.92);
  EXPECT_EQ(kind_of([&] { buf.sample_indices(n + 1, rng); }), ErrorKind::kBufferTooSmall);
}

TEST(Exploration, EpsilonSchedule) {
  TrainerConfig cfg;
  EXPECT_EQ(epsilon_at(cfg, 0), 1.0);
  EXPECT_NEAR(epsilon_at(cfg, 10000), 0.525, 1e-12);
  EXPECT_EQ(epsilon_at(cfg, 20000), 0.05);
  EXPECT_EQ(epsilon_at(cfg, 999999), 0.05);
}

TEST(Exploration, GreedyAndTieBreak) {
  Mlp net({1, 18});
  Rng rng(1);
  const std::vector<double> s{0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(net, s, 0.0, rng), 0);
  net.biases(0)[13] = 1.0;
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(net, s, 0.0, rng), 13);
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1);
}

TEST(Exploration, FullEpsilonIsUniform) {
  Mlp net({1, 18});
  Rng rng(2);
  const std::vector<double> s{0.0};
  std::vector<int> counts(18, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_action(net, s, 1.0, rng))];
  const double p = 1.0 / 18.0;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - draws * p), 3.0 * sigma);
}

TEST(TrainerConfig, RejectsBadValues) {
  TrainerConfig cfg;
  cfg.gamma = 1.0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kInvalidConfig);
  cfg = {};
  cfg.epsilon_end = 0.5;
  cfg.epsilon_start = 0.4;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kInvalidConfig);
}

}  // namespace
}  // namespace edgetrack::drl
