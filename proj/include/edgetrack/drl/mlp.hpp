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

#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"

namespace edgetrack::drl {

// Per-layer parameter gradients, same shapes as the network.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }
};

// Fully connected network: ReLU on every hidden layer, identity output.
// Layer l maps sizes[l] -> sizes[l+1]; its weights are stored row-major as
// sizes[l+1] rows of sizes[l] columns.
class Mlp {
 public:
  // Post-activation values of every layer for one input; activations[0] is
  // the input itself.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error(ErrorKind::kInvalidConfig, "network needs at least two layers");
    for (int s : sizes_) {
      if (s <= 0) throw Error(ErrorKind::kInvalidConfig, "layer sizes must be positive");
    }
    weights_.resize(sizes_.size() - 1);
    biases_.resize(sizes_.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_[l].assign(static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1], 0.0);
      biases_[l].assign(static_cast<std::size_t>(sizes_[l + 1]), 0.0);
    }
  }

  static std::vector<int> q_layout(int inputs, int hidden_layers, int width, int outputs) {
    std::vector<int> sizes{inputs};
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(width);
    sizes.push_back(outputs);
    return sizes;
  }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
  void init_glorot(Rng& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double limit = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
      for (auto& w : weights_[l]) w = rng.uniform(-limit, limit);
      std::fill(biases_[l].begin(), biases_[l].end(), 0.0);
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  std::vector<double>& weights(std::size_t l) { return weights_[l]; }
  const std::vector<double>& weights(std::size_t l) const { return weights_[l]; }
  std::vector<double>& biases(std::size_t l) { return biases_[l]; }
  const std::vector<double>& biases(std::size_t l) const { return biases_[l]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  Gradients zero_gradients() const {
    Gradients g;
    g.weights.reserve(weights_.size());
    g.biases.reserve(biases_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights.emplace_back(weights_[l].size(), 0.0);
      g.biases.emplace_back(biases_[l].size(), 0.0);
    }
    return g;
  }

  std::vector<double> forward(std::span<const double> input) const {
    Cache cache;
    return forward(input, cache);
  }

  std::vector<double> forward(std::span<const double> input, Cache& cache) const {
    if (static_cast<int>(input.size()) != input_size()) {
      throw Error(ErrorKind::kDimensionMismatch, "input has " + std::to_string(input.size()) +
                                                     " values, network expects " +
                                                     std::to_string(input_size()));
    }
    cache.activations.resize(sizes_.size());
    cache.activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const auto& x = cache.activations[l];
      auto& y = cache.activations[l + 1];
      const std::size_t in = static_cast<std::size_t>(sizes_[l]);
      const std::size_t out = static_cast<std::size_t>(sizes_[l + 1]);
      y.resize(out);
      const bool hidden = l + 1 < weights_.size();
      const double* w = weights_[l].data();
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = w + o * in;
        double acc = biases_[l][o];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = hidden && acc < 0.0 ? 0.0 : acc;
      }
    }
    return cache.activations.back();
  }

  // Accumulates dLoss/dParams into `grads` given dLoss/dOutput for the input
  // recorded in `cache`.
  void backward(const Cache& cache, std::span<const double> grad_output, Gradients& grads) const {
    std::vector<double> delta(grad_output.begin(), grad_output.end());
    std::vector<double> prev;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const auto& x = cache.activations[l];
      const std::size_t in = static_cast<std::size_t>(sizes_[l]);
      const std::size_t out = static_cast<std::size_t>(sizes_[l + 1]);
      double* gw = grads.weights[l].data();
      const double* w = weights_[l].data();
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        grads.biases[l][o] += d;
        double* grow = gw + o * in;
        const double* wrow = w + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          grow[i] += d * x[i];
          prev[i] += d * wrow[i];
        }
      }
      if (l > 0) {
        // ReLU derivative at the previous layer's pre-activation.
        for (std::size_t i = 0; i < in; ++i) {
          if (x[i] <= 0.0) prev[i] = 0.0;
        }
      }
      delta.swap(prev);
    }
  }

  void apply_sgd(const Gradients& grads, double learning_rate) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (std::size_t k = 0; k < weights_[l].size(); ++k) weights_[l][k] -= learning_rate * grads.weights[l][k];
      for (std::size_t k = 0; k < biases_[l].size(); ++k) biases_[l][k] -= learning_rate * grads.biases[l][k];
    }
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<int> sizes_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
//   edgetrack-qnet <version>
//   layers <count> <size_0> ... <size_{count-1}>
//   W <l> <values...>      row-major, shortest round-trip decimal
//   b <l> <values...>

inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& out, const Mlp& net) {
  out << "edgetrack-qnet " << kCheckpointVersion << '\n';
  out << "layers " << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << '\n';
  char buf[64];
  auto emit = [&](char tag, std::size_t l, const std::vector<double>& values) {
    out << tag << ' ' << l;
    for (double v : values) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    emit('W', l, net.weights(l));
    emit('b', l, net.biases(l));
  }
}

// Rejects unknown versions, truncated data and, when `expected_sizes` is
// non-empty, any architecture other than the expected one.
inline Mlp read_checkpoint(std::istream& in, const std::vector<int>& expected_sizes = {}) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "edgetrack-qnet") {
    throw Error(ErrorKind::kCheckpoint, "not a network checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "layers" || count < 2 || count > 1024) {
    throw Error(ErrorKind::kCheckpoint, "bad layer header");
  }
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    if (!(in >> s) || s <= 0) throw Error(ErrorKind::kCheckpoint, "bad layer size");
  }
  if (!expected_sizes.empty() && sizes != expected_sizes) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint architecture does not match");
  }
  Mlp net(sizes);
  auto read_block = [&](char want, std::size_t l, std::vector<double>& values) {
    std::string t;
    std::size_t idx = 0;
    if (!(in >> t >> idx) || t.size() != 1 || t[0] != want || idx != l) {
      throw Error(ErrorKind::kCheckpoint, std::string("expected block ") + want + " " + std::to_string(l));
    }
    std::string token;
    for (auto& v : values) {
      if (!(in >> token)) throw Error(ErrorKind::kCheckpoint, "truncated parameters");
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw Error(ErrorKind::kCheckpoint, "bad parameter '" + token + "'");
      }
    }
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    read_block('W', l, net.weights(l));
    read_block('b', l, net.biases(l));
  }
  return net;
}

inline void save_checkpoint(const std::string& path, const Mlp& net) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint '" + path + "'");
  write_checkpoint(out, net);
}

inline Mlp load_checkpoint(const std::string& path, const std::vector<int>& expected_sizes = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingCheckpoint, "cannot open '" + path + "'");
  return read_checkpoint(in, expected_sizes);
}

}  // namespace edgetrack::drl
