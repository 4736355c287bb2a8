#pragma once

// Small fully-connected Q-network with manual backpropagation, plus the
// replay buffer and the squared-TD-error update used by every DQN agent.
// Hidden layers are rectified, the output layer is linear.

#include <algorithm>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hprl/rng.hpp"

namespace hprl {

struct QNetwork {
  std::vector<int> layer_sizes;              // e.g. {4, 64, 32, 10}
  std::vector<std::vector<double>> weights;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> biases;   // per layer

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += weights[l].size() + biases[l].size();
    return n;
  }

  static QNetwork zeros(std::vector<int> sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("nn: need >= 2 layers");
    QNetwork net;
    net.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
      net.weights.emplace_back(
          static_cast<std::size_t>(net.layer_sizes[l + 1]) * net.layer_sizes[l], 0.0);
      net.biases.emplace_back(net.layer_sizes[l + 1], 0.0);
    }
    return net;
  }

  /// He-style initialization for the rectified hidden stack.
  static QNetwork randomized(std::vector<int> sizes, Rng& rng) {
    QNetwork net = zeros(std::move(sizes));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      const double scale = std::sqrt(2.0 / net.layer_sizes[l]);
      for (auto& w : net.weights[l]) w = rng.gaussian() * scale;
    }
    return net;
  }
};

namespace nn_detail {

/// Forward pass keeping pre-activations and activations for backprop.
/// activations[0] is the input; activations[L] the linear output.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preacts;  // per layer, before the rectifier
};

inline std::vector<double> forward_cached(const QNetwork& net,
                                          const std::vector<double>& input,
                                          ForwardCache* cache) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument(
        "nn: input size " + std::to_string(input.size()) + " != " +
        std::to_string(net.input_size()));
  std::vector<double> cur = input;
  if (cache) {
    cache->activations.clear();
    cache->preacts.clear();
    cache->activations.push_back(cur);
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const int out_n = net.layer_sizes[l + 1];
    const int in_n = net.layer_sizes[l];
    std::vector<double> z(out_n);
    for (int o = 0; o < out_n; ++o) {
      double acc = net.biases[l][o];
      const double* row = &net.weights[l][static_cast<std::size_t>(o) * in_n];
      for (int i = 0; i < in_n; ++i) acc += row[i] * cur[i];
      z[o] = acc;
    }
    const bool last = l + 1 == net.num_layers();
    if (cache) cache->preacts.push_back(z);
    if (!last) {
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(z);
    if (cache) cache->activations.push_back(cur);
  }
  return cur;
}

}  // namespace nn_detail

/// Deterministic forward pass; output length equals the action count.
inline std::vector<double> q_forward(const QNetwork& net,
                                     const std::vector<double>& obs) {
  return nn_detail::forward_cached(net, obs, nullptr);
}

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;
};

/// Ring buffer of transitions. Once full, each push evicts the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: zero capacity");
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  const Transition& oldest() const { return data_[data_.size() < capacity_ ? 0 : head_]; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  /// Uniform sample of distinct indices (no replacement within a batch).
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
    if (batch > data_.size())
      throw std::invalid_argument("replay: batch larger than buffer");
    // Floyd's algorithm keeps the draw count at exactly `batch`.
    std::set<std::size_t> picked;
    const std::size_t n = data_.size();
    for (std::size_t i = n - batch; i < n; ++i) {
      const std::size_t j = rng.next_below(i + 1);
      if (!picked.insert(j).second) picked.insert(i);
    }
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t idx : picked) out.push_back(&data_[idx]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

struct DqnConfig {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;  // per-component clip before the descent step
};

/// One gradient step on the mean squared TD error
///   y = r + gamma * max_a' Q_target(s', a')   (y = r on terminal steps)
///   L = mean_batch (y - Q(s, a))^2
/// The target network is left untouched. Returns the batch loss.
inline double dqn_update(QNetwork& net, const QNetwork& target_net,
                         const std::vector<const Transition*>& batch,
                         const DqnConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("dqn_update: empty batch");
  std::vector<std::vector<double>> grad_w, grad_b;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    grad_w.emplace_back(net.weights[l].size(), 0.0);
    grad_b.emplace_back(net.biases[l].size(), 0.0);
  }

  double loss = 0.0;
  nn_detail::ForwardCache cache;
  for (const Transition* t : batch) {
    double y = t->reward;
    if (!t->terminal) {
      const std::vector<double> qn = q_forward(target_net, t->next_obs);
      y += cfg.gamma * *std::max_element(qn.begin(), qn.end());
    }
    const std::vector<double> q = nn_detail::forward_cached(net, t->obs, &cache);
    if (t->action < 0 || t->action >= static_cast<int>(q.size()))
      throw std::out_of_range("dqn_update: action index out of range");
    const double err = q[t->action] - y;
    loss += err * err;

    // Backprop: d(err^2)/dq_a = 2*err, averaged over the batch.
    std::vector<double> delta(q.size(), 0.0);
    delta[t->action] = 2.0 * err / batch.size();
    for (std::size_t li = net.num_layers(); li-- > 0;) {
      const int out_n = net.layer_sizes[li + 1];
      const int in_n = net.layer_sizes[li];
      const auto& a_in = cache.activations[li];
      for (int o = 0; o < out_n; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        grad_b[li][o] += d;
        double* grow = &grad_w[li][static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) grow[i] += d * a_in[i];
      }
      if (li == 0) break;
      std::vector<double> prev(in_n, 0.0);
      for (int o = 0; o < out_n; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = &net.weights[li][static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) prev[i] += d * row[i];
      }
      // Rectifier gate of the layer below.
      for (int i = 0; i < in_n; ++i)
        if (cache.preacts[li - 1][i] <= 0.0) prev[i] = 0.0;
      delta = std::move(prev);
    }
  }

  const double clip = cfg.grad_clip;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (std::size_t k = 0; k < net.weights[l].size(); ++k) {
      double g = grad_w[l][k];
      if (clip > 0.0) g = std::clamp(g, -clip, clip);
      net.weights[l][k] -= cfg.learning_rate * g;
    }
    for (std::size_t k = 0; k < net.biases[l].size(); ++k) {
      double g = grad_b[l][k];
      if (clip > 0.0) g = std::clamp(g, -clip, clip);
      net.biases[l][k] -= cfg.learning_rate * g;
    }
  }
  return loss / batch.size();
}

/// Loss and analytic gradient without applying an update; the finite
/// difference oracle in the tests differentiates against this.
inline double dqn_loss(const QNetwork& net, const QNetwork& target_net,
                       const std::vector<const Transition*>& batch, double gamma) {
  double loss = 0.0;
  for (const Transition* t : batch) {
    double y = t->reward;
    if (!t->terminal) {
      const std::vector<double> qn = q_forward(target_net, t->next_obs);
      y += gamma * *std::max_element(qn.begin(), qn.end());
    }
    const double err = q_forward(net, t->obs)[t->action] - y;
    loss += err * err;
  }
  return loss / batch.size();
}

}  // namespace hprl
