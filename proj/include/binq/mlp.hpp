#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace binq {

// Per-layer gradient carrier. Shapes always mirror the owning network.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct AdamParams {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators, one slot per parameter.
struct AdamState {
  std::vector<Matrix> m_weights;
  std::vector<Matrix> v_weights;
  std::vector<std::vector<double>> m_biases;
  std::vector<std::vector<double>> v_biases;
  long step = 0;
  AdamParams params;
};

// Dense feed-forward value network: ReLU on hidden layers, identity on the
// output layer (one output per action, Q-values are unbounded reals).
// Weights start He-uniform (|w| <= sqrt(6/fan_in)), biases start at zero;
// the same seed reproduces the same parameters bit for bit. All arithmetic
// is in 64-bit floats. forward() is const and safe for concurrent readers;
// mutation is the caller's to serialize.
class Mlp {
 public:
  Mlp(std::vector<int> layer_sizes, std::uint64_t seed)
      : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2)
      throw ConfigError("Mlp: need at least an input and an output layer");
    for (int s : sizes_)
      if (s <= 0) throw ConfigError("Mlp: layer sizes must be positive");
    Rng rng(seed);
    const std::size_t layers = sizes_.size() - 1;
    weights_.reserve(layers);
    biases_.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t fan_in = static_cast<std::size_t>(sizes_[l]);
      const std::size_t fan_out = static_cast<std::size_t>(sizes_[l + 1]);
      Matrix w(fan_out, fan_in);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& x : w.flat()) x = dist(rng);
      weights_.push_back(std::move(w));
      biases_.emplace_back(fan_out, 0.0);
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<std::vector<double>>& biases() { return biases_; }
  const std::vector<std::vector<double>>& biases() const { return biases_; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

  // Q-values for one state. Pure: identical arguments give identical output.
  std::vector<double> forward(std::span<const double> input) const {
    check_input(input);
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const Matrix& w = weights_[l];
      next.assign(biases_[l].begin(), biases_[l].end());
      for (std::size_t o = 0; o < w.rows(); ++o) next[o] += dot(w.row(o), cur);
      if (l + 1 < weights_.size())
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      cur.swap(next);
    }
    return cur;
  }

  // Batched forward: one input row per sample, Q-value rows out.
  Matrix forward_batch(const Matrix& inputs) const {
    if (inputs.cols() != static_cast<std::size_t>(input_dim()))
      throw ShapeError("Mlp: batch input width does not match input dim");
    Matrix cur = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      cur = layer_forward(l, cur, l + 1 < weights_.size());
    return cur;
  }

  // Masked squared-error loss and its exact analytic gradients.
  //
  // Every mask row must select exactly one output (the taken action); the
  // other outputs contribute zero loss and zero gradient. The loss is the
  // mean over the batch of (target - Q(s,a))^2. Gradient shapes and values
  // land in `grads` (resized as needed); parameter shapes never change.
  double backward(const Matrix& inputs, const Matrix& targets,
                  const Matrix& masks, Gradients& grads) const {
    const std::size_t batch = inputs.rows();
    const std::size_t out = static_cast<std::size_t>(output_dim());
    if (batch == 0) throw ContractError("Mlp: empty batch");
    if (inputs.cols() != static_cast<std::size_t>(input_dim()))
      throw ShapeError("Mlp: batch input width does not match input dim");
    if (targets.rows() != batch || targets.cols() != out)
      throw ShapeError("Mlp: target shape does not match (batch x outputs)");
    if (masks.rows() != batch || masks.cols() != out)
      throw ShapeError("Mlp: mask shape does not match (batch x outputs)");
    for (std::size_t b = 0; b < batch; ++b) {
      int active = 0;
      for (std::size_t j = 0; j < out; ++j) {
        const double m = masks(b, j);
        if (m != 0.0 && m != 1.0)
          throw ContractError("Mlp: mask entries must be 0 or 1");
        active += m == 1.0 ? 1 : 0;
      }
      if (active != 1)
        throw ContractError("Mlp: each mask row must select exactly one action");
    }

    // Forward, keeping post-activation values per layer. ReLU's subgradient
    // at 0 is taken as 0, so act > 0 decides the backward pass.
    std::vector<Matrix> acts(weights_.size() + 1);
    acts[0] = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      acts[l + 1] = layer_forward(l, acts[l], l + 1 < weights_.size());

    double loss = 0.0;
    Matrix delta(batch, out);
    const Matrix& q = acts.back();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < out; ++j)
        if (masks(b, j) == 1.0) {
          const double diff = q(b, j) - targets(b, j);
          loss += diff * diff;
          delta(b, j) = 2.0 * diff / static_cast<double>(batch);
        }
    loss /= static_cast<double>(batch);

    resize_like(grads);
    for (std::size_t li = weights_.size(); li-- > 0;) {
      const Matrix& w = weights_[li];
      const Matrix& below = acts[li];
      Matrix& dw = grads.weights[li];
      std::vector<double>& db = grads.biases[li];
      dw.fill(0.0);
      std::fill(db.begin(), db.end(), 0.0);
      Matrix next_delta;
      if (li > 0) next_delta.resize(batch, w.cols());
      for (std::size_t b = 0; b < batch; ++b) {
        const auto d_row = delta.row(b);
        for (std::size_t o = 0; o < w.rows(); ++o) {
          const double d = d_row[o];
          if (d == 0.0) continue;
          db[o] += d;
          axpy(d, below.row(b), dw.row(o));
          if (li > 0) axpy(d, w.row(o), next_delta.row(b));
        }
        if (li > 0) {
          auto nd = next_delta.row(b);
          const auto a = below.row(b);
          for (std::size_t i = 0; i < nd.size(); ++i)
            if (a[i] <= 0.0) nd[i] = 0.0;
        }
      }
      if (li > 0) delta = std::move(next_delta);
    }
    return loss;
  }

 private:
  void check_input(std::span<const double> input) const {
    if (input.size() != static_cast<std::size_t>(input_dim()))
      throw ShapeError("Mlp: input length does not match input dim");
    for (double v : input)
      if (!std::isfinite(v)) throw NumericError("Mlp: non-finite input");
  }

  Matrix layer_forward(std::size_t l, const Matrix& in, bool relu) const {
    const Matrix& w = weights_[l];
    Matrix out(in.rows(), w.rows());
    for (std::size_t b = 0; b < in.rows(); ++b) {
      const auto x = in.row(b);
      auto y = out.row(b);
      for (std::size_t o = 0; o < w.rows(); ++o) {
        double v = biases_[l][o] + dot(w.row(o), x);
        if (relu && v < 0.0) v = 0.0;
        y[o] = v;
      }
    }
    return out;
  }

  void resize_like(Gradients& g) const {
    if (g.weights.size() == weights_.size()) {
      bool ok = true;
      for (std::size_t l = 0; l < weights_.size(); ++l)
        if (g.weights[l].rows() != weights_[l].rows() ||
            g.weights[l].cols() != weights_[l].cols() ||
            g.biases[l].size() != biases_[l].size())
          ok = false;
      if (ok) return;
    }
    g.weights.assign(weights_.size(), Matrix());
    g.biases.assign(weights_.size(), {});
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights[l].resize(weights_[l].rows(), weights_[l].cols());
      g.biases[l].assign(biases_[l].size(), 0.0);
    }
  }

  std::vector<int> sizes_;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;
};

inline AdamState init_adam(const Mlp& net, const AdamParams& params = {}) {
  AdamState st;
  st.params = params;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    st.m_weights.emplace_back(net.weights()[l].rows(), net.weights()[l].cols());
    st.v_weights.emplace_back(net.weights()[l].rows(), net.weights()[l].cols());
    st.m_biases.emplace_back(net.biases()[l].size(), 0.0);
    st.v_biases.emplace_back(net.biases()[l].size(), 0.0);
  }
  return st;
}

// One Adam update over a flat parameter slice; `t` is the already-incremented
// step counter used for bias correction.
inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, long t,
                        const AdamParams& hp) {
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
    params[i] -= hp.alpha * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.epsilon);
    if (!std::isfinite(params[i]))
      throw NumericError("adam: parameter became non-finite");
  }
}

inline void adam_step(Mlp& net, const Gradients& grads, AdamState& st) {
  if (grads.weights.size() != net.layer_count() ||
      grads.biases.size() != net.layer_count())
    throw ShapeError("adam: gradient layer count mismatch");
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    if (grads.weights[l].rows() != net.weights()[l].rows() ||
        grads.weights[l].cols() != net.weights()[l].cols() ||
        grads.biases[l].size() != net.biases()[l].size())
      throw ShapeError("adam: gradient shape mismatch");
  ++st.step;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    adam_update(net.weights()[l].flat(), grads.weights[l].flat(),
                st.m_weights[l].flat(), st.v_weights[l].flat(), st.step,
                st.params);
    adam_update(net.biases()[l], grads.biases[l], st.m_biases[l],
                st.v_biases[l], st.step, st.params);
  }
}

inline int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

// --- parameter snapshots ----------------------------------------------------
//
// Flat versioned binary record: magic, layer sizes, then per layer the
// row-major weights followed by the biases, all as native 64-bit doubles.
// Round-trips are bit-exact.

inline constexpr char kSnapshotMagic[8] = {'B', 'Q', 'M', 'L', 'P', '0', '0', '1'};

inline void save_snapshot(const Mlp& net, std::ostream& out) {
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  const std::uint32_t n = static_cast<std::uint32_t>(net.layer_sizes().size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (int s : net.layer_sizes()) {
    const std::uint32_t v = static_cast<std::uint32_t>(s);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto w = net.weights()[l].flat();
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(w.size() * sizeof(double)));
    const auto& b = net.biases()[l];
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("snapshot: write failed");
}

inline Mlp load_snapshot(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0)
    throw std::runtime_error("snapshot: bad magic");
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n < 2 || n > 64) throw std::runtime_error("snapshot: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in || v == 0) throw std::runtime_error("snapshot: bad layer size");
    s = static_cast<int>(v);
  }
  Mlp net(sizes, 0);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto w = net.weights()[l].flat();
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    auto& b = net.biases()[l];
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("snapshot: truncated parameter block");
  return net;
}

inline void save_snapshot(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path.string());
  save_snapshot(net, out);
}

inline Mlp load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path.string());
  return load_snapshot(in);
}

}  // namespace binq
