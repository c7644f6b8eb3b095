#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "udef/common.hpp"

namespace udef {

inline constexpr double kMaskPenalty = -1e9;

inline double prelu(double y, double slope) { return y >= 0.0 ? y : slope * y; }

enum class HiddenAct { relu, prelu };
enum class OutputAct { identity, softmax_masked };

// Plain feed-forward value type. PReLU slopes are per-unit learnable
// parameters (one vector per hidden layer), initialized at 1 so training
// starts from the identity-on-negatives regime.
struct Mlp {
  std::vector<int> layer_sizes;  // [input, hidden..., output]
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;
  std::vector<std::vector<double>> prelu_slopes;  // per hidden layer
  HiddenAct hidden = HiddenAct::relu;
  OutputAct output = OutputAct::identity;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
};

inline Mlp make_mlp(std::vector<int> layer_sizes, HiddenAct hidden,
                    OutputAct output, std::uint64_t seed) {
  require(layer_sizes.size() >= 2, "mlp needs at least input and output");
  Mlp net;
  net.layer_sizes = std::move(layer_sizes);
  net.hidden = hidden;
  net.output = output;
  Rng rng(mix_seed(seed));
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    int fan_in = net.layer_sizes[l], fan_out = net.layer_sizes[l + 1];
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-bound, bound);
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& x : w) x = unif(rng);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
    if (l + 2 < net.layer_sizes.size())
      net.prelu_slopes.emplace_back(fan_out, 1.0);
  }
  return net;
}

inline bool same_architecture(const Mlp& a, const Mlp& b) {
  return a.layer_sizes == b.layer_sizes && a.hidden == b.hidden &&
         a.output == b.output;
}

struct ForwardCache {
  std::vector<std::vector<double>> pre;   // z per layer
  std::vector<std::vector<double>> post;  // activations, post[0] = input
};

using Mask = std::vector<std::uint8_t>;  // 1 = legal

inline void apply_output(const Mlp& net, std::vector<double>& z,
                         const Mask* mask) {
  if (net.output != OutputAct::softmax_masked) return;
  if (mask) {
    require(mask->size() == z.size(), "mask length mismatch");
    for (std::size_t i = 0; i < z.size(); ++i)
      if (!(*mask)[i]) z[i] += kMaskPenalty;
  }
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

inline std::vector<double> forward_cached(const Mlp& net,
                                          const std::vector<double>& x,
                                          const Mask* mask,
                                          ForwardCache& cache) {
  require(static_cast<int>(x.size()) == net.input_size(),
          "input size mismatch");
  cache.pre.assign(net.num_layers(), {});
  cache.post.assign(net.num_layers() + 1, {});
  cache.post[0] = x;
  for (int l = 0; l < net.num_layers(); ++l) {
    int in = net.layer_sizes[l], out = net.layer_sizes[l + 1];
    std::vector<double> z(out);
    const double* w = net.weights[l].data();
    const double* v = cache.post[l].data();
    for (int o = 0; o < out; ++o) {
      double acc = net.biases[l][o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * v[i];
      z[o] = acc;
    }
    cache.pre[l] = z;
    if (l + 1 < net.num_layers()) {
      if (net.hidden == HiddenAct::relu) {
        for (double& q : z) q = std::max(q, 0.0);
      } else {
        for (int o = 0; o < out; ++o) z[o] = prelu(z[o], net.prelu_slopes[l][o]);
      }
    } else {
      apply_output(net, z, mask);
    }
    cache.post[l + 1] = std::move(z);
  }
  return cache.post.back();
}

// Deterministic forward pass; with a softmax output, illegal logits are
// pushed to kMaskPenalty before normalization so their probability underflows
// to exactly zero.
inline std::vector<double> forward(const Mlp& net, const std::vector<double>& x,
                                   const Mask* mask = nullptr) {
  ForwardCache cache;
  return forward_cached(net, x, mask, cache);
}

struct MlpGradients {
  std::vector<std::vector<double>> weights, biases, prelu_slopes;

  void accumulate(const MlpGradients& other, double scale = 1.0) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i)
        weights[l][i] += scale * other.weights[l][i];
      for (std::size_t i = 0; i < biases[l].size(); ++i)
        biases[l][i] += scale * other.biases[l][i];
    }
    for (std::size_t l = 0; l < prelu_slopes.size(); ++l)
      for (std::size_t i = 0; i < prelu_slopes[l].size(); ++i)
        prelu_slopes[l][i] += scale * other.prelu_slopes[l][i];
  }
};

inline MlpGradients zero_gradients(const Mlp& net) {
  MlpGradients g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  for (const auto& s : net.prelu_slopes) g.prelu_slopes.emplace_back(s.size(), 0.0);
  return g;
}

// Vector-Jacobian product: takes dL/dy at the network output (post
// activation), accumulates parameter gradients, returns dL/dx. This is the
// primitive the composite pipeline losses build on.
inline std::vector<double> backward_from(const Mlp& net,
                                         const ForwardCache& cache,
                                         std::vector<double> dLdy,
                                         MlpGradients& grads) {
  int L = net.num_layers();
  std::vector<double> delta = std::move(dLdy);  // becomes dL/dz per layer
  for (int l = L - 1; l >= 0; --l) {
    int in = net.layer_sizes[l], out = net.layer_sizes[l + 1];
    if (l == L - 1) {
      if (net.output == OutputAct::softmax_masked) {
        const std::vector<double>& y = cache.post[l + 1];
        double dot = 0.0;
        for (int o = 0; o < out; ++o) dot += y[o] * delta[o];
        for (int o = 0; o < out; ++o) delta[o] = y[o] * (delta[o] - dot);
      }
    } else {
      const std::vector<double>& z = cache.pre[l];
      if (net.hidden == HiddenAct::relu) {
        for (int o = 0; o < out; ++o)
          if (z[o] < 0.0) delta[o] = 0.0;
      } else {
        for (int o = 0; o < out; ++o) {
          if (z[o] < 0.0) {
            grads.prelu_slopes[l][o] += delta[o] * z[o];
            delta[o] *= net.prelu_slopes[l][o];
          }
        }
      }
    }
    const std::vector<double>& v = cache.post[l];
    for (int o = 0; o < out; ++o) {
      grads.biases[l][o] += delta[o];
      double* wrow = grads.weights[l].data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) wrow[i] += delta[o] * v[i];
    }
    if (l > 0) {
      std::vector<double> prev(in, 0.0);
      const double* w = net.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
      }
      delta = std::move(prev);
    }
  }
  return delta;
}

enum class Loss { mse, distribution_mse };

// One supervised example. `loss_weights` (optional) selects which outputs
// the loss reads, e.g. the one-hot of a taken action for TD targets.
struct Sample {
  std::vector<double> input;
  std::vector<double> target;
  std::vector<double> loss_weights;  // empty = all ones
  Mask mask;                         // empty = no mask
};

using Batch = std::vector<Sample>;

namespace detail {
inline void check_loss(const Mlp& net, Loss loss) {
  if (loss == Loss::mse)
    require(net.output == OutputAct::identity, "mse expects identity output");
  else
    require(net.output == OutputAct::softmax_masked,
            "distribution_mse expects a masked softmax output");
}
}  // namespace detail

// Mean over the batch of mean-over-outputs weighted squared error.
inline double batch_loss(const Mlp& net, const Batch& batch, Loss loss) {
  detail::check_loss(net, loss);
  require(!batch.empty(), "empty batch");
  double total = 0.0;
  int M = net.output_size();
  for (const Sample& s : batch) {
    auto y = forward(net, s.input, s.mask.empty() ? nullptr : &s.mask);
    double acc = 0.0;
    for (int j = 0; j < M; ++j) {
      double w = s.loss_weights.empty() ? 1.0 : s.loss_weights[j];
      double d = y[j] - s.target[j];
      acc += w * d * d;
    }
    total += acc / M;
  }
  return total / batch.size();
}

// Exact analytic gradients of the mean batch loss.
inline MlpGradients backward(const Mlp& net, const Batch& batch, Loss loss) {
  detail::check_loss(net, loss);
  require(!batch.empty(), "empty batch");
  MlpGradients grads = zero_gradients(net);
  int M = net.output_size();
  double norm = 1.0 / (static_cast<double>(M) * batch.size());
  ForwardCache cache;
  for (const Sample& s : batch) {
    auto y = forward_cached(net, s.input, s.mask.empty() ? nullptr : &s.mask,
                            cache);
    std::vector<double> dLdy(M);
    for (int j = 0; j < M; ++j) {
      double w = s.loss_weights.empty() ? 1.0 : s.loss_weights[j];
      dLdy[j] = 2.0 * w * (y[j] - s.target[j]) * norm;
    }
    backward_from(net, cache, std::move(dLdy), grads);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b, m_s, v_s;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const Mlp& net, double lr = 0.01) {
  AdamState st;
  st.lr = lr;
  for (int l = 0; l < net.num_layers(); ++l) {
    st.m_w.emplace_back(net.weights[l].size(), 0.0);
    st.v_w.emplace_back(net.weights[l].size(), 0.0);
    st.m_b.emplace_back(net.biases[l].size(), 0.0);
    st.v_b.emplace_back(net.biases[l].size(), 0.0);
  }
  for (const auto& s : net.prelu_slopes) {
    st.m_s.emplace_back(s.size(), 0.0);
    st.v_s.emplace_back(s.size(), 0.0);
  }
  return st;
}

namespace detail {
inline void adam_update(std::vector<double>& param,
                        const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v,
                        const AdamState& st, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * grad[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    param[i] -= st.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + st.eps);
  }
}
}  // namespace detail

inline void adam_step(Mlp& net, const MlpGradients& grads, AdamState& st) {
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, st.step);
  double bc2 = 1.0 - std::pow(st.beta2, st.step);
  for (int l = 0; l < net.num_layers(); ++l) {
    detail::adam_update(net.weights[l], grads.weights[l], st.m_w[l], st.v_w[l],
                        st, bc1, bc2);
    detail::adam_update(net.biases[l], grads.biases[l], st.m_b[l], st.v_b[l],
                        st, bc1, bc2);
  }
  for (std::size_t l = 0; l < net.prelu_slopes.size(); ++l)
    detail::adam_update(net.prelu_slopes[l], grads.prelu_slopes[l], st.m_s[l],
                        st.v_s[l], st, bc1, bc2);
}

// Adam state for a bare parameter vector (used by heads that live outside
// an Mlp, like learnable output slopes).
struct AdamVec {
  std::vector<double> m, v;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamVec make_adam_vec(std::size_t n, double lr) {
  AdamVec st;
  st.lr = lr;
  st.m.assign(n, 0.0);
  st.v.assign(n, 0.0);
  return st;
}

inline void adam_step(std::vector<double>& param,
                      const std::vector<double>& grad, AdamVec& st) {
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, st.step);
  double bc2 = 1.0 - std::pow(st.beta2, st.step);
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    param[i] -= st.lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + st.eps);
  }
}

// target = tau * target + (1 - tau) * online; tau weights the old target.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  require(same_architecture(target, online), "soft_update: architecture mismatch");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0,1]");
  auto blend = [tau](std::vector<double>& t, const std::vector<double>& o) {
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = tau * t[i] + (1.0 - tau) * o[i];
  };
  for (int l = 0; l < target.num_layers(); ++l) {
    blend(target.weights[l], online.weights[l]);
    blend(target.biases[l], online.biases[l]);
  }
  for (std::size_t l = 0; l < target.prelu_slopes.size(); ++l)
    blend(target.prelu_slopes[l], online.prelu_slopes[l]);
}

inline bool finite_params(const Mlp& net) {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  for (const auto& w : net.weights)
    if (!ok(w)) return false;
  for (const auto& b : net.biases)
    if (!ok(b)) return false;
  for (const auto& s : net.prelu_slopes)
    if (!ok(s)) return false;
  return true;
}

inline std::uint64_t param_checksum(const Mlp& net) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  auto feed = [&h](const std::vector<double>& v) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      h = mix_seed(h ^ bits);
    }
  };
  for (const auto& w : net.weights) feed(w);
  for (const auto& b : net.biases) feed(b);
  for (const auto& s : net.prelu_slopes) feed(s);
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text, hexfloat values for bit-exact round trips.

inline void save_mlp(const Mlp& net, std::ostream& os) {
  os << "udef-mlp v1\n";
  os << "layers";
  for (int s : net.layer_sizes) os << " " << s;
  os << "\nhidden " << (net.hidden == HiddenAct::relu ? "relu" : "prelu");
  os << "\noutput "
     << (net.output == OutputAct::identity ? "identity" : "softmax_masked")
     << "\n";
  char buf[64];
  auto dump = [&](const char* tag, std::size_t l,
                  const std::vector<double>& v) {
    os << tag << l;
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), " %a", x);
      os << buf;
    }
    os << "\n";
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    dump("w", l, net.weights[l]);
    dump("b", l, net.biases[l]);
  }
  for (std::size_t l = 0; l < net.prelu_slopes.size(); ++l)
    dump("s", l, net.prelu_slopes[l]);
}

inline Mlp load_mlp(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  require(magic == "udef-mlp" && version == "v1", "bad checkpoint header");
  std::string tag;
  is >> tag;
  require(tag == "layers", "bad checkpoint: expected layer sizes");
  Mlp net;
  {
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    int s;
    while (ls >> s) net.layer_sizes.push_back(s);
  }
  require(net.layer_sizes.size() >= 2, "bad checkpoint: too few layers");
  std::string word;
  is >> tag >> word;
  require(tag == "hidden", "bad checkpoint: expected hidden activation");
  net.hidden = word == "prelu" ? HiddenAct::prelu : HiddenAct::relu;
  is >> tag >> word;
  require(tag == "output", "bad checkpoint: expected output activation");
  net.output =
      word == "softmax_masked" ? OutputAct::softmax_masked : OutputAct::identity;
  auto read_vec = [&is](const std::string& expect, std::size_t n) {
    std::string t;
    is >> t;
    require(t == expect, "bad checkpoint: expected " + expect);
    std::vector<double> v(n);
    std::string tok;
    for (double& x : v) {
      is >> tok;
      x = std::strtod(tok.c_str(), nullptr);
    }
    return v;
  };
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    std::size_t in = net.layer_sizes[l], out = net.layer_sizes[l + 1];
    net.weights.push_back(read_vec("w" + std::to_string(l), in * out));
    net.biases.push_back(read_vec("b" + std::to_string(l), out));
  }
  for (std::size_t l = 0; l + 2 < net.layer_sizes.size(); ++l)
    net.prelu_slopes.push_back(
        read_vec("s" + std::to_string(l), net.layer_sizes[l + 1]));
  return net;
}

inline void save_mlp_file(const Mlp& net, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), "cannot open checkpoint for writing: " + path);
  save_mlp(net, os);
}

inline Mlp load_mlp_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open checkpoint: " + path);
  return load_mlp(is);
}

}  // namespace udef
