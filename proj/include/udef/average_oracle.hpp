#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "udef/common.hpp"
#include "udef/net.hpp"
#include "udef/tabular.hpp"
#include "udef/transforms.hpp"

namespace udef {

using AoWeights = std::vector<double>;

enum class AoScheme { uniform, linear, last, nash };

inline std::string to_string(AoScheme s) {
  switch (s) {
    case AoScheme::uniform: return "uniform";
    case AoScheme::linear: return "linear";
    case AoScheme::last: return "last";
    case AoScheme::nash: return "nash";
  }
  return "?";
}

inline AoScheme ao_scheme_from_string(const std::string& s) {
  if (s == "uniform") return AoScheme::uniform;
  if (s == "linear") return AoScheme::linear;
  if (s == "last") return AoScheme::last;
  if (s == "nash") return AoScheme::nash;
  throw ConfigError("unknown average-oracle scheme '" + s + "'");
}

// Explicit average-oracle weights over K responses for `player`.
inline AoWeights explicit_ao(AoScheme scheme, const MetaGame& m, int player) {
  std::size_t k = player == 0 ? m.rows() : m.cols();
  if (scheme == AoScheme::nash) {
    MetaStrategy nash = meta_solve(m, MetaSolver::nash);
    return player == 0 ? nash.row : nash.col;
  }
  MetaSolver solver = scheme == AoScheme::uniform ? MetaSolver::uniform
                      : scheme == AoScheme::linear ? MetaSolver::linear
                                                   : MetaSolver::last;
  return scheme_weights(solver, k);
}

// Elementwise weighted sum of latent vectors; masks must agree.
inline LatentVector aggregate_las(const std::vector<LatentVector>& latents,
                                  const AoWeights& weights) {
  require(!latents.empty(), "aggregate_las: no latents");
  require(latents.size() == weights.size(),
          "aggregate_las: weight count mismatch");
  LatentVector out;
  out.legal_mask = latents.front().legal_mask;
  out.values.assign(latents.front().values.size(), 0.0);
  for (std::size_t k = 0; k < latents.size(); ++k) {
    require(latents[k].legal_mask == out.legal_mask,
            "aggregate_las: legal mask mismatch");
    require(latents[k].values.size() == out.values.size(),
            "aggregate_las: dimension mismatch");
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += weights[k] * latents[k].values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learned local average oracle: a shared per-response encoder over index
// features, payoff statistics, and the response's payoffs against the
// strongest opponent responses in a canonical (strength-sorted) order,
// normalized across responses with a softmax. All reductions run in sorted
// order so permuting responses or opponents permutes the output bit-exactly
// (up to ties in the canonical ordering, which have measure zero for
// continuous payoffs).

inline constexpr int kLaoCanonSlots = 8;
inline constexpr int kLaoFeatureDim = 10 + 2 * kLaoCanonSlots;

struct LearnedLao {
  Mlp net;  // kLaoFeatureDim -> hidden -> 1
  int k_max = 64;
};

inline LearnedLao make_learned_lao(int k_max, int hidden, std::uint64_t seed) {
  LearnedLao lao;
  lao.k_max = k_max;
  lao.net = make_mlp({kLaoFeatureDim, hidden, 1}, HiddenAct::relu,
                     OutputAct::identity, derive_seed(seed, 0x6c616fULL));
  return lao;
}

namespace detail {

inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// payoff rows from one player's perspective: V[k][j] = payoff of own
// response k against opponent response j
inline std::vector<std::vector<double>> payoff_view(
    const std::vector<std::vector<double>>& m, int player) {
  if (player == 0) return m;
  std::size_t rows = m.size(), cols = m[0].size();
  std::vector<std::vector<double>> v(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) v[j][i] = -m[i][j];
  return v;
}

inline std::vector<std::vector<double>> lao_features(
    const std::vector<std::vector<double>>& view) {
  std::size_t K = view.size(), J = view[0].size();
  double lo = 1e300, hi = -1e300;
  for (const auto& row : view)
    for (double x : row) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  double delta = std::max(hi - lo, 1e-9);
  // column means via sorted accumulation (opponent-permutation exact)
  std::vector<double> colmean(J);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> col(K);
    for (std::size_t i = 0; i < K; ++i) col[i] = view[i][j];
    colmean[j] = sorted_sum(col) / K;
  }
  // canonical opponent order: strongest responses first, i.e. ascending
  // best-case payoff for us (column max over our responses)
  std::vector<double> colmax(J, -1e300);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t i = 0; i < K; ++i) colmax[j] = std::max(colmax[j], view[i][j]);
  std::vector<std::size_t> order(J);
  for (std::size_t j = 0; j < J; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return colmax[a] < colmax[b];
  });
  std::vector<std::vector<double>> feats(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> row = view[k];
    std::vector<double> rel(J);
    for (std::size_t j = 0; j < J; ++j) rel[j] = row[j] - colmean[j];
    double x = static_cast<double>(k + 1) / K;
    std::vector<double>& f = feats[k];
    f.assign(kLaoFeatureDim, 0.0);
    f[0] = x;
    f[1] = std::log(x);
    f[2] = 1.0 / static_cast<double>(K);
    f[3] = k + 1 == K ? 1.0 : 0.0;
    f[4] = sorted_sum(row) / (J * delta);
    f[5] = *std::max_element(row.begin(), row.end()) / delta;
    f[6] = *std::min_element(row.begin(), row.end()) / delta;
    f[7] = sorted_sum(rel) / (J * delta);
    f[8] = *std::max_element(rel.begin(), rel.end()) / delta;
    f[9] = *std::min_element(rel.begin(), rel.end()) / delta;
    for (std::size_t s = 0; s < kLaoCanonSlots && s < J; ++s) {
      f[10 + s] = row[order[s]] / delta;
      f[10 + kLaoCanonSlots + s] = colmax[order[s]] / delta;
    }
  }
  return feats;
}

// softmax with sorted-order normalization (row-permutation exact)
inline std::vector<double> exact_softmax(const std::vector<double>& scores) {
  double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> e(scores.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(scores[i] - mx);
  double z = sorted_sum(e);
  for (double& x : e) x /= z;
  return e;
}

inline AoWeights lao_weights_from_view(
    const LearnedLao& lao, const std::vector<std::vector<double>>& view) {
  auto feats = lao_features(view);
  std::vector<double> scores(feats.size());
  for (std::size_t k = 0; k < feats.size(); ++k)
    scores[k] = forward(lao.net, feats[k])[0];
  return exact_softmax(scores);
}

}  // namespace detail

inline AoWeights learned_lao_eval(const LearnedLao& lao, const MetaGame& m,
                                  int player) {
  std::size_t k = player == 0 ? m.rows() : m.cols();
  require(k >= 1, "learned_lao_eval: empty response set");
  if (k > static_cast<std::size_t>(lao.k_max))
    throw ConfigError("response count " + std::to_string(k) +
                      " exceeds the configured LAO maximum " +
                      std::to_string(lao.k_max));
  return detail::lao_weights_from_view(
      lao, detail::payoff_view(m.payoff_matrix, player));
}

// ---------------------------------------------------------------------------
// Pretraining on random zero-sum meta-games against an explicit scheme.

struct LaoRecord {
  std::vector<std::vector<double>> matrix;
  AoScheme scheme = AoScheme::uniform;
  AoWeights label;  // row-player weights
};

inline std::vector<LaoRecord> generate_lao_records(AoScheme scheme, int n,
                                                   int k_max,
                                                   std::uint64_t seed,
                                                   int nash_steps = 10000) {
  require(k_max >= 2, "k_max must be at least 2");
  std::vector<LaoRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 0x64617461ULL, i));
    int k = 2 + static_cast<int>(rng() % (k_max - 1));
    LaoRecord rec;
    rec.scheme = scheme;
    rec.matrix.assign(k, std::vector<double>(k));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (auto& row : rec.matrix)
      for (double& x : row) x = unif(rng);
    if (scheme == AoScheme::nash)
      rec.label = solve_matrix_nash(rec.matrix, nash_steps).row;
    else
      rec.label = scheme_weights(scheme == AoScheme::uniform ? MetaSolver::uniform
                                 : scheme == AoScheme::linear
                                     ? MetaSolver::linear
                                     : MetaSolver::last,
                                 k);
    out.push_back(std::move(rec));
  }
  return out;
}

inline void save_lao_records(const std::vector<LaoRecord>& records,
                             std::ostream& os) {
  os << "udef-lao-dataset v1\n" << records.size() << "\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), " %a", x);
    os << buf;
  };
  for (const LaoRecord& r : records) {
    os << "record " << r.matrix.size() << " " << to_string(r.scheme) << "\n";
    for (const auto& row : r.matrix) {
      os << "m";
      for (double x : row) put(x);
      os << "\n";
    }
    os << "label";
    for (double x : r.label) put(x);
    os << "\n";
  }
}

inline std::vector<LaoRecord> load_lao_records(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  require(magic == "udef-lao-dataset" && version == "v1",
          "bad LAO dataset header");
  std::size_t n;
  is >> n;
  std::vector<LaoRecord> out(n);
  std::string tag, tok;
  for (LaoRecord& r : out) {
    std::size_t k;
    is >> tag >> k >> tok;
    require(tag == "record", "bad LAO dataset record");
    r.scheme = ao_scheme_from_string(tok);
    r.matrix.assign(k, std::vector<double>(k));
    for (auto& row : r.matrix) {
      is >> tag;
      require(tag == "m", "bad LAO dataset matrix row");
      for (double& x : row) {
        is >> tok;
        x = std::strtod(tok.c_str(), nullptr);
      }
    }
    is >> tag;
    require(tag == "label", "bad LAO dataset label");
    r.label.resize(k);
    for (double& x : r.label) {
      is >> tok;
      x = std::strtod(tok.c_str(), nullptr);
    }
  }
  return out;
}

struct LaoPretrainConfig {
  int batch_games = 32;
  int epochs = 1;
  double lr = 1e-3;
  bool cosine_decay = true;
  std::uint64_t seed = 0;
};

struct LaoPretrainReport {
  double held_out_l1 = 0.0;  // mean L1 between weights and labels
};

namespace detail {

inline double lao_batch_update(LearnedLao& lao,
                               const std::vector<const LaoRecord*>& batch,
                               AdamState& adam) {
  MlpGradients grads = zero_gradients(lao.net);
  double loss = 0.0;
  for (const LaoRecord* rec : batch) {
    auto feats = lao_features(rec->matrix);
    std::size_t K = feats.size();
    std::vector<ForwardCache> caches(K);
    std::vector<double> scores(K);
    for (std::size_t k = 0; k < K; ++k)
      scores[k] = forward_cached(lao.net, feats[k], nullptr, caches[k])[0];
    std::vector<double> w = exact_softmax(scores);
    // distribution MSE and its gradient through the softmax
    std::vector<double> dLdw(K);
    for (std::size_t k = 0; k < K; ++k) {
      double d = w[k] - rec->label[k];
      loss += d * d / (K * batch.size());
      dLdw[k] = 2.0 * d / (static_cast<double>(K) * batch.size());
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < K; ++k) dot += w[k] * dLdw[k];
    for (std::size_t k = 0; k < K; ++k) {
      double ds = w[k] * (dLdw[k] - dot);
      backward_from(lao.net, caches[k], {ds}, grads);
    }
  }
  adam_step(lao.net, grads, adam);
  return loss;
}

}  // namespace detail

// MSE training of the encoder toward explicit scheme labels; returns the
// held-out mean L1 against fresh games.
inline LaoPretrainReport pretrain_lao(LearnedLao& lao,
                                      const std::vector<LaoRecord>& records,
                                      const LaoPretrainConfig& cfg,
                                      const std::vector<LaoRecord>& heldout) {
  require(!records.empty(), "pretrain_lao: no records");
  AdamState adam = make_adam(lao.net, cfg.lr);
  int steps_total =
      cfg.epochs * ((static_cast<int>(records.size()) + cfg.batch_games - 1) /
                    cfg.batch_games);
  int step = 0;
  Rng rng(mix_seed(cfg.seed ^ 0x6c616f70ULL));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t off = 0; off < order.size();
         off += cfg.batch_games, ++step) {
      if (cfg.cosine_decay) {
        double f = 0.5 * (1.0 + std::cos(3.14159265358979323846 * step /
                                         std::max(steps_total, 1)));
        adam.lr = cfg.lr * std::max(f, 0.05);
      }
      std::vector<const LaoRecord*> batch;
      for (std::size_t b = off;
           b < std::min(order.size(), off + cfg.batch_games); ++b)
        batch.push_back(&records[order[b]]);
      detail::lao_batch_update(lao, batch, adam);
      if (!finite_params(lao.net))
        throw NumericalError("LAO pretraining diverged");
    }
  }
  LaoPretrainReport rep;
  for (const LaoRecord& rec : heldout) {
    AoWeights w = detail::lao_weights_from_view(lao, rec.matrix);
    rep.held_out_l1 += l1_distance(w, rec.label);
  }
  if (!heldout.empty()) rep.held_out_l1 /= heldout.size();
  return rep;
}

inline void save_lao(const LearnedLao& lao, std::ostream& os) {
  os << "udef-lao v1\nk_max " << lao.k_max << "\n";
  save_mlp(lao.net, os);
}

inline LearnedLao load_lao(std::istream& is) {
  std::string magic, version, tag;
  is >> magic >> version;
  require(magic == "udef-lao" && version == "v1", "bad LAO checkpoint header");
  LearnedLao lao;
  is >> tag >> lao.k_max;
  require(tag == "k_max", "bad LAO checkpoint");
  lao.net = load_mlp(is);
  return lao;
}

}  // namespace udef
