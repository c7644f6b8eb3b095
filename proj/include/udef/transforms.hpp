#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udef/common.hpp"
#include "udef/net.hpp"
#include "udef/tabular.hpp"

namespace udef {

// Per-infoset bundle a response oracle produces: conditional action values,
// a reach estimate, and the sampling-policy baseline bv = sum_a zeta(a) q(a).
struct RoInfosetOutput {
  std::vector<double> q;
  ReachDecomposition rp;
  double bv = 0.0;
};

// Indexed by infoset id; entries for the other player's infosets stay empty.
using RoOutput = std::vector<RoInfosetOutput>;

// Dimension layout of the latent additive space. The regret-like (PReLU)
// branch owns [0, a_max) plus the free dims [2*a_max, d); the
// probability-like (softmax) branch owns [psro_offset, psro_offset + a_max).
// Explicit transforms write their action block at offset 0.
struct LatentLayout {
  int d = 16;
  int a_max = 0;
  int cfr_offset = 0;
  int psro_offset = 0;
};

struct LatentVector {
  std::vector<double> values;  // size = layout.d
  Mask legal_mask;             // size = layout.a_max, 1 = legal action slot
};

inline std::vector<double> masked_softmax(const std::vector<double>& logits,
                                          const Mask& mask) {
  std::vector<double> z = logits;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (i < mask.size() && !mask[i]) z[i] += kMaskPenalty;
    else if (i >= mask.size()) z[i] += kMaskPenalty;
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

enum class PreTransformKind { explicit_psro, explicit_cfr, learned };
enum class PostTransformKind {
  explicit_identity_renorm,
  explicit_regret_matching,
  learned
};

struct TransformPair {
  PreTransformKind pre_kind = PreTransformKind::explicit_cfr;
  PostTransformKind post_kind = PostTransformKind::explicit_regret_matching;
  LatentLayout layout;
  double delta = 1.0;  // payoff range; learned nets consume q/delta, bv/delta
  Mlp pre_net;         // learned pre: [q(a_max), own, ext, bv] -> d raw dims
  std::vector<double> pre_slopes;  // per-dim PReLU slopes of the pre head
  Mlp post_net;                    // learned post: d -> a_max masked softmax
};

inline TransformPair make_explicit_transforms(PreTransformKind pre,
                                              PostTransformKind post,
                                              int a_max, int d = 16) {
  require(pre != PreTransformKind::learned && post != PostTransformKind::learned,
          "use make_learned_transforms for learned modules");
  require(d >= a_max, "latent dimension below the action count");
  TransformPair tp;
  tp.pre_kind = pre;
  tp.post_kind = post;
  tp.layout = {d, a_max, 0, 0};
  return tp;
}

inline TransformPair make_learned_transforms(int a_max, int d, int hidden,
                                             std::uint64_t seed,
                                             double delta = 1.0) {
  if (d < 2 * a_max)
    throw ConfigError("latent dimension " + std::to_string(d) +
                      " below twice the action count " + std::to_string(a_max));
  TransformPair tp;
  tp.pre_kind = PreTransformKind::learned;
  tp.post_kind = PostTransformKind::learned;
  tp.layout = {d, a_max, 0, a_max};
  tp.delta = delta;
  tp.pre_net = make_mlp({a_max + 3, hidden, d}, HiddenAct::relu,
                        OutputAct::identity, derive_seed(seed, 0x707265ULL));
  tp.pre_slopes.assign(d, 1.0);
  tp.post_net = make_mlp({d, hidden, a_max}, HiddenAct::relu,
                         OutputAct::softmax_masked,
                         derive_seed(seed, 0x706f7374ULL));
  return tp;
}

namespace detail {

inline bool in_softmax_block(const LatentLayout& lay, int i) {
  return i >= lay.psro_offset && i < lay.psro_offset + lay.a_max;
}

// PReLU on the regret branch and free dims, masked softmax on the
// probability branch.
inline std::vector<double> apply_pre_head(const LatentLayout& lay,
                                          const std::vector<double>& slopes,
                                          const std::vector<double>& raw,
                                          const Mask& legal) {
  std::vector<double> out(raw.size());
  std::vector<double> block(lay.a_max);
  for (int i = 0; i < lay.a_max; ++i) block[i] = raw[lay.psro_offset + i];
  std::vector<double> soft = masked_softmax(block, legal);
  for (int i = 0; i < lay.d; ++i) {
    if (in_softmax_block(lay, i))
      out[i] = soft[i - lay.psro_offset];
    else
      out[i] = prelu(raw[i], slopes[i]);
  }
  return out;
}

inline std::vector<double> learned_pre_input(const TransformPair& tp,
                                             const RoInfosetOutput& ro) {
  std::vector<double> x(tp.layout.a_max + 3, 0.0);
  for (std::size_t a = 0; a < ro.q.size(); ++a) x[a] = ro.q[a] / tp.delta;
  x[tp.layout.a_max + 0] = ro.rp.own;
  x[tp.layout.a_max + 1] = ro.rp.external;
  x[tp.layout.a_max + 2] = ro.bv / tp.delta;
  return x;
}

// Scale of the regret-like block. The learned post normalizes by it before
// the MLP: regret matching is scale-invariant and the normalization commutes
// with latent aggregation, while shrinking the function the net must learn.
inline double regret_block_scale(const LatentLayout& lay,
                                 const std::vector<double>& values,
                                 const Mask& legal) {
  double s = 0.0;
  int n = 0;
  for (int a = 0; a < lay.a_max; ++a)
    if (legal[a]) {
      s += std::abs(values[lay.cfr_offset + a]);
      ++n;
    }
  return s / std::max(n, 1) + 1e-6;
}

// Only the regret-like block is scale-normalized.
inline bool in_cfr_block(const LatentLayout& lay, int i) {
  return i >= lay.cfr_offset && i < lay.cfr_offset + lay.a_max;
}

inline std::vector<double> post_input_from_latent(const LatentLayout& lay,
                                                  const LatentVector& latent) {
  double s = regret_block_scale(lay, latent.values, latent.legal_mask);
  std::vector<double> x = latent.values;
  for (int i = 0; i < lay.d; ++i)
    if (in_cfr_block(lay, i)) x[i] /= s;
  return x;
}

// Jacobian-transpose of post_input_from_latent (for losses that backprop
// through the post into the aggregation).
inline std::vector<double> post_input_backward(const LatentLayout& lay,
                                               const LatentVector& latent,
                                               const std::vector<double>& dIn) {
  double s = regret_block_scale(lay, latent.values, latent.legal_mask);
  int n = 0;
  for (int a = 0; a < lay.a_max; ++a)
    if (latent.legal_mask[a]) ++n;
  // dot = sum_i dIn_i * z_i over the normalized block
  double dot = 0.0;
  for (int i = 0; i < lay.d; ++i)
    if (in_cfr_block(lay, i)) dot += dIn[i] * latent.values[i];
  std::vector<double> out = dIn;
  for (int i = 0; i < lay.d; ++i)
    if (in_cfr_block(lay, i)) out[i] = dIn[i] / s;
  for (int a = 0; a < lay.a_max; ++a)
    if (latent.legal_mask[a]) {
      double z = latent.values[lay.cfr_offset + a];
      double dsign = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
      out[lay.cfr_offset + a] -= dot * dsign / (s * s * std::max(n, 1));
    }
  return out;
}

}  // namespace detail

inline Mask pad_mask(int num_actions, int a_max) {
  Mask m(a_max, 0);
  for (int a = 0; a < num_actions; ++a) m[a] = 1;
  return m;
}

// RO outputs at one infoset -> latent vector.
//   explicit_psro: action block = masked softmax of q, rest zero.
//   explicit_cfr:  action block = external reach * (q - bv), the
//                  instantaneous counterfactual regret estimate, rest zero.
//   learned:       branched MLP head over normalized (q, own, ext, bv).
inline LatentVector pre_transform(const TransformPair& tp,
                                  const RoInfosetOutput& ro, int num_actions) {
  require(num_actions <= tp.layout.a_max, "action count exceeds layout");
  require(static_cast<int>(ro.q.size()) == num_actions,
          "q length must match the action count");
  LatentVector lv;
  lv.legal_mask = pad_mask(num_actions, tp.layout.a_max);
  lv.values.assign(tp.layout.d, 0.0);
  switch (tp.pre_kind) {
    case PreTransformKind::explicit_psro: {
      std::vector<double> padded(tp.layout.a_max, 0.0);
      for (int a = 0; a < num_actions; ++a) padded[a] = ro.q[a];
      std::vector<double> soft = masked_softmax(padded, lv.legal_mask);
      for (int a = 0; a < num_actions; ++a) lv.values[a] = soft[a];
      break;
    }
    case PreTransformKind::explicit_cfr: {
      for (int a = 0; a < num_actions; ++a)
        lv.values[a] = ro.rp.external * (ro.q[a] - ro.bv);
      break;
    }
    case PreTransformKind::learned: {
      std::vector<double> raw =
          forward(tp.pre_net, detail::learned_pre_input(tp, ro));
      lv.values =
          detail::apply_pre_head(tp.layout, tp.pre_slopes, raw, lv.legal_mask);
      break;
    }
  }
  return lv;
}

// Latent vector -> distribution over the infoset's legal actions.
inline std::vector<double> post_transform(const TransformPair& tp,
                                          const LatentVector& latent) {
  const LatentLayout& lay = tp.layout;
  int num_actions = 0;
  for (std::uint8_t b : latent.legal_mask) num_actions += b;
  require(num_actions >= 1, "latent without legal actions");
  std::vector<double> out(num_actions, 0.0);
  switch (tp.post_kind) {
    case PostTransformKind::explicit_identity_renorm: {
      double sum = 0.0;
      for (int a = 0; a < num_actions; ++a) {
        out[a] = std::max(latent.values[lay.psro_offset + a], 0.0);
        sum += out[a];
      }
      if (sum > 0.0)
        for (double& x : out) x /= sum;
      else
        out.assign(out.size(), 1.0 / out.size());
      break;
    }
    case PostTransformKind::explicit_regret_matching: {
      std::vector<double> regrets(num_actions);
      for (int a = 0; a < num_actions; ++a)
        regrets[a] = latent.values[lay.cfr_offset + a];
      out = regret_matching(regrets);
      break;
    }
    case PostTransformKind::learned: {
      std::vector<double> dist =
          forward(tp.post_net, detail::post_input_from_latent(lay, latent),
                  &latent.legal_mask);
      out.assign(dist.begin(), dist.begin() + num_actions);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pretraining against the explicit reference transforms on random
// (q, reach, sampling-policy) draws. Everything runs in normalized payoff
// units (q in [-1/2, 1/2]); the runtime normalization by delta keeps the
// learned modules scale-free.

enum class PretrainTarget { psro, cfr, both };

struct TransformPretrainConfig {
  int steps = 10000;
  int batch_size = 1000;
  double lr = 5e-3;
  bool cosine_decay = true;   // anneal to lr/20 over the run
  bool full_actions = true;   // sample the full action count, as the
                              // fixed-dimension pretraining batches do
  int heldout = 2000;
  std::uint64_t seed = 0;
};

struct TransformPretrainReport {
  double pre_cfr_mse = 0.0;   // held-out MSE of the regret branch
  double pre_psro_mse = 0.0;  // held-out MSE of the probability branch
  double post_l1 = 0.0;  // held-out mean L1 of post(pre(.)) vs the explicit
                         // paradigm output (regret matching for cfr/both,
                         // identity-on-distribution for psro)
};

namespace detail {

struct PretrainSample {
  RoInfosetOutput ro;
  int num_actions = 0;
  Mask legal;                      // padded to a_max
  std::vector<double> cfr_label;   // size num_actions
  std::vector<double> psro_label;  // size a_max (distribution w/ padding 0)
};

inline PretrainSample draw_pretrain_sample(int a_max, bool full_actions,
                                           Rng& rng) {
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::uniform_real_distribution<double> unifq(-0.5, 0.5);
  PretrainSample s;
  s.num_actions = full_actions || a_max == 2
                      ? a_max
                      : 2 + static_cast<int>(rng() % (a_max - 1));
  s.legal = pad_mask(s.num_actions, a_max);
  s.ro.q.resize(s.num_actions);
  for (double& x : s.ro.q) x = unifq(rng);
  s.ro.rp.own = unif01(rng);
  s.ro.rp.external = unif01(rng);
  s.ro.rp.total = s.ro.rp.own * s.ro.rp.external;
  std::vector<double> zeta(s.num_actions);
  double zsum = 0.0;
  for (double& z : zeta) {
    z = -std::log(std::max(unif01(rng), 1e-300));
    zsum += z;
  }
  s.ro.bv = 0.0;
  for (int a = 0; a < s.num_actions; ++a) {
    zeta[a] /= zsum;
    s.ro.bv += zeta[a] * s.ro.q[a];
  }
  s.cfr_label.resize(s.num_actions);
  for (int a = 0; a < s.num_actions; ++a)
    s.cfr_label[a] = s.ro.rp.external * (s.ro.q[a] - s.ro.bv);
  std::vector<double> padded(a_max, 0.0);
  for (int a = 0; a < s.num_actions; ++a) padded[a] = s.ro.q[a];
  s.psro_label = masked_softmax(padded, s.legal);
  return s;
}

}  // namespace detail

// Trains the learned pre branch(es) toward the explicit transforms and the
// learned post toward regret matching (cfr/both targets) or the identity on
// distributions (psro target). target=both needs d >= 2*a_max so the two
// branches can be fitted on disjoint dimension blocks simultaneously.
inline TransformPretrainReport pretrain_transforms(
    TransformPair& tp, PretrainTarget target,
    const TransformPretrainConfig& cfg) {
  require(tp.pre_kind == PreTransformKind::learned &&
              tp.post_kind == PostTransformKind::learned,
          "pretraining applies to learned transform pairs");
  const LatentLayout& lay = tp.layout;
  if (target == PretrainTarget::both && lay.d < 2 * lay.a_max)
    throw ConfigError("dual-branch pretraining needs d >= 2*a_max");
  bool want_cfr = target != PretrainTarget::psro;
  bool want_psro = target != PretrainTarget::cfr;

  Rng rng(mix_seed(cfg.seed ^ 0x7472616eULL));
  AdamState pre_adam = make_adam(tp.pre_net, cfg.lr);
  AdamVec slope_adam = make_adam_vec(tp.pre_slopes.size(), cfg.lr);
  AdamState post_adam = make_adam(tp.post_net, cfg.lr);
  ForwardCache cache;

  // the post only starts once the pre's outputs have settled; its schedule
  // runs over its own window
  const int post_start = cfg.steps / 10;
  for (int step = 0; step < cfg.steps; ++step) {
    bool train_post = step >= post_start;
    if (cfg.cosine_decay) {
      double f = 0.5 * (1.0 + std::cos(3.14159265358979323846 * step /
                                       std::max(cfg.steps, 1)));
      double lr_t = cfg.lr * std::max(f, 0.05);
      pre_adam.lr = lr_t;
      slope_adam.lr = lr_t;
      double fp = 0.5 * (1.0 + std::cos(3.14159265358979323846 *
                                        (step - post_start) /
                                        std::max(cfg.steps - post_start, 1)));
      post_adam.lr = cfg.lr * std::max(fp, 0.05);
    }
    MlpGradients pre_grads = zero_gradients(tp.pre_net);
    std::vector<double> slope_grads(tp.pre_slopes.size(), 0.0);
    Batch post_batch;
    int denom = 0;
    std::vector<detail::PretrainSample> samples;
    samples.reserve(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      samples.push_back(
          detail::draw_pretrain_sample(lay.a_max, cfg.full_actions, rng));
      denom += samples.back().num_actions *
               ((want_cfr ? 1 : 0) + (want_psro ? 1 : 0));
    }
    for (const auto& s : samples) {
      // pre net: branched head assembled by hand
      std::vector<double> raw =
          forward_cached(tp.pre_net, detail::learned_pre_input(tp, s.ro),
                         nullptr, cache);
      std::vector<double> out =
          detail::apply_pre_head(lay, tp.pre_slopes, raw, s.legal);
      std::vector<double> dLdout(lay.d, 0.0);
      if (want_cfr)
        for (int a = 0; a < s.num_actions; ++a) {
          int i = lay.cfr_offset + a;
          dLdout[i] = 2.0 * (out[i] - s.cfr_label[a]) / denom;
        }
      if (want_psro)
        for (int a = 0; a < s.num_actions; ++a) {
          int i = lay.psro_offset + a;
          dLdout[i] = 2.0 * (out[i] - s.psro_label[a]) / denom;
        }
      // back through the head
      std::vector<double> dLdraw(lay.d, 0.0);
      double dot = 0.0;
      for (int a = 0; a < lay.a_max; ++a) {
        int i = lay.psro_offset + a;
        dot += out[i] * dLdout[i];
      }
      for (int i = 0; i < lay.d; ++i) {
        if (detail::in_softmax_block(lay, i)) {
          dLdraw[i] = out[i] * (dLdout[i] - dot);
        } else if (raw[i] < 0.0) {
          slope_grads[i] += dLdout[i] * raw[i];
          dLdraw[i] = dLdout[i] * tp.pre_slopes[i];
        } else {
          dLdraw[i] = dLdout[i];
        }
      }
      backward_from(tp.pre_net, cache, std::move(dLdraw), pre_grads);

      // post net: supervised on the pre module's own latent output so the
      // free dims match what the pipeline will feed it. The regression runs
      // in logit space (floored, centered log of the reference distribution)
      // because probability-space MSE saturates far too slowly on the
      // near-zero masses regret matching produces.
      // post input: the pre module's own latent output so the input stream
      // matches what the pipeline feeds it at run time
      Sample ps;
      LatentVector lv{out, s.legal};
      ps.input = detail::post_input_from_latent(lay, lv);
      ps.mask = s.legal;
      ps.target.assign(lay.a_max, 0.0);
      if (target == PretrainTarget::psro) {
        for (int a = 0; a < s.num_actions; ++a) ps.target[a] = s.psro_label[a];
      } else {
        std::vector<double> rm = regret_matching(s.cfr_label);
        for (int a = 0; a < s.num_actions; ++a) ps.target[a] = rm[a];
      }
      post_batch.push_back(std::move(ps));
    }
    adam_step(tp.pre_net, pre_grads, pre_adam);
    adam_step(tp.pre_slopes, slope_grads, slope_adam);
    if (train_post)
      adam_step(tp.post_net,
                backward(tp.post_net, post_batch, Loss::distribution_mse),
                post_adam);
    if (!finite_params(tp.pre_net) || !finite_params(tp.post_net))
      throw NumericalError("transform pretraining diverged");
  }

  // held-out evaluation
  Rng heldout_rng(mix_seed(cfg.seed ^ 0x6576616cULL));
  TransformPretrainReport rep;
  int n_cfr = 0, n_psro = 0;
  for (int i = 0; i < cfg.heldout; ++i) {
    auto s =
        detail::draw_pretrain_sample(lay.a_max, cfg.full_actions, heldout_rng);
    LatentVector lv = pre_transform(tp, s.ro, s.num_actions);
    if (want_cfr) {
      double mse = 0.0;
      for (int a = 0; a < s.num_actions; ++a) {
        double d = lv.values[lay.cfr_offset + a] - s.cfr_label[a];
        mse += d * d;
      }
      rep.pre_cfr_mse += mse / s.num_actions;
      n_cfr++;
    }
    if (want_psro) {
      double mse = 0.0;
      for (int a = 0; a < s.num_actions; ++a) {
        double d = lv.values[lay.psro_offset + a] - s.psro_label[a];
        mse += d * d;
      }
      rep.pre_psro_mse += mse / s.num_actions;
      n_psro++;
    }
    std::vector<double> post_ref =
        target == PretrainTarget::psro
            ? std::vector<double>(s.psro_label.begin(),
                                  s.psro_label.begin() + s.num_actions)
            : regret_matching(s.cfr_label);
    rep.post_l1 += l1_distance(post_transform(tp, lv), post_ref);
  }
  if (n_cfr) rep.pre_cfr_mse /= n_cfr;
  if (n_psro) rep.pre_psro_mse /= n_psro;
  rep.post_l1 /= cfg.heldout;
  return rep;
}

// Transform checkpoints: branch-split metadata in the header, then the two
// networks and the head slopes.
inline void save_transforms(const TransformPair& tp, std::ostream& os) {
  os << "udef-transforms v1\n";
  os << "layout " << tp.layout.d << " " << tp.layout.a_max << " "
     << tp.layout.cfr_offset << " " << tp.layout.psro_offset << "\n";
  os << "delta ";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", tp.delta);
  os << buf << "\nslopes";
  for (double s : tp.pre_slopes) {
    std::snprintf(buf, sizeof(buf), " %a", s);
    os << buf;
  }
  os << "\n";
  save_mlp(tp.pre_net, os);
  save_mlp(tp.post_net, os);
}

inline TransformPair load_transforms(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  require(magic == "udef-transforms" && version == "v1",
          "bad transform checkpoint header");
  TransformPair tp;
  tp.pre_kind = PreTransformKind::learned;
  tp.post_kind = PostTransformKind::learned;
  std::string tag;
  is >> tag >> tp.layout.d >> tp.layout.a_max >> tp.layout.cfr_offset >>
      tp.layout.psro_offset;
  require(tag == "layout", "bad transform checkpoint: layout");
  std::string tok;
  is >> tag >> tok;
  require(tag == "delta", "bad transform checkpoint: delta");
  tp.delta = std::strtod(tok.c_str(), nullptr);
  is >> tag;
  require(tag == "slopes", "bad transform checkpoint: slopes");
  tp.pre_slopes.resize(tp.layout.d);
  for (double& s : tp.pre_slopes) {
    is >> tok;
    s = std::strtod(tok.c_str(), nullptr);
  }
  tp.pre_net = load_mlp(is);
  tp.post_net = load_mlp(is);
  return tp;
}

}  // namespace udef
