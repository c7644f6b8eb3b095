#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udef/common.hpp"
#include "udef/game.hpp"

namespace udef {

// Regret matching: positive parts normalized, uniform when nothing positive.
inline std::vector<double> regret_matching(const std::vector<double>& regrets) {
  std::vector<double> out(regrets.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < regrets.size(); ++a) {
    require(std::isfinite(regrets[a]), "regret_matching: non-finite regret");
    out[a] = std::max(regrets[a], 0.0);
    sum += out[a];
  }
  if (sum > 0.0)
    for (double& x : out) x /= sum;
  else
    out.assign(out.size(), 1.0 / out.size());
  return out;
}

enum class CfrVariant { vanilla, plus, linear };

inline std::string to_string(CfrVariant v) {
  switch (v) {
    case CfrVariant::vanilla: return "vanilla";
    case CfrVariant::plus: return "plus";
    case CfrVariant::linear: return "linear";
  }
  return "?";
}

struct CfrState {
  std::vector<std::vector<double>> cumulative_regret;   // by infoset id
  std::vector<std::vector<double>> cumulative_strategy;  // by infoset id
  int iteration = 0;
  CfrVariant variant = CfrVariant::vanilla;
};

inline CfrState make_cfr_state(const Game& g,
                               CfrVariant variant = CfrVariant::vanilla) {
  CfrState s;
  s.variant = variant;
  s.cumulative_regret.resize(g.num_infosets());
  s.cumulative_strategy.resize(g.num_infosets());
  for (int id = 0; id < g.num_infosets(); ++id) {
    s.cumulative_regret[id].assign(g.infosets[id].num_actions(), 0.0);
    s.cumulative_strategy[id].assign(g.infosets[id].num_actions(), 0.0);
  }
  return s;
}

// Current (regret-matched) behavioral profile of a CFR state.
inline Profile current_profile(const Game& g, const CfrState& s) {
  Profile prof;
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p])
      prof[p].set(id, regret_matching(s.cumulative_regret[id]));
  return prof;
}

// One CFR sweep with alternating player updates: player 1's counterfactual
// values see player 0's refreshed regret-matched strategy. Strategy sums
// accumulate own-reach-weighted current strategies. Linear weighting
// multiplies both updates by t.
inline void cfr_iteration(const Game& g, CfrState& s) {
  int t = s.iteration + 1;  // 1-based index of the step being performed
  double w = s.variant == CfrVariant::linear ? static_cast<double>(t) : 1.0;
  for (int player = 0; player < 2; ++player) {
    Profile cur = current_profile(g, s);
    auto cf = counterfactual_values(g, cur, player);
    auto own = own_reach_per_infoset(g, player, cur[player]);
    for (int id : g.player_infosets[player]) {
      auto& regret = s.cumulative_regret[id];
      auto& strat = s.cumulative_strategy[id];
      const auto& policy = cur[player].at(id);
      for (std::size_t a = 0; a < regret.size(); ++a) {
        regret[a] += w * (cf[id].v_per_action[a] - cf[id].v);
        if (s.variant == CfrVariant::plus) regret[a] = std::max(regret[a], 0.0);
        strat[a] += w * own[id] * policy[a];
      }
    }
  }
  s.iteration = t;
}

// Normalized cumulative strategy; unreached infosets fall back to uniform.
inline Profile average_strategy(const Game& g, const CfrState& s) {
  require(s.iteration >= 1, "average_strategy requires iteration >= 1");
  Profile prof;
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p]) {
      const auto& acc = s.cumulative_strategy[id];
      double sum = std::accumulate(acc.begin(), acc.end(), 0.0);
      std::vector<double> d(acc.size());
      if (sum > 0.0)
        for (std::size_t a = 0; a < d.size(); ++a) d[a] = acc[a] / sum;
      else
        d.assign(d.size(), 1.0 / d.size());
      prof[p].set(id, std::move(d));
    }
  return prof;
}

// ---------------------------------------------------------------------------
// Matrix-game equilibrium via regret-matching self-play. Kept
// dependency-free; used by the nash meta-solver and as a label generator.

struct MatrixNash {
  std::vector<double> row;
  std::vector<double> col;
  double exploitability = 0.0;
};

inline double matrix_exploitability(
    const std::vector<std::vector<double>>& m, const std::vector<double>& x,
    const std::vector<double>& y) {
  std::size_t rows = m.size(), cols = m[0].size();
  double best_row = -1e300;
  for (std::size_t i = 0; i < rows; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < cols; ++j) v += m[i][j] * y[j];
    best_row = std::max(best_row, v);
  }
  double best_col = 1e300;
  for (std::size_t j = 0; j < cols; ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < rows; ++i) v += m[i][j] * x[i];
    best_col = std::min(best_col, v);
  }
  return best_row - best_col;
}

// Alternating regret-matching(+) self-play with linearly weighted averaging.
// Runs at least `steps` iterations and keeps going in blocks until the
// averaged pair is within `tol_scale` * (payoff range) of a Nash equilibrium.
inline MatrixNash solve_matrix_nash(const std::vector<std::vector<double>>& m,
                                    int steps = 10000,
                                    double tol_scale = 1e-3) {
  require(!m.empty() && !m[0].empty(), "empty matrix");
  std::size_t rows = m.size(), cols = m[0].size();
  double lo = 1e300, hi = -1e300;
  for (const auto& r : m)
    for (double v : r) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  double delta = std::max(hi - lo, 1e-12);

  std::vector<double> r_row(rows, 0.0), r_col(cols, 0.0);
  std::vector<double> s_row(rows, 0.0), s_col(cols, 0.0);
  MatrixNash out;
  const int max_steps = 1000000;
  for (int t = 1; t <= max_steps; ++t) {
    std::vector<double> x = regret_matching(r_row);
    std::vector<double> y = regret_matching(r_col);
    // row update against y
    std::vector<double> u_row(rows, 0.0);
    double v_row = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) u_row[i] += m[i][j] * y[j];
      v_row += x[i] * u_row[i];
    }
    for (std::size_t i = 0; i < rows; ++i)
      r_row[i] = std::max(r_row[i] + u_row[i] - v_row, 0.0);
    // column update against the refreshed row strategy (alternating)
    x = regret_matching(r_row);
    std::vector<double> u_col(cols, 0.0);
    double v_col = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) u_col[j] -= m[i][j] * x[i];
      v_col += y[j] * u_col[j];
    }
    for (std::size_t j = 0; j < cols; ++j)
      r_col[j] = std::max(r_col[j] + u_col[j] - v_col, 0.0);

    double w = static_cast<double>(t);
    for (std::size_t i = 0; i < rows; ++i) s_row[i] += w * x[i];
    for (std::size_t j = 0; j < cols; ++j) s_col[j] += w * y[j];

    if (t >= steps && t % 1000 == 0) {
      out.row = regret_matching(s_row);  // normalizes the nonnegative sums
      out.col = regret_matching(s_col);
      out.exploitability = matrix_exploitability(m, out.row, out.col);
      if (out.exploitability <= tol_scale * delta) return out;
    }
  }
  out.row = regret_matching(s_row);
  out.col = regret_matching(s_col);
  out.exploitability = matrix_exploitability(m, out.row, out.col);
  return out;
}

// ---------------------------------------------------------------------------
// Meta-game over response populations

enum class MetaEstimation { exact, sampled };

struct MetaGame {
  std::vector<std::vector<double>> payoff_matrix;  // player-0 payoffs
  std::vector<PolicyTable> row_responses;          // player 0
  std::vector<PolicyTable> col_responses;          // player 1
  MetaEstimation estimation = MetaEstimation::exact;
  int episodes = 1000;        // per sampled entry
  std::uint64_t seed = 0;     // base seed for sampled entries

  std::size_t rows() const { return row_responses.size(); }
  std::size_t cols() const { return col_responses.size(); }
};

enum class MetaSolver { uniform, nash, linear, last };

inline std::string to_string(MetaSolver s) {
  switch (s) {
    case MetaSolver::uniform: return "uniform";
    case MetaSolver::nash: return "nash";
    case MetaSolver::linear: return "linear";
    case MetaSolver::last: return "last";
  }
  return "?";
}

inline std::vector<double> scheme_weights(MetaSolver s, std::size_t k) {
  require(k >= 1, "empty response set");
  std::vector<double> w(k, 0.0);
  switch (s) {
    case MetaSolver::uniform:
      w.assign(k, 1.0 / k);
      break;
    case MetaSolver::linear: {
      double norm = k * (k + 1) / 2.0;
      for (std::size_t i = 0; i < k; ++i) w[i] = (i + 1) / norm;
      break;
    }
    case MetaSolver::last:
      w[k - 1] = 1.0;
      break;
    case MetaSolver::nash:
      require(false, "nash weights need the payoff matrix");
  }
  return w;
}

struct MetaStrategy {
  std::vector<double> row;
  std::vector<double> col;
};

inline MetaStrategy meta_solve(const MetaGame& m, MetaSolver solver) {
  if (m.rows() == 0 || m.cols() == 0)
    throw ConfigError("meta_solve on an empty meta-game");
  if (solver == MetaSolver::nash) {
    MatrixNash nash = solve_matrix_nash(m.payoff_matrix);
    return {nash.row, nash.col};
  }
  return {scheme_weights(solver, m.rows()), scheme_weights(solver, m.cols())};
}

// Monte Carlo payoff of (row, col) with antithetic episode pairs: episode 2k
// replays the uniform draws of episode 2k as 1-u.
inline double sampled_payoff(const Game& g, const PolicyTable& row,
                             const PolicyTable& col, int episodes,
                             std::uint64_t seed) {
  Profile prof{row, col};
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, e / 2));
    bool antithetic = (e % 2) == 1;
    int n = 0;
    while (!g.nodes[n].is_terminal()) {
      const Node& node = g.nodes[n];
      const std::vector<double>& probs =
          node.is_chance() ? node.chance_probs
                           : prof[node.player].at(node.infoset);
      n = node.children[sample_index(probs, rng, antithetic)];
    }
    sum += g.nodes[n].utility[0];
  }
  return sum / episodes;
}

inline double meta_entry(const Game& g, const MetaGame& m,
                         const PolicyTable& row, const PolicyTable& col,
                         std::size_t i, std::size_t j, int episodes) {
  if (m.estimation == MetaEstimation::exact)
    return expected_value(g, {row, col})[0];
  return sampled_payoff(g, row, col, episodes,
                        derive_seed(m.seed, 0x6d657461ULL, i, j));
}

// Appends responses and fills the new entries, exactly or by Monte Carlo
// with per-entry seeds (so parallel evaluation schedules cannot change the
// result).
inline MetaGame augment_meta_game(const Game& g, MetaGame m,
                                  const std::vector<PolicyTable>& new_rows,
                                  const std::vector<PolicyTable>& new_cols,
                                  int episodes) {
  std::size_t r0 = m.rows(), c0 = m.cols();
  for (const PolicyTable& p : new_rows) m.row_responses.push_back(p);
  for (const PolicyTable& p : new_cols) m.col_responses.push_back(p);
  m.payoff_matrix.resize(m.rows());
  for (auto& row : m.payoff_matrix) row.resize(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i >= r0 || j >= c0)
        m.payoff_matrix[i][j] = meta_entry(g, m, m.row_responses[i],
                                           m.col_responses[j], i, j, episodes);
  return m;
}

// One fictitious-play step: exact best responses against the opponent's
// uniform per-infoset average of historical responses, appended to the
// meta-game. (The per-infoset average is the mixture notion the latent-space
// aggregation realizes, so this doubles as the reduction oracle.)
inline MetaGame fictitious_play_step(const Game& g, const MetaGame& m) {
  require(m.rows() >= 1 && m.cols() >= 1, "fictitious play needs a seed policy");
  std::vector<double> wr(m.rows(), 1.0 / m.rows());
  std::vector<double> wc(m.cols(), 1.0 / m.cols());
  PolicyTable row_avg = behavioral_mix(g, 0, m.row_responses, wr);
  PolicyTable col_avg = behavioral_mix(g, 1, m.col_responses, wc);
  PolicyTable new_row = best_response(g, col_avg, 0).policy;
  PolicyTable new_col = best_response(g, row_avg, 1).policy;
  return augment_meta_game(g, m, {new_row}, {new_col}, m.episodes);
}

}  // namespace udef
