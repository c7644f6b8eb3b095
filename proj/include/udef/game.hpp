#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "udef/common.hpp"

namespace udef {

inline constexpr int kChancePlayer = -1;
inline constexpr int kTerminalPlayer = -2;

// One history in the game tree. Flat storage, children linked by index.
struct Node {
  int player = kTerminalPlayer;  // 0/1 decision, kChancePlayer, kTerminalPlayer
  int parent = -1;
  int action_from_parent = -1;
  int infoset = -1;                  // decision nodes only
  std::vector<int> children;         // aligned with the infoset's action list
  std::vector<double> chance_probs;  // chance nodes only
  std::array<double, 2> utility{0.0, 0.0};  // terminal nodes only

  bool is_terminal() const { return player == kTerminalPlayer; }
  bool is_chance() const { return player == kChancePlayer; }
};

struct Infoset {
  int player = 0;
  std::string key;                   // observation string, unique per (player, infoset)
  std::vector<std::string> actions;  // action labels, index = action id
  std::vector<int> nodes;            // member histories, DFS order

  int num_actions() const { return static_cast<int>(actions.size()); }
};

// Immutable two-player zero-sum extensive-form game. Construction goes
// through GameBuilder which validates the invariants; evaluation functions
// below are pure and safe to share across threads.
struct Game {
  std::string name;
  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<Infoset> infosets;
  std::array<std::vector<int>, 2> player_infosets;  // infoset ids per player
  std::vector<std::vector<double>> infoset_features;
  int max_actions = 0;
  std::array<double, 2> utility_range{0.0, 0.0};  // Δ_i = max u_i - min u_i

  int num_infosets() const { return static_cast<int>(infosets.size()); }
  int feature_dim() const {
    return infoset_features.empty() ? 0
                                    : static_cast<int>(infoset_features[0].size());
  }
};

// Behavioral strategy for one player: infoset id -> distribution over that
// infoset's legal actions. Entries for the other player's infosets stay empty.
struct PolicyTable {
  std::vector<std::vector<double>> entries;

  bool has(int infoset) const {
    return infoset < static_cast<int>(entries.size()) &&
           !entries[infoset].empty();
  }
  const std::vector<double>& at(int infoset) const {
    if (!has(infoset))
      throw IncompletePolicyError("no policy entry for infoset " +
                                  std::to_string(infoset));
    return entries[infoset];
  }
  void set(int infoset, std::vector<double> dist) {
    if (infoset >= static_cast<int>(entries.size()))
      entries.resize(infoset + 1);
    entries[infoset] = std::move(dist);
  }
};

using Profile = std::array<PolicyTable, 2>;

struct ReachDecomposition {
  double own = 1.0;       // viewer's action probabilities along the history
  double external = 1.0;  // opponent and chance contributions
  double total = 1.0;     // own * external
};

// ---------------------------------------------------------------------------
// Construction

class GameBuilder {
 public:
  // Root is created on demand by the first add_* call with parent = -1.
  int add_chance(int parent, int action_from_parent,
                 std::vector<double> probs) {
    int id = new_node(parent, action_from_parent);
    nodes_[id].player = kChancePlayer;
    nodes_[id].children.assign(probs.size(), -1);
    nodes_[id].chance_probs = std::move(probs);
    return id;
  }

  int add_decision(int parent, int action_from_parent, int player,
                   const std::string& infoset_key,
                   std::vector<std::string> action_names,
                   std::vector<double> features) {
    int id = new_node(parent, action_from_parent);
    nodes_[id].player = player;
    nodes_[id].children.assign(action_names.size(), -1);
    keys_.resize(nodes_.size());
    keys_[id] = infoset_key;
    actions_.resize(nodes_.size());
    actions_[id] = std::move(action_names);
    features_.resize(nodes_.size());
    features_[id] = std::move(features);
    return id;
  }

  int add_terminal(int parent, int action_from_parent, double u0, double u1) {
    require(std::abs(u0 + u1) <= 1e-12, "terminal utilities must be zero-sum");
    int id = new_node(parent, action_from_parent);
    nodes_[id].player = kTerminalPlayer;
    nodes_[id].utility = {u0, u1};
    return id;
  }

  Game finish(std::string name) {
    Game g;
    g.name = std::move(name);
    g.nodes = nodes_;
    assign_infosets(g);
    validate(g);
    return g;
  }

 private:
  int new_node(int parent, int action_from_parent) {
    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].parent = parent;
    nodes_[id].action_from_parent = action_from_parent;
    if (parent >= 0) {
      require(action_from_parent >= 0 &&
                  action_from_parent <
                      static_cast<int>(nodes_[parent].children.size()),
              "child action index out of range");
      require(nodes_[parent].children[action_from_parent] < 0,
              "child slot already filled");
      nodes_[parent].children[action_from_parent] = id;
    } else {
      require(id == 0, "only the first node may be the root");
    }
    return id;
  }

  // Infoset ids in deterministic DFS (preorder) discovery order.
  void assign_infosets(Game& g) {
    std::map<std::pair<int, std::string>, int> ids;
    std::vector<int> stack{0};
    std::vector<int> order;
    order.reserve(g.nodes.size());
    // iterative preorder, children visited in action order
    std::function<void(int)> dfs = [&](int n) {
      order.push_back(n);
      for (int c : g.nodes[n].children) dfs(c);
    };
    dfs(0);
    for (int n : order) {
      Node& node = g.nodes[n];
      if (node.player < 0) continue;
      auto key = std::make_pair(node.player, keys_[n]);
      auto it = ids.find(key);
      if (it == ids.end()) {
        int id = static_cast<int>(g.infosets.size());
        ids.emplace(key, id);
        Infoset is;
        is.player = node.player;
        is.key = keys_[n];
        is.actions = actions_[n];
        g.infosets.push_back(std::move(is));
        g.player_infosets[node.player].push_back(id);
        g.infoset_features.push_back(features_[n]);
        node.infoset = id;
      } else {
        node.infoset = it->second;
        require(actions_[n] == g.infosets[it->second].actions,
                "histories in one infoset must share the action list");
        require(features_[n] == g.infoset_features[it->second],
                "histories in one infoset must share features");
      }
      g.infosets[node.infoset].nodes.push_back(n);
    }
    for (const Infoset& is : g.infosets)
      g.max_actions = std::max(g.max_actions, is.num_actions());
  }

  void validate(Game& g) const {
    require(!g.nodes.empty(), "empty game");
    std::array<double, 2> lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const Node& n : g.nodes) {
      if (n.is_terminal()) {
        require(n.children.empty(), "terminal node with children");
        for (int p = 0; p < 2; ++p) {
          lo[p] = std::min(lo[p], n.utility[p]);
          hi[p] = std::max(hi[p], n.utility[p]);
        }
        continue;
      }
      require(!n.children.empty(), "non-terminal node without actions");
      for (int c : n.children) require(c >= 0, "unfilled child slot");
      if (n.is_chance()) {
        double sum = std::accumulate(n.chance_probs.begin(),
                                     n.chance_probs.end(), 0.0);
        require(std::abs(sum - 1.0) <= 1e-12,
                "chance probabilities must sum to 1");
      }
    }
    for (int p = 0; p < 2; ++p) g.utility_range[p] = hi[p] - lo[p];
    // perfect recall: every history in an infoset must carry the same own
    // (infoset, action) sequence, hence the same own reach under any policy
    for (const Infoset& is : g.infosets) {
      const std::string ref = own_action_sequence(g, is.nodes.front(), is.player);
      for (int n : is.nodes)
        require(own_action_sequence(g, n, is.player) == ref,
                "perfect recall violated in infoset '" + is.key + "'");
    }
  }

  static std::string own_action_sequence(const Game& g, int node, int player) {
    std::string seq;
    int n = node;
    while (g.nodes[n].parent >= 0) {
      int p = g.nodes[n].parent;
      if (g.nodes[p].player == player)
        seq += std::to_string(g.nodes[p].infoset) + ":" +
               std::to_string(g.nodes[n].action_from_parent) + ";";
      n = p;
    }
    return seq;
  }

  std::vector<Node> nodes_;
  std::vector<std::string> keys_;
  std::vector<std::vector<std::string>> actions_;
  std::vector<std::vector<double>> features_;
};

// ---------------------------------------------------------------------------
// Policy helpers

inline PolicyTable uniform_policy(const Game& g, int player) {
  PolicyTable t;
  for (int id : g.player_infosets[player]) {
    int a = g.infosets[id].num_actions();
    t.set(id, std::vector<double>(a, 1.0 / a));
  }
  return t;
}

inline Profile uniform_profile(const Game& g) {
  return {uniform_policy(g, 0), uniform_policy(g, 1)};
}

inline PolicyTable random_policy(const Game& g, int player, Rng& rng) {
  PolicyTable t;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int id : g.player_infosets[player]) {
    int a = g.infosets[id].num_actions();
    std::vector<double> d(a);
    double sum = 0.0;
    for (double& x : d) {
      x = -std::log(std::max(unif(rng), 1e-300));  // Dirichlet(1)
      sum += x;
    }
    for (double& x : d) x /= sum;
    t.set(id, d);
  }
  return t;
}

inline void validate_profile(const Game& g, const Profile& profile) {
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p]) {
      const auto& d = profile[p].at(id);
      require(static_cast<int>(d.size()) == g.infosets[id].num_actions(),
              "policy entry length mismatch at infoset " + std::to_string(id));
    }
}

// ---------------------------------------------------------------------------
// Exact evaluation

inline std::array<double, 2> expected_value(const Game& g,
                                            const Profile& profile) {
  std::function<std::array<double, 2>(int)> ev = [&](int n) {
    const Node& node = g.nodes[n];
    if (node.is_terminal()) return node.utility;
    std::array<double, 2> out{0.0, 0.0};
    const std::vector<double>& probs =
        node.is_chance() ? node.chance_probs
                         : profile[node.player].at(node.infoset);
    for (std::size_t a = 0; a < node.children.size(); ++a) {
      if (probs[a] == 0.0) continue;
      auto child = ev(node.children[a]);
      out[0] += probs[a] * child[0];
      out[1] += probs[a] * child[1];
    }
    return out;
  };
  return ev(0);
}

inline ReachDecomposition reach(const Game& g, const Profile& profile,
                                int history, int viewer) {
  require(history >= 0 && history < static_cast<int>(g.nodes.size()),
          "history out of range");
  ReachDecomposition r;
  int n = history;
  while (g.nodes[n].parent >= 0) {
    const Node& par = g.nodes[g.nodes[n].parent];
    int a = g.nodes[n].action_from_parent;
    double p = par.is_chance() ? par.chance_probs[a]
                               : profile[par.player].at(par.infoset)[a];
    if (par.player == viewer)
      r.own *= p;
    else
      r.external *= p;
    n = g.nodes[n].parent;
  }
  r.total = r.own * r.external;
  return r;
}

struct CfValues {
  double v = 0.0;                    // u_i^sigma(I)
  std::vector<double> v_per_action;  // u_i^sigma(I, a)
};

// Counterfactual values for every infoset of `player` under `profile`,
// indexed by infoset id (entries for the other player's infosets stay empty).
inline std::vector<CfValues> counterfactual_values(const Game& g,
                                                   const Profile& profile,
                                                   int player) {
  std::vector<CfValues> out(g.num_infosets());
  for (int id : g.player_infosets[player])
    out[id].v_per_action.assign(g.infosets[id].num_actions(), 0.0);

  // Returns E[u_player | h reached] under the full profile; accumulates
  // external-reach-weighted values at the player's decision nodes.
  std::function<double(int, double)> walk = [&](int n, double ext) {
    const Node& node = g.nodes[n];
    if (node.is_terminal()) return node.utility[player];
    const std::vector<double>& probs =
        node.is_chance() ? node.chance_probs
                         : profile[node.player].at(node.infoset);
    double value = 0.0;
    if (node.player == player) {
      for (std::size_t a = 0; a < node.children.size(); ++a) {
        double child = walk(node.children[a], ext);
        out[node.infoset].v_per_action[a] += ext * child;
        value += probs[a] * child;
      }
      out[node.infoset].v += ext * value;
    } else {
      for (std::size_t a = 0; a < node.children.size(); ++a) {
        if (probs[a] == 0.0) {
          // still traverse: deeper infosets of `player` may be reachable
          // with zero weight and must keep zero contributions, cheap to skip
          continue;
        }
        value += probs[a] * walk(node.children[a], ext * probs[a]);
      }
    }
    return value;
  };
  walk(0, 1.0);
  return out;
}

struct BestResponseResult {
  PolicyTable policy;  // pure except ties (lowest action index wins)
  double value = 0.0;  // max_{sigma_i'} u_i(sigma_i', sigma_{-i})
};

// Exact best response for `player` against `opponent` (policy of 1-player),
// by bottom-up dynamic programming over the player's infosets weighted by
// external reach.
inline BestResponseResult best_response(const Game& g,
                                        const PolicyTable& opponent,
                                        int player) {
  int opp = 1 - player;
  // external reach per node (chance + opponent contributions only)
  std::vector<double> ext(g.nodes.size(), 0.0);
  std::function<void(int, double)> seed = [&](int n, double e) {
    ext[n] = e;
    const Node& node = g.nodes[n];
    if (node.is_terminal()) return;
    for (std::size_t a = 0; a < node.children.size(); ++a) {
      double p = 1.0;
      if (node.is_chance())
        p = node.chance_probs[a];
      else if (node.player == opp)
        p = opponent.at(node.infoset)[a];
      seed(node.children[a], e * p);
    }
  };
  seed(0, 1.0);

  std::vector<int> chosen(g.num_infosets(), -1);
  std::vector<double> memo(g.nodes.size(), 0.0);
  std::vector<char> done(g.nodes.size(), 0);
  std::function<double(int)> brv = [&](int n) -> double {
    if (done[n]) return memo[n];
    const Node& node = g.nodes[n];
    double v = 0.0;
    if (node.is_terminal()) {
      v = node.utility[player];
    } else if (node.player == player) {
      int I = node.infoset;
      if (chosen[I] < 0) {
        const Infoset& is = g.infosets[I];
        std::vector<double> q(is.num_actions(), 0.0);
        for (int h : is.nodes)
          for (int a = 0; a < is.num_actions(); ++a)
            q[a] += ext[h] * brv(g.nodes[h].children[a]);
        chosen[I] = static_cast<int>(
            std::max_element(q.begin(), q.end()) - q.begin());
      }
      v = brv(node.children[chosen[I]]);
    } else {
      const std::vector<double>& probs =
          node.is_chance() ? node.chance_probs : opponent.at(node.infoset);
      for (std::size_t a = 0; a < node.children.size(); ++a)
        v += probs[a] * brv(node.children[a]);
    }
    done[n] = 1;
    memo[n] = v;
    return v;
  };

  BestResponseResult res;
  res.value = brv(0);
  for (int id : g.player_infosets[player]) {
    std::vector<double> d(g.infosets[id].num_actions(), 0.0);
    if (chosen[id] < 0) chosen[id] = 0;  // unreachable infoset, any action
    d[chosen[id]] = 1.0;
    res.policy.set(id, std::move(d));
  }
  return res;
}

struct NashConvResult {
  double total = 0.0;
  std::array<double, 2> per_player{0.0, 0.0};
};

inline NashConvResult nash_conv(const Game& g, const Profile& profile) {
  NashConvResult r;
  auto ev = expected_value(g, profile);
  for (int p = 0; p < 2; ++p) {
    auto br = best_response(g, profile[1 - p], p);
    r.per_player[p] = br.value - ev[p];
  }
  r.total = r.per_player[0] + r.per_player[1];
  return r;
}

// ---------------------------------------------------------------------------
// Policy mixing

// Per-infoset weighted mean of action distributions. This is the averaging
// the latent-space aggregation realizes for probability-valued latents.
inline PolicyTable behavioral_mix(const Game& g, int player,
                                  const std::vector<PolicyTable>& policies,
                                  const std::vector<double>& weights) {
  require(policies.size() == weights.size(), "policy/weight length mismatch");
  PolicyTable out;
  for (int id : g.player_infosets[player]) {
    std::vector<double> d(g.infosets[id].num_actions(), 0.0);
    double wsum = 0.0;
    for (std::size_t k = 0; k < policies.size(); ++k) {
      const auto& src = policies[k].at(id);
      for (std::size_t a = 0; a < d.size(); ++a) d[a] += weights[k] * src[a];
      wsum += weights[k];
    }
    if (wsum > 0)
      for (double& x : d) x /= wsum;
    else
      d.assign(d.size(), 1.0 / d.size());
    out.set(id, std::move(d));
  }
  return out;
}

// Own reach probability of every infoset of `player` under `policy`
// (identical across the histories of an infoset by perfect recall).
inline std::vector<double> own_reach_per_infoset(const Game& g, int player,
                                                 const PolicyTable& policy) {
  std::vector<double> node_reach(g.nodes.size(), 0.0);
  std::function<void(int, double)> walk = [&](int n, double r) {
    node_reach[n] = r;
    const Node& node = g.nodes[n];
    for (std::size_t a = 0; a < node.children.size(); ++a) {
      double p = node.player == player ? policy.at(node.infoset)[a] : 1.0;
      walk(node.children[a], r * p);
    }
  };
  walk(0, 1.0);
  std::vector<double> out(g.num_infosets(), 0.0);
  for (int id : g.player_infosets[player])
    out[id] = node_reach[g.infosets[id].nodes.front()];
  return out;
}

// Realization-equivalent behavioral strategy of the w-mixture of `policies`:
// sigma(I,a) proportional to sum_k w_k * pi_k^own(I) * policy_k(I,a).
// Infosets no component reaches fall back to uniform.
inline PolicyTable mix_policies(const Game& g, int player,
                                const std::vector<PolicyTable>& policies,
                                const std::vector<double>& weights) {
  require(policies.size() == weights.size(), "policy/weight length mismatch");
  std::vector<std::vector<double>> num(g.num_infosets());
  std::vector<double> den(g.num_infosets(), 0.0);
  for (int id : g.player_infosets[player])
    num[id].assign(g.infosets[id].num_actions(), 0.0);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    if (weights[k] == 0.0) continue;
    auto reach_k = own_reach_per_infoset(g, player, policies[k]);
    for (int id : g.player_infosets[player]) {
      double w = weights[k] * reach_k[id];
      const auto& src = policies[k].at(id);
      for (std::size_t a = 0; a < src.size(); ++a) num[id][a] += w * src[a];
      den[id] += w;
    }
  }
  PolicyTable out;
  for (int id : g.player_infosets[player]) {
    std::vector<double>& d = num[id];
    if (den[id] > 0)
      for (double& x : d) x /= den[id];
    else
      d.assign(d.size(), 1.0 / d.size());
    out.set(id, std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text dump (golden-file interface)

inline std::string dump_game(const Game& g) {
  std::ostringstream os;
  os << "game " << g.name << " nodes " << g.nodes.size() << " infosets "
     << g.infosets.size() << "\n";
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    const Node& node = g.nodes[n];
    os << "node " << n << " parent " << node.parent << " act "
       << node.action_from_parent;
    if (node.is_terminal()) {
      os << " terminal u " << fmt_double(node.utility[0]) << " "
         << fmt_double(node.utility[1]);
    } else if (node.is_chance()) {
      os << " chance probs";
      for (double p : node.chance_probs) os << " " << fmt_double(p);
      os << " children";
      for (int c : node.children) os << " " << c;
    } else {
      os << " p" << node.player << " infoset " << node.infoset << " children";
      for (int c : node.children) os << " " << c;
    }
    os << "\n";
  }
  for (std::size_t i = 0; i < g.infosets.size(); ++i) {
    const Infoset& is = g.infosets[i];
    os << "infoset " << i << " p" << is.player << " key " << is.key
       << " actions";
    for (const std::string& a : is.actions) os << " " << a;
    os << " nodes";
    for (int n : is.nodes) os << " " << n;
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Concrete games

namespace detail {

inline void one_hot(std::vector<double>& v, int offset, int index) {
  v[offset + index] = 1.0;
}

// betting slots: none / passive (check, call) / aggressive (bet, raise)
inline void encode_bet_seq(std::vector<double>& v, int offset,
                           const std::string& seq, int slots) {
  for (int s = 0; s < slots; ++s) {
    int cls = 0;
    if (s < static_cast<int>(seq.size()))
      cls = (seq[s] == 'b' || seq[s] == 'r') ? 2 : 1;
    v[offset + 3 * s + cls] = 1.0;
  }
}

}  // namespace detail

// Kuhn poker: 3 cards, ante 1, single 1-chip bet round.
// Feature layout: player(2) + card(3) + 2 betting slots(3 each) = 11.
inline Game kuhn_game() {
  GameBuilder b;
  static const char* kCards = "JQK";
  std::vector<std::pair<int, int>> deals;
  for (int c0 = 0; c0 < 3; ++c0)
    for (int c1 = 0; c1 < 3; ++c1)
      if (c0 != c1) deals.emplace_back(c0, c1);
  int root = b.add_chance(-1, -1, std::vector<double>(6, 1.0 / 6.0));

  auto features = [](int player, int card, const std::string& seq) {
    std::vector<double> f(11, 0.0);
    detail::one_hot(f, 0, player);
    detail::one_hot(f, 2, card);
    detail::encode_bet_seq(f, 5, seq, 2);
    return f;
  };
  auto key = [](int card, const std::string& seq) {
    return std::string(1, kCards[card]) + "|" + seq;
  };

  for (std::size_t d = 0; d < deals.size(); ++d) {
    auto [c0, c1] = deals[d];
    int high = c0 > c1 ? 0 : 1;
    auto showdown = [&](int parent, int act, double stake) {
      b.add_terminal(parent, act, high == 0 ? stake : -stake,
                     high == 0 ? -stake : stake);
    };
    // p0 to act: check or bet
    int n0 = b.add_decision(root, static_cast<int>(d), 0, key(c0, ""),
                            {"check", "bet"}, features(0, c0, ""));
    {  // check
      int n1 = b.add_decision(n0, 0, 1, key(c1, "k"), {"check", "bet"},
                              features(1, c1, "k"));
      showdown(n1, 0, 1.0);  // check-check
      int n2 = b.add_decision(n1, 1, 0, key(c0, "kb"), {"fold", "call"},
                              features(0, c0, "kb"));
      b.add_terminal(n2, 0, -1.0, 1.0);  // p0 folds
      showdown(n2, 1, 2.0);              // call
    }
    {  // bet
      int n1 = b.add_decision(n0, 1, 1, key(c1, "b"), {"fold", "call"},
                              features(1, c1, "b"));
      b.add_terminal(n1, 0, 1.0, -1.0);  // p1 folds
      showdown(n1, 1, 2.0);              // call
    }
  }
  return b.finish("kuhn");
}

// Leduc hold'em, conventional research ruleset: 6-card deck (2 suits x 3
// ranks), antes 1, two betting rounds with a 2-bet cap, bet sizes 2 then 4.
// Feature layout: player(2) + private card(6) + public card(7, incl. none) +
// 8 betting slots(3 each) = 39.
inline Game leduc_game() {
  GameBuilder b;
  constexpr int kDeck = 6;
  auto rank = [](int card) { return card / 2; };

  auto features = [](int player, int card, int pub, const std::string& r1,
                     const std::string& r2) {
    std::vector<double> f(39, 0.0);
    detail::one_hot(f, 0, player);
    detail::one_hot(f, 2, card);
    detail::one_hot(f, 8, pub < 0 ? 0 : pub + 1);
    detail::encode_bet_seq(f, 15, r1, 4);
    detail::encode_bet_seq(f, 27, r2, 4);
    return f;
  };
  auto key = [](int card, int pub, const std::string& r1,
                const std::string& r2) {
    std::ostringstream os;
    os << "c" << card << "|p" << (pub < 0 ? std::string("-")
                                          : std::to_string(pub))
       << "|" << r1 << "/" << r2;
    return os.str();
  };

  struct BetState {
    std::string seq;      // actions so far this round
    int raises = 0;       // bets/raises this round
    double outstanding = 0.0;  // unmatched amount the actor faces
  };

  // contributions[p]: chips player p has put in (starts at the 1-chip ante)
  std::function<void(int, int, std::array<int, 2>, int, int, BetState,
                     std::array<double, 2>, std::string)>
      betting = [&](int parent, int act, std::array<int, 2> cards, int pub,
                    int round, BetState st, std::array<double, 2> contrib,
                    std::string r1_record) {
        int actor;
        {
          // within a round players alternate starting with p0
          actor = static_cast<int>(st.seq.size()) % 2;
        }
        double bet_size = round == 0 ? 2.0 : 4.0;

        auto advance = [&](int from, int a, BetState next,
                           std::array<double, 2> c2) {
          // round continues if someone still must respond
          bool round_over =
              next.seq.size() >= 2 && next.outstanding == 0.0;
          if (!round_over) {
            betting(from, a, cards, pub, round, next, c2, r1_record);
            return;
          }
          if (round == 0) {
            // reveal public card: 4 cards remain
            std::vector<int> remaining;
            for (int c = 0; c < kDeck; ++c)
              if (c != cards[0] && c != cards[1]) remaining.push_back(c);
            int ch = b.add_chance(from, a,
                                  std::vector<double>(remaining.size(),
                                                      1.0 / remaining.size()));
            for (std::size_t i = 0; i < remaining.size(); ++i)
              betting(ch, static_cast<int>(i), cards, remaining[i], 1,
                      BetState{}, c2, next.seq);
          } else {
            // showdown
            double pot_share = std::min(c2[0], c2[1]);
            int winner = -1;
            if (rank(cards[0]) == rank(pub))
              winner = 0;
            else if (rank(cards[1]) == rank(pub))
              winner = 1;
            else if (rank(cards[0]) != rank(cards[1]))
              winner = rank(cards[0]) > rank(cards[1]) ? 0 : 1;
            double u0 = winner < 0 ? 0.0 : (winner == 0 ? pot_share : -pot_share);
            b.add_terminal(from, a, u0, -u0);
          }
        };

        const std::string& r1 = round == 0 ? st.seq : r1_record;
        const std::string& r2 = round == 0 ? std::string() : st.seq;
        std::vector<std::string> names;
        if (st.outstanding == 0.0) {
          names = {"check", "bet"};
          if (st.raises >= 2) names = {"check"};
        } else {
          names = st.raises < 2 ? std::vector<std::string>{"fold", "call",
                                                           "raise"}
                                : std::vector<std::string>{"fold", "call"};
        }
        int node = b.add_decision(parent, act, actor,
                                  key(cards[actor], pub, r1, r2),
                                  names,
                                  features(actor, cards[actor], pub, r1, r2));
        for (std::size_t a = 0; a < names.size(); ++a) {
          const std::string& name = names[a];
          BetState next = st;
          std::array<double, 2> c2 = contrib;
          if (name == "check") {
            next.seq += 'k';
          } else if (name == "bet") {
            next.seq += 'b';
            next.raises += 1;
            c2[actor] += bet_size;
            next.outstanding = bet_size;
          } else if (name == "call") {
            next.seq += 'c';
            c2[actor] = c2[1 - actor];
            next.outstanding = 0.0;
          } else if (name == "raise") {
            next.seq += 'r';
            next.raises += 1;
            c2[actor] = c2[1 - actor] + bet_size;
            next.outstanding = bet_size;
          } else {  // fold
            double loss = c2[actor];
            double u0 = actor == 0 ? -loss : loss;
            b.add_terminal(node, static_cast<int>(a), u0, -u0);
            continue;
          }
          advance(node, static_cast<int>(a), next, c2);
        }
      };

  std::vector<std::pair<int, int>> deals;
  for (int c0 = 0; c0 < kDeck; ++c0)
    for (int c1 = 0; c1 < kDeck; ++c1)
      if (c0 != c1) deals.emplace_back(c0, c1);
  int root = b.add_chance(-1, -1,
                          std::vector<double>(deals.size(), 1.0 / deals.size()));
  for (std::size_t d = 0; d < deals.size(); ++d)
    betting(root, static_cast<int>(d), {deals[d].first, deals[d].second}, -1,
            0, BetState{}, {1.0, 1.0}, "");
  return b.finish("leduc");
}

// One-shot matrix game in extensive form: p0 picks a row, p1 picks a column
// without observing it. payoff[i][j] is p0's utility.
inline Game matrix_game(const std::vector<std::vector<double>>& payoff,
                        std::string name = "matrix") {
  require(!payoff.empty() && !payoff[0].empty(), "empty payoff matrix");
  std::size_t rows = payoff.size(), cols = payoff[0].size();
  GameBuilder b;
  auto action_names = [](std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("a" + std::to_string(i));
    return names;
  };
  int root = b.add_decision(-1, -1, 0, "row", action_names(rows), {1.0, 0.0});
  for (std::size_t i = 0; i < rows; ++i) {
    require(payoff[i].size() == cols, "ragged payoff matrix");
    int n = b.add_decision(root, static_cast<int>(i), 1, "col",
                           action_names(cols), {0.0, 1.0});
    for (std::size_t j = 0; j < cols; ++j)
      b.add_terminal(n, static_cast<int>(j), payoff[i][j], -payoff[i][j]);
  }
  return b.finish(std::move(name));
}

inline Game matching_pennies_game() {
  return matrix_game({{1.0, -1.0}, {-1.0, 1.0}}, "matching_pennies");
}

inline Game random_matrix_game(int k, std::uint64_t seed) {
  require(k >= 1, "matrix size must be >= 1");
  Rng rng(mix_seed(seed));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::vector<double>> payoff(k, std::vector<double>(k));
  for (auto& row : payoff)
    for (double& x : row) x = unif(rng);
  return matrix_game(payoff, "random_matrix(" + std::to_string(k) + ")");
}

// name in {kuhn, leduc, random_matrix(k)}; construction is deterministic
// given (name, seed).
inline Game build_game(const std::string& name, std::uint64_t seed = 0) {
  if (name == "kuhn") return kuhn_game();
  if (name == "leduc") return leduc_game();
  if (name.rfind("random_matrix(", 0) == 0 && name.back() == ')') {
    std::string inner = name.substr(14, name.size() - 15);
    try {
      return random_matrix_game(std::stoi(inner), seed);
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
  }
  throw ConfigError("unknown game '" + name + "'");
}

}  // namespace udef
