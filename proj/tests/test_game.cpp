#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "support/test_util.hpp"
#include "udef/game.hpp"

using namespace udef;
using namespace udef_test;

// ---------------------------------------------------------------------------
// Independent Kuhn rules, written straight from the game description and
// kept free of GameBuilder: terminal sequences, utilities, legal actions.

namespace kuhn_oracle {

inline bool is_terminal(const std::string& seq) {
  return seq == "kk" || seq == "bf" || seq == "bc" || seq == "kbf" ||
         seq == "kbc";
}

inline bool facing_bet(const std::string& seq) {
  return !seq.empty() && seq.back() == 'b';
}

inline double utility_p0(int c0, int c1, const std::string& seq) {
  double high = c0 > c1 ? 1.0 : -1.0;
  if (seq == "bf") return 1.0;    // p1 folds
  if (seq == "kbf") return -1.0;  // p0 folds
  if (seq == "kk") return high;
  return 2.0 * high;  // bc / kbc showdowns
}

// Walks the oracle state machine and the built tree side by side.
inline void compare(const Game& g, int node, int c0, int c1, std::string seq,
                    std::set<std::pair<int, std::string>>* infosets) {
  const Node& n = g.nodes[node];
  if (is_terminal(seq)) {
    REQUIRE(n.is_terminal());
    REQUIRE(n.utility[0] == utility_p0(c0, c1, seq));
    REQUIRE(n.utility[1] == -n.utility[0]);
    return;
  }
  int actor = static_cast<int>(seq.size()) % 2;
  REQUIRE(n.player == actor);
  REQUIRE(n.children.size() == 2);
  int card = actor == 0 ? c0 : c1;
  infosets->emplace(actor, std::to_string(card) + seq);
  if (facing_bet(seq)) {
    compare(g, n.children[0], c0, c1, seq + "f", infosets);
    compare(g, n.children[1], c0, c1, seq + "c", infosets);
  } else {
    compare(g, n.children[0], c0, c1, seq + "k", infosets);
    compare(g, n.children[1], c0, c1, seq + "b", infosets);
  }
}

}  // namespace kuhn_oracle

// ---------------------------------------------------------------------------
// Independent Leduc betting-round enumeration: decision prefixes and
// completed no-fold lines of one round under a 2-bet cap.

namespace leduc_oracle {

struct RoundShape {
  std::vector<std::string> prefixes;  // states where someone acts
  std::vector<std::string> lines;     // completed sequences without a fold
};

inline void gen(std::string seq, int raises, bool outstanding, RoundShape* out) {
  out->prefixes.push_back(seq);
  if (!outstanding) {
    // check ends the round if the other player already checked
    if (seq.empty())
      gen(seq + "k", raises, false, out);
    else
      out->lines.push_back(seq + "k");
    if (raises < 2) gen(seq + "b", raises + 1, true, out);
  } else {
    out->lines.push_back(seq + "c");
    // fold terminates play; contributes no further decisions
    if (raises < 2) gen(seq + "r", raises + 1, true, out);
  }
}

inline RoundShape round_shape() {
  RoundShape s;
  gen("", 0, false, &s);
  return s;
}

}  // namespace leduc_oracle

// Brute-force counterfactual values: path products over all terminals,
// independent of the library's single-pass traversal.
namespace brute {

inline double external_reach(const Game& g, const Profile& prof, int h,
                             int player) {
  double e = 1.0;
  int n = h;
  while (g.nodes[n].parent >= 0) {
    int p = g.nodes[n].parent;
    int a = g.nodes[n].action_from_parent;
    const Node& par = g.nodes[p];
    if (par.is_chance())
      e *= par.chance_probs[a];
    else if (par.player != player)
      e *= prof[par.player].at(par.infoset)[a];
    n = p;
  }
  return e;
}

// sum over terminals below `from` of full-profile path products times u_i
inline double subtree_value(const Game& g, const Profile& prof, int from,
                            int player) {
  const Node& n = g.nodes[from];
  if (n.is_terminal()) return n.utility[player];
  double v = 0.0;
  const std::vector<double>& probs =
      n.is_chance() ? n.chance_probs : prof[n.player].at(n.infoset);
  for (std::size_t a = 0; a < n.children.size(); ++a)
    v += probs[a] * subtree_value(g, prof, n.children[a], player);
  return v;
}

inline CfValues infoset_values(const Game& g, const Profile& prof,
                               int infoset) {
  const Infoset& is = g.infosets[infoset];
  CfValues cf;
  cf.v_per_action.assign(is.num_actions(), 0.0);
  for (int h : is.nodes) {
    double ext = external_reach(g, prof, h, is.player);
    cf.v += ext * subtree_value(g, prof, h, is.player);
    for (int a = 0; a < is.num_actions(); ++a)
      cf.v_per_action[a] +=
          ext * subtree_value(g, prof, g.nodes[h].children[a], is.player);
  }
  return cf;
}

}  // namespace brute

TEST_CASE("kuhn matches the independent enumeration oracle") {
  Game g = kuhn_game();
  std::set<std::pair<int, std::string>> seen;
  REQUIRE(g.nodes[0].is_chance());
  REQUIRE(g.nodes[0].children.size() == 6);
  std::vector<std::pair<int, int>> deals = {{0, 1}, {0, 2}, {1, 0},
                                            {1, 2}, {2, 0}, {2, 1}};
  for (std::size_t d = 0; d < deals.size(); ++d)
    kuhn_oracle::compare(g, g.nodes[0].children[d], deals[d].first,
                         deals[d].second, "", &seen);
  REQUIRE(seen.size() == 12);
  REQUIRE(g.num_infosets() == 12);
  REQUIRE(g.player_infosets[0].size() == 6);
  REQUIRE(g.player_infosets[1].size() == 6);
  for (const Infoset& is : g.infosets) REQUIRE(is.num_actions() == 2);
  REQUIRE(g.utility_range[0] == 4.0);
  REQUIRE(g.utility_range[1] == 4.0);
}

TEST_CASE("kuhn text dump matches the golden file") {
  Game g = kuhn_game();
  std::ifstream in(std::string(UDEF_GOLDEN_DIR) + "/kuhn_game.txt");
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  REQUIRE(dump_game(g) == buf.str());
}

TEST_CASE("leduc infoset count equals the enumeration oracle") {
  Game g = leduc_game();
  auto shape = leduc_oracle::round_shape();
  REQUIRE(shape.prefixes.size() == 6);
  REQUIRE(shape.lines.size() == 5);
  // round 1: any of 6 private cards can sit at any prefix; round 2 adds a
  // public card different from the private one (5 choices, opponent card
  // always available since four cards remain)
  std::size_t expected = shape.prefixes.size() * 6 +
                         shape.lines.size() * shape.prefixes.size() * 6 * 5;
  REQUIRE(expected == 936);  // frozen regression constant
  REQUIRE(g.num_infosets() == 936);
  REQUIRE(g.player_infosets[0].size() + g.player_infosets[1].size() == 936);

  // hand-checked line: deal (J1, Q1), bet-call, public K1, check-check;
  // pot 3+3, no pair, Q beats J
  int node = 0;
  node = g.nodes[node].children[1];  // deal index 1 = (cards 0, 2)
  node = g.nodes[node].children[1];  // p0 bets
  node = g.nodes[node].children[1];  // p1 calls
  REQUIRE(g.nodes[node].is_chance());
  REQUIRE(g.nodes[node].children.size() == 4);  // 4 cards remain
  node = g.nodes[node].children[2];             // remaining cards {1,3,4,5} -> 4
  node = g.nodes[node].children[0];             // p0 checks
  node = g.nodes[node].children[0];             // p1 checks
  REQUIRE(g.nodes[node].is_terminal());
  REQUIRE(g.nodes[node].utility[0] == -3.0);
  REQUIRE(g.nodes[node].utility[1] == 3.0);
}

TEST_CASE("matrix games: single infoset per player, entries are values") {
  Game g = random_matrix_game(1, 7);
  REQUIRE(g.player_infosets[0].size() == 1);
  REQUIRE(g.player_infosets[1].size() == 1);
  Profile pure = uniform_profile(g);  // one action each
  auto ev = expected_value(g, pure);
  REQUIRE(ev[0] == g.nodes[descend(g, {0, 0})].utility[0]);

  Game g3a = random_matrix_game(3, 123);
  Game g3b = random_matrix_game(3, 123);
  REQUIRE(dump_game(g3a) == dump_game(g3b));  // deterministic given seed
  REQUIRE(dump_game(g3a) != dump_game(random_matrix_game(3, 124)));
}

TEST_CASE("build_game rejects unknown names") {
  REQUIRE_THROWS_AS(build_game("unknown"), ConfigError);
  REQUIRE_THROWS_AS(build_game("random_matrix(x)"), ConfigError);
  REQUIRE(build_game("kuhn").name == "kuhn");
  REQUIRE(build_game("random_matrix(4)", 1).max_actions == 4);
}

TEST_CASE("expected value: matching pennies under uniform play is 0") {
  Game g = matching_pennies_game();
  auto ev = expected_value(g, uniform_profile(g));
  REQUIRE_THAT(ev[0], Catch::Matchers::WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(ev[1], Catch::Matchers::WithinAbs(0.0, 1e-15));
}

TEST_CASE("expected value agrees with a Monte Carlo oracle on kuhn") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  auto exact = expected_value(g, prof);
  Rng rng(20240601);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rollout(g, prof, rng).utility[0];
    sum += u;
    sumsq += u * u;
  }
  double mean = sum / n;
  double se = std::sqrt((sumsq / n - mean * mean) / n);
  REQUIRE(std::abs(mean - exact[0]) <= 3.0 * se);
}

TEST_CASE("expected values of random profiles are zero-sum") {
  Game g = kuhn_game();
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto ev = expected_value(g, random_profile(g, rng));
    REQUIRE_THAT(ev[0] + ev[1], Catch::Matchers::WithinAbs(0.0, 1e-9));
  }
}

TEST_CASE("closed-form kuhn equilibrium: value, best response, nash_conv") {
  Game g = kuhn_game();
  Profile ne = kuhn_equilibrium(g);
  auto ev = expected_value(g, ne);
  REQUIRE_THAT(ev[0], Catch::Matchers::WithinAbs(-1.0 / 18.0, 1e-12));

  auto br0 = best_response(g, ne[1], 0);
  REQUIRE_THAT(br0.value, Catch::Matchers::WithinAbs(-1.0 / 18.0, 1e-6));
  auto br1 = best_response(g, ne[0], 1);
  REQUIRE_THAT(br1.value, Catch::Matchers::WithinAbs(1.0 / 18.0, 1e-6));

  auto nc = nash_conv(g, ne);
  REQUIRE(nc.total >= -1e-9);
  REQUIRE_THAT(nc.total, Catch::Matchers::WithinAbs(0.0, 1e-6));
}

TEST_CASE("reach decomposition") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  auto root = reach(g, prof, 0, 0);
  REQUIRE(root.own == 1.0);
  REQUIRE(root.external == 1.0);
  REQUIRE(root.total == 1.0);

  // history after the single chance move of probability 1/6
  int deal = g.nodes[0].children[2];
  auto rd = reach(g, prof, deal, 0);
  REQUIRE(rd.own == 1.0);
  REQUIRE_THAT(rd.external, Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-15));

  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Profile rp = random_profile(g, rng);
    for (int h = 0; h < static_cast<int>(g.nodes.size()); ++h)
      for (int viewer = 0; viewer < 2; ++viewer) {
        auto r = reach(g, rp, h, viewer);
        REQUIRE_THAT(r.total,
                     Catch::Matchers::WithinAbs(r.own * r.external, 1e-12));
        REQUIRE(r.own >= 0.0);
        REQUIRE(r.own <= 1.0);
        REQUIRE(r.external >= 0.0);
        REQUIRE(r.external <= 1.0);
      }
  }
}

TEST_CASE("reach totals match Monte Carlo visit frequencies") {
  Game g = kuhn_game();
  Rng prof_rng(31);
  Profile prof = random_profile(g, prof_rng);
  // a handful of histories at different depths
  std::vector<int> targets = {descend(g, {0}), descend(g, {1, 0}),
                              descend(g, {3, 0, 1}), descend(g, {5, 1, 1})};
  std::vector<int> hits(targets.size(), 0);
  Rng rng(77);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    auto ro = rollout(g, prof, rng);
    std::set<int> on_path(ro.path.begin(), ro.path.end());
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (on_path.count(targets[t])) ++hits[t];
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double p = reach(g, prof, targets[t], 0).total;
    double freq = static_cast<double>(hits[t]) / n;
    double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    REQUIRE(std::abs(freq - p) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("counterfactual values collapse to matrix averages") {
  std::vector<std::vector<double>> m = {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0},
                                        {7.0, 8.0, 9.0}};
  Game g = matrix_game(m);
  Profile prof = uniform_profile(g);
  auto cf0 = counterfactual_values(g, prof, 0);
  int i0 = g.player_infosets[0][0];
  for (int a = 0; a < 3; ++a) {
    double row_mean = (m[a][0] + m[a][1] + m[a][2]) / 3.0;
    REQUIRE_THAT(cf0[i0].v_per_action[a],
                 Catch::Matchers::WithinAbs(row_mean, 1e-12));
  }
  auto cf1 = counterfactual_values(g, prof, 1);
  int i1 = g.player_infosets[1][0];
  for (int a = 0; a < 3; ++a) {
    double col_mean = -(m[0][a] + m[1][a] + m[2][a]) / 3.0;
    REQUIRE_THAT(cf1[i1].v_per_action[a],
                 Catch::Matchers::WithinAbs(col_mean, 1e-12));
  }
}

TEST_CASE("counterfactual values match the brute-force oracle on kuhn") {
  Game g = kuhn_game();
  Rng rng(123);
  std::vector<Profile> profiles = {uniform_profile(g), random_profile(g, rng),
                                   random_profile(g, rng)};
  for (const Profile& prof : profiles) {
    for (int player = 0; player < 2; ++player) {
      auto cf = counterfactual_values(g, prof, player);
      for (int id : g.player_infosets[player]) {
        CfValues expect = brute::infoset_values(g, prof, id);
        REQUIRE_THAT(cf[id].v, Catch::Matchers::WithinAbs(expect.v, 1e-12));
        for (std::size_t a = 0; a < expect.v_per_action.size(); ++a)
          REQUIRE_THAT(cf[id].v_per_action[a],
                       Catch::Matchers::WithinAbs(expect.v_per_action[a], 1e-12));
        // v(I) = sum_a sigma(I,a) v(I,a)
        double mix = 0.0;
        const auto& d = prof[player].at(id);
        for (std::size_t a = 0; a < d.size(); ++a)
          mix += d[a] * cf[id].v_per_action[a];
        REQUIRE_THAT(cf[id].v, Catch::Matchers::WithinAbs(mix, 1e-9));
      }
    }
  }
}

TEST_CASE("terminal-adjacent counterfactual action values") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  // p1 holding K facing a bet: fold hands p0 +1 immediately
  int id = find_infoset(g, 1, "K|b");
  auto cf = counterfactual_values(g, prof, 1);
  double ext = 0.0;  // sum of external reaches of member histories
  for (int h : g.infosets[id].nodes)
    ext += brute::external_reach(g, prof, h, 1);
  REQUIRE_THAT(cf[id].v_per_action[0],
               Catch::Matchers::WithinAbs(-1.0 * ext, 1e-12));
  // calling with K always wins the 2-chip showdown
  REQUIRE_THAT(cf[id].v_per_action[1],
               Catch::Matchers::WithinAbs(2.0 * ext, 1e-12));
}

TEST_CASE("best response dominates sampled policies") {
  Game g = kuhn_game();
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Profile prof = random_profile(g, rng);
    int player = trial % 2;
    auto br = best_response(g, prof[1 - player], player);
    Profile against = prof;
    against[player] = br.policy;
    auto ev = expected_value(g, against);
    REQUIRE_THAT(ev[player], Catch::Matchers::WithinAbs(br.value, 1e-9));
    // any fixed policy does no better
    auto base = expected_value(g, prof);
    REQUIRE(br.value >= base[player] - 1e-9);
  }
}

TEST_CASE("best response against uniform matching pennies earns zero") {
  Game g = matching_pennies_game();
  auto br = best_response(g, uniform_policy(g, 1), 0);
  REQUIRE_THAT(br.value, Catch::Matchers::WithinAbs(0.0, 1e-12));
  // pure with lowest-index tie-break
  REQUIRE(br.policy.at(g.player_infosets[0][0]) ==
          std::vector<double>{1.0, 0.0});
}

TEST_CASE("best response iterates stay well-defined") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  for (int round = 0; round < 6; ++round) {
    auto br0 = best_response(g, prof[1], 0);
    auto br1 = best_response(g, prof[0], 1);
    prof = {br0.policy, br1.policy};
    validate_profile(g, prof);
    for (int p = 0; p < 2; ++p)
      for (int id : g.player_infosets[p])
        for (double x : prof[p].at(id)) REQUIRE((x == 0.0 || x == 1.0));
    REQUIRE(std::isfinite(expected_value(g, prof)[0]));
  }
}

TEST_CASE("nash_conv of uniform kuhn equals the pure-strategy oracle") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  auto nc = nash_conv(g, prof);
  auto ev = expected_value(g, prof);

  // oracle: exhaustive max over all 2^6 pure strategies per player
  for (int player = 0; player < 2; ++player) {
    const auto& ids = g.player_infosets[player];
    double best = -1e300;
    for (int mask = 0; mask < (1 << ids.size()); ++mask) {
      Profile cand = prof;
      PolicyTable pure;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        std::vector<double> d(2, 0.0);
        d[(mask >> k) & 1] = 1.0;
        pure.set(ids[k], d);
      }
      cand[player] = pure;
      best = std::max(best, expected_value(g, cand)[player]);
    }
    REQUIRE_THAT(nc.per_player[player],
                 Catch::Matchers::WithinAbs(best - ev[player], 1e-9));
  }
}

TEST_CASE("nash_conv is nonnegative and permutation invariant") {
  Game g = kuhn_game();
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    auto nc = nash_conv(g, random_profile(g, rng));
    REQUIRE(nc.total >= -1e-9);
  }

  std::vector<std::vector<double>> m = {{0.3, -1.2, 0.5},
                                        {0.9, 0.1, -0.4},
                                        {-0.7, 0.8, 0.2}};
  std::vector<int> rperm = {2, 0, 1}, cperm = {1, 2, 0};
  std::vector<std::vector<double>> pm(3, std::vector<double>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pm[i][j] = m[rperm[i]][cperm[j]];
  Game ga = matrix_game(m), gb = matrix_game(pm);
  Rng prng(7);
  PolicyTable rowp = random_policy(ga, 0, prng);
  PolicyTable colp = random_policy(ga, 1, prng);
  // permute the profile along with the actions
  PolicyTable rowq, colq;
  int ra = ga.player_infosets[0][0], ca = ga.player_infosets[1][0];
  std::vector<double> rq(3), cq(3);
  for (int i = 0; i < 3; ++i) rq[i] = rowp.at(ra)[rperm[i]];
  for (int j = 0; j < 3; ++j) cq[j] = colp.at(ca)[cperm[j]];
  rowq.set(gb.player_infosets[0][0], rq);
  colq.set(gb.player_infosets[1][0], cq);
  auto nca = nash_conv(ga, {rowp, colp});
  auto ncb = nash_conv(gb, {rowq, colq});
  REQUIRE_THAT(nca.total, Catch::Matchers::WithinAbs(ncb.total, 1e-12));
}

TEST_CASE("expected value equals the root-level counterfactual decomposition") {
  Game g = kuhn_game();
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Profile prof = random_profile(g, rng);
    auto ev = expected_value(g, prof);
    // player 0's first decisions
    auto cf0 = counterfactual_values(g, prof, 0);
    double sum0 = 0.0;
    for (const std::string& key : {"J|", "Q|", "K|"})
      sum0 += cf0[find_infoset(g, 0, key)].v;
    REQUIRE_THAT(sum0, Catch::Matchers::WithinAbs(ev[0], 1e-9));
    // player 1 always acts exactly once at depth 2
    auto cf1 = counterfactual_values(g, prof, 1);
    double sum1 = 0.0;
    for (const std::string& key : {"J|k", "Q|k", "K|k", "J|b", "Q|b", "K|b"})
      sum1 += cf1[find_infoset(g, 1, key)].v;
    REQUIRE_THAT(sum1, Catch::Matchers::WithinAbs(ev[1], 1e-9));
  }
}

TEST_CASE("missing policy entries raise IncompletePolicyError") {
  Game g = kuhn_game();
  Profile prof = uniform_profile(g);
  prof[1].entries[find_infoset(g, 1, "Q|b")].clear();
  REQUIRE_THROWS_AS(expected_value(g, prof), IncompletePolicyError);
  REQUIRE_THROWS_AS(validate_profile(g, prof), IncompletePolicyError);
}

TEST_CASE("policy mixing: behavioral and realization-weighted") {
  Game g = kuhn_game();
  Rng rng(8);
  PolicyTable a = random_policy(g, 0, rng), b = random_policy(g, 0, rng);
  auto mixed = behavioral_mix(g, 0, {a, b}, {0.25, 0.75});
  for (int id : g.player_infosets[0])
    for (int act = 0; act < 2; ++act)
      REQUIRE_THAT(mixed.at(id)[act],
                   Catch::Matchers::WithinAbs(
                       0.25 * a.at(id)[act] + 0.75 * b.at(id)[act], 1e-12));

  // realization mixture of (policy, itself) is the policy
  auto self = mix_policies(g, 0, {a, a}, {0.5, 0.5});
  for (int id : g.player_infosets[0])
    REQUIRE(l1_distance(self.at(id), a.at(id)) < 1e-12);

  // mixture value equals the weighted value of the components
  PolicyTable opp = random_policy(g, 1, rng);
  auto mix = mix_policies(g, 0, {a, b}, {0.3, 0.7});
  double va = expected_value(g, {a, opp})[0];
  double vb = expected_value(g, {b, opp})[0];
  double vm = expected_value(g, {mix, opp})[0];
  REQUIRE_THAT(vm, Catch::Matchers::WithinAbs(0.3 * va + 0.7 * vb, 1e-9));
}
