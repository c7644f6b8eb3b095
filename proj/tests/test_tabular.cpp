#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "support/test_util.hpp"
#include "udef/tabular.hpp"

using namespace udef;
using namespace udef_test;
using Catch::Matchers::WithinAbs;

TEST_CASE("regret matching") {
  REQUIRE(regret_matching({2.0, 0.0, -1.0}) ==
          std::vector<double>{1.0, 0.0, 0.0});
  REQUIRE(regret_matching({-1.0, -2.0}) == std::vector<double>{0.5, 0.5});
  REQUIRE(regret_matching({3.0, 1.0}) == std::vector<double>{0.75, 0.25});
  REQUIRE_THROWS_AS(
      regret_matching({1.0, std::numeric_limits<double>::quiet_NaN()}),
      ContractError);

  Rng rng(3);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(2 + trial % 5);
    for (double& x : r) x = unif(rng);
    auto d = regret_matching(r);
    double sum = 0.0;
    for (double x : d) {
      REQUIRE(x >= 0.0);
      sum += x;
    }
    REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("first CFR iteration plays uniform everywhere") {
  Game g = kuhn_game();
  CfrState s = make_cfr_state(g);
  Profile first = current_profile(g, s);
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p])
      for (double x : first[p].at(id)) REQUIRE(x == 0.5);
  cfr_iteration(g, s);
  REQUIRE(s.iteration == 1);
  Profile avg = average_strategy(g, s);
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p])
      for (double x : avg[p].at(id)) REQUIRE_THAT(x, WithinAbs(0.5, 1e-12));
}

TEST_CASE("vanilla CFR on kuhn: convergence, regret bound, folklore bound") {
  Game g = kuhn_game();
  CfrState s = make_cfr_state(g, CfrVariant::vanilla);
  double delta = g.utility_range[0];
  std::vector<double> decade_nc;
  for (int t = 1; t <= 10000; ++t) {
    cfr_iteration(g, s);
    // per-infoset cumulative regret bound Delta*sqrt(|A|)*sqrt(T)
    for (int id = 0; id < g.num_infosets(); ++id) {
      double worst = 0.0;
      for (double r : s.cumulative_regret[id]) worst = std::max(worst, r);
      double na = g.infosets[id].num_actions();
      REQUIRE(worst <= delta * std::sqrt(na) * std::sqrt(double(t)) + 1e-9);
    }
    if (t == 100 || t == 1000 || t == 10000) {
      auto nc = nash_conv(g, average_strategy(g, s));
      decade_nc.push_back(nc.total);
      // folklore 2-epsilon bound via tracked regrets:
      // nash_conv(avg) <= sum_i sum_I max_a R+(I,a) / T
      double bound = 0.0;
      for (int p = 0; p < 2; ++p)
        for (int id : g.player_infosets[p]) {
          double worst = 0.0;
          for (double r : s.cumulative_regret[id]) worst = std::max(worst, r);
          bound += std::max(worst, 0.0);
        }
      REQUIRE(nc.total <= bound / t + 1e-9);
    }
  }
  REQUIRE(decade_nc[1] <= 0.05);  // T = 1000
  REQUIRE(decade_nc[2] <= 0.01);  // T = 10000
  REQUIRE(decade_nc[2] <= decade_nc[1]);
  REQUIRE(decade_nc[1] <= decade_nc[0]);
}

TEST_CASE("CFR+ keeps cumulative regrets nonnegative and beats vanilla") {
  Game g = kuhn_game();
  CfrState plus = make_cfr_state(g, CfrVariant::plus);
  for (int t = 0; t < 1000; ++t) {
    cfr_iteration(g, plus);
    for (const auto& rv : plus.cumulative_regret)
      for (double r : rv) REQUIRE(r >= 0.0);
  }
  CfrState vanilla = make_cfr_state(g, CfrVariant::vanilla);
  CfrState linear = make_cfr_state(g, CfrVariant::linear);
  for (int t = 0; t < 1000; ++t) {
    cfr_iteration(g, vanilla);
    cfr_iteration(g, linear);
  }
  double nc_vanilla = nash_conv(g, average_strategy(g, vanilla)).total;
  double nc_plus = nash_conv(g, average_strategy(g, plus)).total;
  double nc_linear = nash_conv(g, average_strategy(g, linear)).total;
  REQUIRE(nc_plus <= nc_vanilla);
  REQUIRE(nc_linear <= nc_vanilla);
}

TEST_CASE("kuhn CFR average strategy reaches the known value") {
  Game g = kuhn_game();
  CfrState s = make_cfr_state(g, CfrVariant::plus);
  for (int t = 0; t < 20000; ++t) cfr_iteration(g, s);
  Profile avg = average_strategy(g, s);
  auto ev = expected_value(g, avg);
  REQUIRE_THAT(ev[0], WithinAbs(-1.0 / 18.0, 1e-3));
  // best response against the near-equilibrium profile also pins the value
  auto br = best_response(g, avg[1], 0);
  REQUIRE_THAT(br.value, WithinAbs(-1.0 / 18.0, 1e-3));
}

TEST_CASE("average strategy of repeated identical iterates is that iterate") {
  Game g = kuhn_game();
  Rng rng(17);
  Profile sigma = random_profile(g, rng);
  CfrState s = make_cfr_state(g);
  for (int rep = 0; rep < 7; ++rep) {
    for (int p = 0; p < 2; ++p) {
      auto own = own_reach_per_infoset(g, p, sigma[p]);
      for (int id : g.player_infosets[p])
        for (std::size_t a = 0; a < s.cumulative_strategy[id].size(); ++a)
          s.cumulative_strategy[id][a] += own[id] * sigma[p].at(id)[a];
    }
    s.iteration += 1;
  }
  Profile avg = average_strategy(g, s);
  for (int p = 0; p < 2; ++p)
    for (int id : g.player_infosets[p])
      REQUIRE(l1_distance(avg[p].at(id), sigma[p].at(id)) < 1e-12);
}

TEST_CASE("average strategy falls back to uniform at unreached infosets") {
  Game g = kuhn_game();
  CfrState s = make_cfr_state(g);
  s.iteration = 1;  // no accumulation at all
  Profile avg = average_strategy(g, s);
  for (int id : g.player_infosets[0])
    REQUIRE(avg[0].at(id) == std::vector<double>{0.5, 0.5});
  REQUIRE_THROWS_AS(average_strategy(g, make_cfr_state(g)), ContractError);
}

TEST_CASE("meta solvers: explicit schemes") {
  MetaGame m;
  Game g = kuhn_game();
  PolicyTable u = uniform_policy(g, 0), v = uniform_policy(g, 1);
  m = augment_meta_game(g, m, {u, u, u, u}, {v, v, v, v}, 0);
  auto uni = meta_solve(m, MetaSolver::uniform);
  REQUIRE(uni.row == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  auto lin = meta_solve(m, MetaSolver::linear);
  REQUIRE_THAT(lin.row[0], WithinAbs(0.1, 1e-15));
  REQUIRE_THAT(lin.row[3], WithinAbs(0.4, 1e-15));
  auto last = meta_solve(m, MetaSolver::last);
  REQUIRE(last.row == std::vector<double>{0.0, 0.0, 0.0, 1.0});
  REQUIRE(scheme_weights(MetaSolver::linear, 3) ==
          std::vector<double>{1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0});
  REQUIRE_THROWS_AS(meta_solve(MetaGame{}, MetaSolver::uniform), ConfigError);
}

TEST_CASE("nash meta solver: rock-paper-scissors and random matrices") {
  std::vector<std::vector<double>> rps = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
  MatrixNash nash = solve_matrix_nash(rps);
  for (double w : nash.row) REQUIRE_THAT(w, WithinAbs(1.0 / 3.0, 1e-2));
  for (double w : nash.col) REQUIRE_THAT(w, WithinAbs(1.0 / 3.0, 1e-2));

  for (int k = 2; k <= 8; ++k)
    for (int trial = 0; trial < 3; ++trial) {
      Rng rng(derive_seed(99, k, trial));
      std::uniform_real_distribution<double> unif(-2.0, 1.0);
      std::vector<std::vector<double>> m(k, std::vector<double>(k));
      double lo = 1e300, hi = -1e300;
      for (auto& row : m)
        for (double& x : row) {
          x = unif(rng);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
      MatrixNash sol = solve_matrix_nash(m);
      REQUIRE(sol.exploitability <= 1e-3 * (hi - lo));
    }
}

TEST_CASE("meta-game augmentation: exact entries and zero-sum consistency") {
  Game g = kuhn_game();
  Rng rng(5);
  MetaGame m;
  m.estimation = MetaEstimation::exact;
  PolicyTable r0 = random_policy(g, 0, rng), r1 = random_policy(g, 0, rng);
  PolicyTable c0 = random_policy(g, 1, rng), c1 = random_policy(g, 1, rng);
  m = augment_meta_game(g, m, {r0, r1}, {c0, c1}, 0);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      auto ev = expected_value(g, {m.row_responses[i], m.col_responses[j]});
      REQUIRE_THAT(m.payoff_matrix[i][j], WithinAbs(ev[0], 1e-9));
      REQUIRE_THAT(m.payoff_matrix[i][j], WithinAbs(-ev[1], 1e-9));
    }
  // duplicating a response duplicates its row exactly in exact mode
  MetaGame m2 = augment_meta_game(g, m, {r0}, {}, 0);
  REQUIRE(m2.rows() == 3);
  for (std::size_t j = 0; j < 2; ++j)
    REQUIRE_THAT(m2.payoff_matrix[2][j], WithinAbs(m2.payoff_matrix[0][j], 1e-12));
}

TEST_CASE("sampled meta-game entries agree with exact within noise") {
  Game g = kuhn_game();
  Rng rng(6);
  PolicyTable row = random_policy(g, 0, rng);
  PolicyTable col = random_policy(g, 1, rng);
  double exact = expected_value(g, {row, col})[0];
  double sampled = sampled_payoff(g, row, col, 100000, 12345);
  // utility range 4 bounds the per-episode variance by 4; 3 standard errors
  REQUIRE(std::abs(sampled - exact) <= 3.0 * std::sqrt(4.0 / 100000));
  // deterministic given the seed
  REQUIRE(sampled == sampled_payoff(g, row, col, 100000, 12345));

  MetaGame m;
  m.estimation = MetaEstimation::sampled;
  m.seed = 7;
  MetaGame a = augment_meta_game(g, m, {row}, {col}, 20000);
  MetaGame b = augment_meta_game(g, m, {row}, {col}, 20000);
  REQUIRE(a.payoff_matrix[0][0] == b.payoff_matrix[0][0]);
}

TEST_CASE("fictitious play on matching pennies finds the mixed equilibrium") {
  Game g = matching_pennies_game();
  MetaGame m;
  m.estimation = MetaEstimation::exact;
  PolicyTable pure0, pure1;
  pure0.set(g.player_infosets[0][0], {1.0, 0.0});
  pure1.set(g.player_infosets[1][0], {1.0, 0.0});
  m = augment_meta_game(g, m, {pure0}, {pure1}, 0);
  for (int t = 0; t < 200; ++t) {
    std::size_t k = m.rows();
    m = fictitious_play_step(g, m);
    REQUIRE(m.rows() == k + 1);  // one response per player per step
    REQUIRE(m.cols() == k + 1);
  }
  std::vector<double> w(m.rows(), 1.0 / m.rows());
  auto mix = behavioral_mix(g, 0, m.row_responses, w);
  REQUIRE_THAT(mix.at(g.player_infosets[0][0])[0], WithinAbs(0.5, 0.05));
  REQUIRE_THAT(mix.at(g.player_infosets[0][0])[1], WithinAbs(0.5, 0.05));
}

TEST_CASE("fictitious play on kuhn trends toward equilibrium") {
  Game g = kuhn_game();
  MetaGame m;
  m.estimation = MetaEstimation::exact;
  m = augment_meta_game(g, m, {uniform_policy(g, 0)}, {uniform_policy(g, 1)},
                        0);
  std::vector<double> ncs;
  for (int t = 0; t < 100; ++t) {
    m = fictitious_play_step(g, m);
    std::vector<double> wr(m.rows(), 1.0 / m.rows());
    std::vector<double> wc(m.cols(), 1.0 / m.cols());
    Profile mix{behavioral_mix(g, 0, m.row_responses, wr),
                behavioral_mix(g, 1, m.col_responses, wc)};
    ncs.push_back(nash_conv(g, mix).total);
  }
  // 10-step window means decrease monotonically from the first step
  std::vector<double> windows;
  for (int k = 0; k < 10; ++k) {
    double s = 0.0;
    for (int i = 10 * k; i < 10 * k + 10; ++i) s += ncs[i];
    windows.push_back(s / 10.0);
  }
  REQUIRE(windows[0] < ncs[0]);
  for (int k = 1; k < 10; ++k) REQUIRE(windows[k] <= windows[k - 1]);
}
