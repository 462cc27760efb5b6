// Copyright 2026 The oqw-hitting Authors
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

#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "oqw/oqw.hpp"
#include "support/oracles.hpp"

using namespace oqw;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("simpson integrates quadratics exactly on uneven grids", "[quadrature]") {
  const std::vector<double> x = {0.0, 0.1, 0.35, 0.4, 0.9, 1.3};
  std::vector<double> f;
  for (double t : x) f.push_back(3 * t * t - t + 1);
  const double exact = std::pow(1.3, 3) - 0.5 * 1.3 * 1.3 + 1.3;
  CHECK(std::abs(simpson(x, f) - exact) < 1e-12);
  const std::vector<double> x2 = {0.0, 0.2, 0.5, 1.0};
  std::vector<double> f2;
  for (double t : x2) f2.push_back(t * t);
  CHECK(std::abs(simpson(x2, f2) - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("simpson integrates cubics exactly on uniform pairs", "[quadrature]") {
  const TimeGrid grid = TimeGrid::uniform(1.3, 7);
  std::vector<double> f;
  for (double t : grid.values()) f.push_back(2 * t * t * t - t + 1);
  const double exact = 0.5 * std::pow(1.3, 4) - 0.5 * 1.3 * 1.3 + 1.3;
  CHECK(std::abs(simpson(grid.values(), f) - exact) < 1e-12);
}

TEST_CASE("time grid validation", "[quadrature]") {
  CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid({0.0, -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::uniform(1.0, 1), std::invalid_argument);
  CHECK(TimeGrid::uniform(2.0, 5).is_uniform_from_zero());
  CHECK_FALSE(TimeGrid({0.0, 0.1, 0.3}).is_uniform_from_zero());
}

TEST_CASE("absorbing two-site density is exponential", "[hitting]") {
  for (double k : {0.5, 1.0, 5.0}) {
    const GraphSpec g = testing::two_site(k, 0.0, DensityMatrix::basis(2, 0));
    const auto d = hitting_density(g, g.initial_density(), TimeGrid::uniform(10.0 / k, 101));
    for (std::size_t i = 0; i < d.times.size(); ++i) {
      CHECK(std::abs(d.density[i] - k * std::exp(-k * d.times[i])) <= 1e-12 * k);
    }
    CHECK(std::abs(survival(g, g.initial_density(), 1.0 / k) - std::exp(-1.0)) <= 1e-13);
    CHECK(survival(g, g.initial_density(), 0.0) == 1.0);
  }
}

TEST_CASE("uniform and non-uniform grids agree", "[hitting]") {
  const HittingProblem p(testing::chain4(20));
  const auto uni = p.density(TimeGrid::uniform(2.0, 401));
  std::vector<double> t = uni.times;
  t[1] *= 0.999;  // breaks uniformity, forces per-point exponentials
  const auto non = p.density(TimeGrid(t), 3);
  double worst = 0.0;
  for (std::size_t i = 2; i < t.size(); ++i) worst = std::max(worst, std::abs(uni.density[i] - non.density[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("parallel density is independent of worker count", "[hitting]") {
  const HittingProblem p(testing::chain4(50));
  std::vector<double> t;
  for (int i = 0; i < 200; ++i) t.push_back(0.01 * i + 0.001 * (i % 3));
  const auto a = p.density(TimeGrid(t), 1);
  const auto b = p.density(TimeGrid(t), 4);
  CHECK(a.density == b.density);
}

TEST_CASE("density without incoming incoherent edges is zero", "[hitting]") {
  const GraphSpec g(3, {0, 0, 0}, {{0, 1, 1.0}}, {{1, 0, 1.0}}, {}, InitialState::at_site(3, 0), 2);
  const auto d = hitting_density(g, g.initial_density(), TimeGrid::uniform(5.0, 11));
  for (double h : d.density) CHECK(h == 0.0);
  CHECK(d.total_probability == 0.0);
}

TEST_CASE("coherent final edge is rejected with the remedy", "[hitting]") {
  const GraphSpec g = testing::coherent_final();
  CHECK_THROWS_AS(HittingProblem(g), ValidationError);
  CHECK_THROWS_WITH(HittingProblem(g), ContainsSubstring("fictitious"));
}

TEST_CASE("chain4 survival decays", "[hitting]") {
  const HittingProblem p(testing::chain4(5));
  CHECK(p.survival(60.0) <= 1e-6);
  double prev = 1.0;
  for (double t = 0.0; t < 5.0; t += 0.05) {
    const double s = p.survival(t);
    CHECK(s <= prev + 1e-14);
    prev = s;
  }
}

TEST_CASE("density is minus the derivative of survival", "[hitting][property]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const GraphSpec g = testing::random_graph(rng, {2, 5, false, true, true});
    const HittingProblem p(g, testing::random_density(g.num_sites(), rng));
    const double eps = 1e-5;
    for (double t : {0.1, 0.5, 1.3}) {
      const double fd = -(p.survival(t + eps) - p.survival(t - eps)) / (2 * eps);
      const double h = p.density(TimeGrid({t})).density[0];
      CHECK(std::abs(fd - h) <= 1e-6 * std::max(1.0, std::abs(h)));
    }
  }
}

TEST_CASE("normalization over 50 means", "[hitting][property]") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const GraphSpec g = testing::random_graph(rng, {2, 5, false, true, true});
    const HittingProblem p(g);
    const double m = p.mean().value;
    const auto d = p.density(TimeGrid::uniform(50.0 * m, 20001));
    CHECK(std::abs(d.total_probability - 1.0) <= 1e-4);
  }
}

TEST_CASE("absorbing two-site moments", "[hitting][golden]") {
  for (double k : {0.5, 1.0, 5.0}) {
    const GraphSpec g = testing::two_site(k, 0.0, DensityMatrix::basis(2, 0));
    const HittingProblem p(g);
    CHECK(std::abs(p.mean().value - 1.0 / k) <= 1e-9);
    CHECK(std::abs(p.variance().value - 1.0 / (k * k)) <= 1e-9);
    CHECK_FALSE(p.mean().defective);
    const auto m = p.moments(4);
    double fact = 1.0;
    for (int n = 1; n <= 4; ++n) {
      fact *= n;
      CHECK(std::abs(m[n - 1].value - fact / std::pow(k, n)) <= 1e-9 * fact / std::pow(k, n));
    }
  }
}

TEST_CASE("absorbing two-site recurrence from the final site", "[hitting][golden]") {
  const GraphSpec g = testing::two_site(2.0, 0.0, DensityMatrix::basis(2, 1));
  const HittingProblem p(g);
  CHECK(std::abs(p.mean().value) <= 1e-12);
  CHECK(std::abs(p.variance().value) <= 1e-12);
  CHECK(p.mean().defective);
  CHECK(p.mean().hit_probability == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("recurrent two-site moments and coherence independence", "[hitting][golden]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double k21 = u(rng), k12 = u(rng);
    const DensityMatrix rho = testing::random_density(2, rng);
    const double r11 = rho.population(0), r22 = rho.population(1);
    const HittingProblem p(testing::two_site(k21, k12, rho), rho);
    CHECK(std::abs(p.mean().value - testing::recurrent_mean(k21, k12, r11, r22)) <= 1e-9);
    CHECK(std::abs(p.variance().value - testing::recurrent_variance(k21, k12, r11, r22)) <= 1e-9);
    CMatrix diag = CMatrix::Zero(2, 2);
    diag(0, 0) = r11;
    diag(1, 1) = r22;
    const HittingProblem q(testing::two_site(k21, k12, rho), DensityMatrix::validated(diag));
    CHECK(std::abs(p.mean().value - q.mean().value) <= 1e-9);
    CHECK(std::abs(p.variance().value - q.variance().value) <= 1e-9);
  }
  const GraphSpec g = testing::two_site(1.5, 0.5, DensityMatrix::basis(2, 1));
  const HittingProblem p(g);
  CHECK(std::abs(p.mean().value - (1 / 1.5 + 1 / 0.5)) <= 1e-9);
  CHECK(std::abs(p.variance().value - (1 / 2.25 + 1 / 0.25)) <= 1e-9);
}

TEST_CASE("defective graph is flagged", "[hitting]") {
  const GraphSpec g = load_graph_file(testing::graphs_dir() + "/defective.json");
  const auto m = HittingProblem(g).mean();
  CHECK(m.defective);
  CHECK(std::abs(m.hit_probability - 0.5) <= 1e-10);
  CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("moment order must be positive", "[hitting]") {
  const HittingProblem p(testing::chain4(5));
  CHECK_THROWS_AS(p.moments(0), std::invalid_argument);
  const auto d = p.density(TimeGrid::uniform(1.0, 2));
  CHECK_THROWS_AS(moment_numeric(d, 1), std::invalid_argument);
}

TEST_CASE("numeric moments of the exponential law", "[hitting]") {
  const double k = 2.0;
  const GraphSpec g = testing::two_site(k, 0.0, DensityMatrix::basis(2, 0));
  const auto d = hitting_density(g, g.initial_density(), TimeGrid::uniform(20.0 / k, 4001));
  CHECK(std::abs(moment_numeric(d, 1).value - 1.0 / k) <= 1e-6);
  CHECK(std::abs(moment_numeric(d, 2).value - 2.0 / (k * k)) <= 1e-5);
  CHECK(moment_numeric(d, 1).truncation_error_bound < 1e-6);
}

TEST_CASE("numeric moments warn about truncated tails", "[hitting]") {
  const GraphSpec g = testing::two_site(1.0, 0.0, DensityMatrix::basis(2, 0));
  const auto d = hitting_density(g, g.initial_density(), TimeGrid::uniform(3.0, 301));
  const auto m = moment_numeric(d, 1);
  CHECK_FALSE(m.warnings.empty());
  // the exponential tail model is exact for this law
  CHECK(std::abs(m.value + m.truncation_error_bound - 1.0) <= 1e-6);
}

TEST_CASE("pseudoinverse and quadrature moments agree on random graphs", "[hitting][property]") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const GraphSpec g = testing::random_graph(rng, {2, 5, false, true, true});
    const HittingProblem p(g);
    const auto m = p.moments(2);
    const auto d = p.density(TimeGrid::uniform(60.0 * m[0].value, 20001));
    for (int n = 1; n <= 2; ++n) {
      const auto q = moment_numeric(d, n);
      CHECK(std::abs(q.value - m[n - 1].value) <= 1e-6 * m[n - 1].value + q.truncation_error_bound);
    }
  }
}

TEST_CASE("mean grows when the first coherent link weakens", "[hitting]") {
  const double slow = HittingProblem(testing::chain4(0.1)).mean().value;
  const double fast = HittingProblem(testing::chain4(5)).mean().value;
  CHECK(slow > 10 * fast);
}

TEST_CASE("nplus1 density equals the density of the extension", "[hitting]") {
  const GraphSpec g = testing::coherent_final();
  const TimeGrid grid = TimeGrid::uniform(3.0, 301);
  const auto a = nplus1_density(g, g.initial_density(), 50.0, grid);
  const GraphSpec e = extend_with_fictitious(g, 50.0);
  const auto b = hitting_density(e, e.initial_density(), grid);
  CHECK(a.density == b.density);
}

TEST_CASE("slope sign changes ignore flat stretches", "[hitting]") {
  HittingDistribution d;
  d.times = {0, 1, 2, 3, 4, 5, 6};
  d.density = {0, 1, 1, 0.5, 0.5, 2, 1};
  CHECK(slope_sign_changes(d, 0, 6) == 3);
  CHECK(slope_sign_changes(d, 0, 2) == 0);
}

TEST_CASE("dephasing damps oscillations", "[hitting][property]") {
  int prev = 1 << 30;
  for (double q : {0.0, 5.0, 20.0, 100.0}) {
    const auto d = HittingProblem(testing::chain4(50, q)).density(TimeGrid::uniform(3.0, 30001));
    const int c = slope_sign_changes(d, 0.0, 3.0);
    CHECK(c <= prev);
    prev = c;
  }
}
