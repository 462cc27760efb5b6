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

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oqw/common.hpp"
#include "oqw/graph.hpp"
#include "oqw/hitting.hpp"
#include "oqw/superop.hpp"

namespace oqw {

struct DiscreteDistribution {
  double delta_t = 0.0;
  std::vector<double> values;      // values[n-1] = f(n)
  std::vector<double> cumulative;  // running sum of values
};

/// Q rho keeps only rho_ff; P rho zeroes row f and column f.
inline std::pair<Superoperator, Superoperator> projectors(int n, int final_site) {
  if (n < 2) throw std::invalid_argument("projectors need at least 2 sites");
  if (final_site < 0 || final_site >= n) throw std::invalid_argument("final site out of range");
  const int d = n * n;
  CMatrix q = CMatrix::Zero(d, d);
  CMatrix p = CMatrix::Zero(d, d);
  q(dyad_index(final_site, final_site, n), dyad_index(final_site, final_site, n)) = 1.0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (j != final_site && k != final_site) p(dyad_index(j, k, n), dyad_index(j, k, n)) = 1.0;
  return {Superoperator(n, std::move(q)), Superoperator(n, std::move(p))};
}

inline std::pair<Superoperator, Superoperator> projectors(int n) { return projectors(n, n - 1); }

/// Measured-walk hitting probabilities
/// f(n) = Tr{Q K [P K]^{n-1} rho_i}, K = e^{L dt} with the full Liouvillian.
inline DiscreteDistribution kb_distribution(const GraphSpec& g, const DensityMatrix& rho_i,
                                            double delta_t, std::size_t n_max) {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw std::invalid_argument("delta_t must be > 0");
  const int n = g.num_sites();
  const int f = g.final_site();
  if (rho_i.dim() != n) throw std::invalid_argument("initial state dimension does not match the graph");
  if (std::abs(rho_i.population(f)) > 1e-12) {
    throw ValidationError("initial state has population on the final site");
  }
  const Superoperator k = expm(build_liouvillian(g), delta_t);
  DiscreteDistribution out;
  out.delta_t = delta_t;
  out.values.reserve(n_max);
  out.cumulative.reserve(n_max);
  CVector x = vectorize(rho_i.matrix());
  double total = 0.0;
  for (std::size_t step = 0; step < n_max; ++step) {
    CVector y = k.apply(x);
    const double fn = std::max(0.0, y(dyad_index(f, f, n)).real());
    total += fn;
    out.values.push_back(fn);
    out.cumulative.push_back(total);
    for (int j = 0; j < n; ++j) {
      y(dyad_index(f, j, n)) = 0.0;
      y(dyad_index(j, f, n)) = 0.0;
    }
    x = std::move(y);
  }
  return out;
}

/// h(k dt) for k = 0..count-1 by repeated application of e^{Lbar dt}.
inline std::vector<double> density_on_steps(const HittingProblem& p, double dt, std::size_t count) {
  const Superoperator step = expm(p.generator(), dt);
  std::vector<double> h(count);
  CVector v = vectorize(p.initial().matrix());
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) v = step.apply(v);
    h[i] = std::max(0.0, p.detection_rate(v).real());
  }
  return h;
}

struct ConvergenceRow {
  double delta_t = 0.0;
  std::size_t n_max = 0;
  double max_error = 0.0;  // max_n |f(n)/dt - h(t_{n-1})|
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::optional<double> slope;  // least-squares slope of log(error) against log(dt)
};

inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

/// Compares the measured walk with the jump density over [0, horizon] for
/// each step in the ladder. horizon = 0 selects 20x the analytic mean.
inline ConvergenceTable convergence_check(const GraphSpec& g, const DensityMatrix& rho_i,
                                          const std::vector<double>& ladder, double horizon = 0.0,
                                          unsigned workers = 1) {
  if (ladder.empty()) throw std::invalid_argument("delta_t ladder is empty");
  const HittingProblem p(g, rho_i);
  if (horizon == 0.0) horizon = p.default_horizon();
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  ConvergenceTable table;
  table.rows.resize(ladder.size());
  detail::parallel_for(ladder.size(), workers, [&](std::size_t i) {
    const double dt = ladder[i];
    if (!(dt > 0.0)) throw std::invalid_argument("delta_t must be > 0");
    const auto n_max = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const auto f = kb_distribution(g, rho_i, dt, n_max);
    const auto h = density_on_steps(p, dt, n_max);
    double err = 0.0;
    for (std::size_t k = 0; k < n_max; ++k) err = std::max(err, std::abs(f.values[k] / dt - h[k]));
    table.rows[i] = {dt, n_max, err};
  });
  std::vector<double> x, y;
  for (const auto& r : table.rows) {
    x.push_back(r.delta_t);
    y.push_back(r.max_error);
  }
  table.slope = loglog_slope(x, y);
  return table;
}

struct NPlus1Row {
  double v = 0.0;
  double l1_distance = 0.0;  // sum_n |f(n) - h_v(t_{n-1}) dt|
  double total_probability = 0.0;
};

struct NPlus1Study {
  double delta_t = 0.0;
  double horizon = 0.0;
  DiscreteDistribution reference;
  std::vector<NPlus1Row> rows;
};

/// Measured-walk reference on g (coherent edges on the final site allowed)
/// against the jump density of extend_with_fictitious(g, v) for each v.
/// horizon = 0 selects 20x the mean of the extension with the smallest v.
inline NPlus1Study nplus1_convergence(const GraphSpec& g, const DensityMatrix& rho_i,
                                      const std::vector<double>& v_ladder, double delta_t = 1e-4,
                                      double horizon = 0.0, unsigned workers = 1) {
  if (v_ladder.empty()) throw std::invalid_argument("v ladder is empty");
  for (double v : v_ladder) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("v must be positive and finite");
  }
  if (horizon == 0.0) {
    const double v_min = *std::min_element(v_ladder.begin(), v_ladder.end());
    const GraphSpec ext = extend_with_fictitious(g, v_min);
    horizon = HittingProblem(ext, rho_i.embedded(ext.num_sites())).default_horizon();
  }
  NPlus1Study study;
  study.delta_t = delta_t;
  study.horizon = horizon;
  const auto n_max = static_cast<std::size_t>(std::ceil(horizon / delta_t - 1e-9));
  study.reference = kb_distribution(g, rho_i, delta_t, n_max);
  study.rows.resize(v_ladder.size());
  detail::parallel_for(v_ladder.size(), workers, [&](std::size_t i) {
    const GraphSpec ext = extend_with_fictitious(g, v_ladder[i]);
    const HittingProblem p(ext, rho_i.embedded(ext.num_sites()));
    const auto h = density_on_steps(p, delta_t, n_max);
    double l1 = 0.0, total = 0.0;
    for (std::size_t k = 0; k < n_max; ++k) {
      l1 += std::abs(study.reference.values[k] - h[k] * delta_t);
      total += h[k] * delta_t;
    }
    study.rows[i] = {v_ladder[i], l1, total};
  });
  return study;
}

}  // namespace oqw
