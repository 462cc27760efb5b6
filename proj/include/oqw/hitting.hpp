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
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oqw/common.hpp"
#include "oqw/density.hpp"
#include "oqw/graph.hpp"
#include "oqw/quadrature.hpp"
#include "oqw/superop.hpp"

namespace oqw {

/// Hitting-time density h(t) sampled on a grid.
struct HittingDistribution {
  std::vector<double> times;
  std::vector<double> density;
  double total_probability = 0.0;  // Simpson integral of h over the grid
  std::string graph_fingerprint;
  std::vector<std::string> warnings;
};

enum class MomentMethod { Pseudoinverse, NumericIntegration };

struct MomentResult {
  int order = 1;
  double value = 0.0;
  MomentMethod method = MomentMethod::Pseudoinverse;
  // pseudoinverse: sigma_max / sigma_min of the no-jump generator
  double condition_estimate = 0.0;
  // numeric: estimated contribution of the tail beyond the grid
  double truncation_error_bound = 0.0;
  // total hitting probability below one, or the initial state not in the
  // range of the generator; moments are then not those of a proper law
  bool defective = false;
  double hit_probability = 1.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline constexpr double kImagDiscard = 1e-10;
inline constexpr double kImagError = 1e-8;

// Imaginary residues relative to `scale`: dropped below 1e-10, warned up to
// 1e-8, fatal beyond.
inline double real_part_checked(Complex z, double scale, std::vector<std::string>& warnings,
                                const char* what) {
  const double rel = scale > 0.0 ? std::abs(z.imag()) / scale : std::abs(z.imag());
  if (rel > kImagError) {
    std::ostringstream os;
    os << what << ": imaginary residue " << z.imag() << " exceeds tolerance";
    throw NumericError(os.str());
  }
  if (rel > kImagDiscard) {
    std::ostringstream os;
    os << what << ": imaginary residue " << z.imag() << " discarded";
    warnings.push_back(os.str());
  }
  return z.real();
}

}  // namespace detail

/// A graph and initial state prepared for the jump analysis: the no-jump
/// generator for detection of transitions into the final site, plus the
/// detection rates k_{f n}.
class HittingProblem {
 public:
  HittingProblem(const GraphSpec& g, const DensityMatrix& rho_i)
      : graph_(g), rho_(rho_i), lbar_(Superoperator::zero(g.num_sites())) {
    const auto report = validate(g);
    if (!report.clean()) {
      const auto& e = report.coherent_final_edges.front();
      throw ValidationError("coherent edge " + std::to_string(e.a + 1) + "<->" +
                            std::to_string(e.b + 1) +
                            " touches the final site; extend the graph with a fictitious site "
                            "(extend_with_fictitious / nplus1) first");
    }
    if (rho_i.dim() != g.num_sites()) {
      throw std::invalid_argument("initial state dimension does not match the graph");
    }
    lbar_ = build_hitting_nojump(g);
    const int n = g.num_sites();
    for (const auto& e : g.incoherent_edges()) {
      if (e.to == g.final_site() && e.rate > 0.0) detect_.push_back({dyad_index(e.from, e.from, n), e.rate});
    }
  }

  explicit HittingProblem(const GraphSpec& g) : HittingProblem(g, g.initial_density()) {}

  const GraphSpec& graph() const { return graph_; }
  const DensityMatrix& initial() const { return rho_; }
  const Superoperator& generator() const { return lbar_; }

  /// sum_n k_{f n} <psi_n| X |psi_n> for a vectorized X.
  Complex detection_rate(const CVector& x) const {
    Complex s = 0.0;
    for (const auto& [idx, k] : detect_) s += k * x(idx);
    return s;
  }

  double detection_scale(const CVector& x) const {
    double s = 0.0;
    for (const auto& [idx, k] : detect_) s += k * std::abs(x(idx));
    return s;
  }

  double max_detection_rate() const {
    double m = 0.0;
    for (const auto& d : detect_) m = std::max(m, d.second);
    return m;
  }

  /// Tr[e^{Lbar t} rho_i].
  double survival(double t) const {
    if (!(t >= 0.0)) throw std::invalid_argument("survival: t must be >= 0");
    const CVector v = expm(lbar_, t).apply(vectorize(rho_.matrix()));
    std::vector<std::string> ignored;
    const double s = detail::real_part_checked(vec_trace(v, graph_.num_sites()), 1.0, ignored,
                                               "survival");
    return std::clamp(s, 0.0, 1.0);
  }

  /// h(t_i) on the grid. Uniform grids from zero reuse one step propagator;
  /// other grids take one exponential per point, spread over `workers`.
  HittingDistribution density(const TimeGrid& grid, unsigned workers = 1) const {
    HittingDistribution out;
    out.times = grid.values();
    out.density.assign(grid.size(), 0.0);
    out.graph_fingerprint = fingerprint(graph_);
    const CVector v0 = vectorize(rho_.matrix());
    std::vector<Complex> raw(grid.size());
    std::vector<double> scale(grid.size());
    if (grid.is_uniform_from_zero()) {
      const Superoperator step = expm(lbar_, grid[1] - grid[0]);
      CVector v = v0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0) v = step.apply(v);
        raw[i] = detection_rate(v);
        scale[i] = detection_scale(v);
      }
    } else {
      detail::parallel_for(grid.size(), workers, [&](std::size_t i) {
        const CVector v = expm(lbar_, grid[i]).apply(v0);
        raw[i] = detection_rate(v);
        scale[i] = detection_scale(v);
      });
    }
    bool negative = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double h = detail::real_part_checked(raw[i], scale[i], out.warnings, "hitting density");
      if (h < -1e-10 * std::max(scale[i], 1e-300)) negative = true;
      out.density[i] = std::max(h, 0.0);
    }
    if (negative) out.warnings.push_back("hitting density: negative values clipped to zero");
    out.total_probability = simpson(out.times, out.density);
    return out;
  }

  /// Raw moments E[T^n] for n = 1..max_order via powers of the
  /// pseudoinverse of the no-jump generator.
  std::vector<MomentResult> moments(int max_order) const {
    if (max_order < 1) throw std::invalid_argument("moment order must be >= 1");
    const auto pinv = pseudoinverse_with_info(lbar_);
    std::vector<CVector> chain;  // chain[j] = (Lbar^+)^j vec(rho)
    chain.push_back(vectorize(rho_.matrix()));
    for (int j = 1; j <= max_order + 1; ++j) chain.push_back(pinv.pinv.apply(chain.back()));

    // Range consistency: Lbar y_j must reproduce y_{j-1}, otherwise part of
    // the state never decays into the detected channels.
    std::vector<bool> range_ok(chain.size(), true);
    for (std::size_t j = 1; j < chain.size(); ++j) {
      const double resid = (lbar_.apply(chain[j]) - chain[j - 1]).norm();
      range_ok[j] = range_ok[j - 1] && resid <= 1e-8 * std::max(chain[j - 1].norm(), 1e-300);
    }
    std::vector<std::string> base_warnings;
    const double tr = rho_.trace();
    const double hit = range_ok[1] ? -detail::real_part_checked(detection_rate(chain[1]),
                                                                detection_scale(chain[1]),
                                                                base_warnings, "hit probability")
                                   : tr - survival(settling_time());
    const bool hit_defect = std::abs(hit - tr) > 1e-8 * std::max(tr, 1e-300);

    std::vector<MomentResult> out;
    double factorial = 1.0;
    for (int order = 1; order <= max_order; ++order) {
      factorial *= order;
      MomentResult r;
      r.order = order;
      r.method = MomentMethod::Pseudoinverse;
      r.condition_estimate = pinv.condition();
      r.hit_probability = hit;
      r.warnings = base_warnings;
      const CVector& y = chain[order + 1];
      const double sign = (order % 2 == 1) ? 1.0 : -1.0;  // (-1)^{n+1}
      const Complex z = sign * factorial * detection_rate(y);
      r.value = detail::real_part_checked(z, factorial * detection_scale(y), r.warnings, "moment");
      r.defective = hit_defect || !range_ok[order + 1];
      if (r.defective) {
        std::ostringstream os;
        os << "defective hitting distribution (hit probability " << hit
           << "); moment does not describe a proper hitting-time law";
        r.warnings.push_back(os.str());
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  /// Time after which every decaying mode of the no-jump generator has
  /// shrunk by e^-60.
  double settling_time() const {
    Eigen::ComplexEigenSolver<CMatrix> es(lbar_.matrix(), false);
    const auto& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    double slowest = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double rate = -ev(i).real();
      if (rate > 1e-9 * scale && (slowest == 0.0 || rate < slowest)) slowest = rate;
    }
    return slowest > 0.0 ? 60.0 / slowest : 0.0;
  }

  MomentResult moment(int order) const { return moments(order).back(); }

  MomentResult mean() const { return moment(1); }

  /// E[T^2] - E[T]^2.
  MomentResult variance() const {
    auto m = moments(2);
    MomentResult v = m[1];
    v.value = m[1].value - m[0].value * m[0].value;
    return v;
  }

  /// Horizon for default grids: 20x the mean, or 20 / (smallest positive
  /// rate) when the mean is unavailable.
  double default_horizon() const {
    try {
      const auto m = mean();
      if (!m.defective && std::isfinite(m.value) && m.value > 0.0) return 20.0 * m.value;
    } catch (const NumericError&) {
    }
    double min_rate = std::numeric_limits<double>::infinity();
    for (const auto& e : graph_.incoherent_edges())
      if (e.rate > 0.0) min_rate = std::min(min_rate, e.rate);
    for (const auto& e : graph_.coherent_edges())
      if (e.rabi != 0.0) min_rate = std::min(min_rate, std::abs(e.rabi));
    return std::isfinite(min_rate) ? 20.0 / min_rate : 20.0;
  }

  TimeGrid default_grid(std::size_t points = 2001) const {
    return TimeGrid::uniform(default_horizon(), points);
  }

 private:
  GraphSpec graph_;
  DensityMatrix rho_;
  Superoperator lbar_;
  std::vector<std::pair<int, double>> detect_;
};

// Free-function forms.

inline HittingDistribution hitting_density(const GraphSpec& g, const DensityMatrix& rho_i,
                                           const TimeGrid& grid, unsigned workers = 1) {
  return HittingProblem(g, rho_i).density(grid, workers);
}

inline double survival(const GraphSpec& g, const DensityMatrix& rho_i, double t) {
  return HittingProblem(g, rho_i).survival(t);
}

inline MomentResult moment(const GraphSpec& g, const DensityMatrix& rho_i, int order) {
  return HittingProblem(g, rho_i).moment(order);
}

inline MomentResult mean(const GraphSpec& g, const DensityMatrix& rho_i) {
  return HittingProblem(g, rho_i).mean();
}

inline MomentResult variance(const GraphSpec& g, const DensityMatrix& rho_i) {
  return HittingProblem(g, rho_i).variance();
}

/// Quadrature oracle: integral of t^n h(t) over the grid (composite
/// Simpson). The truncation bound extrapolates the missing tail mass with an
/// exponential fitted to the last grid value.
inline MomentResult moment_numeric(const HittingDistribution& d, int order, double tail_tol = 1e-4) {
  if (order < 1) throw std::invalid_argument("moment order must be >= 1");
  if (d.times.size() < 3) throw std::invalid_argument("moment_numeric: grid needs at least 3 points");
  std::vector<double> integrand(d.times.size());
  for (std::size_t i = 0; i < d.times.size(); ++i) {
    integrand[i] = std::pow(d.times[i], order) * d.density[i];
  }
  MomentResult r;
  r.order = order;
  r.method = MomentMethod::NumericIntegration;
  r.value = simpson(d.times, integrand);
  r.hit_probability = d.total_probability;
  const double tail = std::max(0.0, 1.0 - d.total_probability);
  const double t_end = d.times.back();
  const double h_end = d.density.back();
  if (tail > 0.0 && h_end > 0.0) {
    // E[(t_end + X)^n] with X ~ Exp(lambda), lambda = h_end / tail
    const double mean_x = tail / h_end;
    double acc = 0.0, binom = 1.0, fact = 1.0;
    for (int k = 0; k <= order; ++k) {
      if (k > 0) {
        binom = binom * (order - k + 1) / k;
        fact *= k;
      }
      acc += binom * std::pow(t_end, order - k) * fact * std::pow(mean_x, k);
    }
    r.truncation_error_bound = tail * acc;
  } else {
    r.truncation_error_bound = tail * std::pow(t_end, order);
  }
  if (d.total_probability < 1.0 - tail_tol) {
    std::ostringstream os;
    os << "grid captures probability " << d.total_probability
       << " only; tail beyond the grid is extrapolated in the error bound";
    r.warnings.push_back(os.str());
  }
  return r;
}

/// Density of the fictitious site of extend_with_fictitious(g, v); rho_i is
/// zero padded into the larger space.
inline HittingDistribution nplus1_density(const GraphSpec& g, const DensityMatrix& rho_i, double v,
                                          const TimeGrid& grid, unsigned workers = 1) {
  const GraphSpec ext = extend_with_fictitious(g, v);
  return HittingProblem(ext, rho_i.embedded(ext.num_sites())).density(grid, workers);
}

/// Number of sign changes of the forward difference of h over [t_lo, t_hi].
/// Differences smaller than rel_floor * max|h| are treated as flat and do not
/// reset or flip the running sign.
inline int slope_sign_changes(const HittingDistribution& d, double t_lo, double t_hi,
                              double rel_floor = 1e-9) {
  double hmax = 0.0;
  for (std::size_t i = 0; i < d.times.size(); ++i) {
    if (d.times[i] >= t_lo && d.times[i] <= t_hi) hmax = std::max(hmax, std::abs(d.density[i]));
  }
  const double floor = rel_floor * hmax;
  int changes = 0;
  int sign = 0;
  for (std::size_t i = 1; i < d.times.size(); ++i) {
    if (d.times[i - 1] < t_lo || d.times[i] > t_hi) continue;
    const double diff = d.density[i] - d.density[i - 1];
    if (std::abs(diff) <= floor) continue;
    const int s = diff > 0 ? 1 : -1;
    if (sign != 0 && s != sign) ++changes;
    sign = s;
  }
  return changes;
}

}  // namespace oqw
