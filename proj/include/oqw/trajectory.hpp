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
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "oqw/common.hpp"
#include "oqw/hitting.hpp"
#include "oqw/superop.hpp"

namespace oqw {

// ---------------------------------------------------------------------------
// Random streams

/// Seed of trajectory `index` under `master`. A pure function of both
/// arguments, so streams have no sequential dependency on each other.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over a Weyl sequence offset
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Uniform in the open interval (0, 1), first draw of the stream `seed`.
inline double uniform_open(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::uint64_t x = gen();
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Sampling

struct TrajectoryConfig {
  std::size_t num_trajectories = 1;
  std::uint64_t master_seed = 0;
  double max_time = 0.0;        // 0: 100x the analytic mean
  double step_dt = 0.0;         // 0: analytic mean / 100
  double rel_time_tol = 1e-6;   // bisection stop, relative to the jump time
  unsigned workers = 1;
};

struct FirstJump {
  double time = 0.0;     // max_time when censored
  bool censored = false;
  friend bool operator==(const FirstJump&, const FirstJump&) = default;
};

/// Norm-threshold sampler for the first detected jump.
///
/// A draw u ~ U(0,1) is mapped to the first time t with
/// Tr[e^{Lbar t} rho_i] <= u. The unnormalized no-jump state is tabulated
/// once on a step grid; each sample then locates its step by binary search
/// on the tabulated survival and bisects inside it with precomputed
/// propagators for dt/2, dt/4, ...
class TrajectorySampler {
 public:
  static constexpr int kMaxLevels = 60;
  static constexpr std::size_t kTableBudget = std::size_t{1} << 22;  // complex entries

  TrajectorySampler(const HittingProblem& p, TrajectoryConfig cfg) : p_(p), cfg_(cfg) {
    resolve_defaults();
    const int n = p_.graph().num_sites();
    const double span = cfg_.max_time;
    steps_ = static_cast<std::size_t>(std::ceil(span / cfg_.step_dt - 1e-9));
    steps_ = std::max<std::size_t>(steps_, 1);
    dt_ = span / static_cast<double>(steps_);

    const Superoperator step = expm(p_.generator(), dt_);
    store_states_ = (steps_ + 1) * static_cast<std::size_t>(n) * n <= kTableBudget;
    CVector v = vectorize(p_.initial().matrix());
    survival_.reserve(steps_ + 1);
    for (std::size_t k = 0; k <= steps_; ++k) {
      if (k > 0) v = step.apply(v);
      double s = vec_trace(v, n).real();
      if (k > 0) s = std::min(s, survival_.back());  // enforce monotone search keys
      survival_.push_back(s);
      if (store_states_) states_.push_back(v);
    }
    double h = dt_;
    for (int j = 0; j < kMaxLevels; ++j) {
      h *= 0.5;
      halves_.push_back(expm(p_.generator(), h));
    }
  }

  const TrajectoryConfig& config() const { return cfg_; }
  double step() const { return dt_; }
  double survival_at_horizon() const { return survival_.back(); }

  /// First-jump time for the threshold u in (0, 1).
  FirstJump sample_threshold(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
    if (u < survival_.back()) return {cfg_.max_time, true};
    if (survival_.front() <= u) return {0.0, false};
    // first k with S_k <= u; then S_{k-1} > u
    const auto it = std::partition_point(survival_.begin(), survival_.end(),
                                         [u](double s) { return s > u; });
    const std::size_t k = static_cast<std::size_t>(it - survival_.begin());
    const int n = p_.graph().num_sites();
    CVector x = state_at(k - 1);
    double lo = dt_ * static_cast<double>(k - 1);
    double half = dt_;
    for (int j = 0; j < kMaxLevels; ++j) {
      half *= 0.5;
      CVector y = halves_[j].apply(x);
      if (vec_trace(y, n).real() > u) {
        x = std::move(y);
        lo += half;
      }
      if (half <= cfg_.rel_time_tol * (lo + half)) break;
    }
    return {lo + 0.5 * half, false};
  }

  FirstJump sample(std::uint64_t seed) const { return sample_threshold(uniform_open(seed)); }

 private:
  void resolve_defaults() {
    if (cfg_.max_time == 0.0 || cfg_.step_dt == 0.0) {
      double m = 0.0;
      try {
        const auto r = p_.mean();
        if (!r.defective && std::isfinite(r.value) && r.value > 0.0) m = r.value;
      } catch (const NumericError&) {
      }
      if (m == 0.0) m = p_.default_horizon() / 20.0;
      if (cfg_.max_time == 0.0) cfg_.max_time = 100.0 * m;
      if (cfg_.step_dt == 0.0) cfg_.step_dt = m / 100.0;
    }
    if (!(cfg_.max_time > 0.0) || !std::isfinite(cfg_.max_time)) {
      throw std::invalid_argument("max_time must be positive");
    }
    if (!(cfg_.step_dt > 0.0) || !std::isfinite(cfg_.step_dt)) {
      throw std::invalid_argument("step_dt must be positive");
    }
    if (!(cfg_.rel_time_tol > 0.0)) throw std::invalid_argument("rel_time_tol must be positive");
    cfg_.step_dt = std::min(cfg_.step_dt, cfg_.max_time);
  }

  CVector state_at(std::size_t k) const {
    if (store_states_) return states_[k];
    return expm(p_.generator(), dt_ * static_cast<double>(k)).apply(vectorize(p_.initial().matrix()));
  }

  const HittingProblem& p_;
  TrajectoryConfig cfg_;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
  bool store_states_ = true;
  std::vector<double> survival_;
  std::vector<CVector> states_;
  std::vector<Superoperator> halves_;
};

// ---------------------------------------------------------------------------
// Empirical statistics

/// Streaming central moments up to fourth order (single pass, fixed order).
class MomentAccumulator {
 public:
  void add(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double t1 = delta * dn * n1;
    mean_ += dn;
    m4_ += t1 * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * m2_ - 4 * dn * m3_;
    m3_ += t1 * dn * (n - 2) - 3 * dn * m2_;
    m2_ += t1;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  double m4() const { return m4_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

struct EmpiricalDistribution {
  std::vector<FirstJump> samples;  // slot i holds trajectory i
  std::size_t censored_count = 0;
  std::uint64_t master_seed = 0;
  double max_time = 0.0;
  MomentAccumulator accumulator;   // uncensored times, trajectory order

  std::size_t uncensored_count() const { return samples.size() - censored_count; }
  double censored_fraction() const {
    return samples.empty() ? 0.0 : static_cast<double>(censored_count) / samples.size();
  }
};

struct EmpiricalMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double mean_standard_error = 0.0;
  std::optional<double> variance;                  // unbiased, needs n >= 2
  std::optional<double> variance_standard_error;   // needs n >= 4
};

/// Mean, unbiased variance and standard errors of the uncensored samples.
/// SE(mean) = sqrt(s^2 / n); SE(s^2) = sqrt((m4 - s^4 (n-3)/(n-1)) / n) with
/// m4 the fourth central sample moment.
inline EmpiricalMoments empirical_moments(const EmpiricalDistribution& e) {
  const auto& acc = e.accumulator;
  if (acc.count() == 0) throw std::invalid_argument("no uncensored samples");
  EmpiricalMoments r;
  r.count = acc.count();
  r.mean = acc.mean();
  const double n = static_cast<double>(acc.count());
  if (acc.count() >= 2) {
    const double s2 = acc.m2() / (n - 1.0);
    r.variance = s2;
    r.mean_standard_error = std::sqrt(s2 / n);
    if (acc.count() >= 4) {
      const double m4 = acc.m4() / n;
      r.variance_standard_error = std::sqrt(std::max(0.0, (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n));
    }
  }
  return r;
}

/// Fraction of all trajectories whose first jump is later than t; censored
/// samples count as later for t below the horizon.
inline double empirical_survival(const EmpiricalDistribution& e, double t) {
  if (e.samples.empty()) throw std::invalid_argument("no samples");
  std::size_t later = 0;
  for (const auto& s : e.samples) later += (s.censored || s.time > t) ? 1 : 0;
  return static_cast<double>(later) / static_cast<double>(e.samples.size());
}

inline FirstJump sample_first_jump(const GraphSpec& g, const DensityMatrix& rho_i, std::uint64_t seed,
                                   TrajectoryConfig cfg = {}) {
  const HittingProblem p(g, rho_i);
  return TrajectorySampler(p, cfg).sample(seed);
}

/// Samples trajectory i from stream_seed(master_seed, i). The result does not
/// depend on cfg.workers.
inline EmpiricalDistribution sample_ensemble(const HittingProblem& p, const TrajectoryConfig& cfg) {
  if (cfg.num_trajectories < 1) throw std::invalid_argument("num_trajectories must be >= 1");
  const TrajectorySampler sampler(p, cfg);
  EmpiricalDistribution e;
  e.master_seed = cfg.master_seed;
  e.max_time = sampler.config().max_time;
  e.samples.resize(cfg.num_trajectories);
  detail::parallel_for(cfg.num_trajectories, cfg.workers, [&](std::size_t i) {
    e.samples[i] = sampler.sample(stream_seed(cfg.master_seed, i));
  });
  for (const auto& s : e.samples) {
    if (s.censored) {
      ++e.censored_count;
    } else {
      e.accumulator.add(s.time);
    }
  }
  return e;
}

inline EmpiricalDistribution sample_ensemble(const GraphSpec& g, const DensityMatrix& rho_i,
                                             const TrajectoryConfig& cfg) {
  return sample_ensemble(HittingProblem(g, rho_i), cfg);
}

}  // namespace oqw
