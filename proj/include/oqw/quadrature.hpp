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

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace oqw {

/// Strictly increasing, finite, non-negative sample times.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> t) : t_(std::move(t)) {
    if (t_.empty()) throw std::invalid_argument("time grid is empty");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || t_[i] < 0.0) {
        throw std::invalid_argument("time grid entries must be finite and >= 0");
      }
      if (i > 0 && !(t_[i] > t_[i - 1])) {
        throw std::invalid_argument("time grid must be strictly increasing");
      }
    }
  }

  /// `points` equally spaced times on [0, t_max].
  static TimeGrid uniform(double t_max, std::size_t points) {
    if (points < 2) throw std::invalid_argument("uniform grid needs at least 2 points");
    if (!(t_max > 0.0)) throw std::invalid_argument("uniform grid needs t_max > 0");
    std::vector<double> t(points);
    for (std::size_t i = 0; i < points; ++i) {
      t[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return TimeGrid(std::move(t));
  }

  std::size_t size() const { return t_.size(); }
  double operator[](std::size_t i) const { return t_[i]; }
  double front() const { return t_.front(); }
  double back() const { return t_.back(); }
  const std::vector<double>& values() const { return t_; }

  /// Uniform spacing starting at zero, within 1e-12 relative to the span.
  bool is_uniform_from_zero() const {
    if (t_.size() < 2 || t_.front() != 0.0) return false;
    const double dt = (t_.back() - t_.front()) / static_cast<double>(t_.size() - 1);
    const double tol = 1e-12 * t_.back();
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (std::abs(t_[i] - dt * static_cast<double>(i)) > tol) return false;
    }
    return true;
  }

 private:
  std::vector<double> t_;
};

/// Composite Simpson rule on an arbitrary (possibly non-uniform) grid. An
/// odd interval count closes with the three-point rule on the last interval.
/// Two points fall back to the trapezoid rule.
inline double simpson(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw std::invalid_argument("simpson: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
  const std::size_t intervals = n - 1;
  const std::size_t paired = intervals - intervals % 2;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= paired; i += 2) {
    const double h0 = x[i + 1] - x[i];
    const double h1 = x[i + 2] - x[i + 1];
    const double hs = h0 + h1;
    s += hs / 6.0 *
         ((2.0 - h1 / h0) * f[i] + hs * hs / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
  }
  if (intervals % 2 == 1) {
    const std::size_t i = n - 3;
    const double h0 = x[i + 1] - x[i];
    const double h1 = x[i + 2] - x[i + 1];
    s += f[i + 2] * h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1)) +
         f[i + 1] * h1 * (h1 + 3.0 * h0) / (6.0 * h0) -
         f[i] * h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
  }
  return s;
}

}  // namespace oqw
