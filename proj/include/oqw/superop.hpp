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
#include <stdexcept>
#include <vector>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "oqw/common.hpp"
#include "oqw/density.hpp"
#include "oqw/graph.hpp"

namespace oqw {

// Superoperators are N^2 x N^2 matrices acting on vectorized density
// matrices. The dyad |psi_j><psi_k| sits at index j*N + k (row-major,
// 0-based), so vec(rho)[j*N + k] = rho(j, k). Golden-matrix tests depend on
// this ordering.

inline int dyad_index(int j, int k, int n) { return j * n + k; }

inline CVector vectorize(const CMatrix& rho) {
  const auto n = rho.rows();
  CVector v(n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) v(j * n + k) = rho(j, k);
  return v;
}

inline CMatrix unvectorize(const CVector& v, int n) {
  CMatrix rho(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) rho(j, k) = v(j * n + k);
  return rho;
}

/// Trace of the operator held in a vectorized buffer.
inline Complex vec_trace(const CVector& v, int n) {
  Complex t = 0.0;
  for (int j = 0; j < n; ++j) t += v(j * n + j);
  return t;
}

class Superoperator {
 public:
  Superoperator(int sites, CMatrix m) : n_(sites), m_(std::move(m)) {
    if (m_.rows() != static_cast<Eigen::Index>(n_) * n_ || m_.cols() != m_.rows()) {
      throw std::invalid_argument("superoperator shape does not match site count");
    }
  }

  static Superoperator zero(int sites) {
    const int d = sites * sites;
    return {sites, CMatrix::Zero(d, d)};
  }
  static Superoperator identity(int sites) {
    const int d = sites * sites;
    return {sites, CMatrix::Identity(d, d)};
  }

  int sites() const { return n_; }
  int dim() const { return n_ * n_; }
  const CMatrix& matrix() const { return m_; }

  CVector apply(const CVector& v) const { return m_ * v; }
  CMatrix apply(const CMatrix& rho) const { return unvectorize(m_ * vectorize(rho), n_); }

  friend Superoperator operator+(const Superoperator& a, const Superoperator& b) {
    return {a.n_, a.m_ + b.m_};
  }
  friend Superoperator operator-(const Superoperator& a, const Superoperator& b) {
    return {a.n_, a.m_ - b.m_};
  }
  friend Superoperator operator*(const Superoperator& a, const Superoperator& b) {
    return {a.n_, a.m_ * b.m_};
  }
  friend Superoperator operator*(double s, const Superoperator& a) { return {a.n_, s * a.m_}; }

 private:
  int n_;
  CMatrix m_;
};

/// Detection efficiency per incoherent channel, aligned with
/// GraphSpec::incoherent_edges(). Dephasing loops are never detected.
class EfficiencyVector {
 public:
  EfficiencyVector(const GraphSpec& g, std::vector<double> eta) : eta_(std::move(eta)) {
    if (eta_.size() != g.incoherent_edges().size()) {
      throw std::invalid_argument("efficiency vector length must match incoherent edge count");
    }
    for (double e : eta_) {
      if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("efficiency must lie in [0, 1]");
    }
  }

  /// eta_mn = 1 for channels into the final site, 0 otherwise.
  static EfficiencyVector hitting(const GraphSpec& g) {
    std::vector<double> eta;
    for (const auto& e : g.incoherent_edges()) eta.push_back(e.to == g.final_site() ? 1.0 : 0.0);
    return {g, std::move(eta)};
  }

  static EfficiencyVector uniform(const GraphSpec& g, double value) {
    return {g, std::vector<double>(g.incoherent_edges().size(), value)};
  }

  double operator[](std::size_t i) const { return eta_[i]; }
  std::size_t size() const { return eta_.size(); }

 private:
  std::vector<double> eta_;
};

namespace detail {

// M += c * vec(Q_{to,from} rho Q_{from,to})
inline void add_transfer_sandwich(CMatrix& m, int n, double c, int to, int from) {
  m(dyad_index(to, to, n), dyad_index(from, from, n)) += c;
}

// M += -c/2 * vec({Q_from, rho})
inline void add_anticommutator_drain(CMatrix& m, int n, double c, int from) {
  for (int k = 0; k < n; ++k) {
    m(dyad_index(from, k, n), dyad_index(from, k, n)) -= 0.5 * c;
    m(dyad_index(k, from, n), dyad_index(k, from, n)) -= 0.5 * c;
  }
}

// M += vec(-i[H, rho])
inline void add_commutator(CMatrix& m, int n, const CMatrix& h) {
  const Complex mi(0.0, -1.0);
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < n; ++a) {
      if (h(j, a) == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        m(dyad_index(j, k, n), dyad_index(a, k, n)) += mi * h(j, a);   // -i H rho
        m(dyad_index(k, a, n), dyad_index(k, j, n)) -= mi * h(j, a);   // +i rho H
      }
    }
}

}  // namespace detail

/// H = sum over coherent edges (j,k) of w_j Q_j + w_k Q_k + Omega_jk (Q_jk + Q_kj).
///
/// The site energy w_j enters once per coherent edge incident on j, so a
/// site on two coherent edges carries 2 w_j on the diagonal. Sites without
/// coherent edges contribute nothing.
inline CMatrix build_hamiltonian(const GraphSpec& g) {
  const int n = g.num_sites();
  const auto& w = g.site_energies();
  CMatrix h = CMatrix::Zero(n, n);
  for (const auto& e : g.coherent_edges()) {
    h(e.a, e.a) += w[e.a];
    h(e.b, e.b) += w[e.b];
    h(e.a, e.b) += e.rabi;
    h(e.b, e.a) += e.rabi;
  }
  return h;
}

namespace detail {

// Shared builder: coherent part, full anticommutator drains, dephasing, and
// incoherent sandwich terms weighted by `sandwich_weight(i)`.
template <typename Weight>
Superoperator assemble(const GraphSpec& g, const CMatrix& h, Weight&& sandwich_weight) {
  const int n = g.num_sites();
  CMatrix m = CMatrix::Zero(n * n, n * n);
  add_commutator(m, n, h);
  const auto& edges = g.incoherent_edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.rate == 0.0) continue;
    add_transfer_sandwich(m, n, sandwich_weight(i) * e.rate, e.to, e.from);
    add_anticommutator_drain(m, n, e.rate, e.from);
  }
  for (const auto& d : g.dephasing_loops()) {
    if (d.rate == 0.0) continue;
    add_transfer_sandwich(m, n, d.rate, d.site, d.site);
    add_anticommutator_drain(m, n, d.rate, d.site);
  }
  return {n, std::move(m)};
}

}  // namespace detail

/// Full Lindblad generator L rho = -i[H, rho] + sum k_mn D_mn rho + sum q_n D_n rho.
inline Superoperator build_liouvillian(const GraphSpec& g) {
  return detail::assemble(g, build_hamiltonian(g), [](std::size_t) { return 1.0; });
}

/// Jump superoperator J(eta) rho = sum eta_mn k_mn Q_mn rho Q_mn^dagger.
inline Superoperator build_jump(const GraphSpec& g, const EfficiencyVector& eff) {
  const int n = g.num_sites();
  CMatrix m = CMatrix::Zero(n * n, n * n);
  const auto& edges = g.incoherent_edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double c = eff[i] * edges[i].rate;
    if (c != 0.0) detail::add_transfer_sandwich(m, n, c, edges[i].to, edges[i].from);
  }
  return {n, std::move(m)};
}

/// No-count generator Lbar(eta): the Liouvillian with each detected sandwich
/// term scaled by (1 - eta). Anticommutator drains are kept in full.
inline Superoperator build_nojump(const GraphSpec& g, const EfficiencyVector& eff) {
  return detail::assemble(g, build_hamiltonian(g), [&](std::size_t i) { return 1.0 - eff[i]; });
}

inline Superoperator build_hitting_jump(const GraphSpec& g) {
  return build_jump(g, EfficiencyVector::hitting(g));
}

inline Superoperator build_hitting_nojump(const GraphSpec& g) {
  return build_nojump(g, EfficiencyVector::hitting(g));
}

// ---------------------------------------------------------------------------
// Matrix functions

/// e^{s t} by scaling and squaring with a Pade approximant.
inline Superoperator expm(const Superoperator& s, double t) {
  if (!std::isfinite(t)) throw NumericError("expm: time must be finite");
  if (!s.matrix().allFinite()) throw NumericError("expm: generator has non-finite entries");
  if (t == 0.0) return Superoperator::identity(s.sites());
  CMatrix scaled = s.matrix() * t;
  CMatrix e = scaled.exp();
  if (!e.allFinite()) throw NumericError("expm: result is not finite");
  return {s.sites(), std::move(e)};
}

struct PseudoinverseResult {
  Superoperator pinv;
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min_kept = 0.0;  // smallest singular value above the cutoff

  /// sigma_max / sigma_min over the retained spectrum; 0 for the zero matrix.
  double condition() const { return rank > 0 ? sigma_max / sigma_min_kept : 0.0; }
};

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// rel_cutoff * sigma_max are treated as zero.
inline PseudoinverseResult pseudoinverse_with_info(const Superoperator& s, double rel_cutoff = 1e-12) {
  const CMatrix& a = s.matrix();
  if (!a.allFinite()) throw NumericError("pseudoinverse: matrix has non-finite entries");
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  PseudoinverseResult out{Superoperator::zero(s.sites())};
  if (sv.size() == 0 || sv(0) == 0.0) return out;
  out.sigma_max = sv(0);
  const double cut = rel_cutoff * sv(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= cut && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      out.rank += 1;
      out.sigma_min_kept = sv(i);
    }
  }
  CMatrix p = svd.matrixV() * inv.cast<Complex>().asDiagonal() * svd.matrixU().adjoint();
  out.pinv = Superoperator(s.sites(), std::move(p));
  return out;
}

inline Superoperator pseudoinverse(const Superoperator& s) { return pseudoinverse_with_info(s).pinv; }

// ---------------------------------------------------------------------------
// Single coherent edge

/// nu_jk = sqrt((w_j - w_k)^2 + 4 Omega_jk^2).
inline double coherent_frequency(double omega_j, double omega_k, double rabi) {
  const double d = omega_j - omega_k;
  return std::sqrt(d * d + 4.0 * rabi * rabi);
}

/// Transition probability |<psi_j| e^{-i H_jk t} |psi_k>|^2 for an isolated
/// coherent edge: (2 Omega^2 / nu^2)(1 - cos nu t) with
/// nu = sqrt((w_j - w_k)^2 + 4 Omega^2). Zero when nu = 0.
inline double coherent_transition_prob(double omega_j, double omega_k, double rabi, double t) {
  if (t < 0.0) throw std::invalid_argument("coherent_transition_prob: t must be >= 0");
  const double nu = coherent_frequency(omega_j, omega_k, rabi);
  if (nu == 0.0) return 0.0;
  // 1 - cos(x) = 2 sin^2(x/2) avoids cancellation at small t
  const double s = std::sin(0.5 * nu * t);
  return 4.0 * rabi * rabi / (nu * nu) * s * s;
}

}  // namespace oqw
