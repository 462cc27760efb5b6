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
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "oqw/common.hpp"

namespace oqw {

/// N x N density operator in the site basis, rho(m, n) = <psi_m|rho|psi_n>.
///
/// Hermitian and positive semidefinite; the trace may be below one because
/// states propagated under the no-jump generator lose norm.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kEigenTol = 1e-12;

  /// Pure site state |psi_site><psi_site|, 0-based site.
  static DensityMatrix basis(int dim, int site) {
    CMatrix m = CMatrix::Zero(dim, dim);
    m(site, site) = 1.0;
    return DensityMatrix(std::move(m));
  }

  /// Checks Hermiticity and positivity, clips eigenvalues in [-tol, 0) to
  /// zero. With `unit_trace` the trace must equal one within 1e-10.
  /// Throws std::invalid_argument naming the violated property.
  static DensityMatrix validated(const CMatrix& m, bool unit_trace = true) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw std::invalid_argument("density matrix must be square and non-empty");
    }
    if (!m.allFinite()) throw std::invalid_argument("density matrix has non-finite entries");
    const double herm_err = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm_err > kHermitianTol) {
      std::ostringstream os;
      os << "density matrix is not Hermitian (max |rho - rho^dagger| = " << herm_err << ")";
      throw std::invalid_argument(os.str());
    }
    const CMatrix herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm);
    Eigen::VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() < -kEigenTol) {
      std::ostringstream os;
      os << "density matrix is not positive semidefinite (min eigenvalue " << ev.minCoeff() << ")";
      throw std::invalid_argument(os.str());
    }
    CMatrix out = herm;
    if (ev.minCoeff() < 0.0) {
      ev = ev.cwiseMax(0.0);
      out = eig.eigenvectors() * ev.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
    }
    const double tr = out.trace().real();
    if (unit_trace && std::abs(tr - 1.0) > 1e-10) {
      std::ostringstream os;
      os << "density matrix trace is " << tr << ", expected 1";
      throw std::invalid_argument(os.str());
    }
    if (!unit_trace && tr > 1.0 + 1e-10) {
      throw std::invalid_argument("density matrix trace exceeds 1");
    }
    return DensityMatrix(std::move(out));
  }

  /// Embeds into a larger space by zero padding the new rows and columns.
  DensityMatrix embedded(int new_dim) const {
    CMatrix m = CMatrix::Zero(new_dim, new_dim);
    m.topLeftCorner(dim(), dim()) = m_;
    return DensityMatrix(std::move(m));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  double trace() const { return m_.trace().real(); }
  double population(int site) const { return m_(site, site).real(); }

  friend bool operator==(const DensityMatrix& a, const DensityMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

}  // namespace oqw
