// Copyright 2026 The jumpfeed Authors
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

// operator_algebra.hpp: dense complex linear algebra shared by every engine.
//
// Tensor-factor order is fixed globally as (atom 1) ⊗ (atom 2) ⊗ (cavity), so a
// basis index is i1 * (d2 * dc) + i2 * dc + n.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace jumpfeed {

using cd = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::Matrix<cd, Eigen::Dynamic, 1>;

inline constexpr cd kI{0.0, 1.0};

// Largest absolute entry.
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12) {
    return m.rows() == m.cols() && max_abs(m - m.adjoint()) < tol;
}

inline bool is_unitary(const ComplexMatrix& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    const auto id = ComplexMatrix::Identity(m.rows(), m.cols());
    return max_abs(m.adjoint() * m - id) < tol;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

// Left-to-right Kronecker product of a list of factors.
inline ComplexMatrix kron_all(const std::vector<ComplexMatrix>& factors) {
    if (factors.empty()) return ComplexMatrix::Identity(1, 1);
    ComplexMatrix out = factors.front();
    for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
    return out;
}

// |i><j| on a d-dimensional space.
inline ComplexMatrix outer_basis(Eigen::Index d, Eigen::Index i, Eigen::Index j) {
    ComplexMatrix m = ComplexMatrix::Zero(d, d);
    m(i, j) = 1.0;
    return m;
}

inline ComplexMatrix outer(const ComplexVector& ket, const ComplexVector& bra) {
    return ket * bra.adjoint();
}

inline ComplexMatrix identity(Eigen::Index d) { return ComplexMatrix::Identity(d, d); }

namespace pauli {
inline ComplexMatrix x() {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}
inline ComplexMatrix y() {
    ComplexMatrix m(2, 2);
    m << 0.0, -kI, kI, 0.0;
    return m;
}
inline ComplexMatrix z() {
    ComplexMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}
// |0><1|: lowers |1> to |0>.
inline ComplexMatrix lower() { return outer_basis(2, 0, 1); }
}  // namespace pauli

// Scaling and squaring with a [13/13] Padé approximant (Higham 2005 coefficients).
// Relative error is at unit-roundoff level for any norm; the squaring count grows
// with log2 of the 1-norm.
inline ComplexMatrix expm(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("expm: matrix must be square");
    const Eigen::Index n = m.rows();
    if (n == 0) return m;

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    const ComplexMatrix a = m / std::ldexp(1.0, squarings);

    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix a4 = a2 * a2;
    const ComplexMatrix a6 = a4 * a2;
    const ComplexMatrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                                  b[3] * a2 + b[1] * id;
    const ComplexMatrix u = a * u_inner;
    const ComplexMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                            b[2] * a2 + b[0] * id;
    ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

struct HermitianEigen {
    std::vector<double> values;  // descending
    ComplexMatrix vectors;       // column k pairs with values[k]
};

inline HermitianEigen eig_hermitian(const ComplexMatrix& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eig_hermitian: matrix must be square");
    if (!is_hermitian(m, tol)) throw std::invalid_argument("eig_hermitian: matrix is not Hermitian");
    const ComplexMatrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eig_hermitian: decomposition failed");
    const Eigen::Index n = m.rows();
    HermitianEigen out;
    out.values.resize(static_cast<std::size_t>(n));
    out.vectors.resize(n, n);
    // Eigen returns ascending order.
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values[static_cast<std::size_t>(k)] = solver.eigenvalues()(n - 1 - k);
        out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    }
    return out;
}

struct GeneralEigen {
    std::vector<cd> values;
    ComplexMatrix vectors;
};

inline GeneralEigen eig_general(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eig_general: matrix must be square");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eig_general: decomposition failed");
    GeneralEigen out;
    out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + m.rows());
    out.vectors = solver.eigenvectors();
    return out;
}

inline cd trace(const ComplexMatrix& m) { return m.trace(); }

// 0.5 * sum |eig(a - b)| for Hermitian a, b.
inline double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    const ComplexMatrix diff = a - b;
    const auto eig = eig_hermitian(0.5 * (diff + diff.adjoint()), 1e300);
    double s = 0.0;
    for (double v : eig.values) s += std::abs(v);
    return 0.5 * s;
}

// Largest eigenvalue of c†c, i.e. the squared spectral norm of c.
inline double spectral_norm_sq(const ComplexMatrix& c) {
    if (c.size() == 0) return 0.0;
    const ComplexMatrix cc = c.adjoint() * c;
    return eig_hermitian(cc, 1e300).values.front();
}

}  // namespace jumpfeed
