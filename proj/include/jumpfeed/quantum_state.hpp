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

#pragma once

#include "jumpfeed/operator_algebra.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpfeed {

// Full model: two three-level atoms and a truncated cavity. Reduced models: two qubits.
enum class Tier { A, B, C };

inline const char* to_string(Tier t) {
    switch (t) {
        case Tier::A: return "A";
        case Tier::B: return "B";
        case Tier::C: return "C";
    }
    return "?";
}

// Hilbert-space layout as an ordered list of tensor factors.
struct Layout {
    std::vector<Eigen::Index> factors;

    Eigen::Index dim() const {
        return std::accumulate(factors.begin(), factors.end(), Eigen::Index{1}, std::multiplies<>());
    }
    bool is_two_qubit() const { return factors == std::vector<Eigen::Index>{2, 2}; }
    // (3, 3, N + 1)
    bool is_full_model() const { return factors.size() == 3 && factors[0] == 3 && factors[1] == 3; }
    bool operator==(const Layout&) const = default;

    static Layout two_qubit() { return {{2, 2}}; }
    static Layout full_model(int fock_cutoff) { return {{3, 3, fock_cutoff + 1}}; }
};

enum class StateKind { vector, density };

struct QuantumState {
    StateKind kind = StateKind::density;
    ComplexMatrix data;  // column vector (dim x 1) or dim x dim
    Layout layout;

    static QuantumState pure(const ComplexVector& psi, Layout layout) {
        if (psi.size() != layout.dim()) throw std::invalid_argument("QuantumState: vector size does not match layout");
        return {StateKind::vector, ComplexMatrix(psi), std::move(layout)};
    }
    static QuantumState density(const ComplexMatrix& rho, Layout layout) {
        if (rho.rows() != layout.dim() || rho.cols() != layout.dim())
            throw std::invalid_argument("QuantumState: density size does not match layout");
        return {StateKind::density, rho, std::move(layout)};
    }

    Eigen::Index dim() const { return layout.dim(); }
    bool is_pure() const { return kind == StateKind::vector; }

    ComplexVector vector() const {
        if (!is_pure()) throw std::logic_error("QuantumState: not a vector state");
        return data.col(0);
    }
    ComplexMatrix to_density() const {
        if (!is_pure()) return data;
        const ComplexVector v = data.col(0);
        return v * v.adjoint();
    }
};

struct StateCheck {
    bool ok = true;
    std::string reason;
};

// Validates the invariants of either kind.
inline StateCheck check_state(const QuantumState& s, double herm_tol = 1e-10, double trace_tol = 1e-8,
                              double min_eig = -1e-8) {
    if (s.is_pure()) {
        const double n = s.data.col(0).norm();
        if (std::abs(n - 1.0) > 1e-10) return {false, "vector norm differs from 1 by " + std::to_string(n - 1.0)};
        return {};
    }
    if (!is_hermitian(s.data, herm_tol)) return {false, "density matrix is not Hermitian"};
    const double tr = s.data.trace().real();
    if (std::abs(tr - 1.0) > trace_tol) return {false, "density trace is " + std::to_string(tr)};
    const auto eig = eig_hermitian(s.data, 1e300);
    if (eig.values.back() < min_eig)
        return {false, "density has eigenvalue " + std::to_string(eig.values.back())};
    return {};
}

}  // namespace jumpfeed
