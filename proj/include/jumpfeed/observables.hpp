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

#include "jumpfeed/model.hpp"
#include "jumpfeed/operator_algebra.hpp"
#include "jumpfeed/quantum_state.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jumpfeed {

// Wootters concurrence of a two-qubit density matrix. With rho = W W^dagger
// (W from the eigendecomposition, negative round-off eigenvalues clamped),
// the Wootters lambdas are the singular values of W^T (sy⊗sy) W. This avoids
// square roots of near-zero eigenvalues.
inline double concurrence(const ComplexMatrix& rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw std::invalid_argument("concurrence: expected a 4x4 density matrix");
    if (!is_hermitian(rho, 1e-8) || std::abs(rho.trace().real() - 1.0) > 1e-6)
        throw std::invalid_argument("concurrence: input is not a density matrix");
    static const Eigen::Matrix4cd yy = kron(pauli::y(), pauli::y());
    const Eigen::Matrix4cd herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(herm);
    Eigen::Matrix4cd w = es.eigenvectors();
    for (int k = 0; k < 4; ++k) w.col(k) *= std::sqrt(std::max(0.0, es.eigenvalues()(k)));
    const Eigen::Matrix4cd tau = w.transpose() * yy * w;
    const Eigen::Vector4d l = Eigen::JacobiSVD<Eigen::Matrix4cd>(tau).singularValues();  // descending
    return std::clamp(l(0) - l(1) - l(2) - l(3), 0.0, 1.0);
}

// Pure two-qubit states: C = 2 |psi00 psi11 - psi01 psi10| / |psi|^2.
template <class Vec>
double concurrence_pure(const Vec& psi) {
    const double n2 = psi.squaredNorm();
    return std::min(1.0, 2.0 * std::abs(psi(0) * psi(3) - psi(1) * psi(2)) / n2);
}

struct ReducedQubits {
    ComplexMatrix rho;  // 4x4, unit trace
    double discarded_weight = 0.0;
};

// Traces out the cavity and keeps the {|0>,|1>} x {|0>,|1>} block of a full
// model state, then renormalises. discarded_weight is the population outside
// that block (upper level and leakage).
inline ReducedQubits partial_trace_to_qubits(const QuantumState& state) {
    if (state.layout.is_two_qubit()) {
        return {state.to_density(), 0.0};
    }
    if (!state.layout.is_full_model()) throw std::invalid_argument("partial_trace_to_qubits: expected the full-model layout");
    const Eigen::Index nc = state.layout.factors[2];
    ComplexMatrix q = ComplexMatrix::Zero(4, 4);
    double total = 0.0;
    auto full_index = [nc](int i1, int i2, Eigen::Index n) { return (i1 * 3 + i2) * nc + n; };
    if (state.is_pure()) {
        const auto psi = state.data.col(0);
        total = psi.squaredNorm();
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                cd s = 0.0;
                for (Eigen::Index n = 0; n < nc; ++n)
                    s += psi(full_index(a / 2, a % 2, n)) * std::conj(psi(full_index(b / 2, b % 2, n)));
                q(a, b) = s;
            }
    } else {
        const auto& rho = state.data;
        total = rho.trace().real();
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                cd s = 0.0;
                for (Eigen::Index n = 0; n < nc; ++n) s += rho(full_index(a / 2, a % 2, n), full_index(b / 2, b % 2, n));
                q(a, b) = s;
            }
    }
    const double kept = q.trace().real();
    if (!(kept > 0.0)) throw std::domain_error("partial_trace_to_qubits: no weight left in the qubit subspace");
    return {q / kept, 1.0 - kept / total};
}

// Populations of |00>, |a01>, |s01>, |11>.
struct SectorPopulations {
    double p00 = 0.0, a01 = 0.0, s01 = 0.0, p11 = 0.0;
};

inline SectorPopulations sector_populations(const ComplexMatrix& rho4) {
    auto expect = [&](const ComplexVector& v) { return (v.adjoint() * rho4 * v)(0, 0).real(); };
    return {rho4(0, 0).real(), expect(basis::a01()), expect(basis::s01()), rho4(3, 3).real()};
}

template <class Vec>
SectorPopulations sector_populations_pure(const Vec& psi) {
    const double n2 = psi.squaredNorm();
    const double r = 1.0 / std::sqrt(2.0);
    return {std::norm(psi(0)) / n2, std::norm(r * (psi(1) - psi(2))) / n2, std::norm(r * (psi(1) + psi(2))) / n2,
            std::norm(psi(3)) / n2};
}

// Everything recorded at one time-grid point.
struct Sample {
    double concurrence = 0.0;
    SectorPopulations populations;
    double discarded_weight = 0.0;
};

inline Sample sample_state(const QuantumState& s) {
    if (s.layout.is_two_qubit() && s.is_pure()) {
        const ComplexVector v = s.data.col(0);
        return {concurrence_pure(v), sector_populations_pure(v), 0.0};
    }
    const auto red = partial_trace_to_qubits(s);
    return {concurrence(red.rho), sector_populations(red.rho), red.discarded_weight};
}

// ---------------------------------------------------------------------------
// Dark / light segmentation of a click record.

struct Interval {
    double start = 0.0;
    double end = 0.0;
    double length() const { return end - start; }
};

struct PeriodSegmentation {
    std::vector<Interval> dark_intervals;
    std::vector<Interval> light_intervals;
    double threshold_gap = 0.0;
    double t_final = 0.0;

    double dark_fraction() const {
        double d = 0.0;
        for (const auto& i : dark_intervals) d += i.length();
        return t_final > 0.0 ? d / t_final : 0.0;
    }
    double mean_light_length() const {
        if (light_intervals.empty()) return 0.0;
        double s = 0.0;
        for (const auto& i : light_intervals) s += i.length();
        return s / static_cast<double>(light_intervals.size());
    }
    double mean_dark_length() const {
        if (dark_intervals.empty()) return 0.0;
        double s = 0.0;
        for (const auto& i : dark_intervals) s += i.length();
        return s / static_cast<double>(dark_intervals.size());
    }
};

// Threshold = 5 mean inter-click times of the light state. The light mean is
// found by the fixed point m = mean{gaps < 5 m}, started from the 10th
// percentile of the gaps (exponential assumption), so long dark gaps never
// contaminate it. Records with fewer than two inter-click gaps return t_final.
inline double default_threshold_gap(const std::vector<double>& click_times, double t_final) {
    if (click_times.size() < 3) return t_final;
    std::vector<double> gaps;
    gaps.reserve(click_times.size() - 1);
    for (std::size_t k = 1; k < click_times.size(); ++k) gaps.push_back(click_times[k] - click_times[k - 1]);
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const double q10 = sorted[sorted.size() / 10];
    double mean = q10 / -std::log(0.9);
    if (!(mean > 0.0)) mean = sorted.back() > 0.0 ? sorted.back() : t_final;
    for (int iter = 0; iter < 100; ++iter) {
        const double cut = 5.0 * mean;
        double s = 0.0;
        std::size_t n = 0;
        for (double g : sorted) {
            if (g >= cut) break;
            s += g;
            ++n;
        }
        if (n == 0) break;
        const double next = s / static_cast<double>(n);
        if (std::abs(next - mean) <= 1e-12 * mean) {
            mean = next;
            break;
        }
        mean = next;
    }
    return 5.0 * mean;
}

// Maximal click-free gaps (including the leading and trailing ones) of length
// >= threshold_gap are dark; the remainder is light. Zero-length light pieces
// between adjacent dark gaps are dropped.
inline PeriodSegmentation segment_periods(const std::vector<double>& click_times, double t_final, double threshold_gap) {
    PeriodSegmentation seg;
    seg.threshold_gap = threshold_gap;
    seg.t_final = t_final;
    std::vector<double> edges;
    edges.reserve(click_times.size() + 2);
    edges.push_back(0.0);
    for (double t : click_times) edges.push_back(std::clamp(t, 0.0, t_final));
    edges.push_back(t_final);

    double light_start = 0.0;
    for (std::size_t k = 1; k < edges.size(); ++k) {
        const double a = edges[k - 1], b = edges[k];
        if (b - a >= threshold_gap && b > a) {
            if (a > light_start) seg.light_intervals.push_back({light_start, a});
            seg.dark_intervals.push_back({a, b});
            light_start = b;
        }
    }
    if (t_final > light_start) seg.light_intervals.push_back({light_start, t_final});
    return seg;
}

}  // namespace jumpfeed
