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

// model.hpp: Hamiltonians, jump channels and feedback unitaries for the
// three model tiers.
//
//   Tier A  two three-level atoms {|0>,|1>,|2>} and a cavity mode truncated at
//           fock_cutoff photons; cavity emission plus four local spontaneous
//           channels |j>_i<2|.
//   Tier B  two qubits after eliminating |2> and the cavity; one collective
//           cavity channel.
//   Tier C  tier B plus the four collective spontaneous channels R0s, R0a,
//           R1s, R1a.
//
// Rates are in units of g_max, times in 1/g_max. Every channel carries its
// rate inside the operator: the dissipator is D[op].

#pragma once

#include "jumpfeed/operator_algebra.hpp"
#include "jumpfeed/quantum_state.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jumpfeed {

namespace labels {
inline constexpr std::string_view cavity_detected = "cavity-detected";
inline constexpr std::string_view cavity_undetected = "cavity-undetected";
inline constexpr std::string_view r0s = "R0s";
inline constexpr std::string_view r0a = "R0a";
inline constexpr std::string_view r1s = "R1s";
inline constexpr std::string_view r1a = "R1a";

inline std::string atom_decay(int atom, int to_level) {
    return "atom" + std::to_string(atom) + "-2to" + std::to_string(to_level);
}
inline bool is_cavity(std::string_view label) { return label.starts_with("cavity"); }
}  // namespace labels

struct ModelSpec {
    double delta_big = 50.0;     // Δ, detuning of the upper level
    double delta_small = 0.0;    // δ, microwave / second detuning
    double v_l = 1.0;            // pump laser coupling
    double v_m = 0.05;           // microwave coupling
    double g_max = 1.0;          // cavity coupling at an antinode
    double kappa = 1.0;          // cavity decay
    double gamma0 = 0.05;        // |2> -> |0>
    double gamma1 = 0.05;        // |2> -> |1>
    double eta = 1.0;            // detector efficiency
    int fock_cutoff = 2;         // max photon number, tier A only
    double feedback_angle = std::numbers::pi / 2;
    double trap_sigma = 0.0;          // ion position spread, units of λ
    double lambda_frac_center = 0.0;  // trap centre, units of λ (0 is an antinode)

    double gamma() const { return gamma0 + gamma1; }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("ModelSpec: ") + what);
        };
        require(std::isfinite(delta_big) && std::isfinite(delta_small) && std::isfinite(v_l) &&
                    std::isfinite(v_m) && std::isfinite(g_max) && std::isfinite(kappa) &&
                    std::isfinite(gamma0) && std::isfinite(gamma1) && std::isfinite(feedback_angle),
                "parameters must be finite");
        require(kappa >= 0.0 && gamma0 >= 0.0 && gamma1 >= 0.0, "rates must be non-negative");
        require(g_max >= 0.0 && v_l >= 0.0 && v_m >= 0.0, "couplings must be non-negative");
        require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
        require(fock_cutoff >= 1, "fock_cutoff must be at least 1");
        require(trap_sigma >= 0.0, "trap_sigma must be non-negative");
    }

    // Large-detuning condition under which the reduced tiers are valid.
    bool adiabatic_regime() const {
        return delta_big >= 10.0 * std::max({v_l, g_max, kappa});
    }
};

struct JumpChannel {
    ComplexMatrix op;    // full channel operator, feedback already folded in
    ComplexMatrix bare;  // operator before the feedback unitary
    std::optional<ComplexMatrix> feedback;
    // Reduced-tier cavity channels only: bare = sum_i g_i * per_atom[i].
    std::vector<ComplexMatrix> per_atom;
    std::string label;
    bool conditioned = true;

    bool is_cavity() const { return labels::is_cavity(label); }
    bool has_per_atom_couplings() const { return !per_atom.empty(); }

    // Recombines the per-atom parts for couplings (g1, g2).
    ComplexMatrix operator_for(double g1, double g2) const {
        if (!has_per_atom_couplings()) return op;
        const ComplexMatrix b = g1 * per_atom[0] + g2 * per_atom[1];
        return feedback ? ComplexMatrix(*feedback * b) : b;
    }

    static JumpChannel make(ComplexMatrix bare_op, std::optional<ComplexMatrix> fb, std::string label,
                            bool conditioned = true) {
        JumpChannel ch;
        ch.op = fb ? ComplexMatrix(*fb * bare_op) : bare_op;
        ch.bare = std::move(bare_op);
        ch.feedback = std::move(fb);
        ch.label = std::move(label);
        ch.conditioned = conditioned;
        return ch;
    }
};

struct ModelInstance {
    ComplexMatrix hamiltonian;
    std::vector<JumpChannel> channels;
    Layout layout;
    Tier tier = Tier::C;
    ModelSpec spec;
    std::vector<std::string> warnings;

    Eigen::Index dim() const { return layout.dim(); }

    const JumpChannel* find(std::string_view label) const {
        for (const auto& ch : channels)
            if (ch.label == label) return &ch;
        return nullptr;
    }
    std::vector<std::string> channel_labels() const {
        std::vector<std::string> out;
        for (const auto& ch : channels) out.push_back(ch.label);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Two-qubit basis helpers. Product basis order is |00>, |01>, |10>, |11> with
// the first digit belonging to atom 1.

namespace basis {
inline ComplexVector ket(int index) {
    ComplexVector v = ComplexVector::Zero(4);
    v(index) = 1.0;
    return v;
}
inline ComplexVector q00() { return ket(0); }
inline ComplexVector q01() { return ket(1); }
inline ComplexVector q10() { return ket(2); }
inline ComplexVector q11() { return ket(3); }
inline ComplexVector s01() { return (q01() + q10()) / std::sqrt(2.0); }
inline ComplexVector a01() { return (q01() - q10()) / std::sqrt(2.0); }

// Columns are |00>, |s01>, |a01>, |11> expressed in the product basis.
inline ComplexMatrix sector_transform() {
    ComplexMatrix t(4, 4);
    t.col(0) = q00();
    t.col(1) = s01();
    t.col(2) = a01();
    t.col(3) = q11();
    return t;
}

// Accepts "00", "01", "10", "11", "a01", "s01".
inline ComplexVector named(std::string_view name) {
    if (name == "00") return q00();
    if (name == "01") return q01();
    if (name == "10") return q10();
    if (name == "11") return q11();
    if (name == "a01") return a01();
    if (name == "s01") return s01();
    throw std::invalid_argument("unknown two-qubit state '" + std::string(name) + "'");
}

// Embeds a two-qubit vector into the full model with the cavity in vacuum.
inline ComplexVector embed_full(const ComplexVector& q, int fock_cutoff) {
    const Eigen::Index nc = fock_cutoff + 1;
    ComplexVector v = ComplexVector::Zero(9 * nc);
    for (int i1 = 0; i1 < 2; ++i1)
        for (int i2 = 0; i2 < 2; ++i2) v((i1 * 3 + i2) * nc) = q(i1 * 2 + i2);
    return v;
}
}  // namespace basis

// ---------------------------------------------------------------------------

namespace detail {
inline ComplexMatrix annihilation(int cutoff) {
    ComplexMatrix a = ComplexMatrix::Zero(cutoff + 1, cutoff + 1);
    for (int n = 1; n <= cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

// A_{i,j} = |i>_1<j| + |i>_2<j| on the full layout.
struct FullOperators {
    int cutoff;
    ComplexMatrix id3 = identity(3);
    ComplexMatrix idc;
    ComplexMatrix a;

    explicit FullOperators(int n) : cutoff(n), idc(identity(n + 1)), a(kron_all({identity(3), identity(3), annihilation(n)})) {}

    ComplexMatrix local(int atom, int i, int j) const {
        const ComplexMatrix p = outer_basis(3, i, j);
        return atom == 1 ? kron_all({p, id3, idc}) : kron_all({id3, p, idc});
    }
    ComplexMatrix collective(int i, int j) const { return local(1, i, j) + local(2, i, j); }
};

inline ComplexMatrix qubit_local(int atom, const ComplexMatrix& op) {
    return atom == 1 ? kron(op, identity(2)) : kron(identity(2), op);
}
}  // namespace detail

// Microwave detuning that cancels the light shift of the Raman pump in the
// reduced Hamiltonian.
inline double stark_shift_delta(const ModelSpec& spec) {
    if (!(spec.delta_big > 0.0)) throw std::invalid_argument("stark_shift_delta: delta_big must be positive");
    return spec.v_l * spec.v_l / (4.0 * spec.delta_big);
}

inline ModelInstance build_full(const ModelSpec& spec) {
    spec.validate();
    const detail::FullOperators ops(spec.fock_cutoff);
    const ComplexMatrix& a = ops.a;
    const ComplexMatrix ad = a.adjoint();

    ModelInstance m;
    m.tier = Tier::A;
    m.spec = spec;
    m.layout = Layout::full_model(spec.fock_cutoff);
    m.hamiltonian = -spec.delta_small * ops.collective(1, 1) + spec.delta_big * ops.collective(2, 2) +
                    0.5 * spec.v_l * (ops.collective(1, 2) + ops.collective(2, 1)) +
                    0.5 * spec.v_m * (ops.collective(1, 0) + ops.collective(0, 1)) +
                    spec.g_max * (ops.collective(0, 2) * ad + ops.collective(2, 0) * a);

    // Feedback drives the |1> <-> |2> transition of atom 1.
    const ComplexMatrix control = ops.local(1, 1, 2) + ops.local(1, 2, 1);
    const ComplexMatrix u = expm(kI * spec.feedback_angle * control);
    m.channels.push_back(JumpChannel::make(std::sqrt(spec.kappa) * a, u, std::string(labels::cavity_detected)));

    for (int atom = 1; atom <= 2; ++atom) {
        for (int j = 0; j <= 1; ++j) {
            const double rate = j == 0 ? spec.gamma0 : spec.gamma1;
            m.channels.push_back(
                JumpChannel::make(std::sqrt(rate) * ops.local(atom, j, 2), std::nullopt, labels::atom_decay(atom, j)));
        }
    }
    return m;
}

// Adiabatically reduced two-qubit model. with_spont selects tier C.
inline ModelInstance build_reduced(const ModelSpec& spec, bool with_spont) {
    spec.validate();
    if (!(spec.delta_big > 0.0)) throw std::invalid_argument("build_reduced: delta_big must be positive");
    if (!(spec.kappa > 0.0)) throw std::invalid_argument("build_reduced: kappa must be positive");

    ModelInstance m;
    m.tier = with_spont ? Tier::C : Tier::B;
    m.spec = spec;
    m.layout = Layout::two_qubit();
    if (!spec.adiabatic_regime())
        m.warnings.push_back("outside the large-detuning regime: delta_big < 10 * max(v_l, g_max, kappa)");
    if (std::abs(spec.delta_small - stark_shift_delta(spec)) > 1e-12 * std::max(1.0, std::abs(spec.delta_small)))
        m.warnings.push_back("delta_small differs from v_l^2 / (4 delta_big); the reduced model assumes the light shift is cancelled");

    const ComplexMatrix sm1 = detail::qubit_local(1, pauli::lower());
    const ComplexMatrix sm2 = detail::qubit_local(2, pauli::lower());
    const ComplexMatrix a01 = sm1 + sm2;
    m.hamiltonian = 0.5 * spec.v_m * (a01 + a01.adjoint());

    const ComplexMatrix u = expm(kI * spec.feedback_angle * detail::qubit_local(1, pauli::x()));
    const double amp = spec.v_l / (spec.delta_big * std::sqrt(spec.kappa));
    JumpChannel cav = JumpChannel::make(spec.g_max * amp * a01, u, std::string(labels::cavity_detected));
    cav.per_atom = {amp * sm1, amp * sm2};
    m.channels.push_back(std::move(cav));

    if (with_spont) {
        // Sector basis order: |00>, |s01>, |a01>, |11>.
        constexpr int k00 = 0, ks = 1, ka = 2, k11 = 3;
        const ComplexMatrix t = basis::sector_transform();
        auto sector = [&](std::initializer_list<std::tuple<int, int, double>> entries) {
            ComplexMatrix s = ComplexMatrix::Zero(4, 4);
            for (auto [r, c, v] : entries) s(r, c) += v;
            return ComplexMatrix(t * s * t.adjoint());
        };
        const double d2 = spec.delta_big * spec.delta_big;
        const double vl2 = spec.v_l * spec.v_l;
        const double p0 = std::sqrt(spec.gamma0 * vl2 / (4.0 * d2));
        const double p1 = std::sqrt(spec.gamma1 * vl2 / (8.0 * d2));
        m.channels.push_back(JumpChannel::make(p0 * sector({{k00, ks, 1.0}, {ks, k11, 1.0}}), std::nullopt,
                                               std::string(labels::r0s)));
        m.channels.push_back(JumpChannel::make(p0 * sector({{k00, ka, 1.0}, {ka, k11, -1.0}}), std::nullopt,
                                               std::string(labels::r0a)));
        m.channels.push_back(JumpChannel::make(p1 * sector({{ka, ka, 1.0}, {ks, ks, 1.0}, {k11, k11, 2.0}}),
                                               std::nullopt, std::string(labels::r1s)));
        m.channels.push_back(JumpChannel::make(p1 * sector({{ks, ka, 1.0}, {ka, ks, -1.0}}), std::nullopt,
                                               std::string(labels::r1a)));
    }
    return m;
}

inline ModelInstance build(const ModelSpec& spec, Tier tier) {
    switch (tier) {
        case Tier::A: return build_full(spec);
        case Tier::B: return build_reduced(spec, false);
        case Tier::C: return build_reduced(spec, true);
    }
    throw std::invalid_argument("build: unknown tier");
}

// Intermediate Hamiltonian after eliminating |2> but keeping the cavity, on the
// layout (2, 2, N + 1). Useful for checking the light-shift cancellation; no
// engine consumes it.
inline ComplexMatrix raman_two_level_hamiltonian(const ModelSpec& spec) {
    const Eigen::Index nc = spec.fock_cutoff + 1;
    const ComplexMatrix idc = identity(nc);
    const ComplexMatrix a = kron_all({identity(2), identity(2), detail::annihilation(spec.fock_cutoff)});
    const ComplexMatrix ad = a.adjoint();
    auto coll = [&](int i, int j) {
        const ComplexMatrix p = outer_basis(2, i, j);
        return ComplexMatrix(kron_all({p, identity(2), idc}) + kron_all({identity(2), p, idc}));
    };
    const double d = spec.delta_big;
    return -(spec.v_l * spec.g_max / (2.0 * d)) * (coll(0, 1) * ad + coll(1, 0) * a) -
           (spec.g_max * spec.g_max / d) * ad * a * coll(0, 0) + 0.5 * spec.v_m * (coll(0, 1) + coll(1, 0)) +
           (spec.v_l * spec.v_l / (4.0 * d)) * (coll(1, 1) - coll(0, 0)) -
           spec.delta_small * (coll(1, 1) - coll(0, 0));
}

struct EffectiveRates {
    double g_eff = 0.0;
    double gamma_eff = 0.0;
    double cooperativity = 0.0;  // +inf when gamma = 0
    bool cooperativity_unbounded = false;
};

// gamma_eff uses v_l^2; see the note emitted in scenario metadata.
inline EffectiveRates effective_rates(const ModelSpec& spec) {
    if (!(spec.delta_big > 0.0)) throw std::invalid_argument("effective_rates: delta_big must be positive");
    EffectiveRates r;
    const double d = spec.delta_big;
    const double gamma = spec.gamma();
    r.g_eff = spec.v_l * spec.g_max / (2.0 * d);
    r.gamma_eff = spec.v_l * spec.v_l * gamma / (4.0 * d * d);
    if (gamma > 0.0 && spec.kappa > 0.0) {
        r.cooperativity = spec.g_max * spec.g_max / (gamma * spec.kappa);
    } else {
        r.cooperativity = std::numeric_limits<double>::infinity();
        r.cooperativity_unbounded = true;
    }
    return r;
}

// Cavity emission rate out of |a01> for frozen couplings (g1, g2).
inline double dark_state_emission_rate(const ModelSpec& spec, double g1, double g2) {
    const double d = spec.delta_big;
    return spec.v_l * spec.v_l / (d * d * spec.kappa) * 0.5 * (g1 - g2) * (g1 - g2);
}

// Mean time before a cavity emission from |a01>; nullopt when g1 == g2 and
// |a01> is exactly dark.
inline std::optional<double> dark_time(const ModelSpec& spec, double g1, double g2) {
    if (g1 == g2) return std::nullopt;
    return 1.0 / dark_state_emission_rate(spec, g1, g2);
}

// ---------------------------------------------------------------------------
// Cavity-coupling manipulations for the reduced tiers.

// Rebuilds every per-atom cavity channel with frozen couplings.
inline ModelInstance with_cavity_couplings(ModelInstance m, double g1, double g2) {
    for (auto& ch : m.channels) {
        if (!ch.has_per_atom_couplings()) continue;
        ch.bare = g1 * ch.per_atom[0] + g2 * ch.per_atom[1];
        ch.op = ch.feedback ? ComplexMatrix(*ch.feedback * ch.bare) : ch.bare;
    }
    return m;
}

// Second moments E[g_i g_j] / g_max^2 for independent Gaussian positions
// x_i ~ N(center, sigma) in units of λ, with g_i = g_max cos(2π x_i).
inline std::array<double, 3> coupling_moments(double trap_sigma, double center) {
    const double s = 2.0 * std::numbers::pi * trap_sigma;
    const double th = 2.0 * std::numbers::pi * center;
    const double mean = std::cos(th) * std::exp(-0.5 * s * s);
    const double second = 0.5 * (1.0 + std::cos(2.0 * th) * std::exp(-2.0 * s * s));
    return {second, mean * mean, second};  // <g1^2>, <g1 g2>, <g2^2>
}

// Replaces each per-atom cavity channel by the channels of the dissipator
// averaged over independent position draws. The average of D[sum_i g_i L_i]
// is sum_k D[sqrt(w_k) sum_i v_ki L_i] where (w_k, v_k) diagonalise E[g_i g_j].
inline ModelInstance jitter_averaged(const ModelInstance& m, double trap_sigma, double center = 0.0) {
    const auto [m11, m12, m22] = coupling_moments(trap_sigma, center);
    ComplexMatrix cov(2, 2);
    cov << m11, m12, m12, m22;
    cov *= m.spec.g_max * m.spec.g_max;
    const auto eig = eig_hermitian(cov, 1e-12);

    ModelInstance out = m;
    out.channels.clear();
    for (const auto& ch : m.channels) {
        if (!ch.has_per_atom_couplings()) {
            out.channels.push_back(ch);
            continue;
        }
        for (std::size_t k = 0; k < eig.values.size(); ++k) {
            const double w = eig.values[k];
            if (w <= 1e-15) continue;
            const cd v1 = eig.vectors(0, static_cast<Eigen::Index>(k));
            const cd v2 = eig.vectors(1, static_cast<Eigen::Index>(k));
            JumpChannel avg = JumpChannel::make(std::sqrt(w) * (v1 * ch.per_atom[0] + v2 * ch.per_atom[1]),
                                                ch.feedback, ch.label + (k == 0 ? ":sym" : ":anti"),
                                                ch.conditioned);
            out.channels.push_back(std::move(avg));
        }
    }
    return out;
}

// Splits the detected cavity channel into a detected part (rate factor eta,
// with feedback) and an undetected part (rate factor 1 - eta, no feedback,
// unconditioned). eta == 1 leaves the model unchanged.
inline ModelInstance with_detector_efficiency(const ModelInstance& m, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("detector efficiency must lie in [0, 1]");
    if (eta == 1.0) return m;
    ModelInstance out = m;
    out.spec.eta = eta;
    out.channels.clear();
    const double se = std::sqrt(eta);
    const double su = std::sqrt(1.0 - eta);
    for (const auto& ch : m.channels) {
        if (!ch.label.starts_with(labels::cavity_detected)) {
            out.channels.push_back(ch);
            continue;
        }
        JumpChannel det = JumpChannel::make(se * ch.bare, ch.feedback, ch.label, true);
        JumpChannel und = JumpChannel::make(su * ch.bare, std::nullopt,
                                            std::string(labels::cavity_undetected) +
                                                ch.label.substr(labels::cavity_detected.size()),
                                            false);
        for (const auto& p : ch.per_atom) {
            det.per_atom.push_back(se * p);
            und.per_atom.push_back(su * p);
        }
        if (eta > 0.0) out.channels.push_back(std::move(det));
        out.channels.push_back(std::move(und));
    }
    return out;
}

// Same model with the feedback unitary removed from every channel.
inline ModelInstance without_feedback(const ModelInstance& m) {
    ModelInstance out = m;
    out.spec.feedback_angle = 0.0;
    for (auto& ch : out.channels) {
        ch.feedback.reset();
        ch.op = ch.bare;
    }
    return out;
}

}  // namespace jumpfeed
