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

#include "jumpfeed/lindblad.hpp"
#include "jumpfeed/model.hpp"
#include "jumpfeed/observables.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace jumpfeed;

namespace {

ModelSpec fig3_spec() {
    ModelSpec s;  // defaults are g = kappa = v_l = 1, gamma0 = gamma1 = 0.05, v_m = 0.05, delta_big = 50
    s.delta_small = stark_shift_delta(s);
    return s;
}

ModelSpec random_spec(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.01, 2.0);
    ModelSpec s;
    s.v_l = u(rng);
    s.g_max = u(rng);
    s.kappa = u(rng);
    s.v_m = 0.1 * u(rng);
    s.gamma0 = 0.1 * u(rng);
    s.gamma1 = 0.1 * u(rng);
    s.delta_big = 20.0 + 50.0 * u(rng);
    s.feedback_angle = u(rng);
    s.delta_small = stark_shift_delta(s);
    return s;
}

// Full-layout basis vector |i1, i2, n>.
ComplexVector full_ket(int i1, int i2, int n, int cutoff) {
    ComplexVector v = ComplexVector::Zero(9 * (cutoff + 1));
    v((i1 * 3 + i2) * (cutoff + 1) + n) = 1.0;
    return v;
}

// Operator in the sector basis |00>, |s01>, |a01>, |11>.
ComplexMatrix in_sectors(const ComplexMatrix& op) {
    const ComplexMatrix t = basis::sector_transform();
    return t.adjoint() * op * t;
}

const JumpChannel& channel(const ModelInstance& m, std::string_view label) {
    const JumpChannel* ch = m.find(label);
    REQUIRE(ch != nullptr);
    return *ch;
}

}  // namespace

TEST_CASE("full model without couplings is diagonal and keeps |00,0> stationary") {
    ModelSpec s;
    s.v_m = s.v_l = s.g_max = 0.0;
    s.gamma0 = s.gamma1 = 0.0;
    const ModelInstance m = build_full(s);
    const ComplexMatrix& h = m.hamiltonian;
    ComplexMatrix off = h;
    off.diagonal().setZero();
    CHECK(max_abs(off) == 0.0);
    const ComplexVector g = full_ket(0, 0, 0, s.fock_cutoff);
    CHECK((h * g).norm() == 0.0);
    const ComplexMatrix rho = outer(g, g);
    CHECK(max_abs(lindblad_rhs(m, rho)) == 0.0);
}

TEST_CASE("full model for the reference parameters") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build_full(s);
    CHECK(m.tier == Tier::A);
    CHECK(m.dim() == 9 * (s.fock_cutoff + 1));
    CHECK(is_hermitian(m.hamiltonian, 1e-10));
    CHECK(m.channels.size() == 5);
    CHECK(m.channels.front().label == labels::cavity_detected);
    for (const auto& ch : m.channels) {
        CHECK(ch.op.rows() == m.dim());
        if (ch.feedback) CHECK(is_unitary(*ch.feedback, 1e-10));
    }
    CHECK(m.find(labels::atom_decay(2, 1)) != nullptr);
}

TEST_CASE("full model diagonal elements follow the Hamiltonian expression") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build_full(s);
    const int n = s.fock_cutoff;
    auto element = [&](int i1, int i2, int k) {
        const ComplexVector v = full_ket(i1, i2, k, n);
        return (v.adjoint() * m.hamiltonian * v)(0, 0);
    };
    CHECK(std::abs(element(0, 0, 0)) == 0.0);
    CHECK(std::abs(element(2, 0, 0) - s.delta_big) < 1e-14);
    CHECK(std::abs(element(0, 2, 0) - s.delta_big) < 1e-14);
    CHECK(std::abs(element(2, 1, 0) - (s.delta_big - s.delta_small)) < 1e-14);
    CHECK(std::abs(element(1, 1, 0) + 2.0 * s.delta_small) < 1e-14);
    CHECK(std::abs(element(2, 2, 1) - 2.0 * s.delta_big) < 1e-14);
    // Off-diagonal couplings: pump on 1-2, microwave on 0-1, cavity on 0-2.
    auto coupling = [&](int a1, int a2, int ak, int b1, int b2, int bk) {
        return (full_ket(a1, a2, ak, n).adjoint() * m.hamiltonian * full_ket(b1, b2, bk, n))(0, 0);
    };
    CHECK(std::abs(coupling(1, 0, 0, 2, 0, 0) - 0.5 * s.v_l) < 1e-14);
    CHECK(std::abs(coupling(0, 0, 0, 1, 0, 0) - 0.5 * s.v_m) < 1e-14);
    CHECK(std::abs(coupling(0, 0, 1, 2, 0, 0) - s.g_max) < 1e-14);
    CHECK(std::abs(coupling(0, 0, 2, 0, 2, 1) - s.g_max * std::sqrt(2.0)) < 1e-14);
}

TEST_CASE("full model cavity channel carries the 1-2 feedback on atom 1") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build_full(s);
    const JumpChannel& cav = channel(m, labels::cavity_detected);
    REQUIRE(cav.feedback);
    const int n = s.fock_cutoff;
    // exp(i π/2 (|1><2| + |2><1|)) maps |1> to i|2> on atom 1 and leaves atom 2 alone.
    const ComplexVector out = *cav.feedback * full_ket(1, 1, 0, n);
    CHECK((out - kI * full_ket(2, 1, 0, n)).norm() < 1e-14);
    const ComplexVector untouched = *cav.feedback * full_ket(0, 1, 1, n);
    CHECK((untouched - full_ket(0, 1, 1, n)).norm() < 1e-14);
    // op = sqrt(kappa) U a
    CHECK(max_abs(cav.op - *cav.feedback * cav.bare) < 1e-15);
    CHECK(std::abs((full_ket(0, 0, 0, n).adjoint() * cav.bare * full_ket(0, 0, 1, n))(0, 0) - std::sqrt(s.kappa)) < 1e-15);
}

TEST_CASE("full model spontaneous channels") {
    ModelSpec s = fig3_spec();
    s.gamma0 = 0.04;
    s.gamma1 = 0.09;
    const ModelInstance m = build_full(s);
    const int n = s.fock_cutoff;
    const JumpChannel& d20 = channel(m, labels::atom_decay(2, 0));
    const ComplexVector out = d20.op * full_ket(1, 2, 0, n);
    CHECK((out - std::sqrt(0.04) * full_ket(1, 0, 0, n)).norm() < 1e-15);
    const JumpChannel& d11 = channel(m, labels::atom_decay(1, 1));
    CHECK((d11.op * full_ket(2, 0, 1, n) - std::sqrt(0.09) * full_ket(1, 0, 1, n)).norm() < 1e-15);
    CHECK_FALSE(d11.feedback.has_value());
}

TEST_CASE("reduced model without feedback: |a01> is the dark state of the cavity channel") {
    ModelSpec s = fig3_spec();
    s.feedback_angle = 0.0;
    const ModelInstance m = build_reduced(s, false);
    CHECK(m.tier == Tier::B);
    CHECK(m.dim() == 4);
    CHECK(m.channels.size() == 1);
    const JumpChannel& cav = channel(m, labels::cavity_detected);
    CHECK((cav.op * basis::a01()).norm() == 0.0);
    // Null space of the cavity operator is spanned by |00> and |a01>.
    const auto eig = eig_hermitian(cav.op.adjoint() * cav.op);
    int zeros = 0;
    for (double v : eig.values) zeros += std::abs(v) < 1e-14;
    CHECK(zeros == 2);
    CHECK((cav.op * basis::q00()).norm() == 0.0);
    CHECK((cav.op * basis::s01()).norm() > 0.0);
}

TEST_CASE("reduced cavity channel rate and feedback") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build_reduced(s, false);
    const JumpChannel& cav = channel(m, labels::cavity_detected);
    REQUIRE(cav.feedback);
    CHECK(is_unitary(*cav.feedback, 1e-10));
    // exp(i α sx) on qubit 1
    const ComplexMatrix expected_u = std::cos(s.feedback_angle) * identity(4) +
                                     kI * std::sin(s.feedback_angle) * kron(pauli::x(), identity(2));
    CHECK(max_abs(*cav.feedback - expected_u) < 1e-14);
    // The dissipator rate is v_l^2 g^2 / (Δ^2 κ) on sm1 + sm2.
    const double rate = s.v_l * s.v_l * s.g_max * s.g_max / (s.delta_big * s.delta_big * s.kappa);
    const ComplexMatrix a01 = kron(pauli::lower(), identity(2)) + kron(identity(2), pauli::lower());
    CHECK(max_abs(cav.bare - std::sqrt(rate) * a01) < 1e-15);
    CHECK(max_abs(cav.operator_for(s.g_max, s.g_max) - cav.op) < 1e-15);
}

TEST_CASE("R1a maps |a01> onto |s01> with the stated norm") {
    ModelSpec s = fig3_spec();
    s.gamma1 = 0.07;
    const ModelInstance m = build_reduced(s, true);
    const JumpChannel& r1a = channel(m, labels::r1a);
    const ComplexVector out = r1a.op * basis::a01();
    const double expected = s.gamma1 * s.v_l * s.v_l / (8.0 * s.delta_big * s.delta_big);
    CHECK(out.squaredNorm() == Catch::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(std::abs(basis::s01().dot(out)) - out.norm()) < 1e-15);
}

TEST_CASE("R channel prefactors and sector structure") {
    ModelSpec s = fig3_spec();
    s.gamma0 = 0.03;
    s.gamma1 = 0.08;
    const ModelInstance m = build_reduced(s, true);
    CHECK(m.tier == Tier::C);
    CHECK(m.channels.size() == 5);
    const double d2 = s.delta_big * s.delta_big;
    const double p0 = std::sqrt(s.gamma0 * s.v_l * s.v_l / (4.0 * d2));
    const double p1 = std::sqrt(s.gamma1 * s.v_l * s.v_l / (8.0 * d2));
    constexpr int k00 = 0, ks = 1, ka = 2, k11 = 3;

    const ComplexMatrix r0s = in_sectors(channel(m, labels::r0s).op);
    const ComplexMatrix r0a = in_sectors(channel(m, labels::r0a).op);
    const ComplexMatrix r1s = in_sectors(channel(m, labels::r1s).op);
    const ComplexMatrix r1a = in_sectors(channel(m, labels::r1a).op);
    ComplexMatrix e = ComplexMatrix::Zero(4, 4);
    e(k00, ks) = p0;
    e(ks, k11) = p0;
    CHECK(max_abs(r0s - e) < 1e-15);
    e.setZero();
    e(k00, ka) = p0;
    e(ka, k11) = -p0;
    CHECK(max_abs(r0a - e) < 1e-15);
    e.setZero();
    e(ka, ka) = p1;
    e(ks, ks) = p1;
    e(k11, k11) = 2.0 * p1;
    CHECK(max_abs(r1s - e) < 1e-15);
    e.setZero();
    e(ks, ka) = p1;
    e(ka, ks) = -p1;
    CHECK(max_abs(r1a - e) < 1e-15);
}

TEST_CASE("symmetric channels never connect the antisymmetric state to the symmetric sector") {
    ModelSpec s = fig3_spec();
    s.feedback_angle = 0.0;
    const ModelInstance m = build_reduced(s, true);
    constexpr int ka = 2;
    for (const auto label : {labels::r0s, labels::r1s, labels::cavity_detected}) {
        const ComplexMatrix op = in_sectors(channel(m, label).op);
        for (int k : {0, 1, 3}) {
            CHECK(std::abs(op(ka, k)) == 0.0);
            CHECK(std::abs(op(k, ka)) == 0.0);
        }
    }
    // The antisymmetric channels only touch matrix elements with one index on |a01>.
    for (const auto label : {labels::r0a, labels::r1a}) {
        const ComplexMatrix op = in_sectors(channel(m, label).op);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if ((r == ka) == (c == ka)) CHECK(std::abs(op(r, c)) == 0.0);
    }
}

TEST_CASE("every built Hamiltonian is Hermitian") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const ModelSpec s = random_spec(rng);
        for (Tier t : {Tier::A, Tier::B, Tier::C}) {
            const ModelInstance m = build(s, t);
            CHECK(is_hermitian(m.hamiltonian, 1e-10));
            for (const auto& ch : m.channels)
                if (ch.feedback) CHECK(is_unitary(*ch.feedback, 1e-10));
        }
    }
}

TEST_CASE("tier dimensions") {
    ModelSpec s = fig3_spec();
    for (int n : {1, 2, 3}) {
        s.fock_cutoff = n;
        CHECK(build(s, Tier::A).dim() == 9 * (n + 1));
    }
    CHECK(build(s, Tier::B).dim() == 4);
    CHECK(build(s, Tier::C).dim() == 4);
}

TEST_CASE("reduced builder flags specs outside the large-detuning regime but still builds") {
    ModelSpec s = fig3_spec();
    s.delta_big = 5.0;
    s.delta_small = stark_shift_delta(s);
    const ModelInstance m = build_reduced(s, true);
    REQUIRE_FALSE(m.warnings.empty());
    CHECK(m.warnings.front().find("large-detuning") != std::string::npos);
    CHECK(build_reduced(fig3_spec(), true).warnings.empty());
}

TEST_CASE("spec validation rejects bad parameters") {
    ModelSpec s;
    s.kappa = -1.0;
    CHECK_THROWS_AS(build(s, Tier::C), std::invalid_argument);
    s = ModelSpec{};
    s.eta = 1.5;
    CHECK_THROWS_AS(build(s, Tier::C), std::invalid_argument);
    s = ModelSpec{};
    s.fock_cutoff = 0;
    CHECK_THROWS_AS(build(s, Tier::A), std::invalid_argument);
}

TEST_CASE("stark shift detuning") {
    ModelSpec s;
    s.v_l = 1.0;
    s.delta_big = 50.0;
    CHECK(stark_shift_delta(s) == Catch::Approx(1.0 / 200.0).epsilon(1e-15));
    s.v_l = 0.0;
    CHECK(stark_shift_delta(s) == 0.0);
    s.delta_big = 0.0;
    CHECK_THROWS_AS(stark_shift_delta(s), std::invalid_argument);
}

TEST_CASE("stark shift cancels the light-shift term of the intermediate Hamiltonian") {
    ModelSpec s = fig3_spec();
    s.v_m = 0.0;
    const ComplexMatrix h2 = raman_two_level_hamiltonian(s);
    // Layout (2, 2, N + 1): |00,0> is index 0 and |11,0> is index 3 (N + 1).
    const Eigen::Index nc = s.fock_cutoff + 1;
    const double diff = (h2(3 * nc, 3 * nc) - h2(0, 0)).real();
    CHECK(std::abs(diff) < 1e-12);
    s.delta_small = 0.0;
    const ComplexMatrix shifted = raman_two_level_hamiltonian(s);
    CHECK(std::abs((shifted(3 * nc, 3 * nc) - shifted(0, 0)).real() - 4.0 * stark_shift_delta(s)) < 1e-14);
}

TEST_CASE("effective rates for the reference parameters") {
    ModelSpec s = fig3_spec();
    const EffectiveRates r = effective_rates(s);
    CHECK(r.g_eff == Catch::Approx(0.01).epsilon(1e-14));
    CHECK(r.cooperativity == Catch::Approx(10.0).epsilon(1e-14));
    CHECK(r.gamma_eff == Catch::Approx(0.1 / (4.0 * 2500.0)).epsilon(1e-14));
    CHECK_FALSE(r.cooperativity_unbounded);
    s.gamma0 = s.gamma1 = 0.0;
    const EffectiveRates z = effective_rates(s);
    CHECK(z.gamma_eff == 0.0);
    CHECK(z.cooperativity_unbounded);
    CHECK(std::isinf(z.cooperativity));
}

TEST_CASE("cooperativity identity over random specs") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const ModelSpec s = random_spec(rng);
        const EffectiveRates r = effective_rates(s);
        const double lhs = r.g_eff * r.g_eff / (s.kappa * r.gamma_eff);
        const double rhs = s.g_max * s.g_max / (s.gamma() * s.kappa);
        CHECK(std::abs(lhs - rhs) / rhs < 1e-12);
    }
}

TEST_CASE("dark time") {
    ModelSpec s = fig3_spec();
    CHECK_FALSE(dark_time(s, 0.7, 0.7).has_value());
    // Direct matrix-vector oracle for ||(g1 sm1 + g2 sm2)|a01>||^2.
    const ComplexMatrix sm1 = kron(pauli::lower(), identity(2)), sm2 = kron(identity(2), pauli::lower());
    const double norm2 = ((1.0 * sm1 + 0.8 * sm2) * basis::a01()).squaredNorm();
    CHECK(norm2 == Catch::Approx(0.02).epsilon(1e-12));
    const double rate = s.v_l * s.v_l / (s.delta_big * s.delta_big * s.kappa) * norm2;
    CHECK(dark_state_emission_rate(s, 1.0, 0.8) == Catch::Approx(rate).epsilon(1e-12));
    const double expected = 2.0 * s.kappa * s.delta_big * s.delta_big / (s.v_l * s.v_l * 0.04);
    CHECK(*dark_time(s, 1.0, 0.8) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("frozen couplings rebuild the per-atom cavity channel") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = with_cavity_couplings(build(s, Tier::C), 1.0, 0.6);
    const JumpChannel& cav = channel(m, labels::cavity_detected);
    const double amp = s.v_l / (s.delta_big * std::sqrt(s.kappa));
    const ComplexMatrix bare = amp * (1.0 * kron(pauli::lower(), identity(2)) + 0.6 * kron(identity(2), pauli::lower()));
    CHECK(max_abs(cav.bare - bare) < 1e-15);
    CHECK(max_abs(cav.op - *cav.feedback * bare) < 1e-15);
    CHECK((cav.bare * basis::a01()).norm() > 0.0);
}

TEST_CASE("coupling moments") {
    const auto zero = coupling_moments(0.0, 0.0);
    CHECK(zero[0] == Catch::Approx(1.0));
    CHECK(zero[1] == Catch::Approx(1.0));
    CHECK(zero[2] == Catch::Approx(1.0));
    // Monte-Carlo oracle for sigma = 0.1 at the antinode.
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 0.1);
    double g11 = 0.0, g12 = 0.0;
    const int samples = 400000;
    for (int k = 0; k < samples; ++k) {
        const double a = std::cos(2 * std::numbers::pi * n(rng)), b = std::cos(2 * std::numbers::pi * n(rng));
        g11 += a * a;
        g12 += a * b;
    }
    const auto mom = coupling_moments(0.1, 0.0);
    CHECK(std::abs(mom[0] - g11 / samples) < 3e-3);
    CHECK(std::abs(mom[1] - g12 / samples) < 3e-3);
}

TEST_CASE("jitter-averaged channels reproduce the averaged dissipator") {
    const ModelSpec s = fig3_spec();
    const ModelInstance base = build(s, Tier::C);
    const JumpChannel& cav = channel(base, labels::cavity_detected);
    std::mt19937_64 rng(37);
    for (double sigma : {0.0, 0.05, 0.12}) {
        const ModelInstance avg = jitter_averaged(base, sigma);
        const auto mom = coupling_moments(sigma, 0.0);
        std::normal_distribution<double> n(0.0, 1.0);
        ComplexMatrix rho(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) rho(i, j) = cd(n(rng), n(rng));
        rho = rho * rho.adjoint();
        rho /= rho.trace();
        // sum_ij E[g_i g_j] D-sandwich of the per-atom parts
        const ComplexMatrix& u = *cav.feedback;
        const ComplexMatrix l1 = u * cav.per_atom[0], l2 = u * cav.per_atom[1];
        const ComplexMatrix expected = mom[0] * l1 * rho * l1.adjoint() + mom[1] * (l1 * rho * l2.adjoint() + l2 * rho * l1.adjoint()) +
                                       mom[2] * l2 * rho * l2.adjoint();
        ComplexMatrix got = ComplexMatrix::Zero(4, 4);
        ComplexMatrix got_cc = ComplexMatrix::Zero(4, 4);
        for (const auto& ch : avg.channels)
            if (ch.is_cavity()) {
                got += ch.op * rho * ch.op.adjoint();
                got_cc += ch.op.adjoint() * ch.op;
            }
        CHECK(max_abs(got - expected) < 1e-15);
        const ComplexMatrix expected_cc = mom[0] * l1.adjoint() * l1 + mom[1] * (l1.adjoint() * l2 + l2.adjoint() * l1) +
                                          mom[2] * l2.adjoint() * l2;
        CHECK(max_abs(got_cc - expected_cc) < 1e-15);
    }
    CHECK(jitter_averaged(base, 0.0).channels.size() == base.channels.size());
    CHECK(jitter_averaged(base, 0.1).channels.size() == base.channels.size() + 1);
}

TEST_CASE("detector efficiency splits the cavity channel") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build(s, Tier::C);
    const ModelInstance same = with_detector_efficiency(m, 1.0);
    CHECK(same.channel_labels() == m.channel_labels());
    const ModelInstance half = with_detector_efficiency(m, 0.3);
    const JumpChannel& det = channel(half, labels::cavity_detected);
    const JumpChannel& und = channel(half, labels::cavity_undetected);
    CHECK(det.conditioned);
    CHECK(det.feedback.has_value());
    CHECK_FALSE(und.conditioned);
    CHECK_FALSE(und.feedback.has_value());
    const JumpChannel& orig = channel(m, labels::cavity_detected);
    CHECK(max_abs(det.op.adjoint() * det.op + und.op.adjoint() * und.op - orig.op.adjoint() * orig.op) < 1e-15);
    CHECK(max_abs(det.op - std::sqrt(0.3) * orig.op) < 1e-15);
    const ModelInstance none = with_detector_efficiency(m, 0.0);
    CHECK(none.find(labels::cavity_detected) == nullptr);
    CHECK_THROWS_AS(with_detector_efficiency(m, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(with_detector_efficiency(m, 1.1), std::invalid_argument);
}

TEST_CASE("without_feedback removes the unitary") {
    const ModelInstance m = without_feedback(build(fig3_spec(), Tier::C));
    const JumpChannel& cav = channel(m, labels::cavity_detected);
    CHECK(max_abs(cav.op - cav.bare) < 1e-15);
}

TEST_CASE("full and reduced models agree over a short horizon") {
    const ModelSpec s = fig3_spec();
    const ModelInstance full = build(s, Tier::A);
    const ModelInstance reduced = build(s, Tier::C);
    const ComplexVector q = basis::q00();
    const QuantumState rho_a = QuantumState::density(outer(basis::embed_full(q, s.fock_cutoff), basis::embed_full(q, s.fock_cutoff)), full.layout);
    const QuantumState rho_c = QuantumState::density(outer(q, q), reduced.layout);
    const double t = 1.0;
    const auto a = integrate(full, rho_a, t, recommended_dt(full));
    const auto c = integrate(reduced, rho_c, t, recommended_dt(reduced));
    const ComplexMatrix ra = partial_trace_to_qubits(a.back().state).rho;
    CHECK(trace_distance(ra, c.back().state.to_density()) < 0.05);
}

// The reduced model is derived for the pump light shift being cancelled by
// delta_small. Under the full Hamiltonian as written (-delta_small on level 1)
// the choice delta_small = +v_l^2/(4Δ) doubles the residual two-photon
// detuning instead, while the opposite sign removes it. The acceptance bounds
// hold either way; this test pins the observed ordering.
TEST_CASE("sign of the light-shift compensation in the full model") {
    ModelSpec s = fig3_spec();
    const ModelInstance reduced = build(s, Tier::C);
    const ComplexVector q = basis::q00();
    const QuantumState rho_c = QuantumState::density(outer(q, q), reduced.layout);
    const auto c = integrate(reduced, rho_c, 2.0, recommended_dt(reduced));
    auto distance_for = [&](double delta_small) {
        ModelSpec f = s;
        f.delta_small = delta_small;
        const ModelInstance full = build(f, Tier::A);
        const ComplexVector v = basis::embed_full(q, f.fock_cutoff);
        const auto a = integrate(full, QuantumState::density(outer(v, v), full.layout), 2.0, recommended_dt(full));
        return trace_distance(partial_trace_to_qubits(a.back().state).rho, c.back().state.to_density());
    };
    const double printed = distance_for(stark_shift_delta(s));
    const double flipped = distance_for(-stark_shift_delta(s));
    CHECK(flipped < printed);
    CHECK(printed < 0.05);
}
