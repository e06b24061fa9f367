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
#include <random>

using namespace jumpfeed;

namespace {

ModelSpec fig3_spec() {
    ModelSpec s;
    s.delta_small = stark_shift_delta(s);
    return s;
}

ModelInstance single_qubit_decay(double rate = 1.0) {
    ModelInstance m;
    m.layout = Layout{{2}};
    m.hamiltonian = ComplexMatrix::Zero(2, 2);
    m.channels.push_back(JumpChannel::make(std::sqrt(rate) * pauli::lower(), std::nullopt, "decay"));
    return m;
}

ComplexMatrix random_density(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexMatrix a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = cd(n(rng), n(rng));
    ComplexMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

ModelInstance random_model(std::mt19937_64& rng, Eigen::Index d, int channels) {
    std::normal_distribution<double> n(0.0, 1.0);
    ModelInstance m;
    m.layout = Layout{{d}};
    ComplexMatrix h(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) h(i, j) = cd(n(rng), n(rng));
    m.hamiltonian = 0.5 * (h + h.adjoint());
    for (int k = 0; k < channels; ++k) {
        ComplexMatrix c(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) c(i, j) = cd(n(rng), n(rng));
        m.channels.push_back(JumpChannel::make(c, std::nullopt, "c" + std::to_string(k)));
    }
    return m;
}

QuantumState density_of(const ComplexVector& v, const Layout& layout) {
    return QuantumState::density(outer(v, v), layout);
}

}  // namespace

TEST_CASE("amplitude damping right-hand side") {
    const ModelInstance m = single_qubit_decay();
    const ComplexMatrix rhs = lindblad_rhs(m, QuantumState::density(outer_basis(2, 1, 1), m.layout));
    CHECK(max_abs(rhs - (outer_basis(2, 0, 0) - outer_basis(2, 1, 1))) < 1e-15);
}

TEST_CASE("right-hand side is traceless for random models and states") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 2 + trial % 5;
        const ModelInstance m = random_model(rng, d, 1 + trial % 4);
        const ComplexMatrix rhs = lindblad_rhs(m, QuantumState::density(random_density(rng, d), m.layout));
        CHECK(std::abs(rhs.trace()) < 1e-10);
    }
}

TEST_CASE("right-hand side is linear") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const ModelInstance m = random_model(rng, 4, 3);
        const ComplexMatrix r1 = random_density(rng, 4), r2 = random_density(rng, 4);
        const double a = 0.3, b = -1.7;
        const ComplexMatrix lhs = lindblad_rhs(m, ComplexMatrix(a * r1 + b * r2));
        const ComplexMatrix rhs = a * lindblad_rhs(m, r1) + b * lindblad_rhs(m, r2);
        CHECK(max_abs(lhs - rhs) < 1e-11);
    }
}

TEST_CASE("right-hand side agrees with the vectorised Liouvillian") {
    std::mt19937_64 rng(47);
    const ModelInstance m = random_model(rng, 3, 2);
    const ComplexMatrix rho = random_density(rng, 3);
    const ComplexVector lv = liouvillian(m) * detail::vec(rho);
    CHECK(max_abs(detail::unvec(lv, 3) - lindblad_rhs(m, rho)) < 1e-12);
}

TEST_CASE("per-channel decomposition on the antisymmetric state") {
    const ModelSpec s = fig3_spec();
    const ModelInstance m = build(s, Tier::C);
    const ComplexMatrix rho = outer(basis::a01(), basis::a01());
    ComplexMatrix spontaneous = ComplexMatrix::Zero(4, 4), total = ComplexMatrix::Zero(4, 4);
    for (const auto& ch : m.channels) {
        const ComplexMatrix contribution = dissipator(ch.op, rho);
        total += contribution;
        if (ch.is_cavity()) CHECK(max_abs(contribution) == 0.0);
        else spontaneous += contribution;
    }
    CHECK(max_abs(spontaneous) > 0.0);
    const ComplexMatrix hamiltonian_part = -kI * (m.hamiltonian * rho - rho * m.hamiltonian);
    CHECK(max_abs(hamiltonian_part + total - lindblad_rhs(m, rho)) < 1e-15);
}

TEST_CASE("dark state is stationary in tier B without the microwave drive") {
    ModelSpec s = fig3_spec();
    s.v_m = 0.0;
    const ModelInstance m = build(s, Tier::B);
    CHECK(max_abs(lindblad_rhs(m, density_of(basis::a01(), m.layout))) == 0.0);
}

TEST_CASE("dimension mismatch is rejected") {
    const ModelInstance m = build(fig3_spec(), Tier::C);
    const QuantumState wrong = QuantumState::density(identity(2) / 2.0, Layout{{2}});
    CHECK_THROWS_AS(lindblad_rhs(m, wrong), std::invalid_argument);
    CHECK_THROWS_AS(integrate(m, wrong, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("integration without rates or Hamiltonian is constant") {
    ModelSpec s = fig3_spec();
    s.v_l = s.v_m = 0.0;
    s.gamma0 = s.gamma1 = 0.0;
    const ModelInstance m = build(s, Tier::C);
    std::mt19937_64 rng(53);
    const ComplexMatrix rho0 = random_density(rng, 4);
    const auto out = integrate(m, QuantumState::density(rho0, m.layout), 10.0, 0.5);
    REQUIRE(out.size() == 21);
    for (const auto& ts : out) CHECK(max_abs(ts.state.data - rho0) < 1e-15);
}

TEST_CASE("integration records the requested grid") {
    const ModelInstance m = build(fig3_spec(), Tier::C);
    IntegrateOptions o;
    o.record_every = 4;
    const auto out = integrate(m, density_of(basis::q00(), m.layout), 10.0, 0.5, o);
    REQUIRE(out.size() == 6);
    CHECK(out[1].t == Catch::Approx(2.0));
    CHECK(out.back().t == Catch::Approx(10.0));
}

TEST_CASE("RK4 converges at fourth order") {
    ModelSpec s = fig3_spec();
    s.v_m = 0.5;
    const ModelInstance m = build(s, Tier::C);
    const QuantumState rho0 = density_of(basis::q00(), m.layout);
    // Coarse steps leave small negative eigenvalues from truncation error.
    const IntegrateOptions loose{1, false};
    auto final_state = [&](double dt) { return integrate(m, rho0, 20.0, dt, loose).back().state.data; };
    const ComplexMatrix r1 = final_state(0.4), r2 = final_state(0.2), r3 = final_state(0.1);
    const double ratio = max_abs(r1 - r2) / max_abs(r2 - r3);
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
    // At the recommended step, halving changes entries by far less than 1e-6.
    const double dt = recommended_dt(m);
    const auto a = integrate(m, rho0, 200.0, dt).back().state.data;
    const auto b = integrate(m, rho0, 200.0, dt / 2).back().state.data;
    CHECK(max_abs(a - b) < 1e-6);
}

TEST_CASE("integration preserves trace, Hermiticity and positivity") {
    for (Tier t : {Tier::B, Tier::C}) {
        const ModelInstance m = build(fig3_spec(), t);
        IntegrateOptions o;
        o.record_every = 100;
        const auto out = integrate(m, density_of(basis::q00(), m.layout), 5000.0, 1.0, o);
        for (const auto& ts : out) {
            const auto check = check_state(ts.state, 1e-9, 1e-7, -1e-8);
            CHECK(check.ok);
            CHECK(std::abs(ts.state.data.trace().real() - 1.0) < 1e-7);
            CHECK(max_abs(ts.state.data - ts.state.data.adjoint()) < 1e-9);
        }
    }
}

TEST_CASE("oversized steps abort the integration") {
    const ModelInstance m = build(fig3_spec(), Tier::C);
    bool threw = false;
    try {
        integrate(m, density_of(basis::q00(), m.layout), 1e6, 500.0);
    } catch (const StepTooLarge&) {
        threw = true;
    } catch (const NumericalError& e) {
        threw = true;
        CHECK_FALSE(e.diagnostics().empty());
    }
    CHECK(threw);
}

TEST_CASE("long-time concurrence with and without feedback") {
    ModelSpec s = fig3_spec();
    const ModelInstance fb = build(s, Tier::C);
    IntegrateOptions o;
    o.record_every = 1000;
    const auto with_fb = integrate(fb, density_of(basis::q00(), fb.layout), 60000.0, 2.0, o);
    CHECK(concurrence(with_fb.back().state.data) > 0.9);
    s.feedback_angle = 0.0;
    const ModelInstance off = build(s, Tier::C);
    const auto without = integrate(off, density_of(basis::q00(), off.layout), 60000.0, 2.0, o);
    CHECK(concurrence(without.back().state.data) < 0.02);
}

TEST_CASE("steady state of amplitude damping is the ground state") {
    const ModelInstance m = single_qubit_decay(0.5);
    for (auto method : {SteadyStateMethod::integrate, SteadyStateMethod::nullspace}) {
        SteadyStateOptions o;
        o.method = method;
        const QuantumState ss = steady_state(m, 1e-12, o);
        CHECK(max_abs(ss.data - outer_basis(2, 0, 0)) < 1e-10);
    }
}

TEST_CASE("steady state residual and method agreement") {
    const ModelInstance m = build(fig3_spec(), Tier::C);
    const double tol = 1e-10;
    SteadyStateOptions o;
    o.method = SteadyStateMethod::integrate;
    const SteadyStateResult a = solve_steady_state(m, tol, o);
    CHECK(a.residual < 10 * tol);
    CHECK(max_abs(lindblad_rhs(m, a.state)) < 10 * tol);
    o.method = SteadyStateMethod::nullspace;
    const SteadyStateResult b = solve_steady_state(m, tol, o);
    CHECK(b.residual < 10 * tol);
    CHECK(trace_distance(a.state.data, b.state.data) < 1e-6);
    CHECK(check_state(b.state).ok);
}

TEST_CASE("steady state with frozen equal couplings equals the unjittered model") {
    ModelSpec s = fig3_spec();
    const ModelInstance plain = build(s, Tier::C);
    const ModelInstance frozen = with_cavity_couplings(plain, 1.0, 1.0);
    SteadyStateOptions o;
    o.method = SteadyStateMethod::nullspace;
    const double c_plain = concurrence(steady_state(plain, 1e-10, o).data);
    const double c_frozen = concurrence(steady_state(frozen, 1e-10, o).data);
    const double c_sigma0 = concurrence(steady_state(jitter_averaged(plain, 0.0), 1e-10, o).data);
    CHECK(std::abs(c_plain - c_frozen) < 1e-10);
    CHECK(std::abs(c_plain - c_sigma0) < 1e-10);
}

TEST_CASE("steady state reports non-convergence with the last residual") {
    const ModelInstance m = build(fig3_spec(), Tier::C);
    SteadyStateOptions o;
    o.method = SteadyStateMethod::integrate;
    o.max_time = 10.0;
    try {
        solve_steady_state(m, 1e-12, o);
        FAIL("expected SteadyStateNotConverged");
    } catch (const SteadyStateNotConverged& e) {
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("steady state needs a dissipative channel") {
    ModelInstance m;
    m.layout = Layout{{2}};
    m.hamiltonian = pauli::x();
    CHECK_THROWS_AS(steady_state(m, 1e-10), std::invalid_argument);
}
