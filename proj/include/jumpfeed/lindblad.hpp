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

// lindblad.hpp: deterministic density-matrix evolution.
//
//   rhs(rho) = -i[H, rho] + sum_k ( c_k rho c_k† - 1/2 {c_k† c_k, rho} )
//
// Time stepping is fixed-step RK4. Steady states come either from long-time
// RK4 evolution (accelerated by squaring the one-step propagator, which
// reproduces the stepped iterates exactly) or from the null space of the
// vectorised generator.

#pragma once

#include "jumpfeed/model.hpp"
#include "jumpfeed/operator_algebra.hpp"
#include "jumpfeed/quantum_state.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace jumpfeed {

// Raised when an integration leaves the physical state space.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::string diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

class StepTooLarge : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SteadyStateNotConverged : public std::runtime_error {
public:
    SteadyStateNotConverged(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Calls f with std::integral_constant<int, 4> for two-qubit dimensions and
// Eigen::Dynamic otherwise, so the hot loops run on fixed-size matrices.
template <class F>
decltype(auto) dispatch_dim(Eigen::Index dim, F&& f) {
    if (dim == 4) return f(std::integral_constant<int, 4>{});
    return f(std::integral_constant<int, Eigen::Dynamic>{});
}

namespace detail {

template <int Dim>
using Mat = Eigen::Matrix<cd, Dim, Dim>;

// -i H_eff rho + i rho H_eff† + sum_{drift} c rho c†, for Hermitian rho.
// Used both for the full generator (drift = all channels) and for the
// no-click evolution of partially conditioned trajectories.
template <int Dim>
struct DriftKernel {
    Mat<Dim> h_eff;
    std::vector<Mat<Dim>> drift;
    std::vector<Mat<Dim>> drift_adj;
    mutable Mat<Dim> scratch;
    mutable Mat<Dim> scratch2;

    DriftKernel() = default;
    DriftKernel(const ComplexMatrix& h, const std::vector<ComplexMatrix>& all_channels,
                const std::vector<bool>& in_drift) {
        rebuild(h, all_channels, in_drift);
    }

    void rebuild(const ComplexMatrix& h, const std::vector<ComplexMatrix>& all_channels,
                 const std::vector<bool>& in_drift) {
        const Eigen::Index d = h.rows();
        ComplexMatrix anti = ComplexMatrix::Zero(d, d);
        drift.clear();
        drift_adj.clear();
        for (std::size_t k = 0; k < all_channels.size(); ++k) {
            const auto& c = all_channels[k];
            anti += c.adjoint() * c;
            if (in_drift[k] && max_abs(c) > 0.0) {
                drift.emplace_back(c);
                drift_adj.emplace_back(c.adjoint());
            }
        }
        h_eff = h - 0.5 * kI * anti;
        scratch.resize(d, d);
        scratch2.resize(d, d);
    }

    void apply(const Mat<Dim>& rho, Mat<Dim>& out) const {
        scratch.noalias() = h_eff * rho;
        out = -kI * scratch;
        out += (kI * scratch.adjoint()).eval();
        for (std::size_t k = 0; k < drift.size(); ++k) {
            scratch2.noalias() = drift[k] * rho;
            out.noalias() += scratch2 * drift_adj[k];
        }
    }
};

template <int Dim>
struct Rk4Stepper {
    Mat<Dim> k1, k2, k3, k4, tmp;

    explicit Rk4Stepper(Eigen::Index d) : k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d) {}

    void step(const DriftKernel<Dim>& kernel, Mat<Dim>& rho, double h) {
        kernel.apply(rho, k1);
        tmp = rho + (0.5 * h) * k1;
        kernel.apply(tmp, k2);
        tmp = rho + (0.5 * h) * k2;
        kernel.apply(tmp, k3);
        tmp = rho + h * k3;
        kernel.apply(tmp, k4);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // apply() assumes a Hermitian argument; the anti-Hermitian round-off
        // it ignores is not damped by the generator, so drop it every step.
        tmp = rho.adjoint();
        rho = 0.5 * (rho + tmp);
    }
};

inline std::vector<ComplexMatrix> channel_ops(const ModelInstance& m) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(m.channels.size());
    for (const auto& ch : m.channels) ops.push_back(ch.op);
    return ops;
}

inline void require_density(const ModelInstance& m, const QuantumState& rho, const char* who) {
    if (rho.dim() != m.dim() || rho.layout != m.layout)
        throw std::invalid_argument(std::string(who) + ": state dimension does not match the model");
}

}  // namespace detail

// Lindblad right-hand side for an arbitrary (not necessarily Hermitian) matrix.
inline ComplexMatrix lindblad_rhs(const ModelInstance& model, const ComplexMatrix& rho) {
    if (rho.rows() != model.dim() || rho.cols() != model.dim())
        throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    const ComplexMatrix& h = model.hamiltonian;
    ComplexMatrix out = -kI * (h * rho - rho * h);
    for (const auto& ch : model.channels) {
        const ComplexMatrix& c = ch.op;
        const ComplexMatrix cc = c.adjoint() * c;
        out += c * rho * c.adjoint() - 0.5 * (cc * rho + rho * cc);
    }
    return out;
}

inline ComplexMatrix lindblad_rhs(const ModelInstance& model, const QuantumState& rho) {
    if (rho.kind != StateKind::density) throw std::invalid_argument("lindblad_rhs: density state required");
    detail::require_density(model, rho, "lindblad_rhs");
    return lindblad_rhs(model, rho.data);
}

// D[c] rho for a single channel.
inline ComplexMatrix dissipator(const ComplexMatrix& c, const ComplexMatrix& rho) {
    const ComplexMatrix cc = c.adjoint() * c;
    return c * rho * c.adjoint() - 0.5 * (cc * rho + rho * cc);
}

// Largest of the Hamiltonian spectral norm and the channel rates ‖c‖².
inline double max_rate(const ModelInstance& model) {
    const auto eig = eig_hermitian(model.hamiltonian, 1e-8);
    double r = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
    for (const auto& ch : model.channels) r = std::max(r, spectral_norm_sq(ch.op));
    return r;
}

// Smallest non-zero channel rate; 0 when every channel vanishes.
inline double slowest_rate(const ModelInstance& model) {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& ch : model.channels) {
        const double k = spectral_norm_sq(ch.op);
        if (k > 0.0) r = std::min(r, k);
    }
    return std::isfinite(r) ? r : 0.0;
}

inline double recommended_dt(const ModelInstance& model) {
    const double r = max_rate(model);
    return r > 0.0 ? 0.01 / r : 1.0;
}

struct TimedState {
    double t = 0.0;
    QuantumState state;
};

struct IntegrateOptions {
    std::size_t record_every = 1;  // store every n-th step; the final state is always stored
    bool check_positivity = true;
};

// Number of fixed steps for a run; the final time is steps * dt.
inline std::size_t step_count(double t_final, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (!(t_final >= 0.0)) throw std::invalid_argument("t_final must be non-negative");
    return static_cast<std::size_t>(std::llround(t_final / dt));
}

inline std::vector<TimedState> integrate(const ModelInstance& model, const QuantumState& rho0, double t_final,
                                         double dt, const IntegrateOptions& opts = {}) {
    const QuantumState start =
        rho0.is_pure() ? QuantumState::density(rho0.to_density(), rho0.layout) : rho0;
    detail::require_density(model, start, "integrate");
    const std::size_t steps = step_count(t_final, dt);
    const std::size_t every = std::max<std::size_t>(1, opts.record_every);

    return dispatch_dim(model.dim(), [&](auto dim_tag) {
        constexpr int Dim = decltype(dim_tag)::value;
        const auto ops = detail::channel_ops(model);
        const detail::DriftKernel<Dim> kernel(model.hamiltonian, ops, std::vector<bool>(ops.size(), true));
        detail::Rk4Stepper<Dim> rk(model.dim());
        detail::Mat<Dim> rho = start.data;

        std::vector<TimedState> out;
        out.reserve(steps / every + 2);
        auto store = [&](std::size_t step) {
            ComplexMatrix r = rho;
            const double tr = r.trace().real();
            if (std::abs(tr - 1.0) > 1e-10) r /= tr;
            QuantumState s = QuantumState::density(r, model.layout);
            if (opts.check_positivity) {
                const auto eig = eig_hermitian(0.5 * (r + r.adjoint()), 1e300);
                if (eig.values.back() < -1e-6) {
                    std::ostringstream diag;
                    diag << "t = " << static_cast<double>(step) * dt << "\nmin eigenvalue = " << eig.values.back()
                         << "\ndt = " << dt << "\ntrace = " << tr << "\n";
                    throw NumericalError("integrate: density matrix lost positivity", diag.str());
                }
            }
            out.push_back({static_cast<double>(step) * dt, std::move(s)});
        };

        store(0);
        double prev_trace = rho.trace().real();
        for (std::size_t step = 1; step <= steps; ++step) {
            rk.step(kernel, rho, dt);
            const double tr = rho.trace().real();
            if (!std::isfinite(tr) || std::abs(tr - prev_trace) > 1e-6) {
                std::ostringstream diag;
                diag << "t = " << static_cast<double>(step) * dt << "\ntrace before = " << prev_trace
                     << "\ntrace after = " << tr << "\ndt = " << dt << "\nrecommended dt = " << recommended_dt(model)
                     << "\n";
                throw StepTooLarge("integrate: trace drift per step exceeds 1e-6; reduce dt\n" + diag.str());
            }
            prev_trace = tr;
            if (step % every == 0 || step == steps) store(step);
        }
        return out;
    });
}

// ---------------------------------------------------------------------------
// Steady state.

enum class SteadyStateMethod { integrate, nullspace };

inline const char* to_string(SteadyStateMethod m) {
    return m == SteadyStateMethod::integrate ? "integrate" : "nullspace";
}

struct SteadyStateOptions {
    SteadyStateMethod method = SteadyStateMethod::integrate;
    double dt = 0.0;        // integrate only; 0 picks recommended_dt
    double max_time = 0.0;  // integrate only; 0 means 1e6 windows
    std::optional<QuantumState> initial;  // integrate only; default is the maximally mixed state
};

struct SteadyStateResult {
    QuantumState state;
    double residual = 0.0;  // ‖rhs(rho_ss)‖_max
    double time = 0.0;      // evolution time reached (integrate)
    SteadyStateMethod method = SteadyStateMethod::integrate;
};

// Row-major vectorisation: vec(rho)[i * d + j] = rho(i, j).
inline ComplexMatrix liouvillian(const ModelInstance& model) {
    const Eigen::Index d = model.dim();
    const ComplexMatrix id = identity(d);
    const ComplexMatrix& h = model.hamiltonian;
    ComplexMatrix l = -kI * (kron(h, id) - kron(id, h.transpose()));
    for (const auto& ch : model.channels) {
        const ComplexMatrix& c = ch.op;
        const ComplexMatrix cc = c.adjoint() * c;
        l += kron(c, c.conjugate()) - 0.5 * kron(cc, id) - 0.5 * kron(id, cc.transpose());
    }
    return l;
}

namespace detail {
inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index d) {
    ComplexMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v(i * d + j);
    return m;
}
inline ComplexVector vec(const ComplexMatrix& m) {
    const Eigen::Index d = m.rows();
    ComplexVector v(d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) v(i * d + j) = m(i, j);
    return v;
}
inline ComplexMatrix normalise_density(const ComplexMatrix& m) {
    ComplexMatrix h = 0.5 * (m + m.adjoint());
    return h / h.trace().real();
}
}  // namespace detail

inline SteadyStateResult solve_steady_state(const ModelInstance& model, double tol, const SteadyStateOptions& opts = {}) {
    const Eigen::Index d = model.dim();
    const double slowest = slowest_rate(model);
    if (model.channels.empty() || !(slowest > 0.0))
        throw std::invalid_argument("steady_state: model has no dissipative channel");
    const ComplexMatrix l = liouvillian(model);

    SteadyStateResult res;
    res.method = opts.method;
    if (opts.method == SteadyStateMethod::nullspace) {
        ComplexMatrix a = l;
        ComplexVector b = ComplexVector::Zero(d * d);
        a.row(0).setZero();
        for (Eigen::Index i = 0; i < d; ++i) a(0, i * d + i) = 1.0;
        b(0) = 1.0;
        const ComplexVector x = Eigen::MatrixXcd(a).fullPivLu().solve(Eigen::VectorXcd(b));
        res.state = QuantumState::density(detail::normalise_density(detail::unvec(x, d)), model.layout);
    } else {
        const double h = opts.dt > 0.0 ? opts.dt : recommended_dt(model);
        const double window = 10.0 / slowest;
        const double max_time = opts.max_time > 0.0 ? opts.max_time : 1e6 * window;
        // One RK4 step of a linear autonomous system is the degree-4 Taylor polynomial of h L.
        const ComplexMatrix hl = h * l;
        const Eigen::Index n = d * d;
        ComplexMatrix p = identity(n);
        ComplexMatrix term = identity(n);
        for (int k = 1; k <= 4; ++k) {
            term = (term * hl / static_cast<double>(k)).eval();
            p += term;
        }
        const ComplexMatrix rho0 = opts.initial ? opts.initial->to_density() : ComplexMatrix(identity(d) / double(d));
        detail::require_density(model, QuantumState::density(rho0, model.layout), "steady_state");
        const ComplexVector v0 = detail::vec(rho0);

        // Rounding makes the trace drift over ~2^k steps; compare trace-normalised iterates.
        auto trace_of = [d](const ComplexVector& v) {
            cd s = 0.0;
            for (Eigen::Index i = 0; i < d; ++i) s += v(i * d + i);
            return s;
        };
        double t = h;
        ComplexVector v_t = p * v0;
        v_t /= trace_of(v_t);
        double last_change = std::numeric_limits<double>::infinity();
        while (true) {
            p = (p * p).eval();
            ComplexVector v_2t = p * v0;
            v_2t /= trace_of(v_2t);
            last_change = max_abs(v_2t - v_t);
            t *= 2.0;
            v_t = v_2t;
            if (t / 2.0 >= window && last_change < tol) break;
            if (t > max_time) {
                const ComplexMatrix r = detail::normalise_density(detail::unvec(v_t, d));
                throw SteadyStateNotConverged("steady_state: no convergence before max_time",
                                              max_abs(lindblad_rhs(model, r)));
            }
        }
        res.time = t;
        res.state = QuantumState::density(detail::normalise_density(detail::unvec(v_t, d)), model.layout);
    }
    res.residual = max_abs(lindblad_rhs(model, res.state.data));
    if (!(res.residual < 10.0 * tol))
        throw SteadyStateNotConverged("steady_state: residual exceeds 10 * tol", res.residual);
    return res;
}

inline QuantumState steady_state(const ModelInstance& model, double tol, const SteadyStateOptions& opts = {}) {
    return solve_steady_state(model, tol, opts).state;
}

}  // namespace jumpfeed
