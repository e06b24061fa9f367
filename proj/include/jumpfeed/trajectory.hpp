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

// trajectory.hpp: quantum-jump unravelings.
//
// Every step draws exactly one uniform r. With jump probabilities
// p_k = dt * <c_k† c_k>, r < sum p_k selects channel k by cumulative sum;
// otherwise the state follows the no-click evolution and is renormalised.
// Pure states use the exact no-click propagator exp(-i H_eff dt); density
// trajectories (some channels averaged) take one RK4 step of
//   -i H_eff rho + i rho H_eff† + sum_{unconditioned} c rho c†.
//
// Jitter redraws the two cavity couplings g_i = g_max cos(2π x_i),
// x_i ~ N(center, trap_sigma), every resample_dt, from the trajectory's own
// stream (one Box-Muller pair per redraw).
//
// Seeds: trajectory k of an ensemble with master seed s uses
// stream_seed(s, k) = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019)) to
// seed std::mt19937_64; uniforms are the top 53 bits. Both are fully
// specified, so records are identical across platforms and thread counts.

#pragma once

#include "jumpfeed/concurrency.hpp"
#include "jumpfeed/lindblad.hpp"
#include "jumpfeed/model.hpp"
#include "jumpfeed/observables.hpp"
#include "jumpfeed/operator_algebra.hpp"
#include "jumpfeed/quantum_state.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jumpfeed {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::pair<double, double> normal_pair() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

private:
    std::mt19937_64 engine_;
};

struct JitterConfig {
    double trap_sigma = 0.0;   // units of λ
    double resample_dt = 0.0;  // 0 redraws every step
    std::optional<std::pair<double, double>> frozen;  // fixed (g1, g2) instead of draws
    double center = 0.0;       // trap centre, units of λ

    void validate() const {
        if (!(trap_sigma >= 0.0)) throw std::invalid_argument("jitter: trap_sigma must be non-negative");
        if (resample_dt < 0.0) throw std::invalid_argument("jitter: resample_dt must be positive");
    }
};

struct TrajectoryConfig {
    double t_final = 0.0;
    double dt = 0.0;
    double record_dt = 0.0;  // 0 records every step
    std::uint64_t seed = 0;
    std::optional<JitterConfig> jitter;
    bool store_states = false;  // keep the full state at each grid point
};

struct JumpEvent {
    double t = 0.0;
    std::string label;
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> concurrence;
    std::vector<SectorPopulations> populations;
    std::vector<double> discarded_weight;
    std::vector<JumpEvent> jumps;
    std::uint64_t seed = 0;
    double t_final = 0.0;
    QuantumState final_state;
    std::vector<QuantumState> states;  // filled when store_states

    std::vector<double> click_times(std::string_view label_prefix = "cavity") const {
        std::vector<double> out;
        for (const auto& j : jumps)
            if (j.label.starts_with(label_prefix)) out.push_back(j.t);
        return out;
    }
    std::size_t count(std::string_view label_prefix) const {
        std::size_t n = 0;
        for (const auto& j : jumps)
            if (j.label.starts_with(label_prefix)) ++n;
        return n;
    }
};

inline PeriodSegmentation segment_periods(const TrajectoryRecord& record, double threshold_gap) {
    return segment_periods(record.click_times(labels::cavity_detected), record.t_final, threshold_gap);
}

// Uses default_threshold_gap on the record's detected cavity clicks.
inline PeriodSegmentation segment_periods(const TrajectoryRecord& record) {
    const auto clicks = record.click_times(labels::cavity_detected);
    return segment_periods(clicks, record.t_final, default_threshold_gap(clicks, record.t_final));
}

namespace detail {

template <int Dim>
using Vec = Eigen::Matrix<cd, Dim, 1>;

inline double trace_product(const auto& a, const auto& b) {
    // Re tr(a b)
    return (a.cwiseProduct(b.transpose())).sum().real();
}

// Owns the per-run coupling redraw schedule.
struct CouplingSchedule {
    bool active = false;
    bool redraw = false;
    std::size_t every = 1;
    JitterConfig cfg;
    double g_max = 1.0;

    CouplingSchedule(const ModelInstance& m, const std::optional<JitterConfig>& jitter, double dt) {
        if (!jitter) return;
        jitter->validate();
        bool has_parts = false;
        for (const auto& ch : m.channels) has_parts = has_parts || ch.has_per_atom_couplings();
        if (!has_parts) throw std::invalid_argument("jitter requires a reduced-tier model with per-atom cavity couplings");
        active = true;
        cfg = *jitter;
        g_max = m.spec.g_max;
        redraw = !cfg.frozen.has_value();
        const double rdt = cfg.resample_dt > 0.0 ? cfg.resample_dt : dt;
        every = static_cast<std::size_t>(std::max<long long>(1, std::llround(rdt / dt)));
    }

    std::pair<double, double> draw(Rng& rng) const {
        if (cfg.frozen) return *cfg.frozen;
        const auto [z1, z2] = rng.normal_pair();
        const double x1 = cfg.center + cfg.trap_sigma * z1;
        const double x2 = cfg.center + cfg.trap_sigma * z2;
        return {g_max * std::cos(2.0 * std::numbers::pi * x1), g_max * std::cos(2.0 * std::numbers::pi * x2)};
    }
};

// Upper bound on sum_k p_k for one step; per-atom channels use |g_i| <= g_max.
inline double max_jump_probability(const ModelInstance& m, double dt, const std::vector<bool>& jumping, bool jitter) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.channels.size(); ++k) {
        if (!jumping[k]) continue;
        const auto& ch = m.channels[k];
        if (jitter && ch.has_per_atom_couplings()) {
            double n = 0.0;
            for (const auto& p : ch.per_atom) n += m.spec.g_max * std::sqrt(spectral_norm_sq(p));
            s += n * n;
        } else {
            s += spectral_norm_sq(ch.op);
        }
    }
    return dt * s;
}

inline void check_step(const ModelInstance& m, const TrajectoryConfig& cfg, const std::vector<bool>& jumping) {
    step_count(cfg.t_final, cfg.dt);
    const double p = max_jump_probability(m, cfg.dt, jumping, cfg.jitter.has_value());
    if (!(p < 0.1))
        throw StepTooLarge("trajectory: summed jump probability per step can reach " + std::to_string(p) +
                           " (must stay below 0.1); reduce dt");
}

inline std::size_t record_stride(const TrajectoryConfig& cfg) {
    if (cfg.record_dt <= 0.0) return 1;
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.record_dt / cfg.dt)));
}

template <int Dim>
class PureUnraveling {
public:
    PureUnraveling(const ModelInstance& m, double dt, bool taylor)
        : model_(m), dt_(dt), taylor_(taylor), h_(m.hamiltonian) {
        for (const auto& ch : m.channels) ops_.emplace_back(ch.op);
        for (std::size_t k = 0; k < ops_.size(); ++k)
            if (max_abs(ops_[k]) > 0.0 || m.channels[k].has_per_atom_couplings()) active_.push_back(k);
        rebuild();
    }

    void set_couplings(double g1, double g2) {
        for (std::size_t k = 0; k < ops_.size(); ++k)
            if (model_.channels[k].has_per_atom_couplings()) ops_[k] = model_.channels[k].operator_for(g1, g2);
        rebuild();
    }

    // Returns the channel index of a click, or -1.
    int step(Vec<Dim>& psi, double r) {
        tmp_.noalias() = total_ * psi;
        const double ptot = dt_ * psi.dot(tmp_).real();
        if (r < ptot) {
            double acc = 0.0;
            int last = -1;
            for (std::size_t k : active_) {
                phi_.noalias() = ops_[k] * psi;
                const double pk = dt_ * phi_.squaredNorm();
                if (pk <= 0.0) continue;
                last = static_cast<int>(k);
                acc += pk;
                if (r < acc) break;
            }
            if (last >= 0) {
                psi = ops_[static_cast<std::size_t>(last)] * psi;
                psi.normalize();
                return last;
            }
        }
        if (taylor_) {
            // exp(-i H_eff dt) psi by its Taylor series, to round-off.
            phi_ = psi;
            tmp_ = psi;
            for (int n = 1; n < 40; ++n) {
                phi_ = (minus_i_dt_heff_ * phi_) / static_cast<double>(n);
                tmp_ += phi_;
                if (phi_.squaredNorm() < 1e-34 * tmp_.squaredNorm()) break;
            }
            psi = tmp_;
        } else {
            tmp_.noalias() = propagator_ * psi;
            psi = tmp_;
        }
        psi.normalize();
        return -1;
    }

private:
    void rebuild() {
        const Eigen::Index d = h_.rows();
        total_ = Mat<Dim>::Zero(d, d);
        for (const auto& c : ops_) total_.noalias() += c.adjoint() * c;
        const Mat<Dim> h_eff = h_ - 0.5 * kI * total_;
        minus_i_dt_heff_ = (-kI * dt_) * h_eff;
        if (!taylor_) propagator_ = expm(ComplexMatrix(minus_i_dt_heff_));
        tmp_.resize(d);
        phi_.resize(d);
    }

    const ModelInstance& model_;
    double dt_;
    bool taylor_;
    Mat<Dim> h_;
    std::vector<Mat<Dim>> ops_;
    std::vector<std::size_t> active_;
    Mat<Dim> total_;
    Mat<Dim> minus_i_dt_heff_;
    Mat<Dim> propagator_;
    Vec<Dim> tmp_;
    Vec<Dim> phi_;
};

template <int Dim>
class DensityUnraveling {
public:
    DensityUnraveling(const ModelInstance& m, double dt, std::vector<bool> conditioned)
        : model_(m), dt_(dt), conditioned_(std::move(conditioned)), rk_(m.dim()) {
        for (const auto& ch : m.channels) ops_.push_back(ch.op);
        rebuild();
    }

    void set_couplings(double g1, double g2) {
        for (std::size_t k = 0; k < ops_.size(); ++k)
            if (model_.channels[k].has_per_atom_couplings()) ops_[k] = model_.channels[k].operator_for(g1, g2);
        rebuild();
    }

    int step(Mat<Dim>& rho, double r) {
        double ptot = 0.0;
        for (std::size_t j = 0; j < cond_idx_.size(); ++j) ptot += trace_product(cc_[j], rho);
        ptot *= dt_;
        if (r < ptot) {
            double acc = 0.0;
            int last = -1;
            for (std::size_t j = 0; j < cond_idx_.size(); ++j) {
                const double pk = dt_ * trace_product(cc_[j], rho);
                if (pk <= 0.0) continue;
                last = static_cast<int>(j);
                acc += pk;
                if (r < acc) break;
            }
            if (last >= 0) {
                const Mat<Dim>& c = cond_ops_[static_cast<std::size_t>(last)];
                Mat<Dim> next = c * rho * c.adjoint();
                rho = next / next.trace().real();
                return static_cast<int>(cond_idx_[static_cast<std::size_t>(last)]);
            }
        }
        rk_.step(kernel_, rho, dt_);
        rho /= rho.trace().real();
        return -1;
    }

private:
    void rebuild() {
        std::vector<bool> drift(conditioned_.size());
        for (std::size_t k = 0; k < drift.size(); ++k) drift[k] = !conditioned_[k];
        kernel_.rebuild(model_.hamiltonian, ops_, drift);
        cond_idx_.clear();
        cond_ops_.clear();
        cc_.clear();
        for (std::size_t k = 0; k < ops_.size(); ++k) {
            if (!conditioned_[k]) continue;
            cond_idx_.push_back(k);
            cond_ops_.emplace_back(ops_[k]);
            cc_.emplace_back(ops_[k].adjoint() * ops_[k]);
        }
    }

    const ModelInstance& model_;
    double dt_;
    std::vector<bool> conditioned_;
    std::vector<ComplexMatrix> ops_;
    DriftKernel<Dim> kernel_;
    Rk4Stepper<Dim> rk_;
    std::vector<std::size_t> cond_idx_;
    std::vector<Mat<Dim>> cond_ops_;
    std::vector<Mat<Dim>> cc_;
};

inline void record_sample(TrajectoryRecord& rec, const QuantumState& s, double t, bool store) {
    const Sample smp = sample_state(s);
    rec.times.push_back(t);
    rec.concurrence.push_back(smp.concurrence);
    rec.populations.push_back(smp.populations);
    rec.discarded_weight.push_back(smp.discarded_weight);
    if (store) rec.states.push_back(s);
}

template <int Dim>
void record_pure(TrajectoryRecord& rec, const Vec<Dim>& psi, const Layout& layout, double t, bool store) {
    if constexpr (Dim == 4) {
        if (!store) {
            rec.times.push_back(t);
            rec.concurrence.push_back(concurrence_pure(psi));
            rec.populations.push_back(sector_populations_pure(psi));
            rec.discarded_weight.push_back(0.0);
            return;
        }
    }
    record_sample(rec, QuantumState::pure(ComplexVector(psi), layout), t, store);
}

}  // namespace detail

// Density-matrix trajectory: channels named in conditioned_labels click
// stochastically, the rest enter the deterministic drift.
inline TrajectoryRecord run_partial(const ModelInstance& model, const QuantumState& rho0,
                                    const std::set<std::string>& conditioned_labels, const TrajectoryConfig& config) {
    if (rho0.dim() != model.dim() || rho0.layout != model.layout)
        throw std::invalid_argument("run_partial: state dimension does not match the model");
    std::vector<bool> cond(model.channels.size(), false);
    for (const auto& lab : conditioned_labels) {
        bool found = false;
        for (std::size_t k = 0; k < model.channels.size(); ++k)
            if (model.channels[k].label == lab) cond[k] = found = true;
        if (!found) throw std::invalid_argument("run_partial: unknown channel label '" + lab + "'");
    }
    detail::check_step(model, config, cond);
    const std::size_t steps = step_count(config.t_final, config.dt);
    const std::size_t stride = detail::record_stride(config);
    const detail::CouplingSchedule schedule(model, config.jitter, config.dt);

    return dispatch_dim(model.dim(), [&](auto tag) {
        constexpr int Dim = decltype(tag)::value;
        Rng rng(config.seed);
        detail::DensityUnraveling<Dim> engine(model, config.dt, cond);
        detail::Mat<Dim> rho = rho0.to_density();

        TrajectoryRecord rec;
        rec.seed = config.seed;
        rec.t_final = static_cast<double>(steps) * config.dt;
        auto snapshot = [&] { return QuantumState::density(ComplexMatrix(rho), model.layout); };
        detail::record_sample(rec, snapshot(), 0.0, config.store_states);
        if (schedule.active && !schedule.redraw) {
            const auto [g1, g2] = schedule.draw(rng);
            engine.set_couplings(g1, g2);
        }
        for (std::size_t step = 1; step <= steps; ++step) {
            if (schedule.redraw && (step - 1) % schedule.every == 0) {
                const auto [g1, g2] = schedule.draw(rng);
                engine.set_couplings(g1, g2);
            }
            const int k = engine.step(rho, rng.uniform());
            const double t = static_cast<double>(step) * config.dt;
            if (k >= 0) rec.jumps.push_back({t, model.channels[static_cast<std::size_t>(k)].label});
            if (step % stride == 0) detail::record_sample(rec, snapshot(), t, config.store_states);
        }
        rec.final_state = snapshot();
        return rec;
    });
}

// Pure-state unraveling of every channel. Falls back to run_partial when the
// initial state is a density matrix or some channel is flagged unconditioned.
inline TrajectoryRecord run_trajectory(const ModelInstance& model, const QuantumState& psi0,
                                       const TrajectoryConfig& config) {
    if (psi0.dim() != model.dim() || psi0.layout != model.layout)
        throw std::invalid_argument("run_trajectory: state dimension does not match the model");
    bool all_conditioned = true;
    std::set<std::string> cond_labels;
    for (const auto& ch : model.channels) {
        all_conditioned = all_conditioned && ch.conditioned;
        if (ch.conditioned) cond_labels.insert(ch.label);
    }
    if (!psi0.is_pure() || !all_conditioned) return run_partial(model, psi0, cond_labels, config);

    detail::check_step(model, config, std::vector<bool>(model.channels.size(), true));
    const std::size_t steps = step_count(config.t_final, config.dt);
    const std::size_t stride = detail::record_stride(config);
    const detail::CouplingSchedule schedule(model, config.jitter, config.dt);

    return dispatch_dim(model.dim(), [&](auto tag) {
        constexpr int Dim = decltype(tag)::value;
        Rng rng(config.seed);
        detail::PureUnraveling<Dim> engine(model, config.dt, schedule.redraw);
        detail::Vec<Dim> psi = psi0.vector();
        psi.normalize();

        TrajectoryRecord rec;
        rec.seed = config.seed;
        rec.t_final = static_cast<double>(steps) * config.dt;
        detail::record_pure<Dim>(rec, psi, model.layout, 0.0, config.store_states);
        if (schedule.active && !schedule.redraw) {
            const auto [g1, g2] = schedule.draw(rng);
            engine.set_couplings(g1, g2);
        }
        for (std::size_t step = 1; step <= steps; ++step) {
            if (schedule.redraw && (step - 1) % schedule.every == 0) {
                const auto [g1, g2] = schedule.draw(rng);
                engine.set_couplings(g1, g2);
            }
            const int k = engine.step(psi, rng.uniform());
            const double t = static_cast<double>(step) * config.dt;
            if (k >= 0) rec.jumps.push_back({t, model.channels[static_cast<std::size_t>(k)].label});
            if (step % stride == 0) detail::record_pure<Dim>(rec, psi, model.layout, t, config.store_states);
        }
        rec.final_state = QuantumState::pure(ComplexVector(psi), model.layout);
        return rec;
    });
}

// Detector efficiency eta: the detected share of the cavity channel keeps the
// feedback and is conditioned, the undetected share is averaged without
// feedback. Other channels follow conditioned_labels.
inline TrajectoryRecord run_inefficient(const ModelInstance& model, double eta, const QuantumState& rho0,
                                        std::set<std::string> conditioned_labels, const TrajectoryConfig& config) {
    const ModelInstance split = with_detector_efficiency(model, eta);
    std::set<std::string> labels;
    for (const auto& lab : conditioned_labels)
        if (!lab.starts_with(labels::cavity_undetected) && split.find(lab)) labels.insert(lab);
    for (const auto& ch : split.channels)
        if (ch.label.starts_with(labels::cavity_detected)) labels.insert(ch.label);
    return run_partial(split, rho0, labels, config);
}

// Runs n independent trajectories; trajectory k gets stream_seed(master, k).
// Results are ordered by index regardless of scheduling.
template <class Runner>
std::vector<TrajectoryRecord> run_ensemble(std::size_t n, std::uint64_t master_seed, unsigned threads, Runner&& runner) {
    std::vector<TrajectoryRecord> out(n);
    parallel_for(n, threads, [&](std::size_t k) { out[k] = runner(k, stream_seed(master_seed, k)); });
    return out;
}

inline std::vector<TrajectoryRecord> run_ensemble(const ModelInstance& model, const QuantumState& psi0,
                                                  TrajectoryConfig config, std::size_t n, unsigned threads = 1) {
    return run_ensemble(n, config.seed, threads, [&](std::size_t, std::uint64_t seed) {
        TrajectoryConfig c = config;
        c.seed = seed;
        return run_trajectory(model, psi0, c);
    });
}

// ---------------------------------------------------------------------------

struct EnsembleAverage {
    std::vector<double> times;
    std::vector<ComplexMatrix> mean_states;       // full-dimension densities; empty without stored states
    std::vector<double> mean_concurrence;         // average of per-run concurrence
    std::vector<double> mean_concurrence_stderr;
    std::vector<double> min_concurrence;
    std::vector<double> max_concurrence;
    std::vector<double> concurrence_of_mean;      // concurrence of the averaged state
    std::vector<double> concurrence_of_mean_stderr;  // jackknife
    std::vector<SectorPopulations> mean_populations;
    std::vector<double> mean_discarded_weight;
    std::size_t runs = 0;
};

inline double concurrence_of_density(const ComplexMatrix& rho, const Layout& layout) {
    return concurrence(partial_trace_to_qubits(QuantumState::density(rho, layout)).rho);
}

inline EnsembleAverage ensemble_average(const std::vector<TrajectoryRecord>& records) {
    if (records.empty()) throw std::invalid_argument("ensemble_average: no records");
    const auto& grid = records.front().times;
    for (const auto& r : records)
        if (r.times != grid) throw std::invalid_argument("ensemble_average: records do not share a time grid");

    const std::size_t n = records.size();
    const std::size_t nt = grid.size();
    const bool with_states = std::all_of(records.begin(), records.end(),
                                         [nt](const TrajectoryRecord& r) { return r.states.size() == nt; });
    EnsembleAverage avg;
    avg.runs = n;
    avg.times = grid;
    for (std::size_t i = 0; i < nt; ++i) {
        double s = 0.0, s2 = 0.0, lo = 1.0, hi = 0.0, dw = 0.0;
        SectorPopulations p;
        for (const auto& r : records) {
            const double c = r.concurrence[i];
            s += c;
            s2 += c * c;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
            p.p00 += r.populations[i].p00;
            p.a01 += r.populations[i].a01;
            p.s01 += r.populations[i].s01;
            p.p11 += r.populations[i].p11;
            dw += r.discarded_weight[i];
        }
        const double dn = static_cast<double>(n);
        const double mean = s / dn;
        const double var = n > 1 ? std::max(0.0, (s2 - dn * mean * mean) / (dn - 1.0)) : 0.0;
        avg.mean_concurrence.push_back(mean);
        avg.mean_concurrence_stderr.push_back(std::sqrt(var / dn));
        avg.min_concurrence.push_back(lo);
        avg.max_concurrence.push_back(hi);
        avg.mean_populations.push_back({p.p00 / dn, p.a01 / dn, p.s01 / dn, p.p11 / dn});
        avg.mean_discarded_weight.push_back(dw / dn);

        if (!with_states) continue;
        const Layout& layout = records.front().states[i].layout;
        ComplexMatrix sum = ComplexMatrix::Zero(layout.dim(), layout.dim());
        std::vector<ComplexMatrix> each;
        each.reserve(n);
        for (const auto& r : records) {
            each.push_back(r.states[i].to_density());
            sum += each.back();
        }
        const ComplexMatrix mean_state = sum / dn;
        avg.mean_states.push_back(mean_state);
        avg.concurrence_of_mean.push_back(concurrence_of_density(mean_state, layout));
        if (n > 1) {
            std::vector<double> loo(n);
            double loo_mean = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                loo[k] = concurrence_of_density((sum - each[k]) / (dn - 1.0), layout);
                loo_mean += loo[k];
            }
            loo_mean /= dn;
            double acc = 0.0;
            for (double v : loo) acc += (v - loo_mean) * (v - loo_mean);
            avg.concurrence_of_mean_stderr.push_back(std::sqrt((dn - 1.0) / dn * acc));
        } else {
            avg.concurrence_of_mean_stderr.push_back(0.0);
        }
    }
    return avg;
}

// ---------------------------------------------------------------------------

struct FirstClickEstimate {
    std::size_t clicks = 0;
    std::size_t windows = 0;
    double exposure = 0.0;  // summed time at risk
    double mean_time() const {
        return clicks ? exposure / static_cast<double>(clicks) : std::numeric_limits<double>::infinity();
    }
    double rate() const { return exposure > 0.0 ? static_cast<double>(clicks) / exposure : 0.0; }
};

// Repeatedly restarts a pure trajectory from psi0 and follows it for at most
// `horizon`, recording the time to the first click whose label starts with
// label_prefix. Other jumps and the horizon censor the window. Windows are
// added until `min_clicks` clicks are seen (or max_windows is reached). The
// exposure/clicks ratio is the censored-exponential estimate of the mean
// waiting time out of psi0.
inline FirstClickEstimate sample_first_clicks(const ModelInstance& model, const QuantumState& psi0, double horizon,
                                              double dt, std::size_t min_clicks, std::uint64_t seed,
                                              std::string_view label_prefix = labels::cavity_detected,
                                              std::size_t max_windows = 100'000'000) {
    if (!psi0.is_pure()) throw std::invalid_argument("sample_first_clicks: pure initial state required");
    TrajectoryConfig cfg;
    cfg.t_final = horizon;
    cfg.dt = dt;
    detail::check_step(model, cfg, std::vector<bool>(model.channels.size(), true));
    const std::size_t steps = step_count(horizon, dt);

    return dispatch_dim(model.dim(), [&](auto tag) {
        constexpr int Dim = decltype(tag)::value;
        Rng rng(seed);
        detail::PureUnraveling<Dim> engine(model, dt, false);
        const detail::Vec<Dim> start = psi0.vector().normalized();
        FirstClickEstimate est;
        while (est.clicks < min_clicks && est.windows < max_windows) {
            ++est.windows;
            detail::Vec<Dim> psi = start;
            double at_risk = static_cast<double>(steps) * dt;
            for (std::size_t step = 1; step <= steps; ++step) {
                const int k = engine.step(psi, rng.uniform());
                if (k < 0) continue;
                at_risk = (static_cast<double>(step) - 0.5) * dt;
                if (model.channels[static_cast<std::size_t>(k)].label.starts_with(label_prefix)) ++est.clicks;
                break;
            }
            est.exposure += at_risk;
        }
        return est;
    });
}

}  // namespace jumpfeed
