#pragma once

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "refract/errors.hpp"
#include "refract/model.hpp"

namespace refract {

enum class KillingMode { sampled, path_integral };

struct SimConfig {
    std::int64_t paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240601;
    int threads = 1;
    KillingMode killing = KillingMode::sampled;
    double tail_tolerance = 1e-6;  // path-integral truncation: e^{-q T*} <= tolerance
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t paths = 0;
};

inline bool within_se(double analytic, const McEstimate& e, double k = 3.0) {
    return std::abs(analytic - e.value) <= k * e.std_error;
}

namespace mc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream for path `index` under `seed`.
inline Rng path_rng(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t s = splitmix64(splitmix64(seed) ^ splitmix64(index + 0x5851F42D4C957F2DULL));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

struct Draws {
    explicit Draws(Rng r) : rng(std::move(r)) {}
    Rng rng;
    boost::random::normal_distribution<double> normal{0.0, 1.0};
    boost::random::exponential_distribution<double> expo{1.0};
    boost::random::uniform_01<double> unif{};

    double gauss() { return normal(rng); }
    double exponential(double rate) { return expo(rng) / rate; }
    /// Uniform on (0, 1].
    double uniform_open0() { return 1.0 - unif(rng); }
};

/// Compound Poisson sampler for both jump sides.
class JumpSampler {
public:
    explicit JumpSampler(const ModelSpec& spec) {
        if (!spec.jumps_plus.is_real_nonnegative() || !spec.jumps_minus.is_real_nonnegative())
            throw Error("mc_unsupported", "MC unsupported for signed/complex mixtures");
        add_side(spec.jumps_plus, spec.lambda_plus, +1.0);
        add_side(spec.jumps_minus, spec.lambda_minus, -1.0);
        double acc = 0.0;
        for (auto& c : choices_) {
            acc += c.intensity;
            c.cumulative = acc;
        }
        total_ = acc;
    }

    double total_intensity() const noexcept { return total_; }

    double next_gap(Draws& d) const {
        return total_ > 0.0 ? d.exponential(total_) : std::numeric_limits<double>::infinity();
    }

    /// Signed jump size.
    double sample(Draws& d) const {
        const double u = d.unif(d.rng) * total_;
        std::size_t i = 0;
        while (i + 1 < choices_.size() && u >= choices_[i].cumulative) ++i;
        const auto& c = choices_[i];
        double size = 0.0;
        for (int k = 0; k < c.order; ++k) size += d.exponential(c.rate);
        return c.sign * size;
    }

    /// Mean signed jump per unit time.
    double mean_rate() const noexcept {
        double m = 0.0;
        for (const auto& c : choices_) m += c.intensity * c.sign * c.order / c.rate;
        return m;
    }

private:
    struct Choice {
        double intensity;
        double rate;
        int order;
        double sign;
        double cumulative = 0.0;
    };

    void add_side(const JumpMixture& mix, double lambda, double sign) {
        if (mix.empty() || lambda == 0.0) return;
        for (const auto& t : mix.terms)
            for (int j = 1; j <= t.order; ++j) {
                const double w = t.weights[static_cast<std::size_t>(j - 1)].real();
                if (w > 0.0) choices_.push_back({lambda * w, t.rate.real(), j, sign});
            }
    }

    std::vector<Choice> choices_;
    double total_ = 0.0;
};

/// Per-value running sums for one chunk of paths.
struct Accumulator {
    std::vector<double> sum, sumsq;
    explicit Accumulator(std::size_t k = 0) : sum(k, 0.0), sumsq(k, 0.0) {}
    void add(std::span<const double> v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
        }
    }
};

constexpr std::int64_t chunk_size = 1024;

/// Runs `fn(draws, out)` for every path and reduces in fixed chunk order, so
/// the result is independent of the thread count.
inline std::vector<McEstimate> run_paths(const SimConfig& cfg, std::size_t k,
                                         const std::function<void(Draws&, std::span<double>)>& fn) {
    if (cfg.paths < 2) throw Error("invalid_config", "need at least two paths");
    if (!(cfg.dt > 0.0)) throw Error("invalid_config", "dt must be positive");
    const std::int64_t chunks = (cfg.paths + chunk_size - 1) / chunk_size;
    std::vector<Accumulator> partial(static_cast<std::size_t>(chunks), Accumulator(k));
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        std::vector<double> out(k);
        for (std::int64_t c = next++; c < chunks; c = next++) {
            auto& acc = partial[static_cast<std::size_t>(c)];
            const std::int64_t end = std::min(cfg.paths, (c + 1) * chunk_size);
            for (std::int64_t p = c * chunk_size; p < end; ++p) {
                Draws d(path_rng(cfg.seed, static_cast<std::uint64_t>(p)));
                std::fill(out.begin(), out.end(), 0.0);
                fn(d, out);
                acc.add(out);
            }
        }
    };
    const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(chunks)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    Accumulator total(k);
    for (const auto& a : partial)
        for (std::size_t i = 0; i < k; ++i) {
            total.sum[i] += a.sum[i];
            total.sumsq[i] += a.sumsq[i];
        }
    std::vector<McEstimate> est(k);
    const double n = static_cast<double>(cfg.paths);
    for (std::size_t i = 0; i < k; ++i) {
        const double mean = total.sum[i] / n;
        const double var = std::max(0.0, (total.sumsq[i] / n - mean * mean) * n / (n - 1.0));
        est[i] = {mean, std::sqrt(var / n), cfg.paths};
    }
    return est;
}

/// Diffusive motion of the refracted process between jumps. Away from every
/// watched level the step is lengthened while a crossing within the step stays
/// below e^{-32} in probability (the Gaussian step is then exact); near a level
/// plain Euler steps of size dt are used.
class RefractedStepper {
public:
    RefractedStepper(const ModelSpec& spec, double dt, std::vector<double> levels)
        : mu_(spec.mu), sigma_(spec.sigma), delta_(spec.delta), b_(spec.b), dt_(dt), levels_(std::move(levels)) {
        levels_.push_back(b_);
    }

    /// Advances u over `duration`, calling obs(t0, u0, u1, h) per step.
    template <class Observer>
    double advance(double u, double t0, double duration, Draws& d, Observer&& obs) const {
        double remaining = duration;
        double t = t0;
        while (remaining > 0.0) {
            const double drift = u > b_ ? mu_ - delta_ : mu_;
            double dist = std::numeric_limits<double>::infinity();
            for (double l : levels_) dist = std::min(dist, std::abs(u - l));
            double h = dt_;
            const double far = far_step(dist, std::abs(drift));
            if (far > dt_) h = far;
            h = std::min(h, remaining);
            const double u1 = u + drift * h + sigma_ * std::sqrt(h) * d.gauss();
            obs(t, u, u1, h);
            u = u1;
            t += h;
            remaining -= h;
            if (remaining < 1e-15 * duration) break;
        }
        return u;
    }

private:
    double far_step(double dist, double drift) const {
        constexpr double z = 8.0;
        if (drift == 0.0) return std::pow(dist / (z * sigma_), 2);
        const double r = (-z * sigma_ + std::sqrt(z * z * sigma_ * sigma_ + 4.0 * drift * dist)) / (2.0 * drift);
        return r * r;
    }

    double mu_, sigma_, delta_, b_, dt_;
    std::vector<double> levels_;
};

/// Runs a refracted path from x over [0, horizon] with jumps; returns U_horizon.
template <class Observer>
double refracted_path(const ModelSpec& spec, const JumpSampler& jumps, const RefractedStepper& stepper, double x,
                      double horizon, Draws& d, Observer&& obs) {
    double t = 0.0, u = x;
    double next = jumps.next_gap(d);
    while (true) {
        const double seg_end = std::min(next, horizon);
        u = stepper.advance(u, t, seg_end - t, d, obs);
        t = seg_end;
        if (t >= horizon) break;
        u += jumps.sample(d);
        next = t + jumps.next_gap(d);
    }
    (void)spec;
    return u;
}

/// Fraction of a linear step from u0 to u1 spent below y.
inline double fraction_below(double u0, double u1, double y) {
    const bool a = u0 < y, b = u1 < y;
    if (a && b) return 1.0;
    if (!a && !b) return 0.0;
    const double f = (y - u0) / (u1 - u0);
    return a ? f : 1.0 - f;
}

/// Maximum (sign=+1) or minimum (sign=-1) of a Brownian bridge from u0 to u1
/// over time L with volatility sigma.
inline double bridge_extreme(double u0, double u1, double L, double sigma, double sign, Draws& d) {
    const double diff = u1 - u0;
    const double root = std::sqrt(diff * diff - 2.0 * sigma * sigma * L * std::log(d.uniform_open0()));
    return 0.5 * (u0 + u1 + sign * root);
}

}  // namespace mc

/// Results of a killed-path run for several levels at once.
struct KilledEstimates {
    std::vector<McEstimate> above;       // P_x(U_{e(q)} > y_i)
    std::vector<McEstimate> occupation;  // int e^{-qt} E_x[int_0^t 1{U_s < y_i} ds] dt
};

/// Estimates P_x(U_{e(q)} > y) and the occupation transform for each y.
inline KilledEstimates estimate_killed(const ModelSpec& spec, const SimConfig& cfg, double q, double x,
                                       const std::vector<double>& ys) {
    if (!(q > 0.0)) throw Error("domain", "q must be positive");
    const mc::JumpSampler jumps(spec);
    const mc::RefractedStepper stepper(spec, cfg.dt, ys);
    const std::size_t n = ys.size();
    const bool integral = cfg.killing == KillingMode::path_integral;
    const double horizon_fixed = std::log(1.0 / cfg.tail_tolerance) / q;
    auto est = mc::run_paths(cfg, 2 * n, [&](mc::Draws& d, std::span<double> out) {
        const double horizon = integral ? horizon_fixed : d.exponential(q);
        auto obs = [&](double t0, double u0, double u1, double h) {
            const double w = integral ? std::exp(-q * t0) * -std::expm1(-q * h) / q : h;
            for (std::size_t i = 0; i < n; ++i) {
                const double below = mc::fraction_below(u0, u1, ys[i]);
                out[n + i] += w * below;
                if (integral) out[i] += q * w * (1.0 - below);
            }
        };
        const double u = mc::refracted_path(spec, jumps, stepper, x, horizon, d, obs);
        for (std::size_t i = 0; i < n; ++i) {
            if (!integral) out[i] = u > ys[i] ? 1.0 : 0.0;
            out[n + i] /= q;
        }
    });
    KilledEstimates r;
    r.above.assign(est.begin(), est.begin() + static_cast<std::ptrdiff_t>(n));
    r.occupation.assign(est.begin() + static_cast<std::ptrdiff_t>(n), est.end());
    if (integral) {
        // The truncated tail contributes at most e^{-q T*} = tail_tolerance.
        for (auto& e : r.above) e.std_error = std::hypot(e.std_error, cfg.tail_tolerance);
    }
    return r;
}

enum class TailMode { above, below };

inline McEstimate estimate_killed_probability(const ModelSpec& spec, const SimConfig& cfg, double q, double x,
                                              double y, TailMode mode) {
    auto e = estimate_killed(spec, cfg, q, x, {y}).above.front();
    if (mode == TailMode::below) e.value = 1.0 - e.value;
    return e;
}

/// P_x(U_t <= y_i) at a fixed time.
inline std::vector<McEstimate> estimate_fixed_time_cdf(const ModelSpec& spec, const SimConfig& cfg, double t,
                                                       double x, const std::vector<double>& ys) {
    if (!(t > 0.0)) throw Error("domain", "t must be positive");
    const mc::JumpSampler jumps(spec);
    const mc::RefractedStepper stepper(spec, cfg.dt, ys);
    return mc::run_paths(cfg, ys.size(), [&](mc::Draws& d, std::span<double> out) {
        const double u = mc::refracted_path(spec, jumps, stepper, x, t, d, [](double, double, double, double) {});
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = u <= ys[i] ? 1.0 : 0.0;
    });
}

/// Fine (dt/2) minus coarse (dt) Euler estimate of P_x(U_{e(q)} > y) on
/// shared Brownian increments and jumps; plain fixed steps, no lengthening.
inline McEstimate estimate_step_bias(const ModelSpec& spec, const SimConfig& cfg, double q, double x, double y) {
    const mc::JumpSampler jumps(spec);
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        const double horizon = d.exponential(q);
        double t = 0.0, uc = x, uf = x;
        double next = jumps.next_gap(d);
        auto drift = [&](double u) { return u > spec.b ? spec.mu - spec.delta : spec.mu; };
        while (true) {
            const double seg_end = std::min(next, horizon);
            const double L = seg_end - t;
            const auto steps = static_cast<std::int64_t>(std::ceil(L / cfg.dt));
            const double h = steps > 0 ? L / static_cast<double>(steps) : 0.0;
            for (std::int64_t s = 0; s < steps; ++s) {
                const double z1 = d.gauss(), z2 = d.gauss();
                uf += drift(uf) * h / 2 + spec.sigma * std::sqrt(h / 2) * z1;
                uf += drift(uf) * h / 2 + spec.sigma * std::sqrt(h / 2) * z2;
                uc += drift(uc) * h + spec.sigma * std::sqrt(h) * (z1 + z2) / std::numbers::sqrt2;
            }
            t = seg_end;
            if (t >= horizon) break;
            const double j = jumps.sample(d);
            uc += j;
            uf += j;
            next = t + jumps.next_gap(d);
        }
        out[0] = (uf > y ? 1.0 : 0.0) - (uc > y ? 1.0 : 0.0);
    }).front();
}

/// P_x(U_t > y) - P_x(Y_t > y) on shared noise, Y the fully refracted process.
inline McEstimate estimate_refraction_gap(const ModelSpec& spec, const SimConfig& cfg, double t, double x, double y) {
    const mc::JumpSampler jumps(spec);
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        double s = 0.0, u = x, yv = x;
        double next = jumps.next_gap(d);
        while (true) {
            const double seg_end = std::min(next, t);
            const double L = seg_end - s;
            const auto steps = static_cast<std::int64_t>(std::ceil(L / cfg.dt));
            const double h = steps > 0 ? L / static_cast<double>(steps) : 0.0;
            for (std::int64_t k = 0; k < steps; ++k) {
                const double dw = spec.sigma * std::sqrt(h) * d.gauss();
                u += (u > spec.b ? spec.mu - spec.delta : spec.mu) * h + dw;
                yv += (spec.mu - spec.delta) * h + dw;
            }
            s = seg_end;
            if (s >= t) break;
            const double j = jumps.sample(d);
            u += j;
            yv += j;
            next = s + jumps.next_gap(d);
        }
        out[0] = (u > y ? 1.0 : 0.0) - (yv > y ? 1.0 : 0.0);
    }).front();
}

enum class ExtremeKind { sup_X, sup_Y, inf_X, inf_Y };

struct ExtremeEstimates {
    std::vector<McEstimate> transform;  // E[e^{-s sup}] or E[e^{s inf}] per s
    std::vector<McEstimate> density;    // Gaussian-kernel density per v
};

namespace mc {

/// Exact draw of sup or inf of X or Y over [0, e(q)] started at 0.
inline double sample_extreme(const ModelSpec& spec, const JumpSampler& jumps, double q, ExtremeKind kind, Draws& d) {
    const bool refracted = kind == ExtremeKind::sup_Y || kind == ExtremeKind::inf_Y;
    const double sign = kind == ExtremeKind::sup_X || kind == ExtremeKind::sup_Y ? 1.0 : -1.0;
    const double drift = refracted ? spec.mu - spec.delta : spec.mu;
    const double horizon = d.exponential(q);
    double t = 0.0, u = 0.0, ext = 0.0;
    double next = jumps.next_gap(d);
    while (true) {
        const double seg_end = std::min(next, horizon);
        const double L = seg_end - t;
        const double u1 = u + drift * L + spec.sigma * std::sqrt(L) * d.gauss();
        const double m = bridge_extreme(u, u1, L, spec.sigma, sign, d);
        ext = sign > 0 ? std::max(ext, m) : std::min(ext, m);
        u = u1;
        t = seg_end;
        if (t >= horizon) break;
        u += jumps.sample(d);
        ext = sign > 0 ? std::max(ext, u) : std::min(ext, u);
        next = t + jumps.next_gap(d);
    }
    return ext;
}

}  // namespace mc

inline ExtremeEstimates estimate_extremes(const ModelSpec& spec, const SimConfig& cfg, double q, ExtremeKind kind,
                                          const std::vector<double>& s_values, const std::vector<double>& v_values = {},
                                          double bandwidth = 0.02) {
    const mc::JumpSampler jumps(spec);
    const std::size_t ns = s_values.size(), nv = v_values.size();
    const bool sup = kind == ExtremeKind::sup_X || kind == ExtremeKind::sup_Y;
    auto est = mc::run_paths(cfg, ns + nv, [&](mc::Draws& d, std::span<double> out) {
        const double m = mc::sample_extreme(spec, jumps, q, kind, d);
        for (std::size_t i = 0; i < ns; ++i) out[i] = std::exp((sup ? -1.0 : 1.0) * s_values[i] * m);
        for (std::size_t i = 0; i < nv; ++i) {
            const double z = (m - v_values[i]) / bandwidth;
            out[ns + i] = std::exp(-0.5 * z * z) / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
        }
    });
    ExtremeEstimates r;
    r.transform.assign(est.begin(), est.begin() + static_cast<std::ptrdiff_t>(ns));
    r.density.assign(est.begin() + static_cast<std::ptrdiff_t>(ns), est.end());
    return r;
}

/// P(sup X_{e(q)} + inf Y_{e'(q)} <= z) with independent killing times.
inline McEstimate estimate_kq_cdf(const ModelSpec& spec, const SimConfig& cfg, double q, double z) {
    const mc::JumpSampler jumps(spec);
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        const double s = mc::sample_extreme(spec, jumps, q, ExtremeKind::sup_X, d);
        const double i = mc::sample_extreme(spec, jumps, q, ExtremeKind::inf_Y, d);
        out[0] = s + i <= z ? 1.0 : 0.0;
    }).front();
}

/// E[e^{-q tau - s * overshoot}] for X passing above level >= 0 (up = true) or
/// Y passing below level <= 0 (up = false), both started at 0; exact simulation.
inline std::vector<McEstimate> estimate_first_passage(const ModelSpec& spec, const SimConfig& cfg, double q,
                                                      double level, bool up, const std::vector<double>& s_values) {
    const mc::JumpSampler jumps(spec);
    const double sign = up ? 1.0 : -1.0;
    const double drift = up ? spec.mu : spec.mu - spec.delta;
    if (sign * level < 0.0) throw Error("domain", "first-passage level on the wrong side of the start");
    return mc::run_paths(cfg, s_values.size(), [&](mc::Draws& d, std::span<double> out) {
        const double horizon = d.exponential(q);
        double t = 0.0, u = 0.0;
        double next = jumps.next_gap(d);
        double overshoot = -1.0;
        if (sign * (u - level) > 0.0) overshoot = 0.0;
        while (overshoot < 0.0) {
            const double seg_end = std::min(next, horizon);
            const double L = seg_end - t;
            const double u1 = u + drift * L + spec.sigma * std::sqrt(L) * d.gauss();
            const double m = mc::bridge_extreme(u, u1, L, spec.sigma, sign, d);
            if (sign * (m - level) > 0.0) {
                overshoot = 0.0;
                break;
            }
            u = u1;
            t = seg_end;
            if (t >= horizon) break;
            u += jumps.sample(d);
            if (sign * (u - level) > 0.0) overshoot = sign * (u - level);
            next = t + jumps.next_gap(d);
        }
        if (overshoot >= 0.0)
            for (std::size_t i = 0; i < s_values.size(); ++i) out[i] = std::exp(-s_values[i] * overshoot);
    });
}

/// E[e^{u X_1}] from exact draws of X_1.
inline McEstimate estimate_exponential_moment(const ModelSpec& spec, const SimConfig& cfg, double u) {
    const mc::JumpSampler jumps(spec);
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        double x = spec.mu + spec.sigma * d.gauss();
        for (double t = jumps.next_gap(d); t < 1.0; t += jumps.next_gap(d)) x += jumps.sample(d);
        out[0] = std::exp(u * x);
    }).front();
}

/// Mean of U_t (refraction included) for moment checks.
inline McEstimate estimate_terminal_mean(const ModelSpec& spec, const SimConfig& cfg, double t, double x) {
    const mc::JumpSampler jumps(spec);
    const mc::RefractedStepper stepper(spec, cfg.dt, {});
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        out[0] = mc::refracted_path(spec, jumps, stepper, x, t, d, [](double, double, double, double) {});
    }).front();
}

/// Generic payoff functional of U at a (possibly random) horizon:
/// E[discount(T) * g(U_T)] with T drawn by `horizon`.
inline McEstimate estimate_horizon_functional(const ModelSpec& spec, const SimConfig& cfg, double x,
                                              const std::function<double(mc::Draws&)>& horizon,
                                              const std::function<double(double, double)>& value) {
    const mc::JumpSampler jumps(spec);
    const mc::RefractedStepper stepper(spec, cfg.dt, {});
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        const double T = horizon(d);
        const double u = mc::refracted_path(spec, jumps, stepper, x, T, d, [](double, double, double, double) {});
        out[0] = value(T, u);
    }).front();
}

/// As estimate_horizon_functional, with value(T, U_T, time spent below `level` on [0, T]).
inline McEstimate estimate_horizon_occupation(const ModelSpec& spec, const SimConfig& cfg, double x, double level,
                                              const std::function<double(mc::Draws&)>& horizon,
                                              const std::function<double(double, double, double)>& value) {
    const mc::JumpSampler jumps(spec);
    const mc::RefractedStepper stepper(spec, cfg.dt, {level});
    return mc::run_paths(cfg, 1, [&](mc::Draws& d, std::span<double> out) {
        const double T = horizon(d);
        double below = 0.0;
        const double u = mc::refracted_path(spec, jumps, stepper, x, T, d, [&](double, double u0, double u1, double h) {
            below += h * mc::fraction_below(u0, u1, level);
        });
        out[0] = value(T, u, below);
    }).front();
}

}  // namespace refract
