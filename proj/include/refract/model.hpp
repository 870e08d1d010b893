#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "refract/errors.hpp"

namespace refract {

using cplx = std::complex<double>;

enum class JumpSide { positive, negative };

/// One Erlang block of a jump density: weights[j-1] multiplies the
/// order-j Erlang density with the given rate.
struct ErlangTerm {
    cplx rate;
    int order = 1;
    std::vector<cplx> weights;
};

/// Jump-size law with rational Laplace transform, stored as a mixture of
/// Erlang densities. Sizes are always positive; `side` says whether they are
/// added (up-jumps) or subtracted (down-jumps).
struct JumpMixture {
    JumpSide side = JumpSide::positive;
    std::vector<ErlangTerm> terms;

    bool empty() const noexcept { return terms.empty(); }

    /// Sum of Erlang orders, i.e. the number of poles counted with multiplicity.
    int total_order() const noexcept {
        int n = 0;
        for (const auto& t : terms) n += t.order;
        return n;
    }

    double min_real_rate() const noexcept {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& t : terms) m = std::min(m, t.rate.real());
        return m;
    }

    /// E[e^{uZ}] = sum_kj c_kj (eta_k / (eta_k - u))^j, analytically continued.
    cplx mgf(cplx u) const {
        cplx acc{0.0, 0.0};
        for (const auto& t : terms) {
            const cplx ratio = t.rate / (t.rate - u);
            cplx p = ratio;
            for (int j = 0; j < t.order; ++j) {
                acc += t.weights[static_cast<std::size_t>(j)] * p;
                p *= ratio;
            }
        }
        return acc;
    }

    /// d/du of mgf(u).
    cplx mgf_derivative(cplx u) const {
        cplx acc{0.0, 0.0};
        for (const auto& t : terms) {
            const cplx ratio = t.rate / (t.rate - u);
            const cplx inv = 1.0 / (t.rate - u);
            cplx p = ratio;
            for (int j = 1; j <= t.order; ++j) {
                acc += t.weights[static_cast<std::size_t>(j - 1)] * static_cast<double>(j) * p * inv;
                p *= ratio;
            }
        }
        return acc;
    }

    /// Density at z > 0 as a complex accumulation (imaginary part is round-off
    /// for conjugate-closed mixtures).
    cplx density(double z) const {
        cplx acc{0.0, 0.0};
        for (const auto& t : terms) {
            const cplx e = std::exp(-t.rate * z);
            cplx pw = t.rate;  // eta^j z^{j-1} / (j-1)!
            for (int j = 1; j <= t.order; ++j) {
                acc += t.weights[static_cast<std::size_t>(j - 1)] * pw * e;
                pw *= t.rate * z / static_cast<double>(j);
            }
        }
        return acc;
    }

    /// Sum of |density terms|, the scale used for round-off tolerances.
    double density_scale(double z) const {
        double acc = 0.0;
        for (const auto& t : terms) {
            const double e = std::exp(-t.rate.real() * z);
            double pw = std::abs(t.rate);
            for (int j = 1; j <= t.order; ++j) {
                acc += std::abs(t.weights[static_cast<std::size_t>(j - 1)]) * pw * e;
                pw *= std::abs(t.rate) * z / static_cast<double>(j);
            }
        }
        return acc;
    }

    /// True when every rate is real and every weight is real and nonnegative.
    bool is_real_nonnegative() const noexcept {
        for (const auto& t : terms) {
            if (t.rate.imag() != 0.0 || t.rate.real() <= 0.0) return false;
            for (const auto& w : t.weights)
                if (w.imag() != 0.0 || w.real() < 0.0) return false;
        }
        return true;
    }
};

/// X_t = mu t + sigma W_t + up-jumps - down-jumps, refracted by `delta`
/// whenever the process sits above `b`.
struct ModelSpec {
    double mu = 0.0;
    double sigma = 1.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    JumpMixture jumps_plus{JumpSide::positive, {}};
    JumpMixture jumps_minus{JumpSide::negative, {}};
    double delta = 0.0;
    double b = 0.0;
};

struct QuerySpec {
    double q = 1.0;
    double x = 0.0;
    double y = 0.0;
};

struct Diagnostic {
    std::string invariant;
    bool ok = true;
    std::string detail;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Diagnostic> diagnostics;

    void add(std::string invariant, bool pass, std::string detail = {}) {
        ok = ok && pass;
        diagnostics.push_back({std::move(invariant), pass, std::move(detail)});
    }

    bool failed(const std::string& invariant) const {
        for (const auto& d : diagnostics)
            if (d.invariant == invariant && !d.ok) return true;
        return false;
    }
};

namespace detail {

inline bool close_rel(cplx a, cplx b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline void validate_mixture(const JumpMixture& mix, double lambda, const std::string& name,
                             ValidationReport& report) {
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        report.add(name + ".intensity", false, "intensity must be finite and >= 0");
        return;
    }
    if (lambda == 0.0 || mix.empty()) {
        report.add(name + ".empty_iff_zero_intensity", lambda == 0.0 && mix.empty(),
                   "zero intensity requires an empty mixture and vice versa");
        return;
    }

    bool shape_ok = true;
    for (const auto& t : mix.terms)
        shape_ok = shape_ok && t.order >= 1 && static_cast<int>(t.weights.size()) == t.order;
    report.add(name + ".shape", shape_ok, "each term needs order >= 1 and one weight per order");
    if (!shape_ok) return;

    bool positive = true;
    for (const auto& t : mix.terms) positive = positive && t.rate.real() > 0.0;
    report.add(name + ".positive_rates", positive, "every rate needs a strictly positive real part");

    bool distinct = true;
    for (std::size_t i = 0; i < mix.terms.size(); ++i)
        for (std::size_t j = i + 1; j < mix.terms.size(); ++j)
            if (close_rel(mix.terms[i].rate, mix.terms[j].rate, 1e-12)) distinct = false;
    report.add(name + ".distinct_rates", distinct, "rates must be pairwise distinct");

    bool conjugate = true;
    for (const auto& t : mix.terms) {
        if (std::abs(t.rate.imag()) <= 1e-14 * std::abs(t.rate)) {
            for (const auto& w : t.weights)
                if (std::abs(w.imag()) > 1e-14 * std::max(1.0, std::abs(w))) conjugate = false;
            continue;
        }
        bool found = false;
        for (const auto& u : mix.terms) {
            if (&u == &t || u.order != t.order) continue;
            if (!close_rel(u.rate, std::conj(t.rate), 1e-12)) continue;
            bool weights_match = true;
            for (int j = 0; j < t.order; ++j)
                weights_match = weights_match &&
                                close_rel(u.weights[static_cast<std::size_t>(j)],
                                          std::conj(t.weights[static_cast<std::size_t>(j)]), 1e-12);
            found = found || weights_match;
        }
        conjugate = conjugate && found;
    }
    report.add(name + ".conjugate_pairs", conjugate,
               "non-real rates and weights must come in conjugate pairs");

    cplx total{0.0, 0.0};
    for (const auto& t : mix.terms)
        for (const auto& w : t.weights) total += w;
    {
        std::ostringstream os;
        os << "weights sum to " << total.real() << (total.imag() >= 0 ? "+" : "") << total.imag() << "i";
        report.add(name + ".normalization", std::abs(total - 1.0) <= 1e-12, os.str());
    }

    if (!positive) return;
    // Nonnegativity on a log-spaced grid over (0, 50 / min Re(rate)).
    const double upper = 50.0 / mix.min_real_rate();
    const double lower = upper * 1e-6;
    constexpr int n = 1000;
    double worst = std::numeric_limits<double>::infinity();
    double worst_z = lower;
    for (int i = 0; i < n; ++i) {
        const double z = lower * std::pow(upper / lower, static_cast<double>(i) / (n - 1));
        const double v = mix.density(z).real();
        if (v < worst) {
            worst = v;
            worst_z = z;
        }
    }
    std::ostringstream os;
    os << "min density " << worst << " at z=" << worst_z;
    report.add(name + ".nonnegative_density", worst >= -1e-10, os.str());
}

}  // namespace detail

/// Checks every model invariant and reports each one; never throws.
inline ValidationReport validate_model(const ModelSpec& spec) {
    ValidationReport report;
    report.add("sigma_positive", spec.sigma > 0.0 && std::isfinite(spec.sigma), "sigma must be > 0");
    report.add("finite_parameters",
               std::isfinite(spec.mu) && std::isfinite(spec.delta) && std::isfinite(spec.b),
               "mu, delta and b must be finite");
    report.add("jump_sides",
               spec.jumps_plus.side == JumpSide::positive && spec.jumps_minus.side == JumpSide::negative,
               "jumps_plus must be the positive side and jumps_minus the negative side");
    detail::validate_mixture(spec.jumps_plus, spec.lambda_plus, "jumps_plus", report);
    detail::validate_mixture(spec.jumps_minus, spec.lambda_minus, "jumps_minus", report);
    return report;
}

/// Throws Error("invalid_model") listing every failed invariant.
inline void require_valid(const ModelSpec& spec) {
    const auto report = validate_model(spec);
    if (report.ok) return;
    std::string msg = "invalid model:";
    for (const auto& d : report.diagnostics)
        if (!d.ok) msg += " " + d.invariant + " (" + d.detail + ");";
    throw Error("invalid_model", msg);
}

namespace detail {

inline double real_density(const JumpMixture& mix, double z, const char* empty_message) {
    if (mix.empty()) throw Error("no_jumps", empty_message);
    if (!(z > 0.0)) throw Error("domain", "jump density requires z > 0");
    const cplx v = mix.density(z);
    if (std::abs(v.imag()) > 1e-12 * std::max(1.0, mix.density_scale(z)))
        throw Error("complex_density", "jump density has a non-negligible imaginary part");
    return v.real();
}

}  // namespace detail

/// Density of an up-jump size.
inline double density_plus(const ModelSpec& spec, double z) {
    return detail::real_density(spec.jumps_plus, z, "no positive jumps");
}

/// Density of a down-jump size (as a positive magnitude).
inline double density_minus(const ModelSpec& spec, double z) {
    return detail::real_density(spec.jumps_minus, z, "no negative jumps");
}

/// Convenience builders for the common real-parameter cases.
inline JumpMixture exponential_jumps(JumpSide side, double rate) {
    return JumpMixture{side, {ErlangTerm{cplx(rate, 0.0), 1, {cplx(1.0, 0.0)}}}};
}

inline JumpMixture erlang_jumps(JumpSide side, double rate, int order) {
    std::vector<cplx> w(static_cast<std::size_t>(order), cplx(0.0, 0.0));
    w.back() = 1.0;
    return JumpMixture{side, {ErlangTerm{cplx(rate, 0.0), order, std::move(w)}}};
}

}  // namespace refract
