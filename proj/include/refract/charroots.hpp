#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "refract/errors.hpp"
#include "refract/model.hpp"
#include "refract/polynomial.hpp"

namespace refract {

// Everything below works in the variable u = i z, in which psi(z) becomes the
// Laplace exponent kappa(u) = ln E[e^{u X_1}] and the roots of psi(z) = q sit
// on the real axis side they are ordered by: z = -i beta  <=>  u = beta and
// z = i gamma  <=>  u = -gamma.

namespace detail {

inline void check_not_pole(const ModelSpec& spec, cplx u) {
    for (const auto& t : spec.jumps_plus.terms)
        if (std::abs(u - t.rate) <= 1e-14 * std::abs(t.rate))
            throw Error("exponent_pole", "characteristic exponent evaluated at a pole");
    for (const auto& t : spec.jumps_minus.terms)
        if (std::abs(u + t.rate) <= 1e-14 * std::abs(t.rate))
            throw Error("exponent_pole", "characteristic exponent evaluated at a pole");
}

inline double drift(const ModelSpec& spec, bool refracted) {
    return refracted ? spec.mu - spec.delta : spec.mu;
}

}  // namespace detail

/// kappa(u) = sigma^2 u^2 / 2 + mu u + lambda+ (E e^{u Z+} - 1) + lambda- (E e^{-u Z-} - 1),
/// with mu replaced by mu - delta for the fully refracted process Y.
inline cplx laplace_exponent(const ModelSpec& spec, cplx u, bool refracted = false) {
    detail::check_not_pole(spec, u);
    cplx v = 0.5 * spec.sigma * spec.sigma * u * u + detail::drift(spec, refracted) * u;
    if (!spec.jumps_plus.empty()) v += spec.lambda_plus * (spec.jumps_plus.mgf(u) - 1.0);
    if (!spec.jumps_minus.empty()) v += spec.lambda_minus * (spec.jumps_minus.mgf(-u) - 1.0);
    return v;
}

inline cplx laplace_exponent_derivative(const ModelSpec& spec, cplx u, bool refracted = false) {
    cplx v = spec.sigma * spec.sigma * u + detail::drift(spec, refracted);
    if (!spec.jumps_plus.empty()) v += spec.lambda_plus * spec.jumps_plus.mgf_derivative(u);
    if (!spec.jumps_minus.empty()) v -= spec.lambda_minus * spec.jumps_minus.mgf_derivative(-u);
    return v;
}

/// Characteristic exponent psi(z) = ln E[e^{i z X_1}] (analytically continued).
inline cplx psi(const ModelSpec& spec, cplx z) {
    return laplace_exponent(spec, cplx(0.0, 1.0) * z, false);
}

/// psi_hat(z) = psi(z) - i delta z, the exponent of Y_t = X_t - delta t.
inline cplx psi_hat(const ModelSpec& spec, cplx z) {
    return laplace_exponent(spec, cplx(0.0, 1.0) * z, true);
}

/// Numerator of (kappa(u) - q) after clearing the jump denominators
/// prod (eta_k - u)^{m_k} prod (theta_k + u)^{n_k}. Its roots are
/// {beta_k} and {-gamma_k} (hatted families when `refracted`).
inline Poly characteristic_polynomial(const ModelSpec& spec, cplx q, bool refracted) {
    std::vector<Poly> up, down;
    for (const auto& t : spec.jumps_plus.terms) up.push_back(poly::power(Poly{t.rate, cplx(-1.0, 0.0)}, t.order));
    for (const auto& t : spec.jumps_minus.terms) down.push_back(poly::power(Poly{t.rate, cplx(1.0, 0.0)}, t.order));

    auto product_except = [&](int skip_up, int skip_down) {
        Poly r{cplx(1.0, 0.0)};
        for (int i = 0; i < static_cast<int>(up.size()); ++i)
            if (i != skip_up) r = poly::multiply(r, up[static_cast<std::size_t>(i)]);
        for (int i = 0; i < static_cast<int>(down.size()); ++i)
            if (i != skip_down) r = poly::multiply(r, down[static_cast<std::size_t>(i)]);
        return r;
    };

    const double lp = spec.jumps_plus.empty() ? 0.0 : spec.lambda_plus;
    const double lm = spec.jumps_minus.empty() ? 0.0 : spec.lambda_minus;
    const Poly base{-lp - lm - q, cplx(detail::drift(spec, refracted), 0.0),
                    cplx(0.5 * spec.sigma * spec.sigma, 0.0)};
    Poly result = poly::multiply(base, product_except(-1, -1));

    for (int k = 0; k < static_cast<int>(up.size()); ++k) {
        const auto& t = spec.jumps_plus.terms[static_cast<std::size_t>(k)];
        Poly num{cplx(0.0, 0.0)};
        for (int j = 1; j <= t.order; ++j) {
            const Poly p = poly::power(Poly{t.rate, cplx(-1.0, 0.0)}, t.order - j);
            num = poly::add(num, poly::scale(p, t.weights[static_cast<std::size_t>(j - 1)] * std::pow(t.rate, j)));
        }
        result = poly::add(result, poly::scale(poly::multiply(num, product_except(k, -1)), lp));
    }
    for (int k = 0; k < static_cast<int>(down.size()); ++k) {
        const auto& t = spec.jumps_minus.terms[static_cast<std::size_t>(k)];
        Poly num{cplx(0.0, 0.0)};
        for (int j = 1; j <= t.order; ++j) {
            const Poly p = poly::power(Poly{t.rate, cplx(1.0, 0.0)}, t.order - j);
            num = poly::add(num, poly::scale(p, t.weights[static_cast<std::size_t>(j - 1)] * std::pow(t.rate, j)));
        }
        result = poly::add(result, poly::scale(poly::multiply(num, product_except(-1, k)), lm));
    }
    return result;
}

/// Roots of psi(z) = q and psi_hat(z) = q, each family sorted by (Re, Im).
/// beta / beta_hat: roots in Im z < 0 stored as beta with Re > 0;
/// gamma / gamma_hat: roots in Im z > 0 stored as gamma with Re > 0.
struct RootSet {
    cplx q{0.0, 0.0};
    std::vector<cplx> beta;
    std::vector<cplx> beta_hat;
    std::vector<cplx> gamma;
    std::vector<cplx> gamma_hat;

    bool real_q() const noexcept { return q.imag() == 0.0; }
};

inline cplx product(const std::vector<cplx>& v) {
    cplx p{1.0, 0.0};
    for (const auto& c : v) p *= c;
    return p;
}

namespace detail {

inline std::vector<cplx> companion_roots(const Poly& p_in) {
    const Poly p = poly::trimmed(p_in);
    const int n = static_cast<int>(p.size()) - 1;
    if (n < 1) return {};
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) c(i, n - 1) = -p[static_cast<std::size_t>(i)] / p[static_cast<std::size_t>(n)];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(c, false);
    if (solver.info() != Eigen::Success) throw Error("eigensolve_failed", "companion eigensolve did not converge");
    std::vector<cplx> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    return r;
}

/// P'/P for the cleared numerator P = (kappa - q) D, from the rational form.
inline cplx log_derivative(const ModelSpec& spec, cplx u, cplx q, bool refracted, cplx& f_out) {
    f_out = laplace_exponent(spec, u, refracted) - q;
    cplx d = 0.0;
    for (const auto& t : spec.jumps_plus.terms) d += static_cast<double>(t.order) / (u - t.rate);
    for (const auto& t : spec.jumps_minus.terms) d += static_cast<double>(t.order) / (u + t.rate);
    return laplace_exponent_derivative(spec, u, refracted) / f_out + d;
}

/// Simultaneous Aberth-Ehrlich refinement of all roots of P, followed by
/// Newton steps on kappa - q.
inline void polish_roots(const ModelSpec& spec, cplx q, bool refracted, std::vector<cplx>& roots) {
    const std::size_t n = roots.size();
    for (int iter = 0; iter < 60; ++iter) {
        double max_step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cplx f;
            const cplx ld = log_derivative(spec, roots[i], q, refracted, f);
            if (f == cplx(0.0, 0.0)) continue;
            const cplx w = 1.0 / ld;
            cplx repulsion = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) repulsion += 1.0 / (roots[i] - roots[j]);
            const cplx step = w / (1.0 - w * repulsion);
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
            roots[i] -= step;
            max_step = std::max(max_step, std::abs(step) / (1.0 + std::abs(roots[i])));
        }
        if (max_step < 1e-16) break;
    }
    for (auto& r : roots) {
        for (int iter = 0; iter < 4; ++iter) {
            const cplx f = laplace_exponent(spec, r, refracted) - q;
            const cplx fp = laplace_exponent_derivative(spec, r, refracted);
            if (f == cplx(0.0, 0.0) || fp == cplx(0.0, 0.0)) break;
            const cplx step = f / fp;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
            r -= step;
            if (std::abs(step) <= 1e-17 * (1.0 + std::abs(r))) break;
        }
    }
}

inline void sort_family(std::vector<cplx>& v) {
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
}

/// For real q: snap nearly-real roots onto the axis and make conjugate
/// partners exact conjugates.
inline void enforce_conjugate_symmetry(const ModelSpec& spec, cplx q, bool refracted, bool positive_family,
                                       std::vector<cplx>& v) {
    std::vector<bool> done(v.size(), false);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (done[i]) continue;
        if (std::abs(v[i].imag()) <= 1e-9 * (1.0 + std::abs(v[i]))) {
            double r = v[i].real();
            const double sign = positive_family ? 1.0 : -1.0;
            for (int iter = 0; iter < 4; ++iter) {
                const double f = (laplace_exponent(spec, cplx(sign * r, 0.0), refracted) - q).real();
                const double fp = sign * laplace_exponent_derivative(spec, cplx(sign * r, 0.0), refracted).real();
                if (f == 0.0 || fp == 0.0) break;
                r -= f / fp;
            }
            v[i] = cplx(r, 0.0);
            done[i] = true;
            continue;
        }
        std::size_t best = v.size();
        double best_d = 1e300;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j == i || done[j]) continue;
            const double d = std::abs(v[j] - std::conj(v[i]));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best < v.size() && best_d <= 1e-7 * (1.0 + std::abs(v[i]))) {
            const cplx avg = 0.5 * (v[i] + std::conj(v[best]));
            v[i] = avg;
            v[best] = std::conj(avg);
            done[best] = true;
        }
        done[i] = true;
    }
}

inline void check_family(const ModelSpec& spec, const std::vector<cplx>& v, int expected, const char* name,
                         bool refracted, bool positive_family, cplx q) {
    if (static_cast<int>(v.size()) != expected) {
        std::ostringstream os;
        os << "count mismatch: " << name << " has " << v.size() << " roots, expected " << expected;
        throw Error("count_mismatch", os.str());
    }
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (std::abs(v[i] - v[j]) < 1e-6 * (1.0 + std::abs(v[i]))) {
                std::ostringstream os;
                os << "multiple root near q=" << q.real() << (q.imag() != 0 ? " (complex)" : "") << " in family "
                   << name << "; perturb q slightly (only finitely many q have repeated roots)";
                throw Error("multiple_root", os.str());
            }
    const double sign = positive_family ? 1.0 : -1.0;
    for (const auto& r : v) {
        const cplx res = laplace_exponent(spec, sign * r, refracted) - q;
        if (std::abs(res) > 1e-10 * (1.0 + std::abs(q))) {
            std::ostringstream os;
            os << "root polish failed in family " << name << ": residual " << std::abs(res);
            throw Error("root_polish", os.str());
        }
    }
    if (q.imag() == 0.0 && !v.empty()) {
        if (v[0].imag() != 0.0 || !(v[0].real() > 0.0) || (v.size() > 1 && !(v[0].real() < v[1].real())))
            throw Error("root_structure", std::string("smallest root of family ") + name +
                                              " is not real and strictly dominant");
    }
}

}  // namespace detail

/// Solves psi(z) = q and psi_hat(z) = q for all roots (complex q with
/// Re q > 0 is accepted; the root counts per half plane do not depend on q).
inline RootSet solve_roots(const ModelSpec& spec, cplx q) {
    if (!(q.real() > 0.0) || !std::isfinite(q.real()) || !std::isfinite(q.imag()))
        throw Error("domain", "q must be positive");
    if (!(spec.sigma > 0.0)) throw Error("invalid_model", "sigma must be > 0");

    const int m_plus = spec.jumps_plus.total_order();
    const int n_minus = spec.jumps_minus.total_order();

    RootSet rs;
    rs.q = q;
    for (bool refracted : {false, true}) {
        std::vector<cplx> roots;
        if (refracted && spec.delta == 0.0) {
            rs.beta_hat = rs.beta;
            rs.gamma_hat = rs.gamma;
            continue;
        }
        roots = detail::companion_roots(characteristic_polynomial(spec, q, refracted));
        detail::polish_roots(spec, q, refracted, roots);
        std::vector<cplx> pos, neg;
        for (const auto& r : roots) {
            if (r.real() > 0.0)
                pos.push_back(r);
            else
                neg.push_back(-r);
        }
        if (q.imag() == 0.0) {
            detail::enforce_conjugate_symmetry(spec, q, refracted, true, pos);
            detail::enforce_conjugate_symmetry(spec, q, refracted, false, neg);
        }
        detail::sort_family(pos);
        detail::sort_family(neg);
        detail::check_family(spec, pos, 1 + m_plus, refracted ? "beta_hat" : "beta", refracted, true, q);
        detail::check_family(spec, neg, 1 + n_minus, refracted ? "gamma_hat" : "gamma", refracted, false, q);
        (refracted ? rs.beta_hat : rs.beta) = std::move(pos);
        (refracted ? rs.gamma_hat : rs.gamma) = std::move(neg);
    }
    return rs;
}

inline RootSet solve_roots(const ModelSpec& spec, double q) { return solve_roots(spec, cplx(q, 0.0)); }

}  // namespace refract
