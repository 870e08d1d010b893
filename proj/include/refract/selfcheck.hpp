#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/distribution.hpp"
#include "refract/errors.hpp"
#include "refract/kernels.hpp"
#include "refract/model.hpp"
#include "refract/wiener_hopf.hpp"

namespace refract {

struct Check {
    std::string name;
    bool pass = false;
    double error = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

namespace checks {

inline double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline Check make(std::string name, double err, double tol, std::string detail = {}) {
    return {std::move(name), err <= tol && std::isfinite(err), err, tol, std::move(detail)};
}

inline std::vector<Check> roots(const ModelSpec& spec, const RootSet& r) {
    std::vector<Check> out;
    const cplx q = r.q;
    const int m = spec.jumps_plus.total_order(), n = spec.jumps_minus.total_order();
    out.push_back(make("roots.counts",
                       (static_cast<int>(r.beta.size()) == 1 + m && static_cast<int>(r.beta_hat.size()) == 1 + m &&
                        static_cast<int>(r.gamma.size()) == 1 + n && static_cast<int>(r.gamma_hat.size()) == 1 + n)
                           ? 0.0 : 1.0,
                       0.0));
    double worst = 0.0;
    for (const auto& b : r.beta) worst = std::max(worst, std::abs(laplace_exponent(spec, b) - q));
    for (const auto& b : r.beta_hat) worst = std::max(worst, std::abs(laplace_exponent(spec, b, true) - q));
    for (const auto& g : r.gamma) worst = std::max(worst, std::abs(laplace_exponent(spec, -g) - q));
    for (const auto& g : r.gamma_hat) worst = std::max(worst, std::abs(laplace_exponent(spec, -g, true) - q));
    out.push_back(make("roots.residual", worst / (1.0 + std::abs(q)), 1e-10));

    if (r.real_q()) {
        double dom = 0.0;
        for (const auto* fam : {&r.beta, &r.beta_hat, &r.gamma, &r.gamma_hat}) {
            const auto& v = *fam;
            if (v.front().imag() != 0.0 || !(v.front().real() > 0.0)) dom = 1.0;
            if (v.size() > 1 && !(v.front().real() < v[1].real())) dom = 1.0;
        }
        out.push_back(make("roots.dominant_real", dom, 0.0));
    }

    for (bool hat : {false, true}) {
        const Poly p = poly::trimmed(characteristic_polynomial(spec, q, hat));
        cplx prod{1.0, 0.0};
        for (const auto& b : hat ? r.beta_hat : r.beta) prod *= b;
        for (const auto& g : hat ? r.gamma_hat : r.gamma) prod *= -g;
        const auto deg = p.size() - 1;
        const cplx expect = (deg % 2 ? -1.0 : 1.0) * p.front() / p.back();
        out.push_back(make(hat ? "roots.vieta_hat" : "roots.vieta", rel(prod, expect), 1e-10));
    }

    out.push_back(make("roots.product_identity",
                       rel(product(r.beta_hat) / product(r.beta), product(r.gamma) / product(r.gamma_hat)), 1e-10));
    cplx jumps{1.0, 0.0};
    for (const auto& t : spec.jumps_plus.terms) jumps *= std::pow(t.rate, t.order);
    for (const auto& t : spec.jumps_minus.terms) jumps *= std::pow(t.rate, t.order);
    const double half_var = 0.5 * spec.sigma * spec.sigma;
    out.push_back(make("roots.q_identity", rel(half_var * product(r.beta) * product(r.gamma) / jumps, q), 1e-10));
    out.push_back(make("roots.q_identity_hat", rel(half_var * product(r.beta_hat) * product(r.gamma_hat) / jumps, q), 1e-10));
    return out;
}

inline std::vector<Check> factors(const ModelSpec& spec, const RootSet& r, const WienerHopfFactors& f) {
    std::vector<Check> out;
    double at0 = 0.0;
    for (const auto* pf : {&f.sup_X, &f.sup_Y, &f.inf_X, &f.inf_Y}) at0 = std::max(at0, std::abs((*pf)(0.0) - 1.0));
    out.push_back(make("factors.unit_mass", at0, 1e-12));

    double wh = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double theta = -10.0 + 20.0 * k / 19.0;
        const cplx lhs = characteristic_from_factors(f, theta);
        const cplx rhs = r.q / (r.q - psi(spec, theta));
        wh = std::max(wh, std::abs(lhs - rhs) / std::abs(rhs));
    }
    out.push_back(make("factors.wiener_hopf_identity", wh, 1e-9));

    if (r.real_q()) {
        double neg = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const double v = 40.0 * k / 999.0 / std::max(1e-3, r.gamma_hat.front().real());
            const double vs = 40.0 * k / 999.0 / std::max(1e-3, r.beta.front().real());
            const double vs_hat = 40.0 * k / 999.0 / std::max(1e-3, r.beta_hat.front().real());
            const double vi = 40.0 * k / 999.0 / std::max(1e-3, r.gamma.front().real());
            neg = std::min(neg, extreme_density_complex(f.sup_X, ExtremeSide::sup, vs).real());
            neg = std::min(neg, extreme_density_complex(f.sup_Y, ExtremeSide::sup, vs_hat).real());
            neg = std::min(neg, extreme_density_complex(f.inf_X, ExtremeSide::inf, -vi).real());
            neg = std::min(neg, extreme_density_complex(f.inf_Y, ExtremeSide::inf, -v).real());
        }
        out.push_back(make("factors.nonnegative_densities", -neg, 1e-10));
    }
    return out;
}

inline std::vector<Check> kernels(const KernelSet& ks) {
    std::vector<Check> out;
    const auto& r = ks.roots;
    cplx f1_0{0.0, 0.0}, f2_0{0.0, 0.0};
    for (const auto& t : ks.f1) f1_0 += t.value_coef;
    for (const auto& t : ks.f2) f2_0 += t.value_coef;
    out.push_back(make("kernels.f1_at_zero", rel(f1_0, ks.f1_at_zero), 1e-10));
    out.push_back(make("kernels.f2_at_zero", rel(f2_0, ks.f2_at_zero), 1e-10));
    out.push_back(make("kernels.f1_equals_f2_at_zero", rel(ks.f1_at_zero, ks.f2_at_zero), 1e-10));

    if (r.real_q()) {
        double lowest = 0.0;
        const double span = 40.0 / r.beta_hat.front().real();
        for (int k = 0; k <= 1000; ++k) lowest = std::min(lowest, F1_complex(ks, span * k / 1000.0).real() + 1.0);
        out.push_back(make("kernels.f1_plus_one_nonnegative", -lowest, 1e-10));
    }

    double rt1 = 0.0, rt2 = 0.0;
    for (double s : {0.5, 1.0, 2.0, 4.0}) {
        const cplx lhs1 = F1_transform(ks, s);
        const cplx rhs1 = (ks.factors.sup_Y(s) / ks.factors.sup_X(s) - 1.0) / s;
        rt1 = std::max(rt1, rel(lhs1, rhs1));
        const cplx lhs2 = F2_transform(ks, s);
        const cplx rhs2 = (ks.factors.inf_X(s) / ks.factors.inf_Y(s) - 1.0) / s;
        rt2 = std::max(rt2, rel(lhs2, rhs2));
    }
    out.push_back(make("kernels.f1_transform_round_trip", rt1, 1e-10));
    out.push_back(make("kernels.f2_transform_round_trip", rt2, 1e-10));

    cplx at_zero{0.0, 0.0}, expect{0.0, 0.0};
    for (const auto& t : ks.f1) at_zero += t.value_coef / (-t.rate);
    for (const auto& b : r.beta) expect += 1.0 / b;
    for (const auto& b : r.beta_hat) expect -= 1.0 / b;
    out.push_back(make("kernels.f1_transform_at_zero", rel(at_zero, expect), 1e-8));

    const auto kd = kq_density_pieces(ks);
    out.push_back(make("kernels.kq_mass", std::abs(kd.integrate_all() - 1.0), 1e-10));
    const auto kc = kq_cdf_pieces(ks);
    out.push_back(make("kernels.kq_cdf_limits",
                       std::max(std::abs(kc(-1e3 / r.gamma_hat.front().real())), std::abs(kc(1e3 / r.beta.front().real()) - 1.0)),
                       1e-10));
    return out;
}

inline std::vector<Check> distribution(const ModelSpec& spec, const KernelSet& ks, double x) {
    std::vector<Check> out;
    const double b = spec.b;
    const cplx split = cdf_upper_complex(spec, ks, x, b) + cdf_lower_complex(spec, ks, x, b);
    out.push_back(make("distribution.mass_split_at_b", std::abs(split - 1.0), 1e-12));
    const auto dens = density_pieces(spec, ks, x);
    out.push_back(make("distribution.density_mass", std::abs(dens.integrate_all() - 1.0), 1e-8));
    out.push_back(make("distribution.density_continuous_at_b", std::abs(dens(b) - dens.left_limit(b)), 1e-10));

    // Density against a numerical derivative of the distribution function.
    double dd = 0.0;
    for (double off : {-0.7, -0.2, 0.3, 0.9}) {
        const double y = b + off, h = 1e-5;
        const cplx num = (cdf_complex(spec, ks, x, y + h) - cdf_complex(spec, ks, x, y - h)) / (2.0 * h);
        dd = std::max(dd, std::abs(num - dens(y)));
    }
    out.push_back(make("distribution.density_matches_derivative", dd, 1e-6));

    // Smooth pasting of x -> P_x(U > y) at x = b.
    const double y = b + 0.4, h = 1e-4;
    auto V = [&](double xx) { return cdf_upper_complex(spec, ks, xx, y); };
    const cplx left = V(b - 1e-13), right = V(b);
    const cplx dl = (3.0 * V(b) - 4.0 * V(b - h) + V(b - 2 * h)) / (2.0 * h);
    const cplx dr = (-3.0 * V(b) + 4.0 * V(b + h) - V(b + 2 * h)) / (2.0 * h);
    out.push_back(make("distribution.smooth_pasting_value", std::abs(left - right), 1e-6));
    out.push_back(make("distribution.smooth_pasting_slope", std::abs(dl - dr), 1e-6));

    // Second route for y > b.
    double agree = 0.0;
    double hq = 0.0, vmatch = 0.0, smatch = 0.0;
    for (double dy : {0.1, 0.5, 1.0}) {
        const auto pc = root_expansion_coefficients(spec, ks.roots, b + dy);
        cplx sh{0.0, 0.0};
        for (const auto& v : pc.H_hat) sh += v;
        for (const auto& v : pc.Q_hat) sh -= v;
        hq = std::max(hq, std::abs(sh - 1.0));
        cplx sj{0.0, 0.0}, sjb{0.0, 0.0}, rhs{0.0, 0.0}, rhs_slope{0.0, 0.0};
        for (std::size_t i = 0; i < pc.J.size(); ++i) {
            sj += pc.J[i];
            sjb += pc.J[i] * pc.beta[i];
        }
        for (std::size_t i = 0; i < pc.H_hat.size(); ++i) {
            const cplx e = std::exp(pc.beta_hat[i] * (b - pc.y));
            rhs += pc.H_hat[i] * e;
            rhs_slope += pc.H_hat[i] * pc.beta_hat[i] * e;
        }
        for (std::size_t i = 0; i < pc.P_hat.size(); ++i) {
            rhs += pc.P_hat[i];
            rhs_slope -= pc.P_hat[i] * pc.gamma_hat[i];
        }
        vmatch = std::max(vmatch, std::abs(sj - rhs));
        smatch = std::max(smatch, std::abs(sjb - rhs_slope));
        for (double dx : {-1.0, -0.3, 0.0, 0.4, 1.5})
            agree = std::max(agree, std::abs(pc(b + dx) - cdf_upper_complex(spec, ks, b + dx, b + dy)));
    }
    out.push_back(make("distribution.h_minus_q_identity", hq, 1e-10));
    out.push_back(make("distribution.value_matching_at_b", vmatch, 1e-10));
    out.push_back(make("distribution.slope_matching_at_b", smatch, 1e-10));
    out.push_back(make("distribution.route_agreement", agree, 1e-8));
    return out;
}

}  // namespace checks

/// Full invariant battery for a model at killing rate q.
inline std::vector<Check> run_selfcheck(const ModelSpec& spec, double q, double x = 0.0) {
    std::vector<Check> out;
    const auto report = validate_model(spec);
    for (const auto& d : report.diagnostics) out.push_back({"model." + d.invariant, d.ok, d.ok ? 0.0 : 1.0, 0.0, d.detail});
    if (!report.ok) return out;
    const auto roots = solve_roots(spec, q);
    const auto ks = build_kernels(spec, roots);
    for (auto& c : checks::roots(spec, roots)) out.push_back(std::move(c));
    for (auto& c : checks::factors(spec, roots, ks.factors)) out.push_back(std::move(c));
    for (auto& c : checks::kernels(ks)) out.push_back(std::move(c));
    for (auto& c : checks::distribution(spec, ks, x)) out.push_back(std::move(c));
    return out;
}

}  // namespace refract
