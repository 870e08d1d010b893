#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/errors.hpp"
#include "refract/expsum.hpp"
#include "refract/model.hpp"
#include "refract/wiener_hopf.hpp"

namespace refract {

/// One exponential term c * e^{rate * t} of F1 (t > 0, rate = -beta_hat_i)
/// or F2 (t < 0, rate = gamma_i).
struct KernelTerm {
    cplx rate;
    cplx value_coef;       // coefficient in F itself
    cplx derivative_coef;  // coefficient in F'
};

struct KernelSet {
    RootSet roots;
    WienerHopfFactors factors;
    std::vector<KernelTerm> f1;
    std::vector<KernelTerm> f2;
    cplx f1_at_zero{0.0, 0.0};
    cplx f2_at_zero{0.0, 0.0};
    // K[i][j] pairs beta_i with gamma_hat_j.
    std::vector<std::vector<cplx>> kq;

    cplx q() const { return roots.q; }
};

inline KernelSet build_kernels(const ModelSpec& spec, const RootSet& roots) {
    KernelSet ks;
    ks.roots = roots;
    ks.factors = build_factors(spec, roots);
    const auto& b = roots.beta;
    const auto& bh = roots.beta_hat;
    const auto& g = roots.gamma;
    const auto& gh = roots.gamma_hat;

    // F1 has transform (1/s)(psi_hat^+(s)/psi^+(s) - 1); the eta factors cancel.
    for (std::size_t i = 0; i < bh.size(); ++i) {
        cplx a{1.0, 0.0};
        for (const auto& bk : b) a *= (bh[i] - bk) / bk;
        for (std::size_t k = 0; k < bh.size(); ++k)
            if (k != i) a *= bh[k] / (bh[i] - bh[k]);
        ks.f1.push_back({-bh[i], a, -bh[i] * a});
    }
    // F2 has transform (1/s)(psi^-(s)/psi_hat^-(s) - 1) on the negative half-line.
    for (std::size_t n = 0; n < g.size(); ++n) {
        cplx c{-1.0, 0.0};
        for (const auto& gk : gh) c *= (gk - g[n]) / gk;
        for (std::size_t k = 0; k < g.size(); ++k)
            if (k != n) c *= g[k] / (g[k] - g[n]);
        ks.f2.push_back({g[n], c, g[n] * c});
    }
    ks.f1_at_zero = product(bh) / product(b) - 1.0;
    ks.f2_at_zero = product(g) / product(gh) - 1.0;

    const auto& C = ks.factors.sup_X.residues;
    const auto& Dh = ks.factors.inf_Y.residues;
    ks.kq.assign(b.size(), std::vector<cplx>(gh.size()));
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < gh.size(); ++j) ks.kq[i][j] = C[i] * Dh[j] / (b[i] + gh[j]);
    return ks;
}

inline KernelSet build_kernels(const ModelSpec& spec, cplx q) { return build_kernels(spec, solve_roots(spec, q)); }

namespace detail {

inline double real_or_throw(cplx v, const char* what, double scale = 1.0) {
    if (std::abs(v.imag()) > 1e-10 * std::max(1.0, scale))
        throw Error("complex_output", std::string(what) + " has a non-negligible imaginary part");
    return v.real();
}

}  // namespace detail

inline cplx F1_complex(const KernelSet& ks, double x) {
    if (x < 0.0) throw Error("domain", "F1 is defined for x >= 0");
    cplx acc{0.0, 0.0};
    for (const auto& t : ks.f1) acc += t.value_coef * std::exp(t.rate * x);
    return acc;
}

inline cplx F2_complex(const KernelSet& ks, double x) {
    if (x > 0.0) throw Error("domain", "F2 is defined for x <= 0");
    cplx acc{0.0, 0.0};
    for (const auto& t : ks.f2) acc += t.value_coef * std::exp(t.rate * x);
    return acc;
}

inline double F1(const KernelSet& ks, double x) { return detail::real_or_throw(F1_complex(ks, x), "F1"); }
inline double F2(const KernelSet& ks, double x) { return detail::real_or_throw(F2_complex(ks, x), "F2"); }

/// Laplace transform int_0^inf e^{-s x} F1(x) dx, termwise.
inline cplx F1_transform(const KernelSet& ks, cplx s) {
    cplx acc{0.0, 0.0};
    for (const auto& t : ks.f1) acc += t.value_coef / (s - t.rate);
    return acc;
}

/// int_{-inf}^0 e^{s x} F2(x) dx, termwise.
inline cplx F2_transform(const KernelSet& ks, cplx s) {
    cplx acc{0.0, 0.0};
    for (const auto& t : ks.f2) acc += t.value_coef / (s + t.rate);
    return acc;
}

/// K_q density as piecewise exponential sum on (-inf, 0) and [0, inf).
inline PiecewiseExpSum kq_density_pieces(const KernelSet& ks) {
    const double inf = std::numeric_limits<double>::infinity();
    auto p = PiecewiseExpSum::on({-inf, 0.0, inf});
    const auto& b = ks.roots.beta;
    const auto& gh = ks.roots.gamma_hat;
    for (std::size_t j = 0; j < gh.size(); ++j) {
        cplx c{0.0, 0.0};
        for (std::size_t i = 0; i < b.size(); ++i) c += ks.kq[i][j];
        p.pieces[0].add(c, gh[j], 0.0);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        cplx c{0.0, 0.0};
        for (std::size_t j = 0; j < gh.size(); ++j) c += ks.kq[i][j];
        p.pieces[1].add(c, -b[i], 0.0);
    }
    return p;
}

/// K_q distribution function as piecewise exponential sum.
inline PiecewiseExpSum kq_cdf_pieces(const KernelSet& ks) {
    const double inf = std::numeric_limits<double>::infinity();
    const auto dens = kq_density_pieces(ks);
    auto p = PiecewiseExpSum::on({-inf, 0.0, inf});
    cplx at_zero{0.0, 0.0};
    for (const auto& t : dens.pieces[0].terms) {
        p.pieces[0].add(t.coef / t.rate, t.rate, 0.0);
        at_zero += t.coef / t.rate;
    }
    cplx tail{0.0, 0.0};
    for (const auto& t : dens.pieces[1].terms) {
        p.pieces[1].add(t.coef / t.rate, t.rate, 0.0);
        tail -= t.coef / t.rate;
    }
    p.pieces[1].add(at_zero + tail, 0.0, 0.0);
    return p;
}

inline cplx kq_density_complex(const KernelSet& ks, double x) { return kq_density_pieces(ks)(x); }
inline cplx kq_cdf_complex(const KernelSet& ks, double x) { return kq_cdf_pieces(ks)(x); }

inline double Kq_density(const KernelSet& ks, double x) {
    return detail::real_or_throw(kq_density_complex(ks, x), "K_q density");
}

inline double Kq_cdf(const KernelSet& ks, double x) {
    return detail::real_or_throw(kq_cdf_complex(ks, x), "K_q distribution");
}

}  // namespace refract
