#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "refract/errors.hpp"

namespace refract {

using cplx = std::complex<double>;

/// Complex polynomial with ascending coefficients: c[0] + c[1] u + ...
using Poly = std::vector<cplx>;

namespace poly {

inline Poly multiply(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly r(a.size() + b.size() - 1, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline Poly add(const Poly& a, const Poly& b) {
    Poly r(std::max(a.size(), b.size()), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    return r;
}

inline Poly scale(Poly a, cplx s) {
    for (auto& c : a) c *= s;
    return a;
}

inline Poly power(const Poly& a, int n) {
    Poly r{cplx(1.0, 0.0)};
    for (int i = 0; i < n; ++i) r = multiply(r, a);
    return r;
}

inline cplx evaluate(const Poly& a, cplx u) {
    cplx acc{0.0, 0.0};
    for (auto it = a.rbegin(); it != a.rend(); ++it) acc = acc * u + *it;
    return acc;
}

/// Drops trailing coefficients that are exactly zero.
inline Poly trimmed(Poly a) {
    while (a.size() > 1 && a.back() == cplx(0.0, 0.0)) a.pop_back();
    return a;
}

inline int degree(const Poly& a) { return static_cast<int>(trimmed(a).size()) - 1; }

}  // namespace poly

/// A pole of given order in a rational function.
struct RepeatedPole {
    cplx location;
    int order = 1;
};

/// G(s) = constant + sum_k sum_{j=1..order_k} coeffs[k][j-1] / (s - p_k)^j
struct PartialFractions {
    cplx constant{0.0, 0.0};
    std::vector<std::vector<cplx>> coeffs;
};

/// Partial fractions of G(s) = scale * prod_i (s - zeros_i) / prod_k (s - p_k)^{m_k}
/// for distinct pole locations and deg(num) <= deg(den). Laurent coefficients
/// at repeated poles come from truncated Taylor series of the regular part.
inline PartialFractions partial_fractions(cplx scale, std::span<const cplx> zeros,
                                          std::span<const RepeatedPole> poles) {
    int den_degree = 0;
    for (const auto& p : poles) den_degree += p.order;
    if (static_cast<int>(zeros.size()) > den_degree)
        throw Error("improper_rational", "partial fractions need a proper rational function");

    PartialFractions out;
    out.constant = static_cast<int>(zeros.size()) == den_degree ? scale : cplx(0.0, 0.0);
    out.coeffs.resize(poles.size());

    for (std::size_t k = 0; k < poles.size(); ++k) {
        const int m = poles[k].order;
        const cplx pk = poles[k].location;
        // Taylor coefficients of h(t) = G(pk + t) (t)^m up to t^{m-1}.
        std::vector<cplx> series(static_cast<std::size_t>(m), cplx(0.0, 0.0));
        series[0] = scale;
        auto truncated_mul = [m](std::vector<cplx>& s, const std::vector<cplx>& f) {
            std::vector<cplx> r(static_cast<std::size_t>(m), cplx(0.0, 0.0));
            for (int i = 0; i < m; ++i)
                for (int j = 0; j + i < m; ++j)
                    r[static_cast<std::size_t>(i + j)] += s[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(j)];
            s = std::move(r);
        };
        for (const cplx z : zeros) {
            std::vector<cplx> f(static_cast<std::size_t>(m), cplx(0.0, 0.0));
            f[0] = pk - z;
            if (m > 1) f[1] = 1.0;
            truncated_mul(series, f);
        }
        for (std::size_t l = 0; l < poles.size(); ++l) {
            if (l == k) continue;
            const cplx d = pk - poles[l].location;
            const int ml = poles[l].order;
            if (std::abs(d) == 0.0) throw Error("clustered_poles", "coincident poles in partial fractions");
            // (d + t)^{-ml} = d^{-ml} sum_n binom(-ml, n) (t/d)^n
            std::vector<cplx> f(static_cast<std::size_t>(m), cplx(0.0, 0.0));
            cplx term = std::pow(d, -ml);
            for (int n = 0; n < m; ++n) {
                f[static_cast<std::size_t>(n)] = term;
                term *= -static_cast<double>(ml + n) / static_cast<double>(n + 1) / d;
            }
            truncated_mul(series, f);
        }
        out.coeffs[k].resize(static_cast<std::size_t>(m));
        for (int j = 1; j <= m; ++j) out.coeffs[k][static_cast<std::size_t>(j - 1)] = series[static_cast<std::size_t>(m - j)];
    }
    return out;
}

}  // namespace refract
