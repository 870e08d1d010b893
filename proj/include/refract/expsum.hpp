#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "refract/errors.hpp"

namespace refract {

using cplx = std::complex<double>;

/// coef * exp(rate * (w - anchor))
struct ExpTerm {
    cplx coef;
    cplx rate;
    double anchor = 0.0;

    cplx operator()(double w) const { return coef * std::exp(rate * (w - anchor)); }
};

namespace detail {

/// (e^z - 1) / z, accurate near z = 0.
inline cplx exprel(cplx z) {
    if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
    return (std::exp(z) - 1.0) / z;
}

}  // namespace detail

/// Finite sum of exponential terms on one interval.
struct ExpSum {
    std::vector<ExpTerm> terms;

    cplx operator()(double w) const {
        cplx acc{0.0, 0.0};
        for (const auto& t : terms) acc += t(w);
        return acc;
    }

    void add(cplx coef, cplx rate, double anchor) {
        if (coef != cplx(0.0, 0.0)) terms.push_back({coef, rate, anchor});
    }

    void append(const ExpSum& other, cplx factor = 1.0) {
        for (const auto& t : other.terms) add(t.coef * factor, t.rate, t.anchor);
    }

    /// Integral of e^{theta w} * sum over [lo, hi]; infinite ends need decay.
    cplx integrate(double lo, double hi, cplx theta = 0.0) const {
        cplx acc{0.0, 0.0};
        if (!(hi > lo)) return acc;
        for (const auto& t : terms) {
            const cplx d = t.rate + theta;
            const cplx scale = t.coef * std::exp(theta * t.anchor);
            const bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);
            if (lo_inf && hi_inf) throw Error("divergent", "exponential term integrated over the whole line");
            if (hi_inf) {
                if (!(d.real() < 0.0)) throw Error("divergent", "exponential term does not decay at +infinity");
                acc -= scale * std::exp(d * (lo - t.anchor)) / d;
            } else if (lo_inf) {
                if (!(d.real() > 0.0)) throw Error("divergent", "exponential term does not decay at -infinity");
                acc += scale * std::exp(d * (hi - t.anchor)) / d;
            } else {
                acc += scale * std::exp(d * (lo - t.anchor)) * (hi - lo) * detail::exprel(d * (hi - lo));
            }
        }
        return acc;
    }
};

/// Exponential sums on consecutive intervals [breaks[i], breaks[i+1]).
/// Outside the covered range the function is zero.
struct PiecewiseExpSum {
    std::vector<double> breaks;  // size pieces.size() + 1, may start at -inf / end at +inf
    std::vector<ExpSum> pieces;

    static PiecewiseExpSum on(std::vector<double> breaks) {
        PiecewiseExpSum p;
        p.pieces.resize(breaks.size() - 1);
        p.breaks = std::move(breaks);
        return p;
    }

    double lower() const { return breaks.front(); }
    double upper() const { return breaks.back(); }

    /// Right-continuous evaluation (the piece whose half-open interval holds w).
    cplx operator()(double w) const {
        if (pieces.empty() || w < breaks.front() || w >= breaks.back()) {
            if (!pieces.empty() && w == breaks.back() && std::isfinite(w)) return pieces.back()(w);
            return 0.0;
        }
        const auto it = std::upper_bound(breaks.begin(), breaks.end(), w);
        const auto idx = static_cast<std::size_t>(std::distance(breaks.begin(), it)) - 1;
        return pieces[std::min(idx, pieces.size() - 1)](w);
    }

    /// Left limit at w.
    cplx left_limit(double w) const {
        if (pieces.empty() || w <= breaks.front() || w > breaks.back()) return 0.0;
        const auto it = std::lower_bound(breaks.begin(), breaks.end(), w);
        const auto idx = static_cast<std::size_t>(std::distance(breaks.begin(), it)) - 1;
        return pieces[idx](w);
    }

    cplx integrate(double lo, double hi, cplx theta = 0.0) const {
        cplx acc{0.0, 0.0};
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            const double a = std::max(lo, breaks[i]);
            const double b = std::min(hi, breaks[i + 1]);
            if (b > a) acc += pieces[i].integrate(a, b, theta);
        }
        return acc;
    }

    cplx integrate_all(cplx theta = 0.0) const {
        return integrate(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), theta);
    }

    /// Same function of w expressed in y = w + shift.
    PiecewiseExpSum shifted(double shift) const {
        PiecewiseExpSum p = *this;
        for (auto& b : p.breaks) b += shift;
        for (auto& piece : p.pieces)
            for (auto& t : piece.terms) t.anchor += shift;
        return p;
    }

    /// Concatenation of two functions whose supports touch (this one on the left).
    PiecewiseExpSum joined(const PiecewiseExpSum& right) const {
        if (pieces.empty()) return right;
        if (right.pieces.empty()) return *this;
        if (breaks.back() != right.breaks.front()) throw Error("internal", "joined pieces do not touch");
        PiecewiseExpSum p = *this;
        p.breaks.insert(p.breaks.end(), right.breaks.begin() + 1, right.breaks.end());
        p.pieces.insert(p.pieces.end(), right.pieces.begin(), right.pieces.end());
        return p;
    }
};

}  // namespace refract
