#pragma once

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/distribution.hpp"
#include "refract/errors.hpp"
#include "refract/kernels.hpp"
#include "refract/laplace.hpp"
#include "refract/model.hpp"

namespace refract {

enum class PayoffType { floor, call, custom };

struct PayoffKnot {
    double account;
    double value;
};

/// G(v) for account value v. floor: max(v, K); call: max(v - K, 0);
/// custom: piecewise linear through the knots, flat below the first knot and
/// continued with the last slope above the last knot.
struct Payoff {
    PayoffType type = PayoffType::floor;
    double K = 0.0;
    std::vector<PayoffKnot> table;

    double operator()(double v) const {
        switch (type) {
            case PayoffType::floor: return std::max(v, K);
            case PayoffType::call: return std::max(v - K, 0.0);
            case PayoffType::custom: break;
        }
        if (table.size() == 1 || v <= table.front().account) return table.front().value;
        for (std::size_t i = 0; i + 1 < table.size(); ++i)
            if (v < table[i + 1].account || i + 2 == table.size()) {
                const double s = (table[i + 1].value - table[i].value) / (table[i + 1].account - table[i].account);
                return table[i].value + s * (v - table[i].account);
            }
        return table.back().value;
    }
};

struct MortalityComponent {
    double w;
    double q;
};

struct PricingSpec {
    double r = 0.0;
    double F0 = 1.0;
    double B = 1.0;
    double fee_rate = 0.0;
    Payoff payoff;
    std::vector<MortalityComponent> mortality;
    double T = 1.0;
};

inline void validate_pricing(const PricingSpec& p) {
    auto fail = [](const std::string& m) { throw Error("invalid_pricing", m); };
    if (!std::isfinite(p.r)) fail("r must be finite");
    if (!(p.F0 > 0.0)) fail("F0 must be > 0");
    if (!(p.B > 0.0) || !std::isfinite(std::log(p.B / p.F0))) fail("B must be > 0 and ln(B/F0) finite");
    if (!(p.fee_rate >= 0.0) || !std::isfinite(p.fee_rate)) fail("fee_rate must be finite and >= 0");
    if (p.payoff.type == PayoffType::custom) {
        if (p.payoff.table.empty()) fail("custom payoff needs at least one knot");
        bool up = true, down = true;
        for (std::size_t i = 0; i + 1 < p.payoff.table.size(); ++i) {
            if (!(p.payoff.table[i + 1].account > p.payoff.table[i].account))
                fail("custom payoff knots must be strictly increasing in account value");
            up = up && p.payoff.table[i + 1].value >= p.payoff.table[i].value;
            down = down && p.payoff.table[i + 1].value <= p.payoff.table[i].value;
        }
        if (!up && !down) fail("custom payoff table must be monotone");
        if (!(p.payoff.table.front().account > 0.0)) fail("custom payoff knots must be positive account values");
    }
    double wsum = 0.0;
    for (const auto& m : p.mortality) {
        if (!(m.w >= 0.0) || !(m.q > 0.0)) fail("mortality components need w >= 0 and q > 0");
        wsum += m.w;
    }
    if (!p.mortality.empty() && std::abs(wsum - 1.0) > 1e-12) fail("mortality weights must sum to 1");
    if (!(p.T > 0.0)) fail("maturity T must be > 0");
}

/// kappa(u) = ln E[e^{u X_1}] on the real strip where it is finite.
inline double cumulant(const ModelSpec& spec, double u) {
    const double hi = spec.jumps_plus.empty() ? std::numeric_limits<double>::infinity() : spec.jumps_plus.min_real_rate();
    const double lo = spec.jumps_minus.empty() ? -std::numeric_limits<double>::infinity() : -spec.jumps_minus.min_real_rate();
    if (!(u > lo && u < hi)) throw Error("cumulant_divergent", "cumulant divergent: u outside the exponential-moment strip");
    return laplace_exponent(spec, cplx(u, 0.0)).real();
}

struct EsscherResult {
    ModelSpec tilted;
    double c_star = 0.0;
};

/// Model under the Esscher measure with parameter c (density e^{c X_t}/E e^{c X_t}).
inline ModelSpec esscher_tilt(const ModelSpec& spec, double c) {
    ModelSpec t = spec;
    t.mu = spec.mu + spec.sigma * spec.sigma * c;
    if (!spec.jumps_plus.empty()) {
        const cplx norm = spec.jumps_plus.mgf(c);
        t.lambda_plus = spec.lambda_plus * norm.real();
        for (auto& term : t.jumps_plus.terms) {
            const cplx shifted = term.rate - c;
            for (int j = 1; j <= term.order; ++j)
                term.weights[static_cast<std::size_t>(j - 1)] *= std::pow(term.rate / shifted, j) / norm;
            term.rate = shifted;
        }
    }
    if (!spec.jumps_minus.empty()) {
        const cplx norm = spec.jumps_minus.mgf(-c);
        t.lambda_minus = spec.lambda_minus * norm.real();
        for (auto& term : t.jumps_minus.terms) {
            const cplx shifted = term.rate + c;
            for (int j = 1; j <= term.order; ++j)
                term.weights[static_cast<std::size_t>(j - 1)] *= std::pow(term.rate / shifted, j) / norm;
            term.rate = shifted;
        }
    }
    return t;
}

/// Solves kappa(c+1) - kappa(c) = r + delta with delta = -fee_rate, so that
/// e^{-rt} S_t with S_t = S_0 e^{X_t - delta t} is a martingale after tilting.
inline EsscherResult esscher_calibrate(const ModelSpec& spec, const PricingSpec& pricing) {
    if (!spec.jumps_plus.empty() && !(spec.jumps_plus.min_real_rate() > 1.0))
        throw Error("invalid_pricing", "E[e^{X_t}] is infinite: the smallest up-jump rate must exceed 1");
    const double target = pricing.r - pricing.fee_rate;
    const double hi_edge = spec.jumps_plus.empty() ? std::numeric_limits<double>::infinity()
                                                   : spec.jumps_plus.min_real_rate() - 1.0;
    const double lo_edge = spec.jumps_minus.empty() ? -std::numeric_limits<double>::infinity()
                                                    : -spec.jumps_minus.min_real_rate();
    auto g = [&](double c) { return cumulant(spec, c + 1.0) - cumulant(spec, c) - target; };

    auto inner = [](double edge, double toward) {
        return edge + (toward - edge) * 1e-12 + (toward > edge ? 1.0 : -1.0) * 1e-14 * (1.0 + std::abs(edge));
    };
    double lo, hi;
    if (std::isfinite(lo_edge) && std::isfinite(hi_edge)) {
        lo = inner(lo_edge, hi_edge);
        hi = inner(hi_edge, lo_edge);
    } else {
        const double centre = std::isfinite(lo_edge) ? lo_edge + 1.0 : (std::isfinite(hi_edge) ? hi_edge - 1.0 : 0.0);
        lo = std::isfinite(lo_edge) ? inner(lo_edge, centre) : centre - 1.0;
        hi = std::isfinite(hi_edge) ? inner(hi_edge, centre) : centre + 1.0;
        for (int i = 0; i < 200 && !std::isfinite(lo_edge) && g(lo) > 0.0; ++i) lo = centre - 2.0 * (centre - lo);
        for (int i = 0; i < 200 && !std::isfinite(hi_edge) && g(hi) < 0.0; ++i) hi = centre + 2.0 * (hi - centre);
    }
    if (!(hi > lo)) throw Error("no_esscher_root", "no martingale Esscher parameter in strip");
    const double glo = g(lo), ghi = g(hi);
    if (glo == 0.0) return {esscher_tilt(spec, lo), lo};
    if (ghi == 0.0) return {esscher_tilt(spec, hi), hi};
    if ((glo > 0.0) == (ghi > 0.0)) throw Error("no_esscher_root", "no martingale Esscher parameter in strip");
    std::uintmax_t iters = 200;
    const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(a)); };
    const auto bracket = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
    double c = 0.5 * (bracket.first + bracket.second);
    // One Newton step on the smooth function tightens c to full precision.
    const double h = 1e-6;
    const double slope = (g(c + h) - g(c - h)) / (2.0 * h);
    if (slope != 0.0 && std::isfinite(slope)) {
        const double refined = c - g(c) / slope;
        if (refined > lo && refined < hi && std::abs(g(refined)) <= std::abs(g(c))) c = refined;
    }
    return {esscher_tilt(spec, c), c};
}

/// Tilted model with the fee refraction: delta = -fee_rate, b = ln(B / F0).
inline ModelSpec pricing_model(const ModelSpec& tilted, const PricingSpec& pricing) {
    ModelSpec m = tilted;
    m.delta = -pricing.fee_rate;
    m.b = std::log(pricing.B / pricing.F0);
    return m;
}

namespace detail {

/// G(F0 e^y) = alpha + beta F0 e^y on [lo, hi).
struct PayoffSegment {
    double lo, hi, alpha, beta;
};

inline std::vector<PayoffSegment> payoff_segments(const PricingSpec& p) {
    const double inf = std::numeric_limits<double>::infinity();
    const auto& g = p.payoff;
    auto ly = [&](double v) { return std::log(v / p.F0); };
    std::vector<PayoffSegment> s;
    switch (g.type) {
        case PayoffType::floor:
            if (g.K <= 0.0) return {{-inf, inf, 0.0, 1.0}};
            return {{-inf, ly(g.K), g.K, 0.0}, {ly(g.K), inf, 0.0, 1.0}};
        case PayoffType::call:
            if (g.K <= 0.0) return {{-inf, inf, -g.K, 1.0}};
            return {{ly(g.K), inf, -g.K, 1.0}};
        case PayoffType::custom: break;
    }
    const auto& t = g.table;
    s.push_back({-inf, ly(t.front().account), t.front().value, 0.0});
    if (t.size() == 1) {
        s.push_back({ly(t.front().account), inf, t.front().value, 0.0});
        return s;
    }
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double slope = (t[i + 1].value - t[i].value) / (t[i + 1].account - t[i].account);
        const double hi = i + 2 == t.size() ? inf : ly(t[i + 1].account);
        s.push_back({ly(t[i].account), hi, t[i].value - slope * t[i].account, slope});
    }
    return s;
}

}  // namespace detail

/// E[G(F_{e(q)})] for the fee-refracted tilted model (see pricing_model).
inline cplx expected_payoff_complex(const ModelSpec& model, const PricingSpec& pricing, cplx q) {
    const auto ks = build_kernels(model, q);
    const double reach = std::min(ks.roots.beta.front().real(), ks.roots.beta_hat.front().real());
    const auto segs = detail::payoff_segments(pricing);
    bool grows = false;
    for (const auto& s : segs)
        if (std::isinf(s.hi) && s.beta != 0.0) grows = true;
    if (grows && !(reach > 1.0))
        throw Error("payoff_divergent", "payoff transform divergent: E[F_{e(q)}] is infinite at this q");
    const auto f = density_pieces(model, ks, 0.0);
    cplx acc{0.0, 0.0};
    for (const auto& s : segs) {
        if (s.alpha != 0.0) acc += s.alpha * f.integrate(s.lo, s.hi, 0.0);
        if (s.beta != 0.0) acc += s.beta * pricing.F0 * f.integrate(s.lo, s.hi, 1.0);
    }
    return acc;
}

inline double expected_payoff(const ModelSpec& model, const PricingSpec& pricing, double q) {
    return detail::real_or_throw(expected_payoff_complex(model, pricing, cplx(q, 0.0)), "expected payoff");
}

/// sum_i w_i q_i / (r + q_i) E[G(F_{e(r + q_i)})]
inline double price_gmdb(const ModelSpec& model, const PricingSpec& pricing) {
    if (pricing.mortality.empty()) throw Error("invalid_pricing", "GMDB pricing needs a mortality mixture");
    double price = 0.0;
    for (const auto& m : pricing.mortality) {
        if (m.w == 0.0) continue;
        price += m.w * m.q / (pricing.r + m.q) * expected_payoff(model, pricing, pricing.r + m.q);
    }
    return price;
}

/// Inverts s -> E[G(F_{e(s + r)})] / (s + r) at the maturity.
inline double price_gmmb(const ModelSpec& model, const PricingSpec& pricing, const InversionConfig& cfg = {}) {
    auto f = [&](cplx s) { return expected_payoff_complex(model, pricing, s + pricing.r) / (s + pricing.r); };
    return invert(f, pricing.T, cfg);
}

}  // namespace refract
