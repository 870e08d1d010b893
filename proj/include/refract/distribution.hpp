#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/errors.hpp"
#include "refract/expsum.hpp"
#include "refract/kernels.hpp"
#include "refract/model.hpp"
#include "refract/polynomial.hpp"
#include "refract/wiener_hopf.hpp"

namespace refract {

namespace detail {

struct KernelPiece {
    cplx coef;
    cplx rate;
};

/// Primitive in z of c e^{phi (w - z)} * kappa e^{lambda (z - s)} evaluated at
/// z = w (moving bound) or z = h (fixed bound), written as an exp-term in w.
inline void add_bound(ExpSum& out, cplx c, cplx phi, const ExpTerm& k, bool moving, double h, double sign) {
    const cplx d = k.rate - phi;
    const cplx ck = c * k.coef;
    if (ck == cplx(0.0, 0.0)) return;
    if (std::abs(d) < 1e-9 * (1.0 + std::abs(phi)))
        throw Error("degenerate_kernel", "kernel and K_q share an exponent; perturb q or delta");
    if (moving)
        out.add(sign * ck / d, k.rate, k.anchor);
    else
        out.add(sign * ck * std::exp(k.rate * (h - k.anchor)) / d, phi, h);
}

/// I(w) = int F(w - z) k(z) dz over z in [a, w] (upper) or [w, a] (lower),
/// for F = sum c e^{phi t}; returned as a piecewise exp-sum on w > a or w < a.
inline PiecewiseExpSum convolve(std::span<const KernelPiece> F, const PiecewiseExpSum& k, double a, bool upper) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> wb;
    if (upper) {
        wb.push_back(a);
        for (double br : k.breaks)
            if (br > a && std::isfinite(br)) wb.push_back(br);
        wb.push_back(inf);
    } else {
        wb.push_back(-inf);
        for (double br : k.breaks)
            if (br < a && std::isfinite(br)) wb.push_back(br);
        wb.push_back(a);
    }
    auto out = PiecewiseExpSum::on(wb);
    for (std::size_t r = 0; r < out.pieces.size(); ++r) {
        const double rlo = wb[r], rhi = wb[r + 1];
        for (std::size_t p = 0; p < k.pieces.size(); ++p) {
            const double plo = k.breaks[p], phi_ = k.breaks[p + 1];
            bool lo_moving, hi_moving;
            double lo_fixed = 0.0, hi_fixed = 0.0;
            if (upper) {
                // z from max(a, plo) to min(w, phi_)
                if (plo >= rhi) continue;
                lo_moving = false;
                lo_fixed = std::max(a, plo);
                if (phi_ <= lo_fixed) continue;
                hi_moving = phi_ >= rhi;
                hi_fixed = phi_;
            } else {
                // z from max(w, plo) to min(a, phi_)
                if (phi_ <= rlo) continue;
                hi_moving = false;
                hi_fixed = std::min(a, phi_);
                if (plo >= hi_fixed) continue;
                lo_moving = plo <= rlo;
                lo_fixed = plo;
            }
            for (const auto& f : F)
                for (const auto& kt : k.pieces[p].terms) {
                    add_bound(out.pieces[r], f.coef, f.rate, kt, hi_moving, hi_fixed, +1.0);
                    add_bound(out.pieces[r], f.coef, f.rate, kt, lo_moving, lo_fixed, -1.0);
                }
        }
    }
    return out;
}

inline std::vector<KernelPiece> kernel_values(const std::vector<KernelTerm>& t) {
    std::vector<KernelPiece> out;
    for (const auto& k : t) out.push_back({k.value_coef, k.rate});
    return out;
}

inline std::vector<KernelPiece> kernel_derivatives(const std::vector<KernelTerm>& t) {
    std::vector<KernelPiece> out;
    for (const auto& k : t) out.push_back({k.derivative_coef, k.rate});
    return out;
}

inline double probability_or_throw(cplx v, const char* what) {
    const double r = real_or_throw(v, what);
    if (r < -1e-8 || r > 1.0 + 1e-8)
        throw Error("out_of_range", std::string(what) + " outside [0,1] beyond tolerance");
    return std::clamp(r, 0.0, 1.0);
}

}  // namespace detail

/// P_x(U_{e(q)} > y) as a piecewise exp-sum in w = y - x on w >= b - x.
inline PiecewiseExpSum upper_tail_pieces(const ModelSpec& spec, const KernelSet& ks, double x) {
    const double a = spec.b - x;
    const auto kd = kq_density_pieces(ks);
    const auto kc = kq_cdf_pieces(ks);
    const auto f = detail::kernel_values(ks.f1);
    auto conv = detail::convolve(f, kd, a, true);
    for (std::size_t r = 0; r < conv.pieces.size(); ++r) {
        ExpSum s;
        s.add(1.0, 0.0, 0.0);
        const double mid = std::isinf(conv.breaks[r + 1]) ? conv.breaks[r] + 1.0 : 0.5 * (conv.breaks[r] + conv.breaks[r + 1]);
        s.append(kc.pieces[mid < 0.0 ? 0 : 1], -1.0);
        s.append(conv.pieces[r], -1.0);
        conv.pieces[r] = std::move(s);
    }
    return conv;
}

/// P_x(U_{e(q)} < y) as a piecewise exp-sum in w = y - x on w <= b - x.
inline PiecewiseExpSum lower_tail_pieces(const ModelSpec& spec, const KernelSet& ks, double x) {
    const double a = spec.b - x;
    const auto kd = kq_density_pieces(ks);
    const auto kc = kq_cdf_pieces(ks);
    const auto f = detail::kernel_values(ks.f2);
    auto conv = detail::convolve(f, kd, a, false);
    for (std::size_t r = 0; r < conv.pieces.size(); ++r) {
        ExpSum s;
        const double mid = std::isinf(conv.breaks[r]) ? conv.breaks[r + 1] - 1.0 : 0.5 * (conv.breaks[r] + conv.breaks[r + 1]);
        s.append(kc.pieces[mid < 0.0 ? 0 : 1]);
        s.append(conv.pieces[r], -1.0);
        conv.pieces[r] = std::move(s);
    }
    return conv;
}

/// Density of U_{e(q)} under P_x as a piecewise exp-sum in y over the whole line.
inline PiecewiseExpSum density_pieces(const ModelSpec& spec, const KernelSet& ks, double x) {
    const double a = spec.b - x;
    const auto kd = kq_density_pieces(ks);
    const auto lower = detail::convolve(detail::kernel_derivatives(ks.f2), kd, a, false);
    const auto upper = detail::convolve(detail::kernel_derivatives(ks.f1), kd, a, true);
    auto left = lower;
    for (std::size_t r = 0; r < left.pieces.size(); ++r) {
        ExpSum s;
        const double mid = std::isinf(left.breaks[r]) ? left.breaks[r + 1] - 1.0 : 0.5 * (left.breaks[r] + left.breaks[r + 1]);
        s.append(kd.pieces[mid < 0.0 ? 0 : 1], ks.f2_at_zero + 1.0);
        s.append(lower.pieces[r], -1.0);
        left.pieces[r] = std::move(s);
    }
    auto right = upper;
    for (std::size_t r = 0; r < right.pieces.size(); ++r) {
        ExpSum s;
        const double mid = std::isinf(right.breaks[r + 1]) ? right.breaks[r] + 1.0 : 0.5 * (right.breaks[r] + right.breaks[r + 1]);
        s.append(kd.pieces[mid < 0.0 ? 0 : 1], ks.f1_at_zero + 1.0);
        s.append(upper.pieces[r]);
        right.pieces[r] = std::move(s);
    }
    return left.joined(right).shifted(x);
}

inline cplx cdf_upper_complex(const ModelSpec& spec, const KernelSet& ks, double x, double y) {
    if (y < spec.b) throw Error("domain", "y < b: use cdf_lower");
    const double a = spec.b - x;
    if (std::abs(y - spec.b) < 1e-12) return 1.0 - kq_cdf_complex(ks, a);
    return upper_tail_pieces(spec, ks, x)(y - x);
}

inline cplx cdf_lower_complex(const ModelSpec& spec, const KernelSet& ks, double x, double y) {
    if (y > spec.b) throw Error("domain", "y > b: use cdf_upper");
    const double a = spec.b - x;
    if (std::abs(y - spec.b) < 1e-12) return kq_cdf_complex(ks, a);
    return lower_tail_pieces(spec, ks, x)(y - x);
}

/// P_x(U_{e(q)} > y) for y >= b.
inline double cdf_upper(const ModelSpec& spec, const KernelSet& ks, const QuerySpec& query) {
    return detail::probability_or_throw(cdf_upper_complex(spec, ks, query.x, query.y), "upper tail probability");
}

/// P_x(U_{e(q)} < y) for y <= b.
inline double cdf_lower(const ModelSpec& spec, const KernelSet& ks, const QuerySpec& query) {
    return detail::probability_or_throw(cdf_lower_complex(spec, ks, query.x, query.y), "lower tail probability");
}

/// P_x(U_{e(q)} <= y) for any y.
inline cplx cdf_complex(const ModelSpec& spec, const KernelSet& ks, double x, double y) {
    return y <= spec.b ? cdf_lower_complex(spec, ks, x, y) : 1.0 - cdf_upper_complex(spec, ks, x, y);
}

inline double cdf(const ModelSpec& spec, const KernelSet& ks, double x, double y) {
    return detail::probability_or_throw(cdf_complex(spec, ks, x, y), "distribution function");
}

inline double pdf(const ModelSpec& spec, const KernelSet& ks, const QuerySpec& query) {
    const cplx v = density_pieces(spec, ks, query.x)(query.y);
    const double r = detail::real_or_throw(v, "density");
    if (r < -1e-8) throw Error("out_of_range", "negative density beyond tolerance");
    return std::max(r, 0.0);
}

/// int_0^inf e^{-qt} E_x[int_0^t 1{U_s < y} ds] dt = P_x(U_{e(q)} < y) / q^2.
inline cplx occupation_transform_complex(const ModelSpec& spec, const KernelSet& ks, double x, double y) {
    return cdf_complex(spec, ks, x, y) / (ks.q() * ks.q());
}

inline double occupation_transform(const ModelSpec& spec, const KernelSet& ks, const QuerySpec& query) {
    const double p = cdf(spec, ks, query.x, query.y);
    const cplx q = ks.q();
    return detail::real_or_throw(p / (q * q), "occupation transform");
}

/// q -> P_x(U_{e(q)} <= y) / q, the Laplace transform in t of P_x(U_t <= y),
/// evaluable at complex q with Re q > 0.
inline std::function<cplx(cplx)> fixed_time_cdf_transform(const ModelSpec& spec, double x, double y) {
    return [spec, x, y](cplx q) { return cdf_complex(spec, build_kernels(spec, q), x, y) / q; };
}

// ---------------------------------------------------------------------------
// Alternative representation of x -> P_x(U_{e(q)} > y) for y > b.

struct RootExpansionCoefficients {
    std::vector<cplx> J;
    std::vector<cplx> H_hat;
    std::vector<cplx> Q_hat;
    std::vector<cplx> P_hat;
    std::vector<cplx> P_hat_star;
    double b = 0.0;
    double y = 0.0;
    std::vector<cplx> beta, beta_hat, gamma_hat;

    /// V(x) = P_x(U_{e(q)} > y).
    cplx operator()(double x) const {
        cplx acc{0.0, 0.0};
        if (x < b) {
            for (std::size_t i = 0; i < J.size(); ++i) acc += J[i] * std::exp(beta[i] * (x - b));
            return acc;
        }
        if (x <= y) {
            for (std::size_t i = 0; i < H_hat.size(); ++i) acc += H_hat[i] * std::exp(beta_hat[i] * (x - y));
        } else {
            acc = 1.0;
            for (std::size_t i = 0; i < Q_hat.size(); ++i) acc += Q_hat[i] * std::exp(gamma_hat[i] * (y - x));
        }
        for (std::size_t i = 0; i < P_hat.size(); ++i) acc += P_hat[i] * std::exp(gamma_hat[i] * (b - x));
        return acc;
    }
};

inline RootExpansionCoefficients root_expansion_coefficients(const ModelSpec& spec, const RootSet& roots, double y) {
    if (!(y > spec.b)) throw Error("domain", "the alternative representation needs y > b");
    const auto Ch = factor_sup_Y(spec, roots).residues;
    const auto Dh = factor_inf_Y(spec, roots).residues;
    const auto& b = roots.beta;
    const auto& bh = roots.beta_hat;
    const auto& gh = roots.gamma_hat;

    RootExpansionCoefficients pc;
    pc.b = spec.b;
    pc.y = y;
    pc.beta = b;
    pc.beta_hat = bh;
    pc.gamma_hat = gh;

    for (std::size_t k = 0; k < bh.size(); ++k) {
        cplx s{0.0, 0.0};
        for (std::size_t j = 0; j < gh.size(); ++j) s += Dh[j] / (bh[k] + gh[j]);
        pc.H_hat.push_back(Ch[k] / bh[k] * s);
    }
    for (std::size_t k = 0; k < gh.size(); ++k) {
        cplx s{0.0, 0.0}, star{0.0, 0.0};
        for (std::size_t i = 0; i < bh.size(); ++i) {
            s += Ch[i] / (bh[i] * (bh[i] + gh[k]));
            star -= Ch[i] / bh[i] * Dh[k] / (bh[i] + gh[k]) * std::exp(bh[i] * (spec.b - y));
        }
        pc.Q_hat.push_back(Dh[k] * s - Dh[k] / gh[k]);
        pc.P_hat_star.push_back(star);
    }

    // L(x) = N(x) / (prod (x - beta_i) prod (x + gamma_hat_i)) * S(x), with
    // S(x) = sum_k W_k (-H_k) e^{beta_hat_k (b - y)} / (x - beta_hat_k).
    auto numerator = [&](cplx x) {
        cplx n{1.0, 0.0};
        for (const auto& t : spec.jumps_plus.terms) n *= std::pow(x - t.rate, t.order);
        for (const auto& t : spec.jumps_minus.terms) n *= std::pow(x + t.rate, t.order);
        return n;
    };
    std::vector<cplx> weights(bh.size());
    for (std::size_t k = 0; k < bh.size(); ++k) {
        cplx w{1.0, 0.0};
        for (const auto& bi : b) w *= bh[k] - bi;
        for (const auto& gi : gh) w *= bh[k] + gi;
        w /= numerator(bh[k]);
        weights[k] = w * (-pc.H_hat[k]) * std::exp(bh[k] * (spec.b - y));
    }
    auto S = [&](cplx x) {
        cplx s{0.0, 0.0};
        for (std::size_t k = 0; k < bh.size(); ++k) s += weights[k] / (x - bh[k]);
        return s;
    };
    auto check_separated = [](cplx u, cplx v) {
        if (std::abs(u - v) < 1e-8 * (1.0 + std::abs(u)))
            throw Error("clustered_poles", "residue extraction at clustered poles; perturb q");
    };
    for (std::size_t i = 0; i < b.size(); ++i) {
        cplx den{1.0, 0.0};
        for (std::size_t l = 0; l < b.size(); ++l)
            if (l != i) den *= b[i] - b[l];
        for (const auto& g : gh) den *= b[i] + g;
        for (const auto& v : bh) check_separated(b[i], v);
        pc.J.push_back(numerator(b[i]) / den * S(b[i]));
    }
    for (std::size_t i = 0; i < gh.size(); ++i) {
        cplx den{1.0, 0.0};
        for (const auto& bl : b) den *= -gh[i] - bl;
        for (std::size_t l = 0; l < gh.size(); ++l)
            if (l != i) den *= gh[l] - gh[i];
        pc.P_hat.push_back(-numerator(-gh[i]) / den * S(-gh[i]));
    }
    return pc;
}

inline double upper_tail_root_expansion(const ModelSpec& spec, const RootSet& roots, const QuerySpec& query) {
    const auto pc = root_expansion_coefficients(spec, roots, query.y);
    return detail::probability_or_throw(pc(query.x), "upper tail probability");
}

// ---------------------------------------------------------------------------
// First passage with overshoot.

/// E[e^{-q tau} ; overshoot in dy] = atom * delta_0(dy) + sum_kj coeffs[k][j-1] * Erlang(j, rate_k)(dy).
struct FirstPassage {
    cplx atom{0.0, 0.0};
    std::vector<cplx> rates;
    std::vector<std::vector<cplx>> coeffs;

    /// E[e^{-q tau - s * overshoot}]
    cplx transform(cplx s) const {
        cplx acc = atom;
        for (std::size_t k = 0; k < rates.size(); ++k) {
            const cplx ratio = rates[k] / (rates[k] + s);
            cplx p = ratio;
            for (const auto& c : coeffs[k]) {
                acc += c * p;
                p *= ratio;
            }
        }
        return acc;
    }

    /// E[e^{-q tau}]
    cplx laplace_of_time() const { return transform(0.0); }
};

namespace detail {

inline FirstPassage first_passage_impl(const std::vector<cplx>& roots, const std::vector<cplx>& residues,
                                       const std::vector<ErlangTerm>& jumps, double level) {
    FirstPassage fp;
    std::vector<RepeatedPole> poles;
    cplx scale{1.0, 0.0};
    for (const auto& t : jumps) {
        poles.push_back({-t.rate, t.order});
        fp.rates.push_back(t.rate);
        fp.coeffs.emplace_back(static_cast<std::size_t>(t.order), cplx(0.0, 0.0));
        scale *= std::pow(t.rate, t.order);
    }
    for (const auto& r : roots) scale /= r;
    for (const auto& t : jumps)
        for (const auto& r : roots)
            if (std::abs(t.rate - r) < 1e-8 * (1.0 + std::abs(r)))
                throw Error("clustered_poles", "jump rate and root too close for overshoot expansion");

    for (std::size_t i = 0; i < roots.size(); ++i) {
        std::vector<cplx> zeros;
        for (std::size_t l = 0; l < roots.size(); ++l)
            if (l != i) zeros.push_back(-roots[l]);
        const auto pf = partial_fractions(scale, zeros, poles);
        const cplx w = residues[i] * std::exp(-roots[i] * level);
        fp.atom += w * pf.constant;
        for (std::size_t k = 0; k < jumps.size(); ++k)
            for (int j = 1; j <= jumps[k].order; ++j)
                fp.coeffs[k][static_cast<std::size_t>(j - 1)] +=
                    w * pf.coeffs[k][static_cast<std::size_t>(j - 1)] / std::pow(jumps[k].rate, j);
    }
    return fp;
}

}  // namespace detail

/// X started at 0 passing above level x >= 0.
inline FirstPassage first_passage_up(const ModelSpec& spec, const RootSet& roots, double x) {
    if (x < 0.0) throw Error("domain", "upward first passage needs x >= 0");
    const auto f = factor_sup_X(spec, roots);
    return detail::first_passage_impl(roots.beta, f.residues, spec.jumps_plus.terms, x);
}

/// Y started at 0 passing below level x <= 0; overshoot measured as a positive undershoot.
inline FirstPassage first_passage_down(const ModelSpec& spec, const RootSet& roots, double x) {
    if (x > 0.0) throw Error("domain", "downward first passage needs x <= 0");
    const auto f = factor_inf_Y(spec, roots);
    return detail::first_passage_impl(roots.gamma_hat, f.residues, spec.jumps_minus.terms, -x);
}

}  // namespace refract
