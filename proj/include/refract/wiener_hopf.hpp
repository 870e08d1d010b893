#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/errors.hpp"
#include "refract/model.hpp"

namespace refract {

/// constant + sum_k residues[k] / (s - poles[k])
struct PoleResidueForm {
    std::vector<cplx> poles;
    std::vector<cplx> residues;
    cplx constant{0.0, 0.0};

    cplx operator()(cplx s) const {
        cplx acc = constant;
        for (std::size_t k = 0; k < poles.size(); ++k) acc += residues[k] / (s - poles[k]);
        return acc;
    }
};

enum class ExtremeSide { sup, inf };

namespace detail {

/// prod_k ((s + a_k)/a_k)^{orders_k} * prod_l r_l / (s + r_l) in pole-residue form.
inline PoleResidueForm exponential_factor(const std::vector<cplx>& r, const std::vector<ErlangTerm>& jumps) {
    PoleResidueForm f;
    for (std::size_t i = 0; i < r.size(); ++i) {
        cplx c = r[i];
        for (const auto& t : jumps) c *= std::pow((t.rate - r[i]) / t.rate, t.order);
        for (std::size_t l = 0; l < r.size(); ++l)
            if (l != i) c *= r[l] / (r[l] - r[i]);
        f.poles.push_back(-r[i]);
        f.residues.push_back(c);
    }
    return f;
}

}  // namespace detail

/// E[e^{-s sup X_{e(q)}}]
inline PoleResidueForm factor_sup_X(const ModelSpec& spec, const RootSet& roots) {
    return detail::exponential_factor(roots.beta, spec.jumps_plus.terms);
}

/// E[e^{-s sup Y_{e(q)}}]
inline PoleResidueForm factor_sup_Y(const ModelSpec& spec, const RootSet& roots) {
    return detail::exponential_factor(roots.beta_hat, spec.jumps_plus.terms);
}

/// E[e^{s inf X_{e(q)}}]
inline PoleResidueForm factor_inf_X(const ModelSpec& spec, const RootSet& roots) {
    return detail::exponential_factor(roots.gamma, spec.jumps_minus.terms);
}

/// E[e^{s inf Y_{e(q)}}]
inline PoleResidueForm factor_inf_Y(const ModelSpec& spec, const RootSet& roots) {
    return detail::exponential_factor(roots.gamma_hat, spec.jumps_minus.terms);
}

struct WienerHopfFactors {
    PoleResidueForm sup_X, sup_Y, inf_X, inf_Y;
};

inline WienerHopfFactors build_factors(const ModelSpec& spec, const RootSet& roots) {
    return {factor_sup_X(spec, roots), factor_sup_Y(spec, roots), factor_inf_X(spec, roots),
            factor_inf_Y(spec, roots)};
}

/// Density of the extreme whose transform is `factor`: sum_k C_k e^{-beta_k v}
/// for the supremum (v >= 0) or sum_k D_k e^{gamma_k v} for the infimum (v <= 0).
inline cplx extreme_density_complex(const PoleResidueForm& factor, ExtremeSide side, double v) {
    if (side == ExtremeSide::sup && v < 0.0) throw Error("domain", "supremum density needs v >= 0");
    if (side == ExtremeSide::inf && v > 0.0) throw Error("domain", "infimum density needs v <= 0");
    const double sign = side == ExtremeSide::sup ? 1.0 : -1.0;
    cplx acc{0.0, 0.0};
    for (std::size_t k = 0; k < factor.poles.size(); ++k) acc += factor.residues[k] * std::exp(sign * factor.poles[k] * v);
    return acc;
}

inline double extreme_density(const PoleResidueForm& factor, ExtremeSide side, double v) {
    const cplx d = extreme_density_complex(factor, side, v);
    if (std::abs(d.imag()) > 1e-10 * std::max(1.0, std::abs(d.real())))
        throw Error("complex_output", "extreme density has a non-negligible imaginary part");
    return d.real();
}

/// E[e^{i theta X_{e(q)}}] assembled from the sup and inf factors of X.
inline cplx characteristic_from_factors(const WienerHopfFactors& f, double theta) {
    const cplx i{0.0, 1.0};
    return f.sup_X(-i * theta) * f.inf_X(i * theta);
}

}  // namespace refract
