#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "refract/errors.hpp"

namespace refract {

using cplx = std::complex<double>;

enum class InversionMethod { euler, gaver_stehfest };

struct InversionConfig {
    InversionMethod method = InversionMethod::euler;
    int terms = 40;
    double precision_target = 1e-8;
};

inline void check_config(const InversionConfig& cfg) {
    if (cfg.method == InversionMethod::euler) {
        if (cfg.terms < 20 || cfg.terms > 60) throw Error("invalid_config", "euler inversion needs 20..60 terms");
        if (!(cfg.precision_target > 0.0 && cfg.precision_target < 1.0))
            throw Error("invalid_config", "precision target must lie in (0,1)");
    } else if (cfg.terms < 8 || cfg.terms > 20 || cfg.terms % 2 != 0) {
        throw Error("invalid_config", "Gaver-Stehfest inversion needs an even number of terms in 8..20");
    }
}

/// Abate-Whitt Euler summation of the Bromwich integral; f must accept
/// complex arguments with positive real part and satisfy f(conj s) = conj f(s).
inline double invert_euler(const std::function<cplx(cplx)>& f, double t, int terms, double precision_target) {
    constexpr int M = 11;
    const int n = terms - M;
    const double A = std::log(1.0 / precision_target);
    const double scale = std::exp(A / 2.0) / t;
    std::vector<double> partial(static_cast<std::size_t>(n + M + 1));
    double sum = 0.5 * f(cplx(A / (2.0 * t), 0.0)).real();
    partial[0] = sum;
    for (int k = 1; k <= n + M; ++k) {
        const cplx s(A / (2.0 * t), k * std::numbers::pi / t);
        sum += (k % 2 ? -1.0 : 1.0) * f(s).real();
        partial[static_cast<std::size_t>(k)] = sum;
    }
    double result = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= M; ++j) {
        result += binom * partial[static_cast<std::size_t>(n + j)];
        binom *= static_cast<double>(M - j) / static_cast<double>(j + 1);
    }
    return scale * result / std::pow(2.0, M);
}

/// Gaver-Stehfest weights in extended precision.
inline std::vector<long double> stehfest_weights(int N) {
    auto fact = [](int k) {
        long double r = 1.0L;
        for (int i = 2; i <= k; ++i) r *= i;
        return r;
    };
    const int half = N / 2;
    std::vector<long double> v(static_cast<std::size_t>(N));
    for (int k = 1; k <= N; ++k) {
        long double s = 0.0L;
        for (int j = (k + 1) / 2; j <= std::min(k, half); ++j)
            s += std::pow(static_cast<long double>(j), half) * fact(2 * j) /
                 (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
        v[static_cast<std::size_t>(k - 1)] = ((k + half) % 2 ? -1.0L : 1.0L) * s;
    }
    return v;
}

inline double invert_gaver_stehfest(const std::function<double(double)>& f, double t, int N) {
    const auto v = stehfest_weights(N);
    const long double ln2 = std::numbers::ln2_v<long double>;
    long double acc = 0.0L;
    for (int k = 1; k <= N; ++k) acc += v[static_cast<std::size_t>(k - 1)] * f(static_cast<double>(k * ln2 / t));
    return static_cast<double>(acc * ln2 / t);
}

/// Inverts a transform evaluated through the complex-capable callback.
inline double invert(const std::function<cplx(cplx)>& f, double t, const InversionConfig& cfg = {}) {
    if (!(t > 0.0)) throw Error("domain", "inversion time must be positive");
    check_config(cfg);
    if (cfg.method == InversionMethod::euler) return invert_euler(f, t, cfg.terms, cfg.precision_target);
    return invert_gaver_stehfest([&](double q) { return f(cplx(q, 0.0)).real(); }, t, cfg.terms);
}

struct VerifiedInversion {
    double value = 0.0;
    double euler = 0.0;
    double gaver = 0.0;
};

/// Runs both methods and fails when they disagree beyond max(1e-6, 1e-4 |value|).
inline VerifiedInversion invert_verified(const std::function<cplx(cplx)>& f, double t, int euler_terms = 40,
                                         int gaver_terms = 16) {
    VerifiedInversion r;
    r.euler = invert(f, t, {InversionMethod::euler, euler_terms, 1e-8});
    r.gaver = invert(f, t, {InversionMethod::gaver_stehfest, gaver_terms, 1e-8});
    r.value = r.euler;
    if (std::abs(r.euler - r.gaver) > std::max(1e-6, 1e-4 * std::abs(r.euler))) {
        std::ostringstream os;
        os.precision(10);
        os << "inversion methods disagree: euler " << r.euler << " vs gaver-stehfest " << r.gaver;
        throw Error("inversion_disagreement", os.str());
    }
    return r;
}

}  // namespace refract
