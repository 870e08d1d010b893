#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "refract/mc.hpp"
#include "refract/pricing.hpp"

using namespace refract;

namespace {

PricingSpec base_pricing() {
    PricingSpec p;
    p.r = 0.04;
    p.F0 = 100.0;
    p.B = 120.0;
    p.fee_rate = 0.02;
    p.payoff.type = PayoffType::floor;
    p.payoff.K = 100.0;
    p.mortality = {{1.0, 0.05}};
    p.T = 1.0;
    return p;
}

PricingSpec constant_payoff(PricingSpec p) {
    p.payoff.type = PayoffType::custom;
    p.payoff.table = {{50.0, 1.0}};
    return p;
}

PricingSpec linear_payoff(PricingSpec p) {
    p.payoff.type = PayoffType::call;
    p.payoff.K = 0.0;
    return p;
}

ModelSpec calibrated(const ModelSpec& m, const PricingSpec& p) {
    return pricing_model(esscher_calibrate(m, p).tilted, p);
}

}  // namespace

TEST(Cumulant, Values) {
    EXPECT_EQ(cumulant(oracle::kou_reference(), 0.0), 0.0);
    EXPECT_NEAR(cumulant(oracle::brownian(0.05, 0.2, 0.0), 1.0), 0.07, 1e-15);
    EXPECT_THROW(cumulant(oracle::kou_reference(), 3.0), Error);
    EXPECT_THROW(cumulant(oracle::kou_reference(), -2.5), Error);
    try {
        cumulant(oracle::kou_reference(), 3.5);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "cumulant_divergent");
    }
}

TEST(Cumulant, KouMatchesSimulation) {
    const auto m = oracle::kou_reference();
    SimConfig cfg;
    cfg.paths = 400000;
    const auto e = estimate_exponential_moment(m, cfg, 0.5);
    EXPECT_TRUE(within_se(std::exp(cumulant(m, 0.5)), e)) << std::exp(cumulant(m, 0.5)) << " vs " << e.value;
}

TEST(Esscher, BrownianClosedForm) {
    auto p = base_pricing();
    const auto res = esscher_calibrate(oracle::brownian(0.05, 0.2, 0.0), p);
    EXPECT_NEAR(res.c_star, -1.25, 1e-10);
    EXPECT_NEAR(cumulant(res.tilted, 1.0), p.r - p.fee_rate, 1e-10);
}

TEST(Esscher, KouMartingaleAndShiftIdentity) {
    const auto m = oracle::kou_reference();
    const auto p = base_pricing();
    const auto res = esscher_calibrate(m, p);
    EXPECT_NEAR(cumulant(res.tilted, 1.0), p.r - p.fee_rate, 1e-10);
    for (double u : {0.2, 0.5, -0.4})
        EXPECT_NEAR(cumulant(res.tilted, u), cumulant(m, u + res.c_star) - cumulant(m, res.c_star), 1e-10);
    EXPECT_TRUE(validate_model(res.tilted).ok);
}

TEST(Esscher, RandomModelsStayValid) {
    std::mt19937_64 rng(43);
    int calibrated_count = 0;
    for (int k = 0; k < 20; ++k) {
        const auto m = oracle::random_model(rng);
        if (!m.jumps_plus.empty() && m.jumps_plus.min_real_rate() <= 1.0) continue;
        const auto res = esscher_calibrate(m, base_pricing());
        EXPECT_TRUE(validate_model(res.tilted).ok);
        EXPECT_NEAR(cumulant(res.tilted, 1.0), 0.02, 1e-10);
        for (double u : {0.2, 0.5})
            EXPECT_NEAR(cumulant(res.tilted, u), cumulant(m, u + res.c_star) - cumulant(m, res.c_star), 1e-10);
        ++calibrated_count;
    }
    EXPECT_GT(calibrated_count, 10);
}

TEST(Esscher, HeavyUpJumpsRejected) {
    auto m = oracle::kou_reference();
    m.jumps_plus = exponential_jumps(JumpSide::positive, 0.9);
    EXPECT_THROW(esscher_calibrate(m, base_pricing()), Error);
}

TEST(Payoff, Shapes) {
    Payoff g;
    g.type = PayoffType::floor;
    g.K = 100.0;
    EXPECT_EQ(g(80.0), 100.0);
    EXPECT_EQ(g(130.0), 130.0);
    g.type = PayoffType::call;
    EXPECT_EQ(g(80.0), 0.0);
    EXPECT_EQ(g(130.0), 30.0);
    g.type = PayoffType::custom;
    g.table = {{50.0, 60.0}, {100.0, 100.0}, {150.0, 120.0}};
    EXPECT_EQ(g(10.0), 60.0);
    EXPECT_EQ(g(75.0), 80.0);
    EXPECT_EQ(g(125.0), 110.0);
    EXPECT_EQ(g(200.0), 140.0);
}

TEST(Pricing, ValidationErrors) {
    auto p = base_pricing();
    p.F0 = -1.0;
    EXPECT_THROW(validate_pricing(p), Error);
    p = base_pricing();
    p.mortality = {{0.5, 0.05}};
    EXPECT_THROW(validate_pricing(p), Error);
    p = base_pricing();
    p.payoff.type = PayoffType::custom;
    p.payoff.table = {{50.0, 1.0}, {100.0, 2.0}, {150.0, 1.0}};
    EXPECT_THROW(validate_pricing(p), Error);
}

TEST(Pricing, ConstantPayoffHasUnitExpectation) {
    const auto p = constant_payoff(base_pricing());
    const auto m = calibrated(oracle::kou_reference(), p);
    for (double q : {0.05, 0.3, 2.0}) EXPECT_NEAR(expected_payoff(m, p, q), 1.0, 1e-10);
}

TEST(Pricing, LinearPayoffWithoutFeeIsGeometricMoment) {
    auto p = linear_payoff(base_pricing());
    p.fee_rate = 0.0;
    const auto m = calibrated(oracle::kou_reference(), p);
    for (double q : {0.1, 0.5}) EXPECT_NEAR(expected_payoff(m, p, q), p.F0 * q / (q - p.r), 1e-8);
}

TEST(Pricing, LinearPayoffWithFeeMatchesDensityQuadrature) {
    const auto p = linear_payoff(base_pricing());
    const auto m = calibrated(oracle::kou_reference(), p);
    const double q = 0.3;
    const auto ks = build_kernels(m, cplx(q, 0.0));
    const double numeric = oracle::integrate([&](double y) { return p.F0 * std::exp(y) * pdf(m, ks, {q, 0.0, y}); }, -40.0, m.b) +
                           oracle::integrate([&](double y) { return p.F0 * std::exp(y) * pdf(m, ks, {q, 0.0, y}); }, m.b, 40.0);
    EXPECT_NEAR(expected_payoff(m, p, q), numeric, 1e-8 * numeric);
}

TEST(Pricing, CustomTableMatchesQuadrature) {
    auto p = base_pricing();
    p.payoff.type = PayoffType::custom;
    p.payoff.table = {{60.0, 90.0}, {100.0, 100.0}, {140.0, 150.0}};
    const auto m = calibrated(oracle::kou_reference(), p);
    const double q = 0.3;
    const auto ks = build_kernels(m, cplx(q, 0.0));
    auto integrand = [&](double y) { return p.payoff(p.F0 * std::exp(y)) * pdf(m, ks, {q, 0.0, y}); };
    double numeric = 0.0;
    const std::vector<double> cuts{-40.0, std::log(0.6), 0.0, m.b, std::log(1.4), 40.0};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) numeric += oracle::integrate(integrand, cuts[i], cuts[i + 1]);
    EXPECT_NEAR(expected_payoff(m, p, q), numeric, 1e-8 * numeric);
}

TEST(Pricing, DivergentPayoffTransformRejected) {
    const auto p = linear_payoff(base_pricing());
    const auto m = calibrated(oracle::kou_reference(), p);
    EXPECT_THROW(expected_payoff(m, p, 0.01), Error);
}

TEST(Pricing, GmdbConstantPayoff) {
    auto p = constant_payoff(base_pricing());
    const auto m = calibrated(oracle::kou_reference(), p);
    EXPECT_NEAR(price_gmdb(m, p), 0.05 / (0.04 + 0.05), 1e-12);
    p.mortality = {{0.5, 0.05}, {0.5, 0.05}};
    EXPECT_NEAR(price_gmdb(m, p), 0.05 / (0.04 + 0.05), 1e-12);
    p.mortality = {{0.3, 0.02}, {0.7, 0.1}};
    EXPECT_NEAR(price_gmdb(m, p), 0.3 * 0.02 / 0.06 + 0.7 * 0.1 / 0.14, 1e-12);
}

TEST(Pricing, GmdbEqualComponentsMatchSingle) {
    auto p = base_pricing();
    const auto m = calibrated(oracle::kou_reference(), p);
    const double single = price_gmdb(m, p);
    p.mortality = {{0.4, 0.05}, {0.6, 0.05}};
    EXPECT_NEAR(price_gmdb(m, p), single, 1e-10 * single);
}

TEST(Pricing, GmmbConstantPayoffIsDiscountFactor) {
    auto p = constant_payoff(base_pricing());
    const auto m = calibrated(oracle::kou_reference(), p);
    for (double T : {1.0, 5.0}) {
        p.T = T;
        EXPECT_NEAR(price_gmmb(m, p), std::exp(-p.r * T), 1e-6);
    }
}

TEST(Pricing, GmmbLinearPayoffWithoutFeeIsMartingale) {
    auto p = linear_payoff(base_pricing());
    p.fee_rate = 0.0;
    p.T = 2.0;
    const auto m = calibrated(oracle::kou_reference(), p);
    EXPECT_NEAR(price_gmmb(m, p), p.F0, 1e-5);
}

TEST(Pricing, PricesNonincreasingInFee) {
    double prev_db = std::numeric_limits<double>::infinity(), prev_mb = prev_db;
    for (double fee : {0.01, 0.02, 0.03}) {
        auto p = base_pricing();
        p.fee_rate = fee;
        const auto m = calibrated(oracle::kou_reference(), p);
        const double db = price_gmdb(m, p), mb = price_gmmb(m, p);
        EXPECT_LE(db, prev_db + 1e-8);
        EXPECT_LE(mb, prev_mb + 1e-8);
        prev_db = db;
        prev_mb = mb;
    }
}

TEST(Pricing, FloorPayoffMatchesSimulation) {
    // Account term simulated under the share measure: e^{-rT} F_T has infinite variance otherwise.
    const auto p = base_pricing();
    const auto ess = esscher_calibrate(oracle::kou_reference(), p);
    const auto m = pricing_model(ess.tilted, p);
    const auto share = pricing_model(esscher_tilt(ess.tilted, 1.0), p);
    SimConfig cfg;
    cfg.paths = 40000;
    cfg.seed = 12;
    auto put = [&](double T, double u) { return std::exp(-p.r * T) * std::max(p.payoff.K - p.F0 * std::exp(u), 0.0); };
    auto account = [&](double, double, double below) { return p.F0 * std::exp(-p.fee_rate * below); };
    auto simulate = [&](const std::function<double(mc::Draws&)>& horizon) {
        const auto a = estimate_horizon_functional(m, cfg, 0.0, horizon, put);
        const auto b = estimate_horizon_occupation(share, cfg, 0.0, share.b, horizon, account);
        return McEstimate{a.value + b.value, std::hypot(a.std_error, b.std_error), a.paths};
    };
    const auto mb = simulate([&](mc::Draws&) { return p.T; });
    const double gmmb = price_gmmb(m, p);
    EXPECT_TRUE(within_se(gmmb, mb)) << gmmb << " vs " << mb.value << " +- " << mb.std_error;
    const auto db = simulate([&](mc::Draws& d) { return d.exponential(0.05); });
    const double gmdb = price_gmdb(m, p);
    EXPECT_TRUE(within_se(gmdb, db)) << gmdb << " vs " << db.value << " +- " << db.std_error;
}

TEST(Pricing, ShareMeasureAccountTermMatchesAnalytic) {
    // F0 E_share[e^{-fee * time below B}] equals the analytic price of the linear payoff.
    auto p = linear_payoff(base_pricing());
    const auto ess = esscher_calibrate(oracle::kou_reference(), p);
    const auto m = pricing_model(ess.tilted, p);
    const auto share = pricing_model(esscher_tilt(ess.tilted, 1.0), p);
    SimConfig cfg;
    cfg.paths = 20000;
    cfg.seed = 13;
    const auto e = estimate_horizon_occupation(share, cfg, 0.0, share.b, [](mc::Draws&) { return 1.0; },
                                               [&](double, double, double below) { return p.F0 * std::exp(-p.fee_rate * below); });
    EXPECT_TRUE(within_se(price_gmmb(m, p), e)) << price_gmmb(m, p) << " vs " << e.value;
}
