#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/distribution.hpp"
#include "refract/errors.hpp"
#include "refract/io.hpp"
#include "refract/kernels.hpp"
#include "refract/laplace.hpp"
#include "refract/mc.hpp"
#include "refract/model.hpp"
#include "refract/pricing.hpp"
#include "refract/selfcheck.hpp"
#include "refract/wiener_hopf.hpp"

namespace refract::cli {

struct Options {
    std::string model;
    std::string pricing;
    double q = 0.0;
    double x = 0.0;
    std::optional<double> y;
    std::string y_grid;
    double t = 1.0;
    std::string method = "thm4";
    std::string inversion = "euler";
    int terms = 0;
    std::int64_t paths = 200000;
    double dt = 1e-3;
    std::uint64_t seed = 20240601;
    int threads = 1;
    bool verify = false;
    std::string out;
    std::string price_kind;
};

inline int default_threads() {
    if (const char* e = std::getenv("REFRACT_THREADS"); e && *e) {
        const int n = std::atoi(e);
        if (n > 0) return n;
    }
    return 1;
}

/// Parses "A:B:N" into N linearly spaced points from A to B inclusive.
inline std::vector<double> parse_grid(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw CLI::ValidationError("--y-grid", "expected A:B:N");
    double a, b;
    long n;
    try {
        std::size_t pos = 0;
        a = std::stod(parts[0], &pos);
        if (pos != parts[0].size()) throw std::invalid_argument("a");
        b = std::stod(parts[1], &pos);
        if (pos != parts[1].size()) throw std::invalid_argument("b");
        n = std::stol(parts[2], &pos);
        if (pos != parts[2].size()) throw std::invalid_argument("n");
    } catch (const std::exception&) {
        throw CLI::ValidationError("--y-grid", "expected numbers in A:B:N");
    }
    if (n < 1) throw CLI::ValidationError("--y-grid", "N must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

namespace detail {

inline RunManifest manifest(const std::string& command, const ModelSpec& model, const Options& o,
                            std::vector<std::string> keys) {
    RunManifest m;
    m.command = command;
    m.model_hash = model_hash(model);
    m.timestamp = run_timestamp();
    for (const auto& k : keys) {
        if (k == "q") m.parameters[k] = format_double(o.q);
        else if (k == "x") m.parameters[k] = format_double(o.x);
        else if (k == "y" && o.y) m.parameters[k] = format_double(*o.y);
        else if (k == "y_grid" && !o.y_grid.empty()) m.parameters[k] = o.y_grid;
        else if (k == "t") m.parameters[k] = format_double(o.t);
        else if (k == "method") m.parameters[k] = o.method;
        else if (k == "inversion") m.parameters[k] = o.inversion;
        else if (k == "paths") m.parameters[k] = std::to_string(o.paths);
        else if (k == "dt") m.parameters[k] = format_double(o.dt);
        else if (k == "seed") m.parameters[k] = std::to_string(o.seed);
        else if (k == "threads") m.parameters[k] = std::to_string(o.threads);
        else if (k == "verify") m.parameters[k] = o.verify ? "true" : "false";
        else if (k == "pricing") m.parameters[k] = o.pricing;
        else if (k == "model") m.parameters[k] = o.model;
    }
    return m;
}

inline std::vector<double> y_values(const Options& o) {
    if (!o.y_grid.empty()) return parse_grid(o.y_grid);
    if (o.y) return {*o.y};
    throw CLI::RequiredError("--y or --y-grid");
}

inline void emit(const Options& o, std::ostream& out, const std::string& text) {
    if (o.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error("io", "cannot write " + o.out);
    f << text;
}

inline std::string json_text(const json& j) { return j.dump(2) + "\n"; }

inline InversionConfig inversion_config(const Options& o) {
    InversionConfig cfg;
    if (o.inversion == "gaver") {
        cfg.method = InversionMethod::gaver_stehfest;
        cfg.terms = o.terms ? o.terms : 16;
    } else {
        cfg.terms = o.terms ? o.terms : 40;
    }
    return cfg;
}

inline std::string grid_csv(const std::string& command, const ModelSpec& model, const Options& o,
                            const std::string& column, const std::function<double(double)>& f) {
    const auto ys = y_values(o);
    std::vector<double> values;
    values.reserve(ys.size());
    for (double y : ys) values.push_back(f(y));
    std::ostringstream os;
    os << "# " << manifest(command, model, o, {"model", "q", "x", "y", "y_grid", "method"}).to_json().dump() << "\n";
    os << "y," << column << "\n";
    for (std::size_t i = 0; i < ys.size(); ++i) os << format_double(ys[i]) << "," << format_double(values[i]) << "\n";
    return os.str();
}

}  // namespace detail

inline std::string run_roots(const Options& o) {
    const auto model = load_model(o.model);
    const auto r = solve_roots(model, o.q);
    json j;
    j["manifest"] = detail::manifest("roots", model, o, {"model", "q"}).to_json();
    const json body = roots_to_json(r);
    for (const auto& [k, v] : body.items()) j[k] = v;
    return detail::json_text(j);
}

inline std::string run_factors(const Options& o) {
    const auto model = load_model(o.model);
    const auto r = solve_roots(model, o.q);
    const auto f = build_factors(model, r);
    json j;
    j["manifest"] = detail::manifest("factors", model, o, {"model", "q"}).to_json();
    j["q"] = o.q;
    j["sup_X"] = factor_to_json(f.sup_X);
    j["sup_Y"] = factor_to_json(f.sup_Y);
    j["inf_X"] = factor_to_json(f.inf_X);
    j["inf_Y"] = factor_to_json(f.inf_Y);
    return detail::json_text(j);
}

inline std::string run_dist_cdf(const Options& o) {
    const auto model = load_model(o.model);
    const auto ks = build_kernels(model, cplx(o.q, 0.0));
    if (o.method != "thm4" && o.method != "prop21") throw CLI::ValidationError("--method", "thm4 or prop21");
    const bool prop = o.method == "prop21";
    return detail::grid_csv("dist-cdf", model, o, "cdf", [&](double y) {
        if (!prop) return cdf(model, ks, o.x, y);
        if (!(y > model.b)) throw Error("domain", "prop21 covers y > b only; use --method thm4");
        return 1.0 - upper_tail_root_expansion(model, ks.roots, {o.q, o.x, y});
    });
}

inline std::string run_dist_pdf(const Options& o) {
    const auto model = load_model(o.model);
    const auto ks = build_kernels(model, cplx(o.q, 0.0));
    const auto dens = density_pieces(model, ks, o.x);
    return detail::grid_csv("dist-pdf", model, o, "pdf", [&](double y) {
        const double r = refract::detail::real_or_throw(dens(y), "density");
        if (r < -1e-8) throw Error("out_of_range", "negative density beyond tolerance");
        return std::max(r, 0.0);
    });
}

inline std::string run_occupation(const Options& o) {
    const auto model = load_model(o.model);
    const auto ks = build_kernels(model, cplx(o.q, 0.0));
    return detail::grid_csv("occupation", model, o, "occupation_transform",
                            [&](double y) { return occupation_transform(model, ks, {o.q, o.x, y}); });
}

/// P_x(U_t <= y) by inverting q -> P_x(U_{e(q)} <= y) / q.
inline std::string run_invert(const Options& o) {
    const auto model = load_model(o.model);
    if (!o.y) throw CLI::RequiredError("--y");
    const auto f = fixed_time_cdf_transform(model, o.x, *o.y);
    json j;
    j["manifest"] = detail::manifest("invert", model, o, {"model", "t", "x", "y", "inversion", "verify"}).to_json();
    j["t"] = o.t;
    j["x"] = o.x;
    j["y"] = *o.y;
    if (o.verify) {
        const auto v = invert_verified(f, o.t);
        j["value"] = v.value;
        j["euler"] = v.euler;
        j["gaver_stehfest"] = v.gaver;
    } else {
        j["value"] = invert(f, o.t, detail::inversion_config(o));
    }
    return detail::json_text(j);
}

inline std::string run_price(const Options& o) {
    const auto model = load_model(o.model);
    const auto pricing = load_pricing(o.pricing);
    const auto ess = esscher_calibrate(model, pricing);
    const auto pm = pricing_model(ess.tilted, pricing);
    double price;
    if (o.price_kind == "gmdb") price = price_gmdb(pm, pricing);
    else price = price_gmmb(pm, pricing, detail::inversion_config(o));
    json j;
    j["manifest"] = detail::manifest("price " + o.price_kind, model, o, {"model", "pricing", "inversion"}).to_json();
    j["price"] = price;
    j["c_star"] = ess.c_star;
    j["diagnostics"] = {{"b", pm.b},
                        {"delta", pm.delta},
                        {"kappa_tilted_at_1", cumulant(ess.tilted, 1.0)},
                        {"martingale_target", pricing.r - pricing.fee_rate},
                        {"pricing_model", model_to_json(pm)}};
    return detail::json_text(j);
}

inline std::string run_mc_validate(const Options& o) {
    const auto model = load_model(o.model);
    if (!o.y) throw CLI::RequiredError("--y");
    const double y = *o.y;
    const auto ks = build_kernels(model, cplx(o.q, 0.0));
    const double analytic_cdf = cdf(model, ks, o.x, y);
    const double analytic_occ = occupation_transform(model, ks, {o.q, o.x, y});
    SimConfig cfg;
    cfg.paths = o.paths;
    cfg.dt = o.dt;
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    const auto est = estimate_killed(model, cfg, o.q, o.x, {y});
    const McEstimate cdf_mc{1.0 - est.above[0].value, est.above[0].std_error, est.above[0].paths};
    const auto& occ_mc = est.occupation[0];
    auto row = [](double a, const McEstimate& e) {
        const double z = e.std_error > 0 ? (e.value - a) / e.std_error : 0.0;
        return json{{"analytic", a}, {"mc", e.value}, {"std_error", e.std_error}, {"z", z}, {"pass", within_se(a, e)}};
    };
    json j;
    j["manifest"] = detail::manifest("mc validate", model, o, {"model", "q", "x", "y", "paths", "dt", "seed", "threads"}).to_json();
    j["cdf"] = row(analytic_cdf, cdf_mc);
    j["occupation"] = row(analytic_occ, occ_mc);
    j["pass"] = within_se(analytic_cdf, cdf_mc) && within_se(analytic_occ, occ_mc);
    return detail::json_text(j);
}

inline std::string run_selfcheck_cmd(const Options& o, bool& all_pass) {
    const auto model = model_from_json(read_json_file(o.model));
    const auto checks = run_selfcheck(model, o.q, o.x);
    std::ostringstream os;
    os << "# " << detail::manifest("selfcheck", model, o, {"model", "q", "x"}).to_json().dump() << "\n";
    all_pass = true;
    for (const auto& c : checks) {
        all_pass = all_pass && c.pass;
        char line[256];
        std::snprintf(line, sizeof line, "%-4s  %-44s  err=%-12.3e tol=%.0e", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                      c.error, c.tolerance);
        os << line;
        if (!c.pass && !c.detail.empty()) os << "  " << c.detail;
        os << "\n";
    }
    os << (all_pass ? "all checks passed" : "some checks FAILED") << "\n";
    return os.str();
}

/// Entry point shared by the executable and the tests. Exit codes: 0 success,
/// 1 domain error (JSON on err), 2 usage error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    o.threads = default_threads();
    CLI::App app{"Refracted jump-diffusion distributions, Wiener-Hopf factors and VA pricing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version));

    auto model_opt = [&](CLI::App* s) { s->add_option("--model", o.model, "model JSON file")->required()->check(CLI::ExistingFile); };
    auto common_q = [&](CLI::App* s) { s->add_option("--q", o.q, "killing rate q > 0")->required(); };
    auto out_opt = [&](CLI::App* s) { s->add_option("--out", o.out, "write output to this file"); };
    auto y_opts = [&](CLI::App* s) {
        s->add_option("--x", o.x, "start value");
        s->add_option("--y", o.y, "evaluation level");
        s->add_option("--y-grid", o.y_grid, "linear grid A:B:N");
    };

    auto* roots = app.add_subcommand("roots", "roots of psi(z)=q and psi_hat(z)=q");
    model_opt(roots), common_q(roots), out_opt(roots);
    auto* factors = app.add_subcommand("factors", "Wiener-Hopf factors in pole-residue form");
    model_opt(factors), common_q(factors), out_opt(factors);
    auto* dcdf = app.add_subcommand("dist-cdf", "P_x(U_{e(q)} <= y) on a grid (CSV)");
    model_opt(dcdf), common_q(dcdf), out_opt(dcdf), y_opts(dcdf);
    dcdf->add_option("--method", o.method, "thm4 or prop21")->check(CLI::IsMember({"thm4", "prop21"}));
    auto* dpdf = app.add_subcommand("dist-pdf", "density of U_{e(q)} on a grid (CSV)");
    model_opt(dpdf), common_q(dpdf), out_opt(dpdf), y_opts(dpdf);
    auto* occ = app.add_subcommand("occupation", "occupation-time transform on a grid (CSV)");
    model_opt(occ), common_q(occ), out_opt(occ), y_opts(occ);
    auto* inv = app.add_subcommand("invert", "fixed-time P_x(U_t <= y) by Laplace inversion");
    model_opt(inv), out_opt(inv), y_opts(inv);
    inv->add_option("--t", o.t, "time t > 0")->required();
    inv->add_flag("--verify", o.verify, "cross-check Euler against Gaver-Stehfest");
    inv->add_option("--inversion", o.inversion, "euler or gaver")->check(CLI::IsMember({"euler", "gaver"}));
    inv->add_option("--terms", o.terms, "number of inversion terms");
    auto* price = app.add_subcommand("price", "GMDB / GMMB prices under state-dependent fees");
    price->add_option("kind", o.price_kind, "gmdb or gmmb")->required()->check(CLI::IsMember({"gmdb", "gmmb"}));
    model_opt(price), out_opt(price);
    price->add_option("--pricing", o.pricing, "pricing JSON file")->required()->check(CLI::ExistingFile);
    price->add_option("--inversion", o.inversion, "euler or gaver (GMMB)")->check(CLI::IsMember({"euler", "gaver"}));
    price->add_option("--terms", o.terms, "number of inversion terms (GMMB)");
    auto* mcc = app.add_subcommand("mc", "Monte Carlo oracle");
    mcc->require_subcommand(1);
    auto* validate = mcc->add_subcommand("validate", "analytic vs Monte Carlo at one (q, x, y)");
    model_opt(validate), common_q(validate), out_opt(validate), y_opts(validate);
    validate->add_option("--paths", o.paths, "number of paths")->check(CLI::PositiveNumber);
    validate->add_option("--dt", o.dt, "Euler step near thresholds")->check(CLI::PositiveNumber);
    validate->add_option("--seed", o.seed, "RNG seed");
    validate->add_option("--threads", o.threads, "worker threads (default REFRACT_THREADS or 1)")->check(CLI::PositiveNumber);
    auto* self = app.add_subcommand("selfcheck", "invariant battery with pass/fail table");
    model_opt(self), common_q(self), out_opt(self);
    self->add_option("--x", o.x, "start value for distribution checks");

    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        std::string text;
        int code = 0;
        if (*roots) text = run_roots(o);
        else if (*factors) text = run_factors(o);
        else if (*dcdf) text = run_dist_cdf(o);
        else if (*dpdf) text = run_dist_pdf(o);
        else if (*occ) text = run_occupation(o);
        else if (*inv) text = run_invert(o);
        else if (*price) text = run_price(o);
        else if (*validate) text = run_mc_validate(o);
        else if (*self) {
            bool pass = true;
            text = run_selfcheck_cmd(o, pass);
            code = pass ? 0 : 1;
        }
        detail::emit(o, out, text);
        return code;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << json{{"error", e.what()}, {"kind", e.kind()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << json{{"error", e.what()}, {"kind", "internal"}}.dump() << "\n";
        return 1;
    }
}

}  // namespace refract::cli
