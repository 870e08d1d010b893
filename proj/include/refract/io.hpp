#pragma once

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "refract/charroots.hpp"
#include "refract/errors.hpp"
#include "refract/model.hpp"
#include "refract/pricing.hpp"
#include "refract/wiener_hopf.hpp"

namespace refract {

using json = nlohmann::ordered_json;

inline constexpr const char* tool_version = "0.3.0";

namespace io {

inline cplx complex_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw Error("parse", what + " must be a number or a [re, im] pair");
}

inline json complex_to_json(cplx c) { return json::array({c.real() + 0.0, c.imag() + 0.0}); }

inline json complex_list(const std::vector<cplx>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back(complex_to_json(c));
    return a;
}

inline double number(const json& j, const char* key, double fallback, bool required) {
    if (!j.contains(key)) {
        if (required) throw Error("parse", std::string("missing field '") + key + "'");
        return fallback;
    }
    if (!j[key].is_number()) throw Error("parse", std::string("field '") + key + "' must be a number");
    return j[key].get<double>();
}

inline JumpMixture mixture_from_json(const json& j, JumpSide side, const char* name) {
    JumpMixture m{side, {}};
    if (j.is_null()) return m;
    if (!j.is_array()) throw Error("parse", std::string(name) + " must be an array");
    for (const auto& t : j) {
        ErlangTerm term;
        term.rate = complex_from_json(t.at("rate"), std::string(name) + ".rate");
        term.order = t.value("order", 1);
        if (!t.contains("weights") || !t["weights"].is_array())
            throw Error("parse", std::string(name) + " term needs a weights array");
        for (const auto& w : t["weights"]) term.weights.push_back(complex_from_json(w, std::string(name) + ".weights"));
        m.terms.push_back(std::move(term));
    }
    return m;
}

inline json mixture_to_json(const JumpMixture& m) {
    json a = json::array();
    for (const auto& t : m.terms) {
        json w = json::array();
        for (const auto& c : t.weights) w.push_back(complex_to_json(c));
        a.push_back({{"rate", complex_to_json(t.rate)}, {"order", t.order}, {"weights", w}});
    }
    return a;
}

}  // namespace io

inline ModelSpec model_from_json(const json& j) {
    if (!j.is_object()) throw Error("parse", "model must be a JSON object");
    ModelSpec m;
    m.mu = io::number(j, "mu", 0.0, true);
    m.sigma = io::number(j, "sigma", 0.0, true);
    m.lambda_plus = io::number(j, "lambda_plus", 0.0, false);
    m.lambda_minus = io::number(j, "lambda_minus", 0.0, false);
    m.jumps_plus = io::mixture_from_json(j.contains("jumps_plus") ? j["jumps_plus"] : json(), JumpSide::positive, "jumps_plus");
    m.jumps_minus = io::mixture_from_json(j.contains("jumps_minus") ? j["jumps_minus"] : json(), JumpSide::negative, "jumps_minus");
    m.delta = io::number(j, "delta", 0.0, false);
    m.b = io::number(j, "b", 0.0, false);
    return m;
}

inline json model_to_json(const ModelSpec& m) {
    return {{"mu", m.mu},
            {"sigma", m.sigma},
            {"lambda_plus", m.lambda_plus},
            {"jumps_plus", io::mixture_to_json(m.jumps_plus)},
            {"lambda_minus", m.lambda_minus},
            {"jumps_minus", io::mixture_to_json(m.jumps_minus)},
            {"delta", m.delta},
            {"b", m.b}};
}

inline PricingSpec pricing_from_json(const json& j) {
    if (!j.is_object()) throw Error("parse", "pricing must be a JSON object");
    PricingSpec p;
    p.r = io::number(j, "r", 0.0, true);
    p.F0 = io::number(j, "F0", 0.0, true);
    p.B = io::number(j, "B", 0.0, true);
    p.fee_rate = io::number(j, "fee_rate", 0.0, true);
    p.T = io::number(j, "T", 1.0, false);
    if (!j.contains("payoff") || !j["payoff"].is_object()) throw Error("parse", "missing payoff object");
    const auto& g = j["payoff"];
    const std::string type = g.value("type", "");
    if (type == "floor" || type == "call") {
        p.payoff.type = type == "floor" ? PayoffType::floor : PayoffType::call;
        p.payoff.K = io::number(g, "K", 0.0, true);
    } else if (type == "custom") {
        p.payoff.type = PayoffType::custom;
        if (!g.contains("table") || !g["table"].is_array()) throw Error("parse", "custom payoff needs a table");
        for (const auto& row : g["table"]) {
            if (!row.is_array() || row.size() != 2) throw Error("parse", "payoff table rows are [account, value]");
            p.payoff.table.push_back({row[0].get<double>(), row[1].get<double>()});
        }
    } else {
        throw Error("parse", "payoff type must be floor, call or custom");
    }
    if (j.contains("mortality")) {
        for (const auto& m : j["mortality"]) p.mortality.push_back({io::number(m, "w", 0.0, true), io::number(m, "q", 0.0, true)});
    }
    validate_pricing(p);
    return p;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("parse", path + ": " + e.what());
    }
}

inline ModelSpec load_model(const std::string& path) {
    auto m = model_from_json(read_json_file(path));
    require_valid(m);
    return m;
}

inline PricingSpec load_pricing(const std::string& path) { return pricing_from_json(read_json_file(path)); }

inline json roots_to_json(const RootSet& r) {
    return {{"q", r.q.real()},
            {"beta", io::complex_list(r.beta)},
            {"beta_hat", io::complex_list(r.beta_hat)},
            {"gamma", io::complex_list(r.gamma)},
            {"gamma_hat", io::complex_list(r.gamma_hat)}};
}

inline json factor_to_json(const PoleResidueForm& f) {
    return {{"poles", io::complex_list(f.poles)},
            {"residues", io::complex_list(f.residues)},
            {"constant", io::complex_to_json(f.constant)}};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

/// Provenance block embedded in every output.
struct RunManifest {
    std::string command;
    std::string model_hash;
    std::map<std::string, std::string> parameters;
    std::string tool_version = refract::tool_version;
    std::string timestamp;

    json to_json() const {
        json p = json::object();
        for (const auto& [k, v] : parameters) p[k] = v;
        return {{"command", command},
                {"model_hash", model_hash},
                {"parameters", p},
                {"tool_version", tool_version},
                {"timestamp", timestamp}};
    }
};

/// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible output.
inline std::string run_timestamp() {
    std::time_t t;
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) {
        t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string model_hash(const ModelSpec& m) { return sha256_hex(model_to_json(m).dump()); }

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace refract
