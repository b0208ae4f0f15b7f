#include "dynscreen/config.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dynscreen {

using nlohmann::json;

std::string_view to_string(Sampler s) noexcept { return s == Sampler::cross_entropy ? "ce" : "mc"; }

Sampler sampler_from_string(std::string_view text) {
    if (text == "ce" || text == "cross_entropy") return Sampler::cross_entropy;
    if (text == "mc" || text == "monte_carlo") return Sampler::monte_carlo;
    throw ParseError("unknown sampler '" + std::string(text) + "'");
}

namespace {

void positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError(std::string(name) + " must be positive");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ParseError("unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
}

template <class T>
void take(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError("field '" + where + (where.empty() ? "" : ".") + key + "': " + e.what());
    }
}

}  // namespace

void ScreeningConfig::validate() const {
    engine.validate();
    positive(rate, "rate");
    if (!(no_fault >= 0.0 && no_fault < 1.0)) throw ContractError("no_fault must lie in [0, 1)");
    if (gammas.empty()) throw ContractError("gamma list must not be empty");
    for (double g : gammas)
        if (!(g >= 0.0) || !std::isfinite(g)) throw ContractError("gamma values must be finite and >= 0");
    if (!std::is_sorted(gammas.begin(), gammas.end())) throw ContractError("gamma list must be sorted ascending");
    policy.validate();
    ce.validate();
    if (samples == 0) throw ContractError("N must be >= 1: an empty sweep has no report");
    if (top_k == 0) throw ContractError("top_k must be >= 1");
    positive(curve_bin, "curve_bin");
    positive(curve_max_tau, "curve_max_tau");
    if (workers < 0) throw ContractError("workers must be >= 0");
}

ScreeningConfig config_from_json(const json& doc, ScreeningConfig c) {
    reject_unknown(doc,
                   {"grid", "case", "monitored", "horizon", "dt", "rate", "no_fault", "noise", "backend",
                    "duration_levels", "gammas", "policy", "sampler", "ce", "samples", "seed", "workers", "top_k",
                    "curves", "output"},
                   "");
    take(doc, "grid", c.grid_path, "");
    if (doc.contains("case")) {
        const json& cs = doc["case"];
        reject_unknown(cs,
                       {"generator_inertia_per_rating", "generator_damping_per_rating", "load_inertia_factor",
                        "load_damping_factor", "limit_margin", "min_limit", "unrated_sentinel_mva"},
                       "case");
        auto& o = c.case_options;
        take(cs, "generator_inertia_per_rating", o.generator_inertia_per_rating, "case");
        take(cs, "generator_damping_per_rating", o.generator_damping_per_rating, "case");
        take(cs, "load_inertia_factor", o.load_inertia_factor, "case");
        take(cs, "load_damping_factor", o.load_damping_factor, "case");
        take(cs, "limit_margin", o.limit_margin, "case");
        take(cs, "min_limit", o.min_limit, "case");
        take(cs, "unrated_sentinel_mva", o.unrated_sentinel_mva, "case");
    }
    if (doc.contains("monitored")) {
        const json& m = doc["monitored"];
        if (m.is_string() && m.get<std::string>() == "all") c.case_options.monitored.reset();
        else {
            std::vector<std::size_t> list;
            take(doc, "monitored", list, "");
            c.case_options.monitored = std::move(list);
        }
    }
    take(doc, "horizon", c.engine.horizon, "");
    take(doc, "dt", c.engine.dt, "");
    take(doc, "rate", c.rate, "");
    take(doc, "no_fault", c.no_fault, "");
    if (doc.contains("noise")) {
        const json& n = doc["noise"];
        reject_unknown(n, {"model", "scale"}, "noise");
        if (n.contains("model")) {
            const std::string model = n["model"].get<std::string>();
            if (model == "stochastic") c.engine.stochastic = true;
            else if (model == "deterministic") c.engine.stochastic = false;
            else throw ParseError("field 'noise.model': expected stochastic or deterministic");
        }
        take(n, "scale", c.engine.noise_scale, "noise");
    }
    if (doc.contains("backend")) c.engine.backend = step_backend_from_string(doc["backend"].get<std::string>());
    take(doc, "duration_levels", c.engine.duration_levels, "");
    take(doc, "gammas", c.gammas, "");
    if (doc.contains("policy")) {
        const json& p = doc["policy"];
        reject_unknown(p, {"t_star", "warning_lower", "emergency_above"}, "policy");
        take(p, "t_star", c.policy.t_star, "policy");
        take(p, "warning_lower", c.policy.warning_lower, "policy");
        take(p, "emergency_above", c.policy.emergency_above, "policy");
    }
    if (doc.contains("sampler")) c.sampler = sampler_from_string(doc["sampler"].get<std::string>());
    if (doc.contains("ce")) {
        const json& e = doc["ce"];
        reject_unknown(e, {"rho", "smoothing", "mixing", "tolerance", "max_iterations", "samples", "elite_floor", "rule",
                           "cap_rates", "settle_iterations"},
                       "ce");
        take(e, "rho", c.ce.rho, "ce");
        if (e.contains("smoothing") && !e["smoothing"].is_null()) take(e, "smoothing", c.ce.smoothing, "ce");
        take(e, "mixing", c.ce.mixing, "ce");
        take(e, "tolerance", c.ce.tolerance, "ce");
        take(e, "max_iterations", c.ce.max_iterations, "ce");
        take(e, "samples", c.ce.samples, "ce");
        take(e, "elite_floor", c.ce.elite_floor, "ce");
        if (e.contains("rule")) c.ce.rule = exceedance_from_string(e["rule"].get<std::string>());
        take(e, "cap_rates", c.ce.cap_rates, "ce");
        take(e, "settle_iterations", c.ce.settle_iterations, "ce");
    }
    take(doc, "samples", c.samples, "");
    take(doc, "seed", c.seed, "");
    take(doc, "workers", c.workers, "");
    take(doc, "top_k", c.top_k, "");
    if (doc.contains("curves")) {
        const json& cv = doc["curves"];
        reject_unknown(cv, {"bin", "max_tau"}, "curves");
        take(cv, "bin", c.curve_bin, "curves");
        take(cv, "max_tau", c.curve_max_tau, "curves");
    }
    if (doc.contains("output")) {
        const json& o = doc["output"];
        reject_unknown(o, {"json", "csv"}, "output");
        take(o, "json", c.output_json, "output");
        take(o, "csv", c.output_csv, "output");
    }
    return c;
}

ScreeningConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return config_from_json(doc);
}

json config_to_json(const ScreeningConfig& c, bool runtime) {
    const auto& o = c.case_options;
    json doc = {
        {"grid", c.grid_path},
        {"case",
         {{"generator_inertia_per_rating", o.generator_inertia_per_rating},
          {"generator_damping_per_rating", o.generator_damping_per_rating},
          {"load_inertia_factor", o.load_inertia_factor},
          {"load_damping_factor", o.load_damping_factor},
          {"limit_margin", o.limit_margin},
          {"min_limit", o.min_limit},
          {"unrated_sentinel_mva", o.unrated_sentinel_mva}}},
        {"horizon", c.engine.horizon},
        {"dt", c.engine.dt},
        {"rate", c.rate},
        {"no_fault", c.no_fault},
        {"noise", {{"model", c.engine.stochastic ? "stochastic" : "deterministic"}, {"scale", c.engine.noise_scale}}},
        {"backend", std::string(to_string(c.engine.backend))},
        {"duration_levels", c.engine.duration_levels},
        {"gammas", c.gammas},
        {"policy",
         {{"t_star", c.policy.t_star},
          {"warning_lower", c.policy.warning_lower},
          {"emergency_above", c.policy.emergency_above}}},
        {"sampler", std::string(to_string(c.sampler))},
        {"ce",
         {{"rho", c.ce.rho},
          {"smoothing", c.ce.smoothing >= 0.0 ? json(c.ce.smoothing) : json(nullptr)},
          {"mixing", c.ce.mixing},
          {"tolerance", c.ce.tolerance},
          {"max_iterations", c.ce.max_iterations},
          {"samples", c.ce.samples},
          {"elite_floor", c.ce.elite_floor},
          {"rule", std::string(to_string(c.ce.rule))},
          {"cap_rates", c.ce.cap_rates},
          {"settle_iterations", c.ce.settle_iterations}}},
        {"samples", c.samples},
        {"seed", c.seed},
        {"top_k", c.top_k},
        {"curves", {{"bin", c.curve_bin}, {"max_tau", c.curve_max_tau}}},
    };
    doc["monitored"] = o.monitored ? json(*o.monitored) : json("all");
    if (runtime) {
        doc["workers"] = c.workers;
        doc["output"] = {{"json", c.output_json}, {"csv", c.output_csv}};
    }
    return doc;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) noexcept {
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string config_hash(const ScreeningConfig& config, const Grid& grid) {
    json doc = config_to_json(config, false);
    doc.erase("grid");  // the contents below identify the network, not its path
    std::uint64_t h = fnv1a64(doc.dump());
    h = fnv1a64(emit_grid_json(grid), h);
    return hex64(h);
}

}  // namespace dynscreen
