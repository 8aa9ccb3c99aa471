#pragma once

// JSON documents for configs, budgets, certificates and layer reports.

#include <cstdint>
#include <limits>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "axe/bounds.hpp"
#include "axe/oracle.hpp"
#include "axe/pipeline.hpp"

namespace axe {

using json = nlohmann::ordered_json;

/// Integers that fit int64 stay JSON numbers; anything larger is a decimal string.
inline json bigint_to_json(const BigInt& v) {
    if (v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max())
        return static_cast<std::int64_t>(v);
    return v.str();
}

inline json to_json(const Alphabet& a) {
    return {{"bits", a.bits}, {"signed", a.is_signed}, {"lo", a.lo}, {"hi", a.hi}};
}

inline json to_json(const AccumulatorBudget& b) {
    json j;
    j["p_bits"] = b.p_bits;
    j["tile"] = b.tile ? json(*b.tile) : json(nullptr);
    j["act_alphabet"] = to_json(b.act_alphabet);
    j["slack"] = b.slack;
    j["limit_neg"] = b.limit_neg;
    j["limit_pos"] = b.limit_pos;
    j["soft_budget"] = b.soft_budget;
    j["accumulator"] = to_string(b.accumulator);
    return j;
}

inline json to_json(const CertificateUnit& u) {
    return {{"channel", u.channel},
            {"tile", u.tile},
            {"max_dot", bigint_to_json(u.max_dot)},
            {"min_dot", bigint_to_json(u.min_dot)},
            {"required_bits", u.required_bits},
            {"pass", u.pass}};
}

inline json to_json(const OverflowCertificate& c) {
    json j;
    j["budget"] = to_json(c.budget);
    j["pass"] = c.pass();
    j["perm"] = c.perm ? json(*c.perm) : json(nullptr);
    json units = json::array();
    for (const auto& u : c.per_unit) units.push_back(to_json(u));
    j["per_unit"] = std::move(units);
    if (c.outer_bits) {
        j["outer_bits"] = *c.outer_bits;
        json outer = json::array();
        for (const auto& u : c.outer) outer.push_back(to_json(u));
        j["outer"] = std::move(outer);
    }
    return j;
}

/// Config echo. `workers` is left out so reports do not depend on it.
inline json to_json(const QuantConfig& c) {
    json j;
    j["weight_bits"] = c.weight_bits;
    j["act_bits"] = c.act_bits;
    j["acc_bits"] = c.acc_bits ? json(*c.acc_bits) : json(nullptr);
    j["tile"] = c.tile ? json(*c.tile) : json(nullptr);
    j["algorithm"] = to_string(c.algorithm);
    j["variant"] = to_string(c.variant);
    j["rounding"] = to_string(c.rounding);
    j["soft_constraint"] = c.soft_constraint;
    j["percentile"] = c.percentile;
    j["accumulator"] = to_string(c.accumulator);
    j["memory_efficient"] = c.memory_efficient;
    return j;
}

/// Strict parse: unknown keys are rejected so typos do not pass silently.
inline QuantConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::set<std::string> known{"weight_bits", "act_bits",    "acc_bits",        "tile",
                                             "algorithm",   "variant",     "rounding",        "soft_constraint",
                                             "percentile",  "accumulator", "memory_efficient", "workers"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

    QuantConfig c;
    try {
        if (j.contains("weight_bits")) c.weight_bits = j.at("weight_bits").get<int>();
        if (j.contains("act_bits")) c.act_bits = j.at("act_bits").get<int>();
        if (j.contains("acc_bits") && !j.at("acc_bits").is_null()) c.acc_bits = j.at("acc_bits").get<int>();
        if (j.contains("tile") && !j.at("tile").is_null()) c.tile = j.at("tile").get<std::int64_t>();
        if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
        if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
        if (j.contains("rounding")) c.rounding = rounding_from_string(j.at("rounding").get<std::string>());
        if (j.contains("soft_constraint")) c.soft_constraint = j.at("soft_constraint").get<bool>();
        if (j.contains("percentile")) c.percentile = j.at("percentile").get<double>();
        if (j.contains("accumulator")) c.accumulator = int_repr_from_string(j.at("accumulator").get<std::string>());
        if (j.contains("memory_efficient")) c.memory_efficient = j.at("memory_efficient").get<bool>();
        if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json to_json(const LayerReport& r) {
    json j;
    j["config"] = to_json(r.config);
    j["recon_error"] = r.recon_error;
    j["sparsity"] = r.sparsity;
    j["pass"] = r.pass();
    j["degenerate_channels"] = r.degenerate_channels;
    j["certificate"] = r.certificate ? to_json(*r.certificate) : json(nullptr);
    j["notes"] = r.notes;
    return j;
}

}  // namespace axe
