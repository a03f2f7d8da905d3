#pragma once

// Flat `key = value` experiment files. `#` starts a comment, lists are
// comma-separated, positions are three comma-separated numbers.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rdars/harness.hpp"

namespace rdars {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

namespace config_detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& value, const std::string& why)
{
    throw InvalidConfig("config key '" + key + "': " + why + " (got '" + value + "')");
}

inline double to_double(const std::string& key, const std::string& v)
{
    if (v == "-inf")
        return -std::numeric_limits<double>::infinity();
    if (v == "inf")
        return std::numeric_limits<double>::infinity();
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end || v.empty())
        bad_value(key, v, "expected a number");
    return out;
}

inline std::int64_t to_int(const std::string& key, const std::string& v)
{
    std::int64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end || v.empty())
        bad_value(key, v, "expected an integer");
    return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end || v.empty())
        bad_value(key, v, "expected a non-negative integer");
    return out;
}

inline Position to_position(const std::string& key, const std::string& v)
{
    const auto parts = split(v, ',');
    if (parts.size() != 3)
        bad_value(key, v, "expected x, y, z");
    return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

inline std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace config_detail

/// Applies one key to the config. Unknown keys and malformed values throw
/// InvalidConfig naming the key.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    using namespace config_detail;
    auto positive_int = [&](std::int64_t lo) {
        const auto v = to_int(key, value);
        if (v < lo)
            bad_value(key, value, "must be >= " + std::to_string(lo));
        return v;
    };

    if (key == "scenario") {
        if (value == "uplink")
            cfg.scenario = Scenario::uplink;
        else if (value == "isac")
            cfg.scenario = Scenario::isac;
        else
            bad_value(key, value, "expected uplink or isac");
    } else if (key == "M") {
        cfg.M = positive_int(1);
    } else if (key == "N") {
        cfg.N = positive_int(1);
    } else if (key == "a_values") {
        cfg.a_values.clear();
        for (const auto& p : split(value, ','))
            cfg.a_values.push_back(to_int(key, p));
    } else if (key == "power_sweep_dbm") {
        cfg.power_sweep_dbm.clear();
        for (const auto& p : split(value, ','))
            cfg.power_sweep_dbm.push_back(to_double(key, p));
    } else if (key == "gamma_th_db") {
        if (value == "none")
            cfg.gamma_th_db.reset();
        else
            cfg.gamma_th_db = to_double(key, value);
    } else if (key == "trials") {
        cfg.trials = static_cast<int>(positive_int(1));
    } else if (key == "base_seed") {
        cfg.base_seed = to_uint(key, value);
    } else if (key == "schemes") {
        cfg.schemes.clear();
        for (const auto& p : split(value, ',')) {
            const auto s = scheme_from_name(p);
            if (!s)
                bad_value(key, value, "unknown scheme '" + p + "'");
            if (std::find(cfg.schemes.begin(), cfg.schemes.end(), *s) != cfg.schemes.end())
                bad_value(key, value, "duplicate scheme '" + p + "'");
            cfg.schemes.push_back(*s);
        }
    } else if (key == "bs_position") {
        cfg.geometry.bs_position = to_position(key, value);
    } else if (key == "rdars_position") {
        cfg.geometry.rdars_position = to_position(key, value);
    } else if (key == "user_position") {
        cfg.geometry.user_position = to_position(key, value);
    } else if (key == "target_position") {
        if (value == "none")
            cfg.geometry.target_position.reset();
        else
            cfg.geometry.target_position = to_position(key, value);
    } else if (key == "bs_axis") {
        cfg.geometry.bs_axis = to_position(key, value);
    } else if (key == "rdars_axis") {
        cfg.geometry.rdars_axis = to_position(key, value);
    } else if (key == "pathloss_ref_gain_db") {
        cfg.fading.pathloss_ref_gain = db_to_linear(to_double(key, value));
    } else if (key == "pathloss_ref_gain") {
        cfg.fading.pathloss_ref_gain = to_double(key, value);
    } else if (key == "pathloss_ref_distance_m") {
        cfg.fading.pathloss_ref_distance = to_double(key, value);
    } else if (key.starts_with("exponent.") || key.starts_with("rician_k.") || key.starts_with("rician_k_db.")) {
        const auto dot = key.find('.');
        const auto link = link_from_name(key.substr(dot + 1));
        if (!link)
            throw InvalidConfig("unknown config key '" + key + "' (no such link)");
        const auto li = static_cast<std::size_t>(*link);
        const double v = to_double(key, value);
        const auto family = key.substr(0, dot);
        if (family == "exponent")
            cfg.fading.exponent[li] = v;
        else if (family == "rician_k")
            cfg.fading.rician_k[li] = v;
        else
            cfg.fading.rician_k[li] = db_to_linear(v);
    } else if (key == "noise_power_dbm") {
        cfg.noise_power_dbm = to_double(key, value);
    } else if (key == "rcs_gain_db") {
        cfg.rcs_gain_db = to_double(key, value);
    } else if (key == "rcs_phase_rad") {
        cfg.rcs_phase_rad = to_double(key, value);
    } else if (key == "max_iterations") {
        cfg.optimizer.max_iterations = static_cast<int>(positive_int(1));
    } else if (key == "convergence_tol") {
        cfg.optimizer.convergence_tol = to_double(key, value);
    } else if (key == "n_random_starts") {
        cfg.optimizer.n_random_starts = static_cast<int>(positive_int(1));
    } else if (key == "mode_search") {
        if (value == "exhaustive")
            cfg.optimizer.mode_search = ModeSearch::exhaustive;
        else if (value == "greedy_swap")
            cfg.optimizer.mode_search = ModeSearch::greedy_swap;
        else
            bad_value(key, value, "expected exhaustive or greedy_swap");
    } else if (key == "greedy_max_swaps") {
        cfg.optimizer.greedy_max_swaps = static_cast<int>(positive_int(0));
    } else if (key == "exhaustive_cap") {
        cfg.optimizer.exhaustive_cap = to_uint(key, value);
    } else {
        throw InvalidConfig("unknown config key '" + key + "'");
    }
}

inline ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base = {})
{
    ExperimentConfig cfg = base;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto body = config_detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = config_detail::trim(std::string_view(body).substr(0, eq));
        const auto value = config_detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty())
            throw InvalidConfig("config line " + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second)
            throw InvalidConfig("config key '" + key + "' given twice");
        apply_config_key(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw InvalidConfig("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

/// Every effective setting in a fixed order with round-trip precision. Two
/// configs that run identically serialize identically.
inline std::string canonical_config(const ExperimentConfig& cfg)
{
    using config_detail::fmt;
    std::ostringstream o;
    auto pos = [&](const Position& p) { return fmt(p[0]) + "," + fmt(p[1]) + "," + fmt(p[2]); };
    o << "scenario=" << scenario_name(cfg.scenario) << "\n";
    o << "M=" << cfg.M << "\nN=" << cfg.N << "\n";
    o << "a_values=";
    for (std::size_t i = 0; i < cfg.a_values.size(); ++i)
        o << (i ? "," : "") << cfg.a_values[i];
    o << "\npower_sweep_dbm=";
    for (std::size_t i = 0; i < cfg.power_sweep_dbm.size(); ++i)
        o << (i ? "," : "") << fmt(cfg.power_sweep_dbm[i]);
    o << "\ngamma_th_db=" << (cfg.gamma_th_db ? fmt(*cfg.gamma_th_db) : "none") << "\n";
    o << "trials=" << cfg.trials << "\nbase_seed=" << cfg.base_seed << "\nschemes=";
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i)
        o << (i ? "," : "") << scheme_name(cfg.schemes[i]);
    o << "\nbs_position=" << pos(cfg.geometry.bs_position) << "\nrdars_position=" << pos(cfg.geometry.rdars_position)
      << "\nuser_position=" << pos(cfg.geometry.user_position) << "\ntarget_position="
      << (cfg.geometry.target_position ? pos(*cfg.geometry.target_position) : "none") << "\nbs_axis="
      << pos(cfg.geometry.bs_axis) << "\nrdars_axis=" << pos(cfg.geometry.rdars_axis) << "\n";
    o << "pathloss_ref_gain=" << fmt(cfg.fading.pathloss_ref_gain)
      << "\npathloss_ref_distance_m=" << fmt(cfg.fading.pathloss_ref_distance) << "\n";
    for (std::size_t i = 0; i < kLinkCount; ++i) {
        const auto name = link_name(static_cast<Link>(i));
        o << "exponent." << name << "=" << fmt(cfg.fading.exponent[i]) << "\n";
        o << "rician_k." << name << "=" << fmt(cfg.fading.rician_k[i]) << "\n";
    }
    o << "noise_power_dbm=" << fmt(cfg.noise_power_dbm) << "\nrcs_gain_db=" << fmt(cfg.rcs_gain_db)
      << "\nrcs_phase_rad=" << fmt(cfg.rcs_phase_rad) << "\n";
    o << "max_iterations=" << cfg.optimizer.max_iterations << "\nconvergence_tol=" << fmt(cfg.optimizer.convergence_tol)
      << "\nn_random_starts=" << cfg.optimizer.n_random_starts << "\nmode_search="
      << (cfg.optimizer.mode_search == ModeSearch::exhaustive ? "exhaustive" : "greedy_swap")
      << "\ngreedy_max_swaps=" << cfg.optimizer.greedy_max_swaps << "\nexhaustive_cap=" << cfg.optimizer.exhaustive_cap
      << "\n";
    return o.str();
}

inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace rdars
