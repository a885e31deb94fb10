// SPDX-License-Identifier: Apache-2.0
//
// symbio: backscatter-over-OFDM link-level simulator
// Copyright (C) 2026 The symbio authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "symbio/harness.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace symbio {

/// Scenario text problem; the message carries "<source>:<line>: ".
class ScenarioError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything a scenario file describes.
struct ScenarioFile {
    Scenario scenario;
    SweepSpec sweep;
    std::uint64_t seed = 1;
    /// Noise power in dBm as written; sys.sigma2 holds the converted value.
    double sigma2_dbm = -80.0;
    int n_p = 8;
    bool explicit_pilots = false;
    /// STx on the PTx-CRx line: dist_bwd = dist_direct - dist_fwd.
    bool collinear = true;
    std::vector<std::string> receiver_names = {"proposed_m1", "proposed_m2"};
    std::vector<std::string> csi_names = {"perfect", "estimated"};
};

inline constexpr const char* kPaperDefaultScenario = R"(# reference operating point
n = 64
n_cp = 16
n_p = 8
m_s = 16
m_c = 8
preamble = 1, -1
n_max = 10
sigma2_dbm = -80
direct_snr_db = 30
xi = 0

l_d = 4
l_1 = 1
l_2 = 2
d_b = 1
backscatter_model = rayleigh
direct_link = true
dist_direct = 200
dist_fwd = 3.83
collinear = true
exp_direct = 2.5
exp_fwd = 2
exp_bwd = 2
pathloss_ref = 1e-3

axis = direct_snr_db
points = 12:30:3
trials = 100000
receivers = proposed_m1, proposed_m2
csi = perfect, estimated
seed = 1
)";

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

inline double parse_double(const std::string& s) {
    const std::string t = trim(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a number, got '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) {
        throw std::invalid_argument("expected a number, got '" + t + "'");
    }
    return v;
}

inline long long parse_int(const std::string& s) {
    const std::string t = trim(s);
    long long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw std::invalid_argument("expected an integer, got '" + t + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + t + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + t + "'");
}

/// Complex literal: "a", "bj", "a+bj", "a-bj", "j", "-j".
inline cplx parse_complex(const std::string& s) {
    std::string t;
    for (char ch : s) {
        if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
    }
    if (t.empty()) throw std::invalid_argument("empty complex value");
    if (t.back() != 'j' && t.back() != 'i') {
        return {parse_double(t), 0.0};
    }
    t.pop_back();
    // split at the last sign that is not an exponent sign or the leading sign
    std::size_t split = std::string::npos;
    for (std::size_t i = t.size(); i-- > 1;) {
        if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    auto imag_of = [](const std::string& x) {
        if (x.empty() || x == "+") return 1.0;
        if (x == "-") return -1.0;
        return parse_double(x);
    };
    if (split == std::string::npos) {
        return {0.0, imag_of(t)};
    }
    return {parse_double(t.substr(0, split)), imag_of(t.substr(split))};
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_complex(cplx c) {
    if (c.imag() == 0.0) return format_double(c.real());
    std::string out = format_double(c.real());
    out += c.imag() < 0.0 ? "-" : "+";
    out += format_double(std::abs(c.imag())) + "j";
    return out;
}

}  // namespace detail

/// "start:stop:step" (inclusive of stop within half a step) or a comma list.
inline std::vector<double> parse_points(const std::string& text) {
    const std::string t = detail::trim(text);
    if (t.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(t);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw std::invalid_argument("point range must be start:stop:step");
        const double start = detail::parse_double(parts[0]);
        const double stop = detail::parse_double(parts[1]);
        const double step = detail::parse_double(parts[2]);
        if (!(step > 0.0)) throw std::invalid_argument("point range step must be positive");
        if (stop < start) throw std::invalid_argument("point range stop is below start");
        const auto count = static_cast<long long>(std::floor((stop - start) / step + 0.5)) + 1;
        std::vector<double> out;
        for (long long i = 0; i < count; ++i) {
            out.push_back(start + static_cast<double>(i) * step);
        }
        return out;
    }
    std::vector<double> out;
    for (const auto& item : detail::split_list(t)) {
        out.push_back(detail::parse_double(item));
    }
    if (out.empty()) throw std::invalid_argument("no points given");
    return out;
}

/// Applies one key. Throws std::invalid_argument on unknown keys or bad values.
inline void apply_scenario_key(ScenarioFile& f, const std::string& key, const std::string& value) {
    using namespace detail;
    SystemConfig& s = f.scenario.sys;
    ChannelConfig& ch = s.channel;
    auto as_int = [&](int lo) {
        const long long v = parse_int(value);
        if (v < lo || v > 1'000'000) throw std::invalid_argument("value out of range");
        return static_cast<int>(v);
    };
    if (key == "n") s.n = as_int(1);
    else if (key == "n_cp") s.n_cp = as_int(0);
    else if (key == "n_p") { f.n_p = as_int(1); f.explicit_pilots = false; }
    else if (key == "pilot_indices") {
        s.pilot_indices.clear();
        for (const auto& item : split_list(value)) s.pilot_indices.push_back(static_cast<int>(parse_int(item)));
        f.explicit_pilots = true;
    } else if (key == "pilot_value") {
        s.pilot_values.assign(1, parse_complex(value));
    } else if (key == "m_s") s.m_s = as_int(4);
    else if (key == "m_c") s.m_c = as_int(2);
    else if (key == "preamble") {
        s.preamble.clear();
        for (const auto& item : split_list(value)) s.preamble.push_back(parse_complex(item));
    } else if (key == "n_max") s.n_max = as_int(1);
    else if (key == "sigma2_dbm") f.sigma2_dbm = parse_double(value);
    else if (key == "direct_snr_db") { f.scenario.direct_snr_db = parse_double(value); f.scenario.backscatter_snr_db.reset(); }
    else if (key == "backscatter_snr_db") f.scenario.backscatter_snr_db = parse_double(value);
    else if (key == "xi") s.xi = as_int(0);
    else if (key == "l_d") ch.l_d = as_int(1);
    else if (key == "l_1") ch.l_1 = as_int(1);
    else if (key == "l_2") ch.l_2 = as_int(1);
    else if (key == "d_b") ch.d_b = as_int(0);
    else if (key == "backscatter_model") ch.backscatter = backscatter_model_from_string(trim(value));
    else if (key == "direct_link") ch.direct_link = parse_bool(value);
    else if (key == "dist_direct") ch.dist_direct = parse_double(value);
    else if (key == "dist_fwd") ch.dist_fwd = parse_double(value);
    else if (key == "dist_bwd") { ch.dist_bwd = parse_double(value); f.collinear = false; }
    else if (key == "collinear") f.collinear = parse_bool(value);
    else if (key == "exp_direct") ch.exp_direct = parse_double(value);
    else if (key == "exp_fwd") ch.exp_fwd = parse_double(value);
    else if (key == "exp_bwd") ch.exp_bwd = parse_double(value);
    else if (key == "pathloss_ref") ch.pathloss_ref = parse_double(value);
    else if (key == "axis") f.sweep.axis = axis_from_string(trim(value));
    else if (key == "points") f.sweep.points = parse_points(value);
    else if (key == "trials") f.sweep.trials_per_point = parse_u64(value);
    else if (key == "receivers") {
        f.receiver_names = split_list(value);
        for (const auto& r : f.receiver_names) receiver_from_string(r);
    } else if (key == "csi") {
        f.csi_names = split_list(value);
        for (const auto& c : f.csi_names) csi_from_string(c);
    } else if (key == "seed") f.seed = parse_u64(value);
    else throw std::invalid_argument("unknown key '" + key + "'");
}

/// Expands receiver names x csi modes into curve keys; receivers whose name
/// fixes the CSI source appear once.
inline std::vector<CurveKey> expand_receivers(const std::vector<std::string>& rx_names,
                                              const std::vector<std::string>& csi_names) {
    std::vector<CurveKey> out;
    auto add = [&](CurveKey k) {
        for (const auto& e : out) {
            if (e == k) return;
        }
        out.push_back(k);
    };
    for (const auto& r : rx_names) {
        const ReceiverKind rx = receiver_from_string(r);
        if (csi_fixed(rx)) {
            add(CurveKey::make(rx, CsiMode::Perfect));
            continue;
        }
        for (const auto& c : csi_names) {
            add(CurveKey::make(rx, csi_from_string(c)));
        }
    }
    return out;
}

/// Derived fields: pilots, noise power, collinear placement, curve keys.
inline void finalize_scenario(ScenarioFile& f) {
    SystemConfig& s = f.scenario.sys;
    if (!f.explicit_pilots) {
        s.pilot_indices = comb_pilots(s.n, f.n_p);
    }
    const cplx pv = s.pilot_values.empty() ? cplx{1.0, 0.0} : s.pilot_values.front();
    s.pilot_values.assign(s.pilot_indices.size(), pv);
    s.sigma2 = dbm_to_watt(f.sigma2_dbm);
    if (f.collinear) {
        s.channel.place_collinear(s.channel.dist_fwd);
    }
    f.sweep.receivers = expand_receivers(f.receiver_names, f.csi_names);
}

/// Parses `key = value` lines over the built-in defaults. Every problem is
/// reported as "<source>:<line>: <message>".
inline ScenarioFile parse_scenario(const std::string& text, const std::string& source = "<scenario>",
                                   bool start_from_paper_default = true) {
    ScenarioFile f;
    if (start_from_paper_default) {
        f = parse_scenario(kPaperDefaultScenario, "paper_default", false);
    }
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) {
            throw ScenarioError(where + "expected 'key = value'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (auto it = seen.find(key); it != seen.end()) {
            throw ScenarioError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) +
                                ")");
        }
        seen[key] = lineno;
        if (value.empty()) {
            throw ScenarioError(where + "missing value for '" + key + "'");
        }
        try {
            apply_scenario_key(f, key, value);
        } catch (const std::exception& e) {
            throw ScenarioError(where + e.what());
        }
    }
    try {
        finalize_scenario(f);
        f.scenario.resolve();
        f.sweep.validate();
    } catch (const std::exception& e) {
        throw ScenarioError(source + ": " + e.what());
    }
    return f;
}

inline ScenarioFile paper_default() { return parse_scenario(kPaperDefaultScenario, "paper_default", false); }

inline ScenarioFile load_scenario(const std::string& path) {
    if (path == "paper_default") {
        return paper_default();
    }
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError(path + ": cannot open scenario file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

/// Canonical key/value listing; parse_scenario of its text reproduces `f`.
inline std::vector<std::pair<std::string, std::string>> scenario_entries(const ScenarioFile& f) {
    using detail::format_double;
    const SystemConfig& s = f.scenario.sys;
    const ChannelConfig& ch = s.channel;
    std::vector<std::pair<std::string, std::string>> kv;
    auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
    auto join = [](const auto& items, auto fmt) {
        std::string out;
        for (const auto& it : items) {
            if (!out.empty()) out += ", ";
            out += fmt(it);
        }
        return out;
    };
    add("n", std::to_string(s.n));
    add("n_cp", std::to_string(s.n_cp));
    add("pilot_indices", join(s.pilot_indices, [](int v) { return std::to_string(v); }));
    add("pilot_value", detail::format_complex(s.pilot_values.empty() ? cplx{1.0, 0.0} : s.pilot_values.front()));
    add("m_s", std::to_string(s.m_s));
    add("m_c", std::to_string(s.m_c));
    add("preamble", join(s.preamble, [](cplx c) { return detail::format_complex(c); }));
    add("n_max", std::to_string(s.n_max));
    add("sigma2_dbm", format_double(f.sigma2_dbm));
    add("direct_snr_db", format_double(f.scenario.direct_snr_db));
    if (f.scenario.backscatter_snr_db) add("backscatter_snr_db", format_double(*f.scenario.backscatter_snr_db));
    add("xi", std::to_string(s.xi));
    add("l_d", std::to_string(ch.l_d));
    add("l_1", std::to_string(ch.l_1));
    add("l_2", std::to_string(ch.l_2));
    add("d_b", std::to_string(ch.d_b));
    add("backscatter_model", to_string(ch.backscatter));
    add("direct_link", ch.direct_link ? "true" : "false");
    add("dist_direct", format_double(ch.dist_direct));
    add("dist_fwd", format_double(ch.dist_fwd));
    if (f.collinear) {
        add("collinear", "true");
    } else {
        add("dist_bwd", format_double(ch.dist_bwd));
    }
    add("exp_direct", format_double(ch.exp_direct));
    add("exp_fwd", format_double(ch.exp_fwd));
    add("exp_bwd", format_double(ch.exp_bwd));
    add("pathloss_ref", format_double(ch.pathloss_ref));
    add("axis", to_string(f.sweep.axis));
    add("points", join(f.sweep.points, [](double v) { return format_double(v); }));
    add("trials", std::to_string(f.sweep.trials_per_point));
    add("receivers", join(f.receiver_names, [](const std::string& v) { return v; }));
    add("csi", join(f.csi_names, [](const std::string& v) { return v; }));
    add("seed", std::to_string(f.seed));
    return kv;
}

inline std::string scenario_text(const ScenarioFile& f) {
    std::string out;
    for (const auto& [k, v] : scenario_entries(f)) {
        out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace symbio
