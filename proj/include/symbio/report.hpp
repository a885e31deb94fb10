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
#include "symbio/scenario.hpp"
#include "symbio/theory.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace symbio {

inline constexpr const char* kCsvHeader =
    "point,receiver,csi,ber_primary,ci_primary,ber_secondary,ci_secondary,ber_primary_theory,ber_secondary_theory";

inline constexpr const char* kToolVersion = "1.0.0";

/// 9 significant digits; NaN and missing values become empty fields.
inline std::string csv_number(std::optional<double> v) {
    if (!v || !std::isfinite(*v)) {
        return "";
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return buf;
}

/// Rows of all given curves, sorted by (point, receiver, csi).
inline void write_csv(std::ostream& out, const std::vector<BerCurve>& curves) {
    struct Row {
        double point;
        std::string rx;
        std::string csi;
        const CurvePoint* cp;
    };
    std::vector<Row> rows;
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            rows.push_back({p.point, to_string(c.key.rx), to_string(c.key.csi), &p});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.point, a.rx, a.csi) < std::tie(b.point, b.rx, b.csi);
    });
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        const CurvePoint& p = *r.cp;
        out << csv_number(r.point) << ',' << r.rx << ',' << r.csi << ',' << csv_number(p.ber_primary()) << ','
            << csv_number(p.ci_primary()) << ',' << csv_number(p.ber_secondary()) << ','
            << csv_number(p.ci_secondary()) << ',' << csv_number(p.theory_ber_primary()) << ','
            << csv_number(p.theory_ber_secondary()) << '\n';
    }
}

inline nlohmann::ordered_json scenario_json(const ScenarioFile& f) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : scenario_entries(f)) {
        j[k] = v;
    }
    return j;
}

/// Resolved configuration, seed and derived quantities of a run.
inline nlohmann::ordered_json make_manifest(const ScenarioFile& f, const std::string& command) {
    const SystemConfig cfg = f.scenario.resolve();
    const ConstellationMoments m = qam_moments(cfg.m_s);
    nlohmann::ordered_json j;
    j["tool"] = "symbio";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = f.seed;
    j["scenario"] = scenario_json(f);
    nlohmann::ordered_json d;
    d["p_t_watt"] = cfg.p_t;
    d["sigma2_watt"] = cfg.sigma2;
    d["beta_direct"] = cfg.channel.beta_direct();
    d["beta_backscatter"] = cfg.channel.beta_fwd() * cfg.channel.beta_bwd();
    d["snr_ratio_db"] = linear_to_db(cfg.channel.snr_ratio());
    d["estimated_taps"] = cfg.est_taps();
    d["gamma1"] = m.gamma1;
    d["gamma2"] = m.gamma2;
    j["derived"] = d;
    nlohmann::ordered_json curves = nlohmann::ordered_json::array();
    for (const auto& k : f.sweep.receivers) {
        curves.push_back(k.name());
    }
    j["curves"] = curves;
    return j;
}

/// Rebuilds a scenario from a manifest's "scenario" object.
inline ScenarioFile scenario_from_manifest(const nlohmann::json& manifest, const std::string& source) {
    if (!manifest.contains("scenario") || !manifest["scenario"].is_object()) {
        throw ScenarioError(source + ": manifest has no scenario object");
    }
    std::string text;
    for (const auto& [k, v] : manifest["scenario"].items()) {
        if (!v.is_string()) {
            throw ScenarioError(source + ": scenario value for '" + k + "' is not a string");
        }
        text += k + " = " + v.get<std::string>() + "\n";
    }
    return parse_scenario(text, source + "#scenario");
}

}  // namespace symbio
