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

#include "symbio/symbio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace symbio;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

/// Problems with user input: exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string scenario = "paper_default";
    std::string manifest;
    std::string axis;
    std::string points;
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string receivers;
    std::string csi;
    std::string out = "symbio_out";
    bool quiet = false;
};

std::optional<std::uint64_t> env_u64(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') {
        return std::nullopt;
    }
    try {
        return detail::parse_u64(v);
    } catch (const std::exception& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    }
}

/// Scenario with command-line overrides applied; flags win over environment
/// variables, which win over the scenario file.
ScenarioFile resolve_scenario(const CommonOptions& o) {
    ScenarioFile f;
    if (!o.manifest.empty()) {
        std::ifstream in(o.manifest);
        if (!in) {
            throw ScenarioError(o.manifest + ": cannot open manifest");
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ScenarioError(o.manifest + ": " + e.what());
        }
        f = scenario_from_manifest(j, o.manifest);
    } else {
        f = load_scenario(o.scenario);
    }
    try {
        if (!o.axis.empty()) apply_scenario_key(f, "axis", o.axis);
        if (!o.points.empty()) apply_scenario_key(f, "points", o.points);
        if (o.trials) f.sweep.trials_per_point = *o.trials;
        if (!o.receivers.empty()) apply_scenario_key(f, "receivers", o.receivers);
        if (!o.csi.empty()) apply_scenario_key(f, "csi", o.csi);
        if (auto s = env_u64("SYMBIO_SEED")) f.seed = *s;
        if (o.seed) f.seed = *o.seed;
        finalize_scenario(f);
        f.scenario.resolve();
        f.sweep.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("command line: ") + e.what());
    }
    return f;
}

unsigned resolve_workers(const CommonOptions& o) {
    if (o.workers) return std::max(1u, *o.workers);
    if (auto w = env_u64("SYMBIO_WORKERS")) return static_cast<unsigned>(std::max<std::uint64_t>(1, *w));
    return std::max(1u, std::thread::hardware_concurrency());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path.string() + ": cannot open for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error(path.string() + ": write failed");
    }
}

void prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error(dir + ": " + ec.message());
    }
}

int cmd_sweep(const CommonOptions& o) {
    const ScenarioFile f = resolve_scenario(o);
    const unsigned workers = resolve_workers(o);
    prepare_out(o.out);
    ProgressFn progress;
    if (!o.quiet) {
        progress = [](std::size_t done, std::size_t total) {
            std::cerr << "\r" << done << "/" << total << " chunks" << std::flush;
        };
    }
    const auto curves = run_sweep(f.sweep, f.scenario, f.seed, workers, progress);
    if (!o.quiet) std::cerr << "\n";
    for (const auto& c : curves) {
        std::ostringstream ss;
        write_csv(ss, {c});
        write_text(fs::path(o.out) / (c.key.name() + ".csv"), ss.str());
    }
    write_text(fs::path(o.out) / "manifest.json", make_manifest(f, "sweep").dump(2) + "\n");
    if (!o.quiet) {
        std::ostringstream ss;
        write_csv(ss, curves);
        std::cout << ss.str();
    }
    return 0;
}

/// Closed forms on the sweep grid, evaluated at the mean link gains.
int cmd_theory(const CommonOptions& o) {
    const ScenarioFile f = resolve_scenario(o);
    prepare_out(o.out);
    std::ostringstream sec;
    std::ostringstream div;
    std::ostringstream pri;
    sec << "point,mean_backscatter_snr_db,ber_secondary_perfect,ber_secondary_method1,ber_secondary_method2\n";
    div << "point,l_b,gamma_b_db,ber_exact,ber_high_snr\n";
    pri << "point,mean_composite_snr_db,ser_perfect,ber_perfect,ser_estimated,ber_estimated\n";
    auto num = [](double v) { return csv_number(v); };
    for (double p : f.sweep.points) {
        Scenario sc = f.scenario;
        apply_axis(sc, f.sweep.axis, p);
        const SystemConfig cfg = sc.resolve();
        const ConstellationMoments mom = qam_moments(cfg.m_s);
        const double beta_b = cfg.channel.beta_fwd() * cfg.channel.beta_bwd();
        const double beta_d = cfg.channel.direct_link ? cfg.channel.beta_direct() : 0.0;
        const ComplexVector hb = ComplexVector::Constant(cfg.n, std::sqrt(beta_b));
        sec << num(p) << ',' << num(linear_to_db(cfg.p_t * beta_b / cfg.sigma2)) << ','
            << num(psk_ber_approx(cfg.m_c, snr_secondary_perfect(hb, cfg, mom))) << ','
            << num(psk_ber_approx(cfg.m_c, snr_secondary_method1(hb, cfg, mom))) << ','
            << num(psk_ber_approx(cfg.m_c, snr_secondary_method2(hb, cfg))) << '\n';
        for (int lb : {1, 2, 4}) {
            const auto prm = AvgSnrParams::from_link(cfg.n, cfg.p_t, beta_b / lb, mom.gamma1, cfg.sigma2, lb);
            const AvgBer b = avg_ber_secondary(prm);
            div << num(p) << ',' << lb << ',' << num(linear_to_db(prm.gamma_b)) << ',' << num(b.exact) << ','
                << num(b.approx) << '\n';
        }
        const double gain2 = beta_d + beta_b;
        const double snr = cfg.p_t * gain2 / cfg.sigma2;
        const double noise_gain = static_cast<double>(cfg.est_taps()) / cfg.n_p();
        const double snr_est = snr_primary_estimated(gain2, noise_gain, cfg.p_t, cfg.sigma2);
        pri << num(p) << ',' << num(linear_to_db(snr)) << ',' << num(qam_ser(cfg.m_s, snr)) << ','
            << num(qam_ber(cfg.m_s, snr)) << ',';
        if (cfg.est_taps() <= cfg.n_p()) {
            pri << num(qam_ser(cfg.m_s, snr_est)) << ',' << num(qam_ber(cfg.m_s, snr_est));
        } else {
            pri << ',';
        }
        pri << '\n';
    }
    write_text(fs::path(o.out) / "theory_secondary.csv", sec.str());
    write_text(fs::path(o.out) / "theory_diversity.csv", div.str());
    write_text(fs::path(o.out) / "theory_primary.csv", pri.str());
    write_text(fs::path(o.out) / "manifest.json", make_manifest(f, "theory").dump(2) + "\n");
    if (!o.quiet) {
        std::cout << sec.str();
    }
    return 0;
}

nlohmann::ordered_json vec_json(const ComplexVector& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back({v[i].real(), v[i].imag()});
    }
    return a;
}

/// One trial of the first sweep point, dumped as JSON.
int cmd_single(const CommonOptions& o, std::uint64_t trial) {
    const ScenarioFile f = resolve_scenario(o);
    Scenario sc = f.scenario;
    apply_axis(sc, f.sweep.axis, f.sweep.points.front());
    const PointContext pc(sc.resolve());
    const SystemConfig& cfg = pc.cfg;

    const RandomStream base(f.seed, trial);
    RandomStream ch_stream = base.fork(detail::kChannelTag);
    RandomStream frame_stream = base.fork(detail::kFrameTag);
    const ChannelRealization real = draw_channel(cfg.channel, cfg.n, ch_stream);
    const Frame frame = generate_frame(cfg, frame_stream, pc.rx.qam, pc.rx.psk);

    nlohmann::ordered_json j;
    j["seed"] = f.seed;
    j["trial"] = trial;
    j["axis"] = to_string(f.sweep.axis);
    j["point"] = f.sweep.points.front();
    j["p_t_watt"] = cfg.p_t;
    j["sigma2_watt"] = cfg.sigma2;
    j["xi"] = cfg.xi;
    j["estimated_taps"] = cfg.est_taps();
    j["h_d"] = vec_json(real.h_d);
    j["b"] = vec_json(real.b);
    j["g"] = vec_json(real.g);
    j["h_b"] = vec_json(real.h_b);
    j["c_index"] = frame.c_index;
    const auto counts = run_trial(pc, f.sweep.receivers, trial, f.seed);
    nlohmann::ordered_json rx = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const ErrorCounts& ec = counts[k];
        nlohmann::ordered_json e;
        e["bit_errors_primary"] = ec.bit_errors_primary;
        e["bits_primary"] = ec.bits_primary;
        e["bit_errors_secondary"] = ec.bit_errors_secondary;
        e["bits_secondary"] = ec.bits_secondary;
        e["erasures"] = ec.erasures;
        rx[f.sweep.receivers[k].name()] = e;
    }
    j["receivers"] = rx;
    std::cout << j.dump(2) << "\n";
    return 0;
}

void add_common(CLI::App* sub, CommonOptions& o, bool sweep_flags) {
    sub->add_option("scenario", o.scenario, "Scenario file, or paper_default")->capture_default_str();
    sub->add_option("--axis", o.axis, "Sweep axis");
    sub->add_option("--points", o.points, "start:stop:step or a comma list");
    sub->add_option("--seed", o.seed, "Master seed (overrides SYMBIO_SEED)");
    sub->add_option("--receivers", o.receivers, "Comma-separated receiver names");
    sub->add_option("--csi", o.csi, "Comma-separated CSI modes: perfect, estimated");
    sub->add_option("--manifest", o.manifest, "Re-run the scenario recorded in a manifest.json");
    sub->add_flag("--quiet,-q", o.quiet, "No progress or table on the terminal");
    if (sweep_flags) {
        sub->add_option("--trials", o.trials, "Trials per point");
        sub->add_option("--workers", o.workers, "Worker threads (overrides SYMBIO_WORKERS)");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"symbio: backscatter-over-OFDM link-level simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonOptions sweep_opt;
    CommonOptions theory_opt;
    CommonOptions single_opt;
    std::uint64_t trial = 0;

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo BER sweep; one CSV per receiver curve plus manifest.json");
    add_common(sweep, sweep_opt, true);
    auto* theory = app.add_subcommand("theory", "Closed-form curves on the sweep grid");
    add_common(theory, theory_opt, false);
    theory->add_option("--out", theory_opt.out, "Output directory")->capture_default_str();
    auto* single = app.add_subcommand("single", "Dump one trial as JSON");
    add_common(single, single_opt, false);
    single->add_option("--trial", trial, "Trial index")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sweep) return cmd_sweep(sweep_opt);
        if (*theory) return cmd_theory(theory_opt);
        if (*single) return cmd_single(single_opt, trial);
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
