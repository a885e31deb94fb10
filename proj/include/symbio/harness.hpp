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

#include "symbio/channel.hpp"
#include "symbio/receiver.hpp"
#include "symbio/theory.hpp"
#include "symbio/txchain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace symbio {

enum class ReceiverKind { ProposedM1, ProposedM2, PilotOnly, GenieM1, GenieM2, MlPerfect, MlEstimated, MlNoPilot };
enum class CsiMode { Perfect, Estimated };

inline const char* to_string(ReceiverKind r) {
    switch (r) {
    case ReceiverKind::ProposedM1: return "proposed_m1";
    case ReceiverKind::ProposedM2: return "proposed_m2";
    case ReceiverKind::PilotOnly: return "pilot_only";
    case ReceiverKind::GenieM1: return "genie_m1";
    case ReceiverKind::GenieM2: return "genie_m2";
    case ReceiverKind::MlPerfect: return "ml_perfect";
    case ReceiverKind::MlEstimated: return "ml_estimated";
    case ReceiverKind::MlNoPilot: return "ml_nopilot";
    }
    return "?";
}

inline const char* to_string(CsiMode c) { return c == CsiMode::Perfect ? "perfect" : "estimated"; }

inline ReceiverKind receiver_from_string(const std::string& s) {
    for (auto r : {ReceiverKind::ProposedM1, ReceiverKind::ProposedM2, ReceiverKind::PilotOnly, ReceiverKind::GenieM1,
                   ReceiverKind::GenieM2, ReceiverKind::MlPerfect, ReceiverKind::MlEstimated, ReceiverKind::MlNoPilot}) {
        if (s == to_string(r)) {
            return r;
        }
    }
    throw std::invalid_argument("unknown receiver '" + s + "'");
}

inline CsiMode csi_from_string(const std::string& s) {
    if (s == "perfect") return CsiMode::Perfect;
    if (s == "estimated") return CsiMode::Estimated;
    throw std::invalid_argument("unknown csi mode '" + s + "'");
}

/// ML receivers carry their CSI source in the name.
inline bool csi_fixed(ReceiverKind r) {
    return r == ReceiverKind::MlPerfect || r == ReceiverKind::MlEstimated || r == ReceiverKind::MlNoPilot;
}

struct CurveKey {
    ReceiverKind rx = ReceiverKind::ProposedM2;
    CsiMode csi = CsiMode::Estimated;

    static CurveKey make(ReceiverKind rx, CsiMode csi) {
        if (rx == ReceiverKind::MlEstimated) csi = CsiMode::Estimated;
        if (rx == ReceiverKind::MlPerfect || rx == ReceiverKind::MlNoPilot) csi = CsiMode::Perfect;
        return {rx, csi};
    }
    std::string name() const { return std::string(to_string(rx)) + "_" + to_string(csi); }
    friend bool operator==(const CurveKey& a, const CurveKey& b) { return a.rx == b.rx && a.csi == b.csi; }
};

enum class SweepAxis { DirectSnrDb, SnrRatioDb, StxDistanceM, SyncErrorSamples, BackscatterSnrDb };

inline const char* to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::DirectSnrDb: return "direct_snr_db";
    case SweepAxis::SnrRatioDb: return "snr_ratio_db";
    case SweepAxis::StxDistanceM: return "stx_distance_m";
    case SweepAxis::SyncErrorSamples: return "sync_error_samples";
    case SweepAxis::BackscatterSnrDb: return "backscatter_snr_db";
    }
    return "?";
}

inline SweepAxis axis_from_string(const std::string& s) {
    for (auto a : {SweepAxis::DirectSnrDb, SweepAxis::SnrRatioDb, SweepAxis::StxDistanceM, SweepAxis::SyncErrorSamples,
                   SweepAxis::BackscatterSnrDb}) {
        if (s == to_string(a)) {
            return a;
        }
    }
    throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

/// System configuration plus the operating SNR that fixes P_T.
struct Scenario {
    SystemConfig sys;
    /// gamma_d = P_T beta_d / sigma^2, used unless backscatter_snr_db is set.
    double direct_snr_db = 30.0;
    /// gamma_b = P_T beta_1 beta_2 / sigma^2.
    std::optional<double> backscatter_snr_db;

    SystemConfig resolve() const {
        SystemConfig c = sys;
        if (backscatter_snr_db) {
            const double beta = c.channel.beta_fwd() * c.channel.beta_bwd();
            c.p_t = db_to_linear(*backscatter_snr_db) * c.sigma2 / beta;
        } else {
            c.p_t = db_to_linear(direct_snr_db) * c.sigma2 / c.channel.beta_direct();
        }
        c.validate();
        return c;
    }
};

inline void apply_axis(Scenario& sc, SweepAxis axis, double value) {
    switch (axis) {
    case SweepAxis::DirectSnrDb:
        sc.direct_snr_db = value;
        sc.backscatter_snr_db.reset();
        break;
    case SweepAxis::BackscatterSnrDb: sc.backscatter_snr_db = value; break;
    case SweepAxis::SnrRatioDb:
        sc.sys.channel.place_collinear(fwd_distance_for_snr_ratio(sc.sys.channel, db_to_linear(value)));
        break;
    case SweepAxis::StxDistanceM: sc.sys.channel.place_collinear(value); break;
    case SweepAxis::SyncErrorSamples: {
        const double r = std::round(value);
        if (std::abs(r - value) > 1e-9 || r < 0) {
            throw std::invalid_argument("sync_error_samples points must be non-negative integers");
        }
        sc.sys.xi = static_cast<int>(r);
        break;
    }
    }
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::DirectSnrDb;
    std::vector<double> points;
    std::uint64_t trials_per_point = 100000;
    std::vector<CurveKey> receivers;

    void validate() const {
        if (points.empty()) throw std::invalid_argument("sweep: no points");
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (!(points[i] > points[i - 1])) throw std::invalid_argument("sweep: points must be strictly increasing");
        }
        if (trials_per_point < 1) throw std::invalid_argument("sweep: trials must be positive");
        if (receivers.empty()) throw std::invalid_argument("sweep: no receivers");
    }
};

/// Error tallies for one receiver curve at one point.
struct ErrorCounts {
    std::uint64_t bit_errors_primary = 0;
    std::uint64_t bits_primary = 0;
    std::uint64_t symbol_errors_primary = 0;
    std::uint64_t symbols_primary = 0;
    std::uint64_t bit_errors_secondary = 0;
    std::uint64_t bits_secondary = 0;
    std::uint64_t erasures = 0;
    // per-trial analytic companions, summed; averaged by the trial counts
    double theory_ber_primary = 0.0;
    double theory_ser_primary = 0.0;
    std::uint64_t theory_primary_trials = 0;
    double theory_ber_secondary = 0.0;
    std::uint64_t theory_secondary_trials = 0;

    ErrorCounts& operator+=(const ErrorCounts& o) {
        bit_errors_primary += o.bit_errors_primary;
        bits_primary += o.bits_primary;
        symbol_errors_primary += o.symbol_errors_primary;
        symbols_primary += o.symbols_primary;
        bit_errors_secondary += o.bit_errors_secondary;
        bits_secondary += o.bits_secondary;
        erasures += o.erasures;
        theory_ber_primary += o.theory_ber_primary;
        theory_ser_primary += o.theory_ser_primary;
        theory_primary_trials += o.theory_primary_trials;
        theory_ber_secondary += o.theory_ber_secondary;
        theory_secondary_trials += o.theory_secondary_trials;
        return *this;
    }
};

inline double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? std::nan("") : static_cast<double>(num) / static_cast<double>(den);
}

/// 95% normal-approximation half-width 1.96 sqrt(p(1-p)/n).
inline double ci_half_width(double p, std::uint64_t n) {
    return n == 0 ? std::nan("") : 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

struct CurvePoint {
    double point = 0.0;
    ErrorCounts counts;

    double ber_primary() const { return ratio(counts.bit_errors_primary, counts.bits_primary); }
    double ci_primary() const { return ci_half_width(ber_primary(), counts.bits_primary); }
    double ser_primary() const { return ratio(counts.symbol_errors_primary, counts.symbols_primary); }
    double ser_ci_primary() const { return ci_half_width(ser_primary(), counts.symbols_primary); }
    double ber_secondary() const { return ratio(counts.bit_errors_secondary, counts.bits_secondary); }
    double ci_secondary() const { return ci_half_width(ber_secondary(), counts.bits_secondary); }
    std::optional<double> theory_ber_primary() const {
        if (counts.theory_primary_trials == 0) return std::nullopt;
        return counts.theory_ber_primary / static_cast<double>(counts.theory_primary_trials);
    }
    std::optional<double> theory_ser_primary() const {
        if (counts.theory_primary_trials == 0) return std::nullopt;
        return counts.theory_ser_primary / static_cast<double>(counts.theory_primary_trials);
    }
    std::optional<double> theory_ber_secondary() const {
        if (counts.theory_secondary_trials == 0) return std::nullopt;
        return counts.theory_ber_secondary / static_cast<double>(counts.theory_secondary_trials);
    }
};

struct BerCurve {
    CurveKey key;
    std::vector<CurvePoint> points;
};

/// Per-point state shared read-only by all trials at that point.
struct PointContext {
    SystemConfig cfg;
    ReceiverContext rx;
    ConstellationMoments moments;
    std::vector<double> pilot_gain;  ///< empty when the pilot system is rank deficient
    bool orthogonal = true;          ///< no inter-block interference at this sync error

    explicit PointContext(const SystemConfig& c) : cfg(c), rx(c), moments(qam_moments(c.m_s)) {
        if (!rx.rank_deficient) {
            pilot_gain = pilot_noise_gain(c, rx.taps);
        }
        orthogonal = c.xi <= c.n_cp - c.channel.l_b() - c.channel.d_b + 1;
    }
};

namespace detail {

inline constexpr std::uint64_t kChannelTag = 1;
inline constexpr std::uint64_t kFrameTag = 2;
inline constexpr std::uint64_t kNoiseTag = 3;

inline void count_primary(ErrorCounts& ec, const Frame& truth, const DetectionOutput& det, int bits) {
    for (std::size_t n = 0; n < det.s_hat.size(); ++n) {
        for (std::size_t i = 0; i < det.s_hat[n].size(); ++i) {
            const int e = bit_errors(truth.data[n][i], det.s_hat[n][i]);
            ec.bit_errors_primary += static_cast<std::uint64_t>(e);
            ec.symbol_errors_primary += e != 0 ? 1 : 0;
        }
        ec.bits_primary += det.s_hat[n].size() * static_cast<std::uint64_t>(bits);
        ec.symbols_primary += det.s_hat[n].size();
    }
    ec.erasures += static_cast<std::uint64_t>(det.erasures);
}

inline void count_secondary(ErrorCounts& ec, const Frame& truth, const DetectionOutput& det, int t, int bits) {
    for (std::size_t i = 0; i < det.c_hat.size(); ++i) {
        ec.bit_errors_secondary += static_cast<std::uint64_t>(bit_errors(truth.c_index[t + i], det.c_hat[i]));
    }
    ec.bits_secondary += det.c_hat.size() * static_cast<std::uint64_t>(bits);
}

}  // namespace detail

/// One block-fading trial: channel draw, frame, observation and every
/// requested receiver. Returns one ErrorCounts per entry of `keys`.
inline std::vector<ErrorCounts> run_trial(const PointContext& pc, const std::vector<CurveKey>& keys,
                                          std::uint64_t trial_index, std::uint64_t master_seed) {
    const SystemConfig& cfg = pc.cfg;
    const RandomStream base(master_seed, trial_index);
    RandomStream ch_stream = base.fork(detail::kChannelTag);
    RandomStream frame_stream = base.fork(detail::kFrameTag);
    RandomStream noise_stream = base.fork(detail::kNoiseTag);
    const ChannelRealization real = draw_channel(cfg.channel, cfg.n, ch_stream);
    const Frame frame = generate_frame(cfg, frame_stream, pc.rx.qam, pc.rx.psk);
    const FrameObservation obs = observe(frame, real, cfg, noise_stream);

    const bool has_stx = cfg.channel.backscatter != BackscatterModel::None;
    const int t = cfg.t_preamble();
    const int bits_s = bits_per_symbol(cfg.m_s);
    const int bits_c = bits_per_symbol(cfg.m_c);
    const ComplexVector hb_true = real.backscatter_cfr(cfg.xi);

    std::optional<DetectionOutput> proposed_m2_est;
    auto proposed_m2 = [&]() -> const DetectionOutput& {
        if (!proposed_m2_est) {
            proposed_m2_est = run_algorithm1(obs, EstimatorKind::Method2, pc.rx, {false, false, !has_stx});
        }
        return *proposed_m2_est;
    };

    std::optional<ErrorRates> rates_perfect;
    std::optional<ErrorRates> rates_estimated;
    auto primary_theory = [&](bool perfect) -> const ErrorRates& {
        auto& slot = perfect ? rates_perfect : rates_estimated;
        if (!slot) {
            slot = perfect ? primary_rates_perfect(real.H_d, hb_true, frame.c, cfg)
                           : primary_rates_estimated(real.H_d, hb_true, frame.c, cfg, pc.pilot_gain);
        }
        return *slot;
    };

    std::vector<ErrorCounts> out(keys.size());
    for (std::size_t ki = 0; ki < keys.size(); ++ki) {
        const CurveKey key = keys[ki];
        ErrorCounts& ec = out[ki];
        const bool perfect = key.csi == CsiMode::Perfect;
        DetectionOutput det;
        switch (key.rx) {
        case ReceiverKind::ProposedM1:
        case ReceiverKind::ProposedM2:
        case ReceiverKind::PilotOnly:
        case ReceiverKind::GenieM1:
        case ReceiverKind::GenieM2: {
            const EstimatorKind method = key.rx == ReceiverKind::PilotOnly ? EstimatorKind::PilotOnly
                                         : (key.rx == ReceiverKind::ProposedM1 || key.rx == ReceiverKind::GenieM1)
                                             ? EstimatorKind::Method1
                                             : EstimatorKind::Method2;
            const bool genie = key.rx == ReceiverKind::GenieM1 || key.rx == ReceiverKind::GenieM2;
            if (key.rx == ReceiverKind::ProposedM2 && !perfect) {
                det = proposed_m2();
            } else {
                det = run_algorithm1(obs, method, pc.rx, {perfect, genie, !has_stx});
            }
            if (pc.orthogonal && (perfect || !pc.pilot_gain.empty())) {
                const ErrorRates& r = primary_theory(perfect);
                ec.theory_ber_primary += r.ber;
                ec.theory_ser_primary += r.ser;
                ec.theory_primary_trials += 1;
            }
            if (has_stx && pc.orthogonal && method != EstimatorKind::PilotOnly) {
                std::optional<double> th;
                if (perfect && method == EstimatorKind::Method1) {
                    th = psk_ber_approx(cfg.m_c, snr_secondary_perfect(real.H_b, cfg, pc.moments));
                } else if (!perfect && method == EstimatorKind::Method1) {
                    th = psk_ber_approx(cfg.m_c, snr_secondary_method1(real.H_b, cfg, pc.moments));
                } else if (!perfect && method == EstimatorKind::Method2) {
                    th = psk_ber_approx(cfg.m_c, snr_secondary_method2(real.H_b, cfg));
                }
                if (th) {
                    ec.theory_ber_secondary += *th;
                    ec.theory_secondary_trials += 1;
                }
            }
            break;
        }
        case ReceiverKind::MlPerfect:
            det = run_ml_benchmark(obs, pc.rx, real.H_d, hb_true, {true});
            break;
        case ReceiverKind::MlNoPilot:
            det = run_ml_benchmark(obs, pc.rx, real.H_d, hb_true, {false});
            break;
        case ReceiverKind::MlEstimated: {
            const DetectionOutput& p2 = proposed_m2();
            if (has_stx) {
                det = run_ml_benchmark(obs, pc.rx, p2.H_hat_d, p2.H_hat_b, {true});
            } else {
                det = p2;
            }
            break;
        }
        }
        detail::count_primary(ec, frame, det, bits_s);
        if (has_stx) {
            detail::count_secondary(ec, frame, det, t, bits_c);
        }
    }
    return out;
}

/// Trials per work item. Fixed, so the reduction order never depends on
/// the worker count.
inline constexpr std::uint64_t kTrialsPerChunk = 256;

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every point of the sweep. Work items are (point, chunk) pairs
/// pulled by `workers` threads; per-chunk sums are reduced in chunk order.
inline std::vector<BerCurve> run_sweep(const SweepSpec& spec, const Scenario& scenario, std::uint64_t master_seed,
                                       unsigned workers = 1, const ProgressFn& progress = {}) {
    spec.validate();
    std::vector<PointContext> contexts;
    contexts.reserve(spec.points.size());
    for (double p : spec.points) {
        Scenario sc = scenario;
        apply_axis(sc, spec.axis, p);
        contexts.emplace_back(sc.resolve());
    }
    const std::uint64_t chunks = (spec.trials_per_point + kTrialsPerChunk - 1) / kTrialsPerChunk;
    const std::size_t total = spec.points.size() * chunks;
    std::vector<std::vector<ErrorCounts>> partial(total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total || failed.load()) {
                return;
            }
            const std::size_t pi = job / chunks;
            const std::uint64_t chunk = job % chunks;
            const std::uint64_t first = chunk * kTrialsPerChunk;
            const std::uint64_t last = std::min(first + kTrialsPerChunk, spec.trials_per_point);
            std::vector<ErrorCounts> acc(spec.receivers.size());
            try {
                for (std::uint64_t trial = first; trial < last; ++trial) {
                    const auto r = run_trial(contexts[pi], spec.receivers, trial, master_seed);
                    for (std::size_t k = 0; k < acc.size(); ++k) {
                        acc[k] += r[k];
                    }
                }
            } catch (...) {
                if (!failed.exchange(true)) {
                    failure = std::current_exception();
                }
                return;
            }
            partial[job] = std::move(acc);
            const std::size_t d = done.fetch_add(1) + 1;
            if (progress && workers <= 1) {
                progress(d, total);
            }
        }
    };

    workers = std::max(1u, workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<BerCurve> curves(spec.receivers.size());
    for (std::size_t k = 0; k < curves.size(); ++k) {
        curves[k].key = spec.receivers[k];
        for (std::size_t pi = 0; pi < spec.points.size(); ++pi) {
            CurvePoint cp;
            cp.point = spec.points[pi];
            for (std::uint64_t c = 0; c < chunks; ++c) {
                cp.counts += partial[pi * chunks + c][k];
            }
            curves[k].points.push_back(cp);
        }
    }
    return curves;
}

}  // namespace symbio
