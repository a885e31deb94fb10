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
#include "symbio/modulation.hpp"
#include "symbio/numerics.hpp"
#include "symbio/txchain.hpp"

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace symbio {

enum class EstimatorKind { PilotOnly, Method1, Method2 };

inline const char* to_string(EstimatorKind k) {
    switch (k) {
    case EstimatorKind::PilotOnly: return "pilot_only";
    case EstimatorKind::Method1: return "method1";
    case EstimatorKind::Method2: return "method2";
    }
    return "?";
}

/// Raised when the backscatter response estimate vanishes.
class UndetectableSecondaryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kErasureThreshold = 1e-12;

/// Pilot sub-matrix sqrt(P_T) S_p F_p of the composite model restricted to
/// the pilot subcarriers, with `taps` columns.
inline ComplexMatrix pilot_design_matrix(const SystemConfig& cfg, int taps) {
    const ComplexMatrix f = partial_fourier(cfg.n, taps);
    ComplexMatrix a(cfg.n_p(), taps);
    const double amp = std::sqrt(cfg.p_t);
    for (int i = 0; i < cfg.n_p(); ++i) {
        a.row(i) = amp * cfg.pilot_values[i] * f.row(cfg.pilot_indices[i]);
    }
    return a;
}

inline ComplexVector pilot_samples(const ComplexVector& y, const SystemConfig& cfg) {
    ComplexVector yp(cfg.n_p());
    for (int i = 0; i < cfg.n_p(); ++i) {
        yp[i] = y[cfg.pilot_indices[i]];
    }
    return yp;
}

/// Pilot LSE of the L = cfg.est_taps() composite taps. Throws
/// SingularSystemError when L exceeds the pilot count.
inline ComplexVector estimate_pilot_cir(const ComplexVector& y_pilot, const SystemConfig& cfg) {
    if (y_pilot.size() != cfg.n_p()) {
        throw std::invalid_argument("estimate_pilot_cir: expected " + std::to_string(cfg.n_p()) + " pilot samples");
    }
    return ls_solve(pilot_design_matrix(cfg, cfg.est_taps()), y_pilot);
}

inline ComplexVector cir_to_cfr(const ComplexVector& h, int n) {
    return partial_fourier(n, static_cast<int>(h.size())) * h;
}

struct PrimaryDecision {
    std::vector<std::uint32_t> data;  ///< labels on data subcarriers
    int erasures = 0;
};

/// Single-tap equalisation with the composite estimate and nearest-point
/// decision on each data subcarrier. Subcarriers with |H| below
/// kErasureThreshold decide label 0 and are counted as erasures.
inline PrimaryDecision detect_primary(const ComplexVector& y, const ComplexVector& h_tilde, const SystemConfig& cfg,
                                      const QamAlphabet& qam, const std::vector<int>& data_idx) {
    PrimaryDecision out;
    out.data.resize(data_idx.size());
    const double inv_amp = 1.0 / std::sqrt(cfg.p_t);
    for (std::size_t i = 0; i < data_idx.size(); ++i) {
        const int k = data_idx[i];
        const double mag2 = std::norm(h_tilde[k]);
        if (!(mag2 > kErasureThreshold * kErasureThreshold)) {
            out.data[i] = 0;
            ++out.erasures;
            continue;
        }
        out.data[i] = qam.nearest(std::conj(h_tilde[k]) / mag2 * y[k] * inv_amp);
    }
    return out;
}

inline PrimaryDecision detect_primary(const ComplexVector& y, const ComplexVector& h_tilde, const SystemConfig& cfg) {
    return detect_primary(y, h_tilde, cfg, QamAlphabet(cfg.m_s), cfg.data_indices());
}

/// Per-subcarrier re-estimate Y_k / (sqrt(P_T) S_k).
inline ComplexVector reestimate_method1(const ComplexVector& y, const ComplexVector& s_hat, const SystemConfig& cfg) {
    const double amp = std::sqrt(cfg.p_t);
    ComplexVector h(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) {
        if (s_hat[k] == cplx{0.0, 0.0}) {
            throw std::invalid_argument("reestimate_method1: zero symbol at subcarrier " + std::to_string(k));
        }
        h[k] = y[k] / (amp * s_hat[k]);
    }
    return h;
}

inline bool unit_modulus(const ComplexVector& s) {
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (std::abs(std::norm(s[k]) - 1.0) > 1e-12) {
            return false;
        }
    }
    return true;
}

/// L-tap LSE over all N subcarriers, projected back through F_L. For
/// unit-modulus symbols the closed form F_L^H S^H Y / (N sqrt(P_T)) is used
/// unless `force_general` is set.
inline ComplexVector reestimate_method2(const ComplexVector& y, const ComplexVector& s_hat, const SystemConfig& cfg,
                                        const ComplexMatrix& f_l, bool force_general = false) {
    const double amp = std::sqrt(cfg.p_t);
    if (!force_general && unit_modulus(s_hat)) {
        const ComplexVector z = s_hat.conjugate().cwiseProduct(y);
        return f_l * (f_l.adjoint() * z) / (static_cast<double>(cfg.n) * amp);
    }
    // weighted normal equations F^H |S|^2 F h = F^H S^* y; QR fallback when
    // the Gram matrix is not positive definite
    const Eigen::VectorXd w = s_hat.cwiseAbs2();
    const ComplexMatrix gram = f_l.adjoint() * w.asDiagonal() * f_l;
    Eigen::LLT<ComplexMatrix> llt(gram);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().real().minCoeff() > 1e-6) {
        return f_l * llt.solve(f_l.adjoint() * s_hat.conjugate().cwiseProduct(y)) / amp;
    }
    const ComplexMatrix a = amp * (s_hat.asDiagonal() * f_l);
    return f_l * ls_solve(a, y);
}

inline ComplexVector reestimate_method2(const ComplexVector& y, const ComplexVector& s_hat, const SystemConfig& cfg,
                                        bool force_general = false) {
    return reestimate_method2(y, s_hat, cfg, partial_fourier(cfg.n, cfg.est_taps()), force_general);
}

inline bool preamble_compliant(const std::vector<cplx>& preamble) {
    cplx sum = 0.0;
    for (const auto& c : preamble) {
        if (std::abs(std::abs(c) - 1.0) > 1e-12) {
            return false;
        }
        sum += c;
    }
    return std::abs(sum) <= 1e-12;
}

struct LinkEstimates {
    ComplexVector H_d;
    ComplexVector H_b;
};

/// Least-squares separation of direct and backscatter responses from the
/// composite estimates over the preamble. Compliant preambles (unit modulus,
/// zero sum) use the averaging form; others solve the per-subcarrier 2x2
/// normal equations. Throws SingularSystemError when the preamble cannot
/// separate the links.
inline LinkEstimates separate_links(const std::vector<ComplexVector>& h_pre, const std::vector<cplx>& preamble) {
    const auto t = preamble.size();
    if (t < 2 || h_pre.size() < t) {
        throw std::invalid_argument("separate_links: need at least 2 preamble symbols and one estimate per symbol");
    }
    const Eigen::Index n = h_pre[0].size();
    LinkEstimates out{ComplexVector::Zero(n), ComplexVector::Zero(n)};
    if (preamble_compliant(preamble)) {
        for (std::size_t i = 0; i < t; ++i) {
            out.H_d += h_pre[i];
            out.H_b += std::conj(preamble[i]) * h_pre[i];
        }
        out.H_d /= static_cast<double>(t);
        out.H_b /= static_cast<double>(t);
        return out;
    }
    // Gram matrix [[T, sum c], [sum c*, sum |c|^2]]
    cplx sum_c = 0.0;
    double sum_p = 0.0;
    for (const auto& c : preamble) {
        sum_c += c;
        sum_p += std::norm(c);
    }
    const cplx det = static_cast<double>(t) * sum_p - std::norm(sum_c);
    if (std::abs(det) <= 1e-12 * static_cast<double>(t) * sum_p) {
        throw SingularSystemError("separate_links: preamble does not separate the direct and backscatter links");
    }
    ComplexVector rhs_d = ComplexVector::Zero(n);
    ComplexVector rhs_b = ComplexVector::Zero(n);
    for (std::size_t i = 0; i < t; ++i) {
        rhs_d += h_pre[i];
        rhs_b += std::conj(preamble[i]) * h_pre[i];
    }
    out.H_d = (sum_p * rhs_d - sum_c * rhs_b) / det;
    out.H_b = (static_cast<double>(t) * rhs_b - std::conj(sum_c) * rhs_d) / det;
    return out;
}

/// Projection of (H(n) - H_d) onto H_b and nearest-PSK decision.
inline std::uint32_t detect_secondary(const ComplexVector& h_n, const ComplexVector& h_d, const ComplexVector& h_b,
                                      const PskAlphabet& psk) {
    const double energy = h_b.squaredNorm();
    if (!(energy > 0.0)) {
        throw UndetectableSecondaryError("detect_secondary: backscatter response estimate is zero");
    }
    return psk.nearest(h_b.dot(h_n - h_d) / energy);
}

struct DetectionOutput {
    std::vector<std::vector<std::uint32_t>> s_hat;  ///< per symbol, labels on data subcarriers
    std::vector<std::uint32_t> c_hat;               ///< for symbols n >= T (index n - T)
    std::vector<ComplexVector> H_tilde;
    std::vector<ComplexVector> H_hat;
    ComplexVector H_hat_d;
    ComplexVector H_hat_b;
    int erasures = 0;
    bool pilot_rank_deficient = false;
};

/// Per-configuration matrices reused across frames.
struct ReceiverContext {
    SystemConfig cfg;
    QamAlphabet qam;
    PskAlphabet psk;
    std::vector<int> data_idx;
    int taps;
    ComplexMatrix f_l;       ///< N x L
    ComplexMatrix g0_cfr;    ///< N x N_p map from pilot samples to the composite CFR
    bool rank_deficient = false;

    explicit ReceiverContext(const SystemConfig& c)
        : cfg(c), qam(c.m_s), psk(c.m_c), data_idx(c.data_indices()), taps(std::min(c.est_taps(), c.n)),
          f_l(partial_fourier(c.n, taps)) {
        const ComplexMatrix a = pilot_design_matrix(c, taps);
        Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(a);
        cod.setThreshold(detail::kRankTolerance);
        rank_deficient = cod.rank() < taps;
        // beyond the pilot count the minimum-norm solution stands in for the LSE
        g0_cfr = f_l * cod.pseudoInverse();
    }

    ComplexVector pilot_cfr(const ComplexVector& y) const { return g0_cfr * pilot_samples(y, cfg); }

    ComplexVector full_symbol(const std::vector<std::uint32_t>& data) const {
        ComplexVector s(cfg.n);
        for (int i = 0; i < cfg.n_p(); ++i) {
            s[cfg.pilot_indices[i]] = cfg.pilot_values[i];
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            s[data_idx[i]] = qam.point(data[i]);
        }
        return s;
    }
};

struct Algorithm1Options {
    /// Use the true composite, direct and backscatter responses instead of
    /// estimates (the re-estimation step still runs and is reported).
    bool perfect_csi = false;
    /// Feed the transmitted primary symbols to re-estimation.
    bool genie_primary = false;
    /// Skip link separation and secondary detection (no STx present).
    bool skip_secondary = false;
};

/// True composite responses as seen by the receiver, including the sync offset.
inline std::vector<ComplexVector> true_composite_cfrs(const FrameObservation& obs) {
    const ComplexVector hb = obs.realization.backscatter_cfr(obs.xi);
    std::vector<ComplexVector> out;
    out.reserve(obs.truth.c.size());
    for (const auto& c : obs.truth.c) {
        out.push_back(obs.realization.H_d + c * hb);
    }
    return out;
}

/// Joint primary and secondary detection: pilot estimate, primary
/// detection and re-estimation for every symbol, link separation over the
/// preamble, then secondary detection for n >= T.
inline DetectionOutput run_algorithm1(const FrameObservation& obs, EstimatorKind method, const ReceiverContext& ctx,
                                      Algorithm1Options opt = {}) {
    const SystemConfig& cfg = ctx.cfg;
    const int frames = static_cast<int>(obs.y.size());
    const int t = cfg.t_preamble();
    DetectionOutput out;
    out.pilot_rank_deficient = ctx.rank_deficient;
    std::vector<ComplexVector> truth_h;
    if (opt.perfect_csi) {
        truth_h = true_composite_cfrs(obs);
    }
    for (int n = 0; n < frames; ++n) {
        ComplexVector h_tilde = opt.perfect_csi ? truth_h[n] : ctx.pilot_cfr(obs.y[n]);
        PrimaryDecision dec = detect_primary(obs.y[n], h_tilde, cfg, ctx.qam, ctx.data_idx);
        out.erasures += dec.erasures;
        const ComplexVector s_full = ctx.full_symbol(opt.genie_primary ? obs.truth.data[n] : dec.data);
        ComplexVector h_hat;
        switch (method) {
        case EstimatorKind::PilotOnly: h_hat = h_tilde; break;
        case EstimatorKind::Method1: h_hat = reestimate_method1(obs.y[n], s_full, cfg); break;
        case EstimatorKind::Method2: h_hat = reestimate_method2(obs.y[n], s_full, cfg, ctx.f_l); break;
        }
        out.s_hat.push_back(std::move(dec.data));
        out.H_tilde.push_back(std::move(h_tilde));
        out.H_hat.push_back(std::move(h_hat));
    }
    if (opt.skip_secondary) {
        return out;
    }
    if (opt.perfect_csi) {
        out.H_hat_d = obs.realization.H_d;
        out.H_hat_b = obs.realization.backscatter_cfr(obs.xi);
    } else {
        const LinkEstimates links = separate_links(
            std::vector<ComplexVector>(out.H_hat.begin(), out.H_hat.begin() + t), cfg.preamble);
        out.H_hat_d = links.H_d;
        out.H_hat_b = links.H_b;
    }
    for (int n = t; n < frames; ++n) {
        out.c_hat.push_back(detect_secondary(out.H_hat[n], out.H_hat_d, out.H_hat_b, ctx.psk));
    }
    return out;
}

/// Metric and decisions of one candidate reflection coefficient over the
/// subcarriers in `subcarriers`: sum_k min_S |Y_k - sqrt(P_T)(H_d,k + c H_b,k) S|^2.
/// Subcarriers listed in `known` use the known symbol instead of a search.
struct MlCandidate {
    double metric = 0.0;
    std::vector<std::uint32_t> labels;  ///< one per entry of `subcarriers`
};

inline MlCandidate ml_metric(const ComplexVector& y, const ComplexVector& h_d, const ComplexVector& h_b, cplx c,
                             double p_t, const QamAlphabet& qam, const std::vector<int>& subcarriers,
                             const std::vector<int>& known_idx = {}, const std::vector<cplx>& known_val = {}) {
    const double amp = std::sqrt(p_t);
    MlCandidate out;
    out.labels.resize(subcarriers.size());
    for (std::size_t i = 0; i < subcarriers.size(); ++i) {
        const int k = subcarriers[i];
        const cplx h = amp * (h_d[k] + c * h_b[k]);
        const double g = std::norm(h);
        if (!(g > 0.0)) {
            // every symbol explains y equally badly
            out.metric += std::norm(y[k]);
            out.labels[i] = 0;
            continue;
        }
        // |y - h S|^2 = |h|^2 |y/h - S|^2, so the per-subcarrier search is a slice of y/h
        const cplx z = std::conj(h) * y[k] / g;
        const std::uint32_t arg = qam.nearest(z);
        out.metric += g * std::norm(z - qam.point(arg));
        out.labels[i] = arg;
    }
    for (std::size_t i = 0; i < known_idx.size(); ++i) {
        const int k = known_idx[i];
        out.metric += std::norm(y[k] - amp * (h_d[k] + c * h_b[k]) * known_val[i]);
    }
    return out;
}

struct MlOptions {
    /// Use known pilot subcarriers in the metric and the known preamble
    /// coefficients. Without it every subcarrier is searched over the QAM
    /// alphabet and every symbol over the PSK alphabet.
    bool use_pilots = true;
};

/// Two-step ML benchmark: for each candidate c the per-subcarrier QAM
/// search, then the c with the smallest total metric.
inline DetectionOutput run_ml_benchmark(const FrameObservation& obs, const ReceiverContext& ctx, const ComplexVector& h_d,
                                        const ComplexVector& h_b, MlOptions opt = {}) {
    const SystemConfig& cfg = ctx.cfg;
    const int frames = static_cast<int>(obs.y.size());
    const int t = cfg.t_preamble();
    std::vector<int> all(cfg.n);
    for (int k = 0; k < cfg.n; ++k) {
        all[k] = k;
    }
    DetectionOutput out;
    out.H_hat_d = h_d;
    out.H_hat_b = h_b;
    for (int n = 0; n < frames; ++n) {
        const bool known_c = opt.use_pilots && n < t;
        MlCandidate best;
        best.metric = std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        const int candidates = known_c ? 1 : ctx.psk.order();
        for (int m = 0; m < candidates; ++m) {
            const cplx c = known_c ? cfg.preamble[n] : ctx.psk.point(static_cast<std::uint32_t>(m));
            MlCandidate cand = opt.use_pilots
                                   ? ml_metric(obs.y[n], h_d, h_b, c, cfg.p_t, ctx.qam, ctx.data_idx, cfg.pilot_indices,
                                               cfg.pilot_values)
                                   : ml_metric(obs.y[n], h_d, h_b, c, cfg.p_t, ctx.qam, all);
            if (cand.metric < best.metric) {
                best = std::move(cand);
                best_c = static_cast<std::uint32_t>(m);
            }
        }
        if (!opt.use_pilots) {
            std::vector<std::uint32_t> data(ctx.data_idx.size());
            for (std::size_t i = 0; i < ctx.data_idx.size(); ++i) {
                data[i] = best.labels[ctx.data_idx[i]];
            }
            best.labels = std::move(data);
        }
        out.s_hat.push_back(std::move(best.labels));
        if (n >= t) {
            out.c_hat.push_back(best_c);
        }
    }
    return out;
}

}  // namespace symbio
