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

#include "symbio/receiver.hpp"
#include "symbio/theory.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace symbio;

namespace {

SystemConfig reference_config(double snr_db = 30.0) {
    SystemConfig cfg;
    cfg.sigma2 = dbm_to_watt(-80.0);
    cfg.p_t = db_to_linear(snr_db) * cfg.sigma2 / cfg.channel.beta_direct();
    cfg.validate();
    return cfg;
}

/// Unit-scale configuration: P_T = 1, unit-power taps, so noise variances
/// compare directly against sigma2.
SystemConfig unit_config(double sigma2, int m_s = 16) {
    SystemConfig cfg;
    cfg.p_t = 1.0;
    cfg.sigma2 = sigma2;
    cfg.m_s = m_s;
    return cfg;
}

FrameObservation noise_free_frame(SystemConfig cfg, std::uint64_t seed) {
    cfg.sigma2 = 0.0;
    RandomStream rs(seed, 0);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const Frame f = generate_frame(cfg, rs);
    return frequency_domain_rx(f, r, cfg, rs);
}

int count_errors(const FrameObservation& obs, const DetectionOutput& det, int t) {
    int e = 0;
    for (std::size_t n = 0; n < det.s_hat.size(); ++n) {
        for (std::size_t i = 0; i < det.s_hat[n].size(); ++i) {
            e += det.s_hat[n][i] != obs.truth.data[n][i];
        }
    }
    for (std::size_t i = 0; i < det.c_hat.size(); ++i) {
        e += det.c_hat[i] != obs.truth.c_index[t + i];
    }
    return e;
}

}  // namespace

TEST(PilotEstimate, ImpulseChannel) {
    const SystemConfig cfg = unit_config(0.0);
    ComplexVector h = ComplexVector::Zero(cfg.est_taps());
    h[0] = 1.0;
    const ComplexVector y = partial_fourier(cfg.n, cfg.est_taps()) * h;  // pilots are all ones
    const ComplexVector est = estimate_pilot_cir(pilot_samples(y, cfg), cfg);
    EXPECT_LT((est - h).norm(), 1e-10);
}

TEST(PilotEstimate, EquallySpacedGram) {
    const SystemConfig cfg;
    const ComplexMatrix a = pilot_design_matrix(cfg, cfg.est_taps());
    const ComplexMatrix gram = a.adjoint() * a;
    EXPECT_LT((gram - cfg.n_p() * cfg.p_t * ComplexMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(),
              1e-10);
}

TEST(PilotEstimate, ErrorVariancePerTap) {
    const double sigma2 = 0.1;
    const SystemConfig cfg = unit_config(sigma2);
    const ReceiverContext ctx(cfg);
    const ComplexMatrix pinv = pseudo_inverse(pilot_design_matrix(cfg, cfg.est_taps()));
    RandomStream rs(21, 0);
    const int trials = 100000;
    double acc = 0.0;
    for (int i = 0; i < trials; ++i) {
        // zero channel: the estimate is pure error
        const ComplexVector err = pinv * draw_cn(rs, cfg.n_p(), sigma2);
        acc += err.squaredNorm();
    }
    const double per_tap = acc / trials / cfg.est_taps();
    EXPECT_NEAR(per_tap / (sigma2 / (cfg.n_p() * cfg.p_t)), 1.0, 0.03);
}

TEST(PilotEstimate, TooManyTapsThrows) {
    SystemConfig cfg = unit_config(0.0);
    cfg.xi = 6;  // 9 taps, 8 pilots
    EXPECT_THROW(estimate_pilot_cir(ComplexVector::Zero(cfg.n_p()), cfg), SingularSystemError);
    const ReceiverContext ctx(cfg);
    EXPECT_TRUE(ctx.rank_deficient);
}

TEST(CirToCfr, Basics) {
    ComplexVector e0 = ComplexVector::Zero(3);
    e0[0] = 1.0;
    EXPECT_LT((cir_to_cfr(e0, 16) - ComplexVector::Ones(16)).norm(), 1e-14);
    ComplexVector e1 = ComplexVector::Zero(3);
    e1[1] = 1.0;
    EXPECT_LT((cir_to_cfr(e1, 16) - dft_matrix(16).col(1)).norm(), 1e-14);
    RandomStream rs(1, 2);
    const ComplexVector h = draw_cn(rs, 5, 1.0);
    ComplexVector padded = ComplexVector::Zero(32);
    padded.head(5) = h;
    EXPECT_LT((cir_to_cfr(h, 32) - dft_matrix(32) * padded).norm(), 1e-12);
}

TEST(DetectPrimary, NoiseFreePerfectCsi) {
    const SystemConfig cfg = reference_config();
    const FrameObservation obs = noise_free_frame(cfg, 3);
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const auto dec = detect_primary(obs.y[n], composite_cfr(obs.realization, obs.truth.c[n]), cfg);
        EXPECT_EQ(dec.data, obs.truth.data[n]);
        EXPECT_EQ(dec.erasures, 0);
    }
}

TEST(DetectPrimary, JointScalingInvariance) {
    const SystemConfig cfg = reference_config(15.0);
    RandomStream rs(4, 4);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const Frame f = generate_frame(cfg, rs);
    const FrameObservation obs = frequency_domain_rx(f, r, cfg, rs);
    const cplx alpha(-0.7, 2.3);
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const ComplexVector h = composite_cfr(r, f.c[n]);
        EXPECT_EQ(detect_primary(obs.y[n], h, cfg).data, detect_primary(alpha * obs.y[n], alpha * h, cfg).data);
    }
}

TEST(DetectPrimary, ErasedSubcarrier) {
    const SystemConfig cfg = reference_config();
    const FrameObservation obs = noise_free_frame(cfg, 5);
    ComplexVector h = composite_cfr(obs.realization, obs.truth.c[0]);
    const int k = cfg.data_indices()[3];
    h[k] = 0.0;
    const auto dec = detect_primary(obs.y[0], h, cfg);
    EXPECT_EQ(dec.erasures, 1);
    EXPECT_EQ(dec.data[3], 0u);
}

TEST(DetectPrimary, SingleSubcarrierSymbolErrorRate) {
    // 16-QAM on one unit-gain subcarrier at 20 dB against the closed form
    SystemConfig cfg = unit_config(0.01);
    const QamAlphabet qam(16);
    RandomStream rs(6, 6);
    const int trials = 1000000;
    int errors = 0;
    for (int i = 0; i < trials; ++i) {
        const auto sent = rs.uniform_index(16);
        const cplx y = qam.point(sent) + std::sqrt(cfg.sigma2) * rs.unit_cn();
        errors += qam.nearest(y) != sent;
    }
    const double ser = static_cast<double>(errors) / trials;
    const double theory = qam_ser(16, 1.0 / cfg.sigma2);
    const double se = std::sqrt(theory * (1.0 - theory) / trials);
    EXPECT_LE(std::abs(ser - theory), 3.0 * se);
}

TEST(Method1, NoiseFreeAndIdentity) {
    const SystemConfig cfg = reference_config();
    const FrameObservation obs = noise_free_frame(cfg, 7);
    const ReceiverContext ctx(cfg);
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const ComplexVector h = reestimate_method1(obs.y[n], obs.truth.s[n], cfg);
        const ComplexVector ref = composite_cfr(obs.realization, obs.truth.c[n]);
        EXPECT_LT((h - ref).norm(), 1e-10 * ref.norm());
    }
    const SystemConfig unit = unit_config(0.0);
    RandomStream rs(8, 8);
    const ComplexVector y = draw_cn(rs, unit.n, 1.0);
    EXPECT_LT((reestimate_method1(y, ComplexVector::Ones(unit.n), unit) - y).norm(), 1e-15);
    ComplexVector zero = ComplexVector::Ones(unit.n);
    zero[4] = 0.0;
    EXPECT_THROW(reestimate_method1(y, zero, unit), std::invalid_argument);
}

TEST(Method1, ErrorVarianceSixteenQam) {
    const double sigma2 = 0.05;
    const SystemConfig cfg = unit_config(sigma2);
    const ReceiverContext ctx(cfg);
    RandomStream rs(9, 9);
    const int trials = 100000;
    double acc = 0.0;
    long long count = 0;
    for (int i = 0; i < trials; ++i) {
        std::vector<std::uint32_t> d(ctx.data_idx.size());
        for (auto& v : d) {
            v = rs.uniform_index(16);
        }
        const ComplexVector s = ctx.full_symbol(d);
        const ComplexVector y = draw_cn(rs, cfg.n, sigma2);  // zero channel
        const ComplexVector err = reestimate_method1(y, s, cfg);
        for (int k : ctx.data_idx) {
            acc += std::norm(err[k]);
            ++count;
        }
    }
    const double gamma1 = qam_moments(16).gamma1;
    EXPECT_NEAR(gamma1, 17.0 / 9.0, 1e-12);
    EXPECT_NEAR(acc / count / (sigma2 * gamma1 / cfg.p_t), 1.0, 0.03);
}

TEST(Method2, NoiseFreeExact) {
    const SystemConfig cfg = reference_config();
    const FrameObservation obs = noise_free_frame(cfg, 10);
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const ComplexVector h = reestimate_method2(obs.y[n], obs.truth.s[n], cfg);
        const ComplexVector ref = composite_cfr(obs.realization, obs.truth.c[n]);
        EXPECT_LT((h - ref).norm(), 1e-9 * ref.norm());
        const ComplexVector h_qr = reestimate_method2(obs.y[n], obs.truth.s[n], cfg, true);
        EXPECT_LT((h_qr - ref).norm(), 1e-9 * ref.norm());
    }
}

TEST(Method2, UnitModulusShortcutMatchesGeneralSolve) {
    SystemConfig cfg = reference_config(10.0);
    cfg.m_s = 4;
    RandomStream rs(11, 11);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const Frame f = generate_frame(cfg, rs);
    const FrameObservation obs = frequency_domain_rx(f, r, cfg, rs);
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const ComplexVector fast = reestimate_method2(obs.y[n], f.s[n], cfg);
        const ComplexVector general = reestimate_method2(obs.y[n], f.s[n], cfg, true);
        EXPECT_LT((fast - general).cwiseAbs().maxCoeff(), 1e-10 * fast.cwiseAbs().maxCoeff());
    }
}

TEST(Method2, ErrorVarianceUnitModulus) {
    const double sigma2 = 0.05;
    const SystemConfig cfg = unit_config(sigma2, 4);
    const ReceiverContext ctx(cfg);
    RandomStream rs(12, 12);
    const int trials = 100000;
    double acc = 0.0;
    for (int i = 0; i < trials; ++i) {
        std::vector<std::uint32_t> d(ctx.data_idx.size());
        for (auto& v : d) {
            v = rs.uniform_index(4);
        }
        const ComplexVector s = ctx.full_symbol(d);
        acc += reestimate_method2(draw_cn(rs, cfg.n, sigma2), s, cfg, ctx.f_l).squaredNorm();
    }
    const double per_sub = acc / trials / cfg.n;
    const double l = cfg.est_taps();
    EXPECT_NEAR(per_sub / (l * sigma2 / (cfg.n * cfg.p_t)), 1.0, 0.03);
}

TEST(SeparateLinks, NoiseFreeAndEquation13) {
    const SystemConfig cfg = reference_config();
    RandomStream rs(13, 13);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const std::vector<cplx> pre = {1.0, -1.0};
    const std::vector<ComplexVector> h = {composite_cfr(r, 1.0), composite_cfr(r, -1.0)};
    const LinkEstimates e = separate_links(h, pre);
    EXPECT_LT((e.H_d - r.H_d).norm(), 1e-12 * r.H_d.norm());
    EXPECT_LT((e.H_b - r.H_b).norm(), 1e-9 * r.H_b.norm());
    // half sum / half difference
    EXPECT_LT((e.H_d - (h[0] + h[1]) / 2.0).norm(), 1e-25);
    EXPECT_LT((e.H_b - (h[0] - h[1]) / 2.0).norm(), 1e-25);
}

TEST(SeparateLinks, GeneralPreambleNoiseFree) {
    const SystemConfig cfg = reference_config();
    RandomStream rs(14, 14);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const std::vector<cplx> pre = {1.0, 1.0, cplx(0, 1)};
    EXPECT_FALSE(preamble_compliant(pre));
    std::vector<ComplexVector> h;
    for (const auto& c : pre) {
        h.push_back(composite_cfr(r, c));
    }
    const LinkEstimates e = separate_links(h, pre);
    EXPECT_LT((e.H_d - r.H_d).norm(), 1e-9 * r.H_d.norm());
    EXPECT_LT((e.H_b - r.H_b).norm(), 1e-6 * r.H_b.norm());
    EXPECT_THROW(separate_links({h[0], h[0]}, {1.0, 1.0}), SingularSystemError);
    EXPECT_THROW(separate_links({h[0]}, {1.0}), std::invalid_argument);
}

TEST(SeparateLinks, ErrorVarianceFourSymbolPreamble) {
    const double var_eps = 1.0;
    const std::vector<cplx> pre = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
    EXPECT_TRUE(preamble_compliant(pre));
    RandomStream rs(15, 15);
    const int trials = 100000;
    const int n = 4;
    double acc_d = 0.0;
    double acc_b = 0.0;
    for (int i = 0; i < trials; ++i) {
        std::vector<ComplexVector> h;
        for (int t = 0; t < 4; ++t) {
            h.push_back(draw_cn(rs, n, var_eps));  // zero links: estimates are pure error
        }
        const LinkEstimates e = separate_links(h, pre);
        acc_d += e.H_d.squaredNorm();
        acc_b += e.H_b.squaredNorm();
    }
    EXPECT_NEAR(acc_d / (trials * n) / (var_eps / 4.0), 1.0, 0.05);
    EXPECT_NEAR(acc_b / (trials * n) / (var_eps / 4.0), 1.0, 0.05);
}

TEST(DetectSecondary, NoiseFreeEveryPoint) {
    const SystemConfig cfg = reference_config();
    RandomStream rs(16, 16);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    for (int m : {2, 4, 8, 16}) {
        const PskAlphabet psk(m);
        for (int i = 0; i < m; ++i) {
            const auto idx = static_cast<std::uint32_t>(i);
            EXPECT_EQ(detect_secondary(composite_cfr(r, psk.point(idx)), r.H_d, r.H_b, psk), idx);
        }
    }
}

TEST(DetectSecondary, JointScalingInvariance) {
    const SystemConfig cfg = reference_config();
    RandomStream rs(17, 17);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const PskAlphabet psk(8);
    const ComplexVector noise = draw_cn(rs, cfg.n, 0.3 * r.H_b.squaredNorm() / cfg.n);
    for (int i = 0; i < 8; ++i) {
        const cplx c = psk.point(static_cast<std::uint32_t>(i));
        const ComplexVector h = r.H_d + c * r.H_b + noise;
        const double alpha = 3.7;
        EXPECT_EQ(detect_secondary(h, r.H_d, r.H_b, psk),
                  detect_secondary(r.H_d + alpha * (h - r.H_d), r.H_d, alpha * r.H_b, psk));
    }
}

TEST(DetectSecondary, ZeroBackscatterThrows) {
    const PskAlphabet psk(2);
    const ComplexVector z = ComplexVector::Zero(8);
    EXPECT_THROW(detect_secondary(z, z, z, psk), UndetectableSecondaryError);
}

TEST(DetectSecondary, BpskPerfectCsiMatchesQ) {
    // QPSK primary (Gamma_1 = 1), Method 1 with correct symbols, fixed H_b
    const double sigma2 = 1.0;
    SystemConfig cfg = unit_config(sigma2, 4);
    cfg.m_c = 2;
    const ReceiverContext ctx(cfg);
    RandomStream rs(18, 18);
    ComplexVector h_b = draw_cn(rs, cfg.n, 1.0);
    h_b *= std::sqrt(2.0 / h_b.squaredNorm());  // ||H_b||^2 = 2, so the Q argument is 2
    const ComplexVector h_d = draw_cn(rs, cfg.n, 1.0);
    const int trials = 1000000;
    int errors = 0;
    for (int i = 0; i < trials; ++i) {
        std::vector<std::uint32_t> d(ctx.data_idx.size());
        for (auto& v : d) {
            v = rs.uniform_index(4);
        }
        const ComplexVector s = ctx.full_symbol(d);
        const auto ci = rs.uniform_index(2);
        const cplx c = ctx.psk.point(ci);
        const ComplexVector y = s.cwiseProduct(h_d + c * h_b) + draw_cn(rs, cfg.n, sigma2);
        errors += detect_secondary(reestimate_method1(y, s, cfg), h_d, h_b, ctx.psk) != ci;
    }
    const double ber = static_cast<double>(errors) / trials;
    const double theory = q_function(std::sqrt(2.0 * cfg.p_t * h_b.squaredNorm() / sigma2));
    const double se = std::sqrt(theory * (1.0 - theory) / trials);
    EXPECT_LE(std::abs(ber - theory), 3.0 * se) << ber << " vs " << theory;
}

TEST(Algorithm1, NoiseFreeIdentityAllMethods) {
    for (int m_c : {2, 8}) {
        SystemConfig cfg = reference_config();
        cfg.m_c = m_c;
        const ReceiverContext ctx(cfg);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const FrameObservation obs = noise_free_frame(cfg, 100 + seed);
            for (auto method : {EstimatorKind::PilotOnly, EstimatorKind::Method1, EstimatorKind::Method2}) {
                for (bool perfect : {false, true}) {
                    for (bool genie : {false, true}) {
                        const DetectionOutput det = run_algorithm1(obs, method, ctx, {perfect, genie, false});
                        EXPECT_EQ(count_errors(obs, det, cfg.t_preamble()), 0) << to_string(method);
                        EXPECT_EQ(det.c_hat.size(), static_cast<std::size_t>(cfg.n_max - cfg.t_preamble()));
                    }
                }
            }
        }
    }
}

TEST(Algorithm1, PrimaryDecisionsIndependentOfReestimation) {
    const SystemConfig cfg = reference_config(15.0);
    const ReceiverContext ctx(cfg);
    RandomStream rs(19, 19);
    for (int i = 0; i < 20; ++i) {
        const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
        const Frame f = generate_frame(cfg, rs);
        const FrameObservation obs = frequency_domain_rx(f, r, cfg, rs);
        const auto p = run_algorithm1(obs, EstimatorKind::PilotOnly, ctx);
        EXPECT_EQ(p.s_hat, run_algorithm1(obs, EstimatorKind::Method1, ctx).s_hat);
        EXPECT_EQ(p.s_hat, run_algorithm1(obs, EstimatorKind::Method2, ctx).s_hat);
    }
}

TEST(Algorithm1, NoDirectLink) {
    SystemConfig cfg = reference_config();
    cfg.channel.direct_link = false;
    const ReceiverContext ctx(cfg);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FrameObservation obs = noise_free_frame(cfg, 200 + seed);
        EXPECT_EQ(obs.realization.H_d.squaredNorm(), 0.0);
        const DetectionOutput det = run_algorithm1(obs, EstimatorKind::Method2, ctx);
        EXPECT_EQ(count_errors(obs, det, cfg.t_preamble()), 0);
    }
}

TEST(Algorithm1, FullCombNestsMethod2) {
    SystemConfig cfg = unit_config(0.2, 4);
    cfg.pilot_indices = comb_pilots(cfg.n, cfg.n);
    cfg.pilot_values = std::vector<cplx>(cfg.n, 1.0);
    cfg.validate();
    const ReceiverContext ctx(cfg);
    RandomStream rs(20, 20);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    const Frame f = generate_frame(cfg, rs);
    const FrameObservation obs = frequency_domain_rx(f, r, cfg, rs);
    const auto p = run_algorithm1(obs, EstimatorKind::PilotOnly, ctx);
    const auto m2 = run_algorithm1(obs, EstimatorKind::Method2, ctx);
    for (std::size_t n = 0; n < p.H_hat.size(); ++n) {
        EXPECT_LT((p.H_hat[n] - m2.H_hat[n]).cwiseAbs().maxCoeff(), 1e-12 * p.H_hat[n].cwiseAbs().maxCoeff());
    }
    EXPECT_EQ(p.c_hat, m2.c_hat);
}

TEST(MlBenchmark, NoiseFreeRecovery) {
    const SystemConfig cfg = reference_config();
    const ReceiverContext ctx(cfg);
    const FrameObservation obs = noise_free_frame(cfg, 300);
    // pilot tones carry 1, which is off the QAM grid, so only the pilot-aware metric is exact
    const DetectionOutput det = run_ml_benchmark(obs, ctx, obs.realization.H_d, obs.realization.H_b, {true});
    EXPECT_EQ(count_errors(obs, det, cfg.t_preamble()), 0);
}

TEST(MlBenchmark, SignAmbiguityWithoutDirectLink) {
    SystemConfig cfg = reference_config();
    cfg.channel.direct_link = false;
    cfg.m_c = 2;
    cfg.n_max = 3;
    const ReceiverContext ctx(cfg);
    RandomStream rs(301, 0);
    const ChannelRealization r = draw_channel(cfg.channel, cfg.n, rs);
    Frame f = generate_frame(cfg, rs);
    FrameObservation obs = frequency_domain_rx(f, r, cfg, rs);
    std::vector<int> all(cfg.n);
    for (int k = 0; k < cfg.n; ++k) {
        all[k] = k;
    }
    for (std::size_t n = 0; n < obs.y.size(); ++n) {
        const MlCandidate plus = ml_metric(obs.y[n], r.H_d, r.H_b, 1.0, cfg.p_t, ctx.qam, all);
        const MlCandidate minus = ml_metric(obs.y[n], r.H_d, r.H_b, -1.0, cfg.p_t, ctx.qam, all);
        EXPECT_EQ(plus.metric, minus.metric);
        for (std::size_t i = 0; i < all.size(); ++i) {
            EXPECT_EQ(ctx.qam.point(plus.labels[i]), -ctx.qam.point(minus.labels[i]));
        }
    }
}
