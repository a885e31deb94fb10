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

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace symbio;

namespace {

/// Average of Q(sqrt(2 g)) over g ~ Gamma(l, gamma_b), by adaptive quadrature.
double rayleigh_bpsk_quadrature(double gamma_b, int l) {
    auto pdf = [&](double g) {
        return std::exp((l - 1) * std::log(g) - g / gamma_b - std::lgamma(l) - l * std::log(gamma_b));
    };
    auto f = [&](double g) { return q_function(std::sqrt(2.0 * g)) * pdf(g); };
    const double upper = gamma_b * (60.0 + 10.0 * l);
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, upper, 20, 1e-13);
}

}  // namespace

TEST(Moments, SixteenQam) {
    const ConstellationMoments m = qam_moments(16);
    EXPECT_NEAR(m.gamma1, 17.0 / 9.0, 1e-12);
    // (4 * 25 + 8 * 1 + 4 * 100/324) / 16
    EXPECT_NEAR(m.gamma2, (100.0 + 8.0 + 400.0 / 324.0) / 16.0, 1e-12);
    EXPECT_NEAR(m.gamma2, 6.8272, 1e-4);
    const ConstellationMoments q = qam_moments(4);
    EXPECT_NEAR(q.gamma1, 1.0, 1e-12);
    EXPECT_NEAR(q.gamma2, 1.0, 1e-12);
}

TEST(Moments, SixtyFourQamMonteCarlo) {
    const QamAlphabet qam(64);
    const ConstellationMoments m = qam_moments(64);
    RandomStream rs(1, 1);
    double g1 = 0.0;
    double g2 = 0.0;
    const int draws = 4000000;
    for (int i = 0; i < draws; ++i) {
        const double inv = 1.0 / std::norm(qam.point(rs.uniform_index(64)));
        g1 += inv;
        g2 += inv * inv;
    }
    EXPECT_NEAR(g1 / draws / m.gamma1, 1.0, 0.01);
    EXPECT_NEAR(g2 / draws / m.gamma2, 1.0, 0.03);
}

TEST(QamRates, ClosedFormsForGraySquareQam) {
    for (double snr_db : {0.0, 6.0, 12.0, 18.0, 24.0}) {
        const double snr = db_to_linear(snr_db);
        EXPECT_NEAR(qam_ber(4, snr), q_function(std::sqrt(snr)), 1e-15);
        const double x16 = std::sqrt(snr / 5.0);
        const double ber16 = 0.25 * (3.0 * q_function(x16) + 2.0 * q_function(3.0 * x16) - q_function(5.0 * x16));
        EXPECT_NEAR(qam_ber(16, snr), ber16, 1e-14 + 1e-12 * ber16);
        const double x64 = std::sqrt(snr / 21.0);
        const double ber64 = (7.0 * q_function(x64) + 6.0 * q_function(3.0 * x64) - q_function(5.0 * x64) +
                              q_function(9.0 * x64) - q_function(13.0 * x64)) /
                             12.0;
        EXPECT_NEAR(qam_ber(64, snr), ber64, 1e-14 + 1e-12 * ber64);
        EXPECT_NEAR(qam_rates(16, snr).ser, qam_ser(16, snr), 1e-15);
    }
    EXPECT_THROW(qam_rates(8, 1.0), std::invalid_argument);
}

TEST(QamRates, MonteCarloSlicer) {
    const QamAlphabet qam(16);
    const double snr = db_to_linear(12.0);
    RandomStream rs(2, 2);
    const int draws = 1000000;
    long long sym = 0;
    long long bits = 0;
    for (int i = 0; i < draws; ++i) {
        const auto sent = rs.uniform_index(16);
        const auto got = qam.nearest(qam.point(sent) + std::sqrt(1.0 / snr) * rs.unit_cn());
        sym += got != sent;
        bits += bit_errors(sent, got);
    }
    const ErrorRates r = qam_rates(16, snr);
    const double ser = static_cast<double>(sym) / draws;
    const double ber = static_cast<double>(bits) / (4.0 * draws);
    EXPECT_LE(std::abs(ser - r.ser), 3.0 * std::sqrt(r.ser / draws));
    EXPECT_LE(std::abs(ber - r.ber), 3.0 * std::sqrt(r.ber / (4.0 * draws)) * 1.5);
}

TEST(PrimaryTheory, PerfectCsiFlatChannel) {
    SystemConfig cfg;
    cfg.p_t = 1.0;
    cfg.sigma2 = 0.05;
    const ComplexVector h_d = ComplexVector::Constant(cfg.n, cplx(0.6, -0.8));
    const ComplexVector h_b = ComplexVector::Zero(cfg.n);
    EXPECT_NEAR(ber_primary_perfect(h_d, h_b, cfg), qam_ser(16, 20.0), 1e-15);
    const ErrorRates r = primary_rates_perfect(h_d, h_b, {1.0, -1.0}, cfg);
    EXPECT_NEAR(r.ber, qam_ber(16, 20.0), 1e-15);
}

TEST(PrimaryTheory, AveragesOverCoefficients) {
    SystemConfig cfg;
    cfg.p_t = 1.0;
    cfg.sigma2 = 0.1;
    const ComplexVector h_d = ComplexVector::Ones(cfg.n);
    const ComplexVector h_b = ComplexVector::Constant(cfg.n, 0.5);
    const ErrorRates r = primary_rates_perfect(h_d, h_b, {1.0, -1.0, -1.0}, cfg);
    const double expect = (qam_ber(16, 2.25 / 0.1) + 2.0 * qam_ber(16, 0.25 / 0.1)) / 3.0;
    EXPECT_NEAR(r.ber, expect, 1e-15);
}

TEST(PrimaryTheory, PilotNoiseGain) {
    SystemConfig cfg;
    const int taps = cfg.est_taps();
    const auto g = pilot_noise_gain(cfg, taps);
    ASSERT_EQ(static_cast<int>(g.size()), cfg.n);
    for (double v : g) {
        EXPECT_NEAR(v, static_cast<double>(taps) / cfg.n_p(), 1e-12);
    }
    // noise is amplified by (N_p + L) / N_p at high SNR
    const double sig = 1e6;
    const double snr = snr_primary_estimated(sig, g[5], 1.0, 1.0);
    EXPECT_NEAR(sig / snr, (cfg.n_p() + taps) / static_cast<double>(cfg.n_p()), 1e-5);
    EXPECT_NEAR((cfg.n_p() + taps) / static_cast<double>(cfg.n_p()), 1.5, 1e-15);

    // irregular pilots: the average gain is still L / N_p, no entry is below it at pilots
    cfg.pilot_indices = {0, 3, 9, 20, 33, 41, 50, 60};
    const auto gi = pilot_noise_gain(cfg, taps);
    double mean = 0.0;
    for (double v : gi) {
        mean += v;
    }
    mean /= cfg.n;
    EXPECT_GE(mean, static_cast<double>(taps) / cfg.n_p() - 1e-12);

    cfg.xi = 6;
    EXPECT_THROW(pilot_noise_gain(cfg, cfg.est_taps()), SingularSystemError);
}

TEST(SecondaryTheory, PskApproximation) {
    EXPECT_NEAR(psk_ber_approx(2, 4.0), q_function(std::sqrt(8.0)), 1e-18);
    EXPECT_NEAR(q_function(std::sqrt(8.0)), 2.339e-3, 1e-6);
    const double s = std::sin(kPi / 8.0);
    EXPECT_NEAR(psk_ber_approx(8, 30.0), 2.0 / 3.0 * q_function(std::sqrt(2.0 * s * s * 30.0)), 1e-18);
    EXPECT_LE(psk_ber_approx(16, 1e-6), 1.0);
}

TEST(SecondaryTheory, EffectiveSnrOrdering) {
    SystemConfig cfg;
    cfg.m_s = 4;
    cfg.p_t = 1.0;
    const ConstellationMoments qpsk = qam_moments(4);
    RandomStream rs(3, 3);
    const ComplexVector h_b = draw_cn(rs, cfg.n, 1.0);
    for (double sigma2 : {0.01, 0.1, 1.0, 10.0}) {
        cfg.sigma2 = sigma2;
        const double perfect = snr_secondary_perfect(h_b, cfg, qpsk);
        const double m1 = snr_secondary_method1(h_b, cfg, qpsk);
        const double m2 = snr_secondary_method2(h_b, cfg);
        EXPECT_GE(m2, m1);
        EXPECT_LE(m2, perfect / 2.0 + 1e-12);
        EXPECT_LE(m1, perfect / 2.0 + 1e-12);
    }
}

TEST(AverageSecondary, MatchesQuadrature) {
    for (int l : {1, 2, 4}) {
        for (double gb : {1.0, 10.0, 100.0}) {
            const double exact = avg_ber_secondary({gb, l}).exact;
            const double ref = rayleigh_bpsk_quadrature(gb, l);
            EXPECT_NEAR(exact, ref, 1e-6 * ref + 1e-15) << "L " << l << " gamma " << gb;
        }
    }
    EXPECT_THROW(avg_ber_secondary({0.0, 1}), std::invalid_argument);
    EXPECT_THROW(avg_ber_secondary({1.0, 0}), std::invalid_argument);
}

TEST(AverageSecondary, SingleTapClosedForm) {
    for (double gb : {0.5, 3.0, 50.0}) {
        EXPECT_NEAR(avg_ber_secondary({gb, 1}).exact, 0.5 * (1.0 - std::sqrt(gb / (1.0 + gb))), 1e-15);
    }
}

TEST(AverageSecondary, HighSnrApproximationAndSlope) {
    const AvgBer b = avg_ber_secondary({100.0, 2});
    EXPECT_NEAR(b.approx / b.exact, 1.0, 0.10);
    for (int l : {1, 2, 4}) {
        const double lo = db_to_linear(30.0);
        const double hi = db_to_linear(40.0);
        const double slope =
            log_slope(lo, avg_ber_secondary({lo, l}).exact, hi, avg_ber_secondary({hi, l}).exact);
        EXPECT_NEAR(slope / l, 1.0, 0.05) << l;
        const double approx_slope =
            log_slope(lo, avg_ber_secondary({lo, l}).approx, hi, avg_ber_secondary({hi, l}).approx);
        EXPECT_NEAR(approx_slope, l, 1e-9);
    }
}

TEST(AverageSecondary, Monotone) {
    for (int l : {1, 2, 4}) {
        double prev = 1.0;
        for (double db = -10.0; db <= 40.0; db += 2.5) {
            const double v = avg_ber_secondary({db_to_linear(db), l}).exact;
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
    // more taps help at the same per-tap SNR
    EXPECT_LT(avg_ber_secondary({10.0, 4}).exact, avg_ber_secondary({10.0, 2}).exact);
}

TEST(AverageSecondary, LinkParameters) {
    const AvgSnrParams p = AvgSnrParams::from_link(64, 2.0, 0.5, 17.0 / 9.0, 0.25, 3);
    EXPECT_NEAR(p.gamma_b, 64.0 * 2.0 * 0.5 / (17.0 / 9.0 * 0.25), 1e-12);
    EXPECT_EQ(p.l_b, 3);
}

TEST(Method1Expectation, AgreesWithDirectSimulation) {
    // BPSK secondary, QPSK primary, T = 2 preamble, Method 1 errors CN(0, sigma2/P_T)
    const double p_t = 1.0;
    const double sigma2 = 1.0;
    const int n = 64;
    RandomStream rs(4, 4);
    ComplexVector h_b = draw_cn(rs, n, 1.0);
    h_b *= std::sqrt(6.0 / h_b.squaredNorm());
    const ComplexVector h_d = draw_cn(rs, n, 1.0);
    const PskAlphabet bpsk(2);
    const std::vector<cplx> pre = {1.0, -1.0};
    const int trials = 400000;
    int errors = 0;
    const double var = sigma2 / p_t;
    for (int i = 0; i < trials; ++i) {
        const std::vector<ComplexVector> h_pre = {h_d + h_b + draw_cn(rs, n, var), h_d - h_b + draw_cn(rs, n, var)};
        const LinkEstimates e = separate_links(h_pre, pre);
        const auto ci = rs.uniform_index(2);
        const ComplexVector h_n = h_d + bpsk.point(ci) * h_b + draw_cn(rs, n, var);
        errors += detect_secondary(h_n, e.H_d, e.H_b, bpsk) != ci;
    }
    const double sim = static_cast<double>(errors) / trials;
    RandomStream es(5, 5);
    const double expectation = ber_secondary_method1_expectation(h_b, p_t, sigma2, 200000, es);
    EXPECT_NEAR(sim / expectation, 1.0, 0.15) << sim << " vs " << expectation;
}
