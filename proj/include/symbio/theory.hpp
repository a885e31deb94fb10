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

#include "symbio/modulation.hpp"
#include "symbio/numerics.hpp"
#include "symbio/txchain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace symbio {

struct ConstellationMoments {
    double gamma1 = 1.0;  ///< E|1/S|^2
    double gamma2 = 1.0;  ///< E|1/S|^4
};

inline ConstellationMoments moments_of(const Alphabet& a) {
    ConstellationMoments m{0.0, 0.0};
    for (const auto& p : a.points()) {
        const double inv = 1.0 / std::norm(p);
        m.gamma1 += inv;
        m.gamma2 += inv * inv;
    }
    m.gamma1 /= a.order();
    m.gamma2 /= a.order();
    return m;
}

inline ConstellationMoments qam_moments(int m_s) { return moments_of(QamAlphabet(m_s)); }

/// Square-QAM symbol error probability on an AWGN subcarrier with SNR `snr`
/// (unit average symbol power): 1 - (1 - 2(1 - 1/sqrt M) Q(sqrt(3 snr/(M-1))))^2.
inline double qam_ser(int m, double snr) {
    const double root = std::sqrt(static_cast<double>(m));
    const double p = 2.0 * (1.0 - 1.0 / root) * q_function(std::sqrt(3.0 * snr / (m - 1)));
    return 1.0 - (1.0 - p) * (1.0 - p);
}

struct ErrorRates {
    double ser = 0.0;
    double ber = 0.0;
};

/// Symbol and exact bit error probabilities of rail-wise Gray square QAM
/// on AWGN.
///
/// With half spacing d and rail noise std s, deciding level i when level j
/// was sent has probability Q((2|i-j|-1)d/s) - Q((2|i-j|+1)d/s), or just the
/// first term when i is an outer level beyond j.
inline ErrorRates qam_rates(int m, double snr) {
    const int levels = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    if (levels * levels != m || levels < 2) {
        throw std::invalid_argument("qam_rates: order must be a square");
    }
    const int rail_bits = bits_per_symbol(levels);
    const double x = std::sqrt(3.0 * snr / (m - 1));
    // q[t] = Q((2t - 1) x) for t >= 1
    std::vector<double> q(levels + 2, 0.0);
    for (int t = 1; t <= levels; ++t) {
        q[t] = q_function((2.0 * t - 1.0) * x);
    }
    double acc = 0.0;
    for (int j = 0; j < levels; ++j) {
        const std::uint32_t sent = gray_encode(static_cast<std::uint32_t>(j));
        for (int i = 0; i < levels; ++i) {
            if (i == j) {
                continue;
            }
            const int dist = std::abs(i - j);
            const bool outer = (i == 0 && i < j) || (i == levels - 1 && i > j);
            const double p = outer ? q[dist] : q[dist] - q[dist + 1];
            acc += p * bit_errors(sent, gray_encode(static_cast<std::uint32_t>(i)));
        }
    }
    const double rail = 2.0 * (1.0 - 1.0 / levels) * q[1];
    return {1.0 - (1.0 - rail) * (1.0 - rail), acc / (static_cast<double>(levels) * rail_bits)};
}

inline double qam_ber(int m, double snr) { return qam_rates(m, snr).ber; }

/// Per-subcarrier averages over data subcarriers and the listed reflection
/// coefficients; `snr_of(k, c)` gives the decision SNR.
template <class SnrFn>
ErrorRates average_primary_rates(const SystemConfig& cfg, const std::vector<cplx>& cs, SnrFn snr_of) {
    const auto data = cfg.data_indices();
    // frames repeat a few alphabet points; evaluate each distinct one once
    std::vector<std::pair<cplx, int>> distinct;
    for (const auto& c : cs) {
        auto it = std::find_if(distinct.begin(), distinct.end(), [&](const auto& e) { return e.first == c; });
        if (it == distinct.end()) {
            distinct.emplace_back(c, 1);
        } else {
            ++it->second;
        }
    }
    ErrorRates r;
    for (const auto& [c, mult] : distinct) {
        for (int k : data) {
            const ErrorRates e = qam_rates(cfg.m_s, snr_of(k, c));
            r.ser += mult * e.ser;
            r.ber += mult * e.ber;
        }
    }
    const double count = static_cast<double>(data.size() * cs.size());
    r.ser /= count;
    r.ber /= count;
    return r;
}

inline std::vector<cplx> psk_points(int m_c) { return PskAlphabet(m_c).points(); }

/// Perfect-CSI primary error rates averaged over data subcarriers and `cs`.
inline ErrorRates primary_rates_perfect(const ComplexVector& h_d, const ComplexVector& h_b, const std::vector<cplx>& cs,
                                        const SystemConfig& cfg) {
    const double scale = cfg.p_t / cfg.sigma2;
    return average_primary_rates(cfg, cs, [&](int k, cplx c) { return scale * std::norm(h_d[k] + c * h_b[k]); });
}

/// Perfect-CSI primary error display, averaged over data subcarriers and
/// the whole PSK alphabet (a symbol error probability per subcarrier).
inline double ber_primary_perfect(const ComplexVector& h_d, const ComplexVector& h_b, const SystemConfig& cfg) {
    return primary_rates_perfect(h_d, h_b, psk_points(cfg.m_c), cfg).ser;
}

/// f_k^H (F_p^H F_p)^{-1} f_k for every subcarrier, with `taps` columns.
inline std::vector<double> pilot_noise_gain(const SystemConfig& cfg, int taps) {
    const ComplexMatrix f = partial_fourier(cfg.n, taps);
    ComplexMatrix fp(cfg.n_p(), taps);
    for (int i = 0; i < cfg.n_p(); ++i) {
        fp.row(i) = f.row(cfg.pilot_indices[i]);
    }
    const ComplexMatrix gram = fp.adjoint() * fp;
    Eigen::FullPivLU<ComplexMatrix> lu(gram);
    if (!lu.isInvertible()) {
        throw SingularSystemError("pilot_noise_gain: " + std::to_string(taps) + " taps exceed the pilot count");
    }
    const ComplexMatrix inv = lu.inverse();
    std::vector<double> out(cfg.n);
    for (int k = 0; k < cfg.n; ++k) {
        const ComplexVector fk = f.row(k).transpose();
        out[k] = (fk.adjoint() * inv * fk)(0, 0).real();
    }
    return out;
}

/// Decision SNR of S_k with pilot-estimated CSI and noise gain `gain_k`.
inline double snr_primary_estimated(double composite_gain2, double gain_k, double p_t, double sigma2) {
    const double sig = p_t * composite_gain2;
    return sig / (sigma2 * (gain_k + 1.0 + sigma2 * gain_k / sig));
}

inline double snr_primary_estimated(const ComplexVector& h_d, const ComplexVector& h_b, cplx c, int k,
                                    const SystemConfig& cfg) {
    const auto gain = pilot_noise_gain(cfg, cfg.est_taps());
    return snr_primary_estimated(std::norm(h_d[k] + c * h_b[k]), gain[k], cfg.p_t, cfg.sigma2);
}

inline ErrorRates primary_rates_estimated(const ComplexVector& h_d, const ComplexVector& h_b,
                                          const std::vector<cplx>& cs, const SystemConfig& cfg,
                                          const std::vector<double>& gain) {
    return average_primary_rates(cfg, cs, [&](int k, cplx c) {
        return snr_primary_estimated(std::norm(h_d[k] + c * h_b[k]), gain[k], cfg.p_t, cfg.sigma2);
    });
}

inline double ber_primary_estimated(const ComplexVector& h_d, const ComplexVector& h_b, const SystemConfig& cfg) {
    return primary_rates_estimated(h_d, h_b, psk_points(cfg.m_c), cfg, pilot_noise_gain(cfg, cfg.est_taps())).ser;
}

/// High-SNR Gray M-PSK bit error approximation at effective SNR `snr`.
/// The leading factor is 2/log2(M) for M > 2 and 1 for BPSK.
inline double psk_ber_approx(int m_c, double snr) {
    const double prefactor = m_c == 2 ? 1.0 : 2.0 / bits_per_symbol(m_c);
    const double s = std::sin(kPi / m_c);
    return std::min(1.0, prefactor * q_function(std::sqrt(2.0 * s * s * snr)));
}

inline double snr_secondary_perfect(const ComplexVector& h_b, const SystemConfig& cfg, const ConstellationMoments& mom) {
    return cfg.p_t * h_b.squaredNorm() / (mom.gamma1 * cfg.sigma2);
}

inline double ber_secondary_perfect(const ComplexVector& h_b, const SystemConfig& cfg) {
    return psk_ber_approx(cfg.m_c, snr_secondary_perfect(h_b, cfg, qam_moments(cfg.m_s)));
}

inline double snr_secondary_method1(const ComplexVector& h_b, const SystemConfig& cfg, const ConstellationMoments& mom) {
    const double e = cfg.p_t * h_b.squaredNorm();
    const double g1 = mom.gamma1;
    return e / (cfg.sigma2 * (2.0 * g1 + cfg.n * (2.0 * g1 * g1 + mom.gamma2) * cfg.sigma2 / (4.0 * e)));
}

/// Assumes unit-modulus primary symbols.
inline double snr_secondary_method2(const ComplexVector& h_b, const SystemConfig& cfg) {
    const double e = cfg.p_t * h_b.squaredNorm();
    return e / (cfg.sigma2 * (2.0 + 3.0 * cfg.est_taps() * cfg.sigma2 / (4.0 * e)));
}

inline double ber_secondary_method1(const ComplexVector& h_b, const SystemConfig& cfg) {
    return psk_ber_approx(cfg.m_c, snr_secondary_method1(h_b, cfg, qam_moments(cfg.m_s)));
}

inline double ber_secondary_method2(const ComplexVector& h_b, const SystemConfig& cfg) {
    return psk_ber_approx(cfg.m_c, snr_secondary_method2(h_b, cfg));
}

/// BPSK secondary over L_b i.i.d. Rayleigh taps. gamma_b is the average SNR
/// per tap after combining over all subcarriers.
struct AvgSnrParams {
    double gamma_b = 1.0;
    int l_b = 1;

    double mu() const { return std::sqrt(gamma_b / (1.0 + gamma_b)); }

    /// gamma_b = N P_T sigma_b^2 / (Gamma_1 sigma^2): the subcarrier sum
    /// contributes the factor N since ||H_b||^2 = N ||h_b||^2.
    static AvgSnrParams from_link(int n, double p_t, double sigma_b2, double gamma1, double sigma2, int l_b) {
        return {n * p_t * sigma_b2 / (gamma1 * sigma2), l_b};
    }
};

struct AvgBer {
    double exact = 0.0;
    double approx = 0.0;
};

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

inline AvgBer avg_ber_secondary(const AvgSnrParams& p) {
    if (p.l_b < 1 || !(p.gamma_b > 0.0)) {
        throw std::invalid_argument("avg_ber_secondary: need l_b >= 1 and gamma_b > 0");
    }
    const double mu = p.mu();
    double sum = 0.0;
    for (int l = 0; l < p.l_b; ++l) {
        sum += binomial(p.l_b - 1 + l, l) * std::pow((1.0 + mu) / 2.0, l);
    }
    AvgBer out;
    out.exact = std::pow((1.0 - mu) / 2.0, p.l_b) * sum;
    out.approx = binomial(2 * p.l_b - 1, p.l_b) / std::pow(4.0 * p.gamma_b, p.l_b);
    return out;
}

/// Negative slope of log10(BER) against log10(SNR) between two points.
inline double log_slope(double snr_lo, double ber_lo, double snr_hi, double ber_hi) {
    return -(std::log10(ber_hi) - std::log10(ber_lo)) / (std::log10(snr_hi) - std::log10(snr_lo));
}

/// Monte Carlo expectation of the Method 1 BPSK secondary error probability
/// over the fixed separation errors, unit-modulus primary, T = 2 preamble.
/// Conditioned on (eps_d, eps_b) the statistic is Gaussian; its real part
/// against the true c sets the error probability.
inline double ber_secondary_method1_expectation(const ComplexVector& h_b, double p_t, double sigma2, int samples,
                                                RandomStream& stream) {
    const Eigen::Index n = h_b.size();
    const double eb2 = h_b.squaredNorm();
    // eps_1(0), eps_1(1) ~ CN(0, sigma2/P_T I); half sum and half difference are independent
    const double var = sigma2 / (2.0 * p_t);
    double acc = 0.0;
    for (int s = 0; s < samples; ++s) {
        const ComplexVector eps_d = draw_cn(stream, static_cast<int>(n), var);
        const ComplexVector eps_b = draw_cn(stream, static_cast<int>(n), var);
        const ComplexVector hb_hat = h_b + eps_b;
        const double denom = std::sqrt(sigma2 / (2.0 * p_t) * (eb2 + eps_b.squaredNorm()));
        for (double c : {1.0, -1.0}) {
            const double num = (c * hb_hat.dot(c * h_b - eps_d)).real();
            acc += 0.5 * q_function(num / denom);
        }
    }
    return acc / samples;
}

}  // namespace symbio
