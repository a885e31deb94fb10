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

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace symbio {

/// All scenario constants shared by the transmitter, channel and receiver.
struct SystemConfig {
    int n = 64;
    int n_cp = 16;
    std::vector<int> pilot_indices = {0, 8, 16, 24, 32, 40, 48, 56};
    std::vector<cplx> pilot_values = std::vector<cplx>(8, cplx{1.0, 0.0});
    int m_s = 16;
    int m_c = 8;
    std::vector<cplx> preamble = {cplx{1.0, 0.0}, cplx{-1.0, 0.0}};
    int n_max = 10;
    double p_t = 1.0;
    double sigma2 = 1e-11;
    /// Symbol synchronisation error at the STx, in samples.
    int xi = 0;
    ChannelConfig channel;

    int n_p() const { return static_cast<int>(pilot_indices.size()); }
    int t_preamble() const { return static_cast<int>(preamble.size()); }

    /// Composite taps the receiver estimates: max(L_d, L_b + d_b + xi).
    int est_taps() const { return std::max(channel.l_d, channel.l_b() + channel.d_b + xi); }

    std::vector<int> data_indices() const {
        std::vector<int> out;
        out.reserve(n - n_p());
        std::size_t p = 0;
        for (int k = 0; k < n; ++k) {
            if (p < pilot_indices.size() && pilot_indices[p] == k) {
                ++p;
            } else {
                out.push_back(k);
            }
        }
        return out;
    }

    bool pilots_equally_spaced() const {
        if (n_p() == 0 || n % n_p() != 0) {
            return false;
        }
        const int step = n / n_p();
        for (int i = 0; i < n_p(); ++i) {
            if (pilot_indices[i] != pilot_indices[0] + i * step) {
                return false;
            }
        }
        return true;
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
        channel.validate();
        if (n < 2) fail("n must be >= 2");
        if (n_cp < 0) fail("n_cp must be >= 0");
        if (pilot_indices.size() != pilot_values.size()) fail("pilot_indices and pilot_values differ in size");
        for (std::size_t i = 0; i < pilot_indices.size(); ++i) {
            if (pilot_indices[i] < 0 || pilot_indices[i] >= n) fail("pilot index out of range");
            if (i > 0 && pilot_indices[i] <= pilot_indices[i - 1]) fail("pilot indices must be strictly increasing");
            if (std::abs(std::abs(pilot_values[i]) - 1.0) > 1e-9) fail("pilot values must have unit modulus");
        }
        const int base_taps = std::max(channel.l_d, channel.l_b() + channel.d_b);
        if (n_p() < base_taps) {
            fail("need at least " + std::to_string(base_taps) + " pilot subcarriers, have " + std::to_string(n_p()));
        }
        if (channel.l_d > n_cp + 1 || channel.l_b() + channel.d_b > n_cp + 1) {
            fail("cyclic prefix shorter than the channel memory");
        }
        const auto k = bits_per_symbol(m_s);
        if (m_s < 4 || (m_s & (m_s - 1)) != 0 || k % 2 != 0) fail("m_s must be a power of 4");
        if (m_c < 2 || (m_c & (m_c - 1)) != 0) fail("m_c must be a power of 2");
        if (t_preamble() < 2) fail("preamble needs at least 2 symbols");
        cplx sum = 0.0;
        for (const auto& c : preamble) {
            if (std::abs(std::abs(c) - 1.0) > 1e-9) fail("preamble symbols must have unit modulus");
            sum += c;
        }
        if (std::abs(sum) > 1e-9) fail("preamble symbols must sum to zero");
        if (n_max <= t_preamble()) fail("n_max must exceed the preamble length");
        if (!(p_t > 0.0)) fail("p_t must be positive");
        if (!(sigma2 >= 0.0)) fail("sigma2 must be non-negative");
        if (xi < 0 || xi >= n + n_cp) fail("xi must lie in [0, n + n_cp)");
    }
};

/// {0, n/n_p, 2n/n_p, ...}
inline std::vector<int> comb_pilots(int n, int n_p) {
    if (n_p < 1 || n % n_p != 0) {
        throw std::invalid_argument("comb_pilots: n_p must divide n");
    }
    std::vector<int> out(n_p);
    for (int i = 0; i < n_p; ++i) {
        out[i] = i * (n / n_p);
    }
    return out;
}

/// Places pilots on data indices: s has pilot_values at pilot positions and
/// the QAM points for `data` (one index per data subcarrier, in order).
inline ComplexVector modulate_primary(const std::vector<std::uint32_t>& data, const SystemConfig& cfg,
                                      const QamAlphabet& qam) {
    const auto data_idx = cfg.data_indices();
    if (data.size() != data_idx.size()) {
        throw std::invalid_argument("modulate_primary: expected " + std::to_string(data_idx.size()) +
                                    " data indices, got " + std::to_string(data.size()));
    }
    ComplexVector s(cfg.n);
    for (int i = 0; i < cfg.n_p(); ++i) {
        s[cfg.pilot_indices[i]] = cfg.pilot_values[i];
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i] >= static_cast<std::uint32_t>(qam.order())) {
            throw std::invalid_argument("modulate_primary: symbol index out of range");
        }
        s[data_idx[i]] = qam.point(data[i]);
    }
    return s;
}

/// Transmitted content of one secondary data frame.
struct Frame {
    std::vector<ComplexVector> s;                     ///< primary OFDM symbols
    std::vector<std::vector<std::uint32_t>> data;     ///< QAM labels on data subcarriers
    std::vector<cplx> c;                              ///< reflection coefficient per symbol
    std::vector<std::uint32_t> c_index;               ///< PSK labels (meaningful for n >= T)
};

inline Frame generate_frame(const SystemConfig& cfg, RandomStream& stream, const QamAlphabet& qam,
                            const PskAlphabet& psk) {
    const auto n_data = static_cast<std::size_t>(cfg.n - cfg.n_p());
    Frame f;
    f.s.reserve(cfg.n_max);
    for (int n = 0; n < cfg.n_max; ++n) {
        std::vector<std::uint32_t> d(n_data);
        for (auto& v : d) {
            v = stream.uniform_index(static_cast<std::uint32_t>(cfg.m_s));
        }
        f.s.push_back(modulate_primary(d, cfg, qam));
        f.data.push_back(std::move(d));
        if (n < cfg.t_preamble()) {
            f.c.push_back(cfg.preamble[n]);
            f.c_index.push_back(0);
        } else {
            const auto idx = stream.uniform_index(static_cast<std::uint32_t>(cfg.m_c));
            f.c.push_back(psk.point(idx));
            f.c_index.push_back(idx);
        }
    }
    return f;
}

inline Frame generate_frame(const SystemConfig& cfg, RandomStream& stream) {
    return generate_frame(cfg, stream, QamAlphabet(cfg.m_s), PskAlphabet(cfg.m_c));
}

/// Noisy frequency-domain samples Y(n) for one frame.
struct FrameObservation {
    std::vector<ComplexVector> y;
    Frame truth;
    ChannelRealization realization;
    int xi = 0;
};

/// Y(n) = sqrt(P_T) diag(s(n)) (H_d + c(n) H_b) + U(n). Requires xi = 0.
inline FrameObservation frequency_domain_rx(const Frame& frame, const ChannelRealization& real,
                                            const SystemConfig& cfg, RandomStream& noise) {
    if (cfg.xi != 0) {
        throw std::invalid_argument("frequency_domain_rx: symbol sync error requires sample_level_rx");
    }
    FrameObservation obs;
    obs.truth = frame;
    obs.realization = real;
    const double amp = std::sqrt(cfg.p_t);
    for (std::size_t n = 0; n < frame.s.size(); ++n) {
        ComplexVector y = amp * frame.s[n].cwiseProduct(real.H_d + frame.c[n] * real.H_b);
        if (cfg.sigma2 > 0.0) {
            y += draw_cn(noise, cfg.n, cfg.sigma2);
        }
        obs.y.push_back(std::move(y));
    }
    return obs;
}

namespace detail {

inline const ComplexMatrix& cached_dft(int n) {
    thread_local std::map<int, ComplexMatrix> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        it = cache.emplace(n, dft_matrix(n)).first;
    }
    return it->second;
}

inline constexpr std::uint64_t kGuardSymbolTag = 0x6775617264ULL;

}  // namespace detail

/// Reflection coefficient applied by the STx to every output sample of the
/// frame (guard symbol first). The secondary symbol boundaries lag the OFDM
/// symbol boundaries by xi samples, so the first xi samples of each symbol
/// period still carry the previous coefficient. The symbol before the frame
/// is taken to have c = `c_prev`.
inline std::vector<cplx> reflection_waveform(const std::vector<cplx>& c, const SystemConfig& cfg,
                                             cplx c_prev = cplx{1.0, 0.0}) {
    const int sym_len = cfg.n + cfg.n_cp;
    const int total = (static_cast<int>(c.size()) + 1) * sym_len;
    std::vector<cplx> out(total);
    for (int t = 0; t < total; ++t) {
        const int tau = t - cfg.xi;
        const int m = tau < 0 ? 0 : tau / sym_len;
        out[t] = m == 0 ? c_prev : c[m - 1];
    }
    return out;
}

/// Sample-level transmit/receive chain.
///
/// PTx emits CP-OFDM symbols x(n) = sqrt(P_T/N) W^H s(n), preceded by one
/// random guard symbol. The direct path convolves with h_d. At the STx the
/// incident signal x * b is reflected with the coefficient sequence from
/// reflection_waveform, the reflected stream is output xi samples late and
/// reaches the CRx through d_b samples of delay and g. White noise of
/// variance sigma2 per sample is added; the CRx drops the CP and applies the
/// unitary DFT, so at xi = 0 the output matches frequency_domain_rx given the
/// same noise stream.
inline FrameObservation sample_level_rx(const Frame& frame, const ChannelRealization& real, const SystemConfig& cfg,
                                        RandomStream& noise, cplx c_prev = cplx{1.0, 0.0}) {
    const int n = cfg.n;
    const int sym_len = n + cfg.n_cp;
    const int frames = static_cast<int>(frame.s.size());
    if (cfg.xi < 0 || cfg.xi >= sym_len) {
        throw std::invalid_argument("sample_level_rx: xi must lie in [0, n + n_cp)");
    }
    const int total = (frames + 1) * sym_len;
    const ComplexMatrix& w = detail::cached_dft(n);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    const double amp = std::sqrt(cfg.p_t);

    // guard symbol content
    RandomStream guard_stream = noise.fork(detail::kGuardSymbolTag);
    const QamAlphabet qam(cfg.m_s);
    std::vector<std::uint32_t> guard_data(cfg.data_indices().size());
    for (auto& v : guard_data) {
        v = guard_stream.uniform_index(static_cast<std::uint32_t>(cfg.m_s));
    }
    const ComplexVector guard = modulate_primary(guard_data, cfg, qam);

    std::vector<cplx> x(total);
    for (int m = 0; m <= frames; ++m) {
        const ComplexVector& s = m == 0 ? guard : frame.s[m - 1];
        const ComplexVector body = (amp * inv_sqrt_n) * (w.adjoint() * s);
        const int start = m * sym_len;
        for (int i = 0; i < cfg.n_cp; ++i) {
            x[start + i] = body[n - cfg.n_cp + i];
        }
        for (int i = 0; i < n; ++i) {
            x[start + cfg.n_cp + i] = body[i];
        }
    }

    auto convolve = [total](const std::vector<cplx>& in, const ComplexVector& taps, int delay) {
        std::vector<cplx> out(total, cplx{0.0, 0.0});
        for (int t = 0; t < total; ++t) {
            cplx acc = 0.0;
            for (Eigen::Index l = 0; l < taps.size(); ++l) {
                const long long src = t - delay - l;
                if (src >= 0) {
                    acc += taps[l] * in[src];
                }
            }
            out[t] = acc;
        }
        return out;
    };

    const std::vector<cplx> direct = convolve(x, real.h_d, 0);
    std::vector<cplx> incident = convolve(x, real.b, 0);
    const std::vector<cplx> coeff = reflection_waveform(frame.c, cfg, c_prev);
    std::vector<cplx> reflected(total, cplx{0.0, 0.0});
    for (int t = cfg.xi; t < total; ++t) {
        reflected[t] = incident[t - cfg.xi] * coeff[t];
    }
    const std::vector<cplx> backscatter = convolve(reflected, real.g, cfg.channel.d_b);

    FrameObservation obs;
    obs.truth = frame;
    obs.realization = real;
    obs.xi = cfg.xi;
    for (int m = 1; m <= frames; ++m) {
        const int start = m * sym_len;
        ComplexVector window(n);
        for (int i = 0; i < n; ++i) {
            window[i] = direct[start + cfg.n_cp + i] + backscatter[start + cfg.n_cp + i];
        }
        if (cfg.sigma2 > 0.0) {
            // white noise on the kept samples, drawn so its DFT is the same
            // U(n) the frequency-domain model would use
            const ComplexVector u = draw_cn(noise, n, cfg.sigma2);
            window += inv_sqrt_n * (w.adjoint() * u);
        }
        obs.y.push_back(inv_sqrt_n * (w * window));
    }
    return obs;
}

/// Dispatches to the frequency-domain model when xi = 0.
inline FrameObservation observe(const Frame& frame, const ChannelRealization& real, const SystemConfig& cfg,
                                RandomStream& noise) {
    if (cfg.xi == 0) {
        return frequency_domain_rx(frame, real, cfg, noise);
    }
    return sample_level_rx(frame, real, cfg, noise);
}

}  // namespace symbio
