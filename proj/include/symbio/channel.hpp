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

#include "symbio/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace symbio {

/// How the cascaded PTx -> STx -> CRx response is generated.
enum class BackscatterModel {
    Cascaded,  ///< b and g drawn per link, h_b = b * g
    Rayleigh,  ///< h_b drawn directly as L_b i.i.d. Rayleigh taps of total power beta_1 beta_2
    Awgn,      ///< single deterministic tap sqrt(beta_1 beta_2)
    None,      ///< no secondary transmitter
};

inline const char* to_string(BackscatterModel m) {
    switch (m) {
    case BackscatterModel::Cascaded: return "cascaded";
    case BackscatterModel::Rayleigh: return "rayleigh";
    case BackscatterModel::Awgn: return "awgn";
    case BackscatterModel::None: return "none";
    }
    return "?";
}

inline BackscatterModel backscatter_model_from_string(const std::string& s) {
    if (s == "cascaded") return BackscatterModel::Cascaded;
    if (s == "rayleigh") return BackscatterModel::Rayleigh;
    if (s == "awgn") return BackscatterModel::Awgn;
    if (s == "none") return BackscatterModel::None;
    throw std::invalid_argument("unknown backscatter model '" + s + "'");
}

/// Large-scale fading ref * dist^(-exponent).
inline double pathloss(double dist, double exponent, double ref) {
    if (!(dist > 0.0)) {
        throw std::invalid_argument("pathloss: distance must be positive");
    }
    return ref * std::pow(dist, -exponent);
}

struct ChannelConfig {
    int l_d = 4;
    int l_1 = 1;
    int l_2 = 2;
    int d_b = 1;
    double dist_direct = 200.0;
    double dist_fwd = 3.83;
    double dist_bwd = 196.17;
    double exp_direct = 2.5;
    double exp_fwd = 2.0;
    double exp_bwd = 2.0;
    double pathloss_ref = 1e-3;
    BackscatterModel backscatter = BackscatterModel::Rayleigh;
    bool direct_link = true;

    /// Backscatter taps as seen by the receiver (before the d_b shift).
    int l_b() const {
        switch (backscatter) {
        case BackscatterModel::Awgn:
        case BackscatterModel::None: return 1;
        default: return l_1 + l_2 - 1;
        }
    }
    double beta_direct() const { return pathloss(dist_direct, exp_direct, pathloss_ref); }
    double beta_fwd() const { return pathloss(dist_fwd, exp_fwd, pathloss_ref); }
    double beta_bwd() const { return pathloss(dist_bwd, exp_bwd, pathloss_ref); }
    double beta_backscatter() const {
        return backscatter == BackscatterModel::None ? 0.0 : beta_fwd() * beta_bwd();
    }
    /// Backscatter-to-direct average SNR ratio beta_1 beta_2 / beta_d.
    double snr_ratio() const { return beta_fwd() * beta_bwd() / beta_direct(); }

    /// Places the STx on the PTx-CRx line at `fwd` metres from the PTx.
    void place_collinear(double fwd) {
        if (!(fwd > 0.0) || !(fwd < dist_direct)) {
            throw std::invalid_argument("place_collinear: STx distance must lie in (0, d_d)");
        }
        dist_fwd = fwd;
        dist_bwd = dist_direct - fwd;
    }

    void validate() const {
        if (l_d < 1 || l_1 < 1 || l_2 < 1) {
            throw std::invalid_argument("channel: tap counts must be >= 1");
        }
        if (d_b < 0) {
            throw std::invalid_argument("channel: d_b must be >= 0");
        }
        if (!(dist_direct > 0.0) || !(dist_fwd > 0.0) || !(dist_bwd > 0.0)) {
            throw std::invalid_argument("channel: distances must be positive");
        }
    }
};

/// STx distance (collinear placement, d_1 <= d_d / 2) giving the requested
/// backscatter-to-direct SNR ratio. Bisection on the monotone branch.
inline double fwd_distance_for_snr_ratio(const ChannelConfig& cfg, double ratio) {
    auto ratio_at = [&](double d1) {
        ChannelConfig c = cfg;
        c.place_collinear(d1);
        return c.snr_ratio();
    };
    double lo = 1e-6;
    double hi = cfg.dist_direct / 2.0;
    if (ratio > ratio_at(lo) || ratio < ratio_at(hi)) {
        throw std::invalid_argument("snr ratio " + std::to_string(linear_to_db(ratio)) +
                                    " dB is not reachable with collinear placement");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (ratio_at(mid) > ratio) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::sqrt(lo * hi);
}

/// N-point DFT of taps `h` placed at delay `shift` (zero padded to n).
inline ComplexVector taps_to_cfr(const ComplexVector& h, int n, int shift = 0) {
    if (shift + h.size() > n) {
        throw std::invalid_argument("taps_to_cfr: response longer than the DFT size");
    }
    ComplexVector out = ComplexVector::Zero(n);
    for (int k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (Eigen::Index l = 0; l < h.size(); ++l) {
            const long long e = (static_cast<long long>(k) * (l + shift)) % n;
            acc += h[l] * std::polar(1.0, -2.0 * kPi * static_cast<double>(e) / n);
        }
        out[k] = acc;
    }
    return out;
}

inline ComplexVector linear_convolution(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out = ComplexVector::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

/// One block-fading draw of all three links and the derived responses.
///
/// `h_b` is the undelayed cascade b * g; `H_b` already carries the d_b-sample
/// backscatter delay, i.e. it is the response of h_b shifted right by d_b.
struct ChannelRealization {
    int n = 0;
    int d_b = 0;
    ComplexVector h_d;
    ComplexVector b;
    ComplexVector g;
    ComplexVector h_b;
    ComplexVector H_d;
    ComplexVector H_b;

    int l_d() const { return static_cast<int>(h_d.size()); }
    int l_b() const { return static_cast<int>(h_b.size()); }

    /// Composite taps h_d + c shift(h_b, d_b + xi), length max(L_d, L_b + d_b + xi).
    ComplexVector composite_cir(cplx c, int xi = 0) const {
        const int shift = d_b + xi;
        const int len = std::max(l_d(), l_b() + shift);
        ComplexVector h = ComplexVector::Zero(len);
        h.head(l_d()) = h_d;
        h.segment(shift, l_b()) += c * h_b;
        return h;
    }

    /// Backscatter response including an extra xi-sample delay.
    ComplexVector backscatter_cfr(int xi) const {
        if (xi == 0) {
            return H_b;
        }
        return taps_to_cfr(h_b, n, d_b + xi);
    }
};

/// Builds a realization from explicit link taps (used for fixed channels).
inline ChannelRealization make_realization(ComplexVector h_d, ComplexVector b, ComplexVector g, int d_b, int n) {
    ChannelRealization r;
    r.n = n;
    r.d_b = d_b;
    r.h_d = std::move(h_d);
    r.b = std::move(b);
    r.g = std::move(g);
    r.h_b = linear_convolution(r.b, r.g);
    r.H_d = taps_to_cfr(r.h_d, n);
    r.H_b = taps_to_cfr(r.h_b, n, d_b);
    return r;
}

/// Rayleigh taps with equal average power per tap and total link power beta.
inline ChannelRealization draw_channel(const ChannelConfig& cfg, int n, RandomStream& stream) {
    const double beta_d = cfg.beta_direct();
    ComplexVector h_d = ComplexVector::Zero(cfg.l_d);
    if (cfg.direct_link) {
        h_d = draw_cn(stream, cfg.l_d, beta_d / cfg.l_d);
    }
    ComplexVector b;
    ComplexVector g;
    switch (cfg.backscatter) {
    case BackscatterModel::Cascaded:
        b = draw_cn(stream, cfg.l_1, cfg.beta_fwd() / cfg.l_1);
        g = draw_cn(stream, cfg.l_2, cfg.beta_bwd() / cfg.l_2);
        break;
    case BackscatterModel::Rayleigh:
        b = ComplexVector::Ones(1);
        g = draw_cn(stream, cfg.l_b(), cfg.beta_backscatter() / cfg.l_b());
        break;
    case BackscatterModel::Awgn:
        b = ComplexVector::Ones(1);
        g = ComplexVector::Constant(1, std::sqrt(cfg.beta_backscatter()));
        break;
    case BackscatterModel::None:
        b = ComplexVector::Zero(1);
        g = ComplexVector::Zero(1);
        break;
    }
    return make_realization(std::move(h_d), std::move(b), std::move(g), cfg.d_b, n);
}

/// H_d + c H_b for a reflection coefficient with |c| <= 1.
inline ComplexVector composite_cfr(const ChannelRealization& real, cplx c) {
    if (std::abs(c) > 1.0 + 1e-12) {
        throw std::invalid_argument("composite_cfr: passive reflection requires |c| <= 1");
    }
    return real.H_d + c * real.H_b;
}

}  // namespace symbio
