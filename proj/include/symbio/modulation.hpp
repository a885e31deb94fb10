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
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace symbio {

inline std::uint32_t gray_encode(std::uint32_t x) { return x ^ (x >> 1); }

inline std::uint32_t gray_decode(std::uint32_t g) {
    std::uint32_t x = g;
    for (std::uint32_t shift = g >> 1; shift != 0; shift >>= 1) {
        x ^= shift;
    }
    return x;
}

inline int bits_per_symbol(int order) { return std::countr_zero(static_cast<unsigned>(order)); }

inline int bit_errors(std::uint32_t sent, std::uint32_t decided) {
    return std::popcount(sent ^ decided);
}

/// A labelled constellation. Symbol index i is also its Gray bit label, so
/// bit errors between two indices are popcount(i ^ j).
class Alphabet {
  public:
    int order() const { return static_cast<int>(points_.size()); }
    int bits() const { return bits_per_symbol(order()); }
    const std::vector<cplx>& points() const { return points_; }
    cplx point(std::uint32_t index) const { return points_.at(index); }

    /// Index of the point nearest to z (exhaustive scan, lowest index on ties).
    std::uint32_t nearest_exhaustive(cplx z) const {
        std::uint32_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::uint32_t i = 0; i < points_.size(); ++i) {
            const double d = std::norm(z - points_[i]);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    double mean_power() const {
        double acc = 0.0;
        for (const auto& p : points_) {
            acc += std::norm(p);
        }
        return acc / order();
    }

  protected:
    std::vector<cplx> points_;
};

/// Square M-QAM with unit average power and independent Gray coding per rail.
/// The upper half of the label bits selects the in-phase level, the lower
/// half the quadrature level.
class QamAlphabet : public Alphabet {
  public:
    explicit QamAlphabet(int order) {
        const int k = bits_per_symbol(order);
        if (order < 4 || !std::has_single_bit(static_cast<unsigned>(order)) || k % 2 != 0) {
            throw std::invalid_argument("QamAlphabet: order must be a power of 4, got " +
                                        std::to_string(order));
        }
        rail_levels_ = 1 << (k / 2);
        scale_ = std::sqrt(3.0 / (2.0 * (order - 1)));
        points_.resize(order);
        for (int i = 0; i < order; ++i) {
            const auto label_i = static_cast<std::uint32_t>(i) >> (k / 2);
            const auto label_q = static_cast<std::uint32_t>(i) & static_cast<std::uint32_t>(rail_levels_ - 1);
            points_[i] = {scale_ * rail_amplitude(label_i), scale_ * rail_amplitude(label_q)};
        }
    }

    int rail_levels() const { return rail_levels_; }
    double scale() const { return scale_; }

    /// Nearest point by independent per-rail slicing; same decision as the
    /// exhaustive scan away from decision boundaries.
    std::uint32_t nearest(cplx z) const {
        const int half = bits_per_symbol(order()) / 2;
        return (rail_label(z.real()) << half) | rail_label(z.imag());
    }

    /// Unscaled amplitude (odd integer) carried by a rail label.
    double rail_amplitude(std::uint32_t label) const {
        return 2.0 * gray_decode(label) - (rail_levels_ - 1);
    }

  private:
    std::uint32_t rail_label(double x) const {
        const double pos = std::round((x / scale_ + (rail_levels_ - 1)) / 2.0);
        const double clamped = std::clamp(pos, 0.0, static_cast<double>(rail_levels_ - 1));
        return gray_encode(static_cast<std::uint32_t>(clamped));
    }

    int rail_levels_ = 0;
    double scale_ = 0.0;
};

/// M-PSK on the unit circle; label i sits at angle 2 pi gray_decode(i) / M.
class PskAlphabet : public Alphabet {
  public:
    explicit PskAlphabet(int order) {
        if (order < 2 || !std::has_single_bit(static_cast<unsigned>(order))) {
            throw std::invalid_argument("PskAlphabet: order must be a power of 2, got " +
                                        std::to_string(order));
        }
        points_.resize(order);
        for (int i = 0; i < order; ++i) {
            points_[i] = std::polar(1.0, 2.0 * kPi * gray_decode(static_cast<std::uint32_t>(i)) / order);
        }
    }

    /// Nearest point by rounding the phase to the closest multiple of 2 pi / M.
    std::uint32_t nearest(cplx z) const {
        const int m = order();
        const double turns = std::arg(z) / (2.0 * kPi) * m;
        const long long pos = static_cast<long long>(std::llround(turns));
        return gray_encode(static_cast<std::uint32_t>(((pos % m) + m) % m));
    }
};

}  // namespace symbio
