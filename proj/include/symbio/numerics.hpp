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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace symbio {

using cplx = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Raised when a least-squares system does not have full column rank.
class SingularSystemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const ComplexVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) {
            return false;
        }
    }
    return true;
}

/// N-point DFT matrix, entry (p,q) = exp(-j 2 pi p q / n) with 0-based p,q.
inline ComplexMatrix dft_matrix(int n) {
    if (n < 1) {
        throw std::invalid_argument("dft_matrix: n must be >= 1");
    }
    ComplexMatrix w(n, n);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            // reduce the exponent modulo n first so large products stay exact
            const long long e = (static_cast<long long>(p) * q) % n;
            w(p, q) = std::polar(1.0, -2.0 * kPi * static_cast<double>(e) / n);
        }
    }
    return w;
}

/// First l columns of dft_matrix(n).
inline ComplexMatrix partial_fourier(int n, int l) {
    if (n < 1 || l < 1) {
        throw std::invalid_argument("partial_fourier: n and l must be >= 1");
    }
    if (l > n) {
        throw std::invalid_argument("partial_fourier: l = " + std::to_string(l) +
                                    " exceeds n = " + std::to_string(n));
    }
    ComplexMatrix f(n, l);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < l; ++q) {
            const long long e = (static_cast<long long>(p) * q) % n;
            f(p, q) = std::polar(1.0, -2.0 * kPi * static_cast<double>(e) / n);
        }
    }
    return f;
}

namespace detail {
inline constexpr double kRankTolerance = 1e-10;
}

/// Least-squares solution of a*x ~= b through column-pivoted Householder QR.
///
/// Throws SingularSystemError when `a` is not of full column rank (relative
/// pivot tolerance 1e-10).
inline ComplexVector ls_solve(const ComplexMatrix& a, const ComplexVector& b) {
    if (a.rows() != b.size()) {
        throw std::invalid_argument("ls_solve: rows(a) != length(b)");
    }
    if (a.rows() < a.cols()) {
        throw SingularSystemError("ls_solve: underdetermined system (" + std::to_string(a.rows()) +
                                  " rows, " + std::to_string(a.cols()) + " unknowns)");
    }
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(a);
    qr.setThreshold(detail::kRankTolerance);
    if (qr.rank() < a.cols()) {
        throw SingularSystemError("ls_solve: matrix has rank " + std::to_string(qr.rank()) +
                                  " < " + std::to_string(a.cols()) + " columns");
    }
    return qr.solve(b);
}

/// Minimum-norm least-squares solution; accepts rank-deficient systems.
inline ComplexVector min_norm_solve(const ComplexMatrix& a, const ComplexVector& b) {
    Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(a);
    cod.setThreshold(detail::kRankTolerance);
    return cod.solve(b);
}

/// Left pseudo-inverse (A^H A)^{-1} A^H, or the Moore-Penrose inverse when
/// `allow_rank_deficient` is set and A has deficient column rank.
inline ComplexMatrix pseudo_inverse(const ComplexMatrix& a, bool allow_rank_deficient = false) {
    Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(a);
    cod.setThreshold(detail::kRankTolerance);
    if (cod.rank() < a.cols() && !allow_rank_deficient) {
        throw SingularSystemError("pseudo_inverse: matrix has rank " + std::to_string(cod.rank()) +
                                  " < " + std::to_string(a.cols()) + " columns");
    }
    return cod.pseudoInverse();
}

/// Gaussian tail probability Q(z) = P(N(0,1) > z).
inline double q_function(double z) {
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

/// Counter-based random stream built on Philox4x32-10.
///
/// The key is the 64-bit master seed; the 128-bit counter holds the draw
/// index (low 64 bits) and the stream id (high 64 bits). Two streams with
/// the same (seed, stream id) produce the same sequence no matter which
/// thread runs them or in what order.
class RandomStream {
  public:
    using Block = std::array<std::uint32_t, 4>;

    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : seed_(master_seed), stream_(stream_id) {}

    std::uint64_t master_seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// Independent child stream; the same tag always yields the same child.
    RandomStream fork(std::uint64_t tag) const {
        return RandomStream(seed_, splitmix64(stream_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            buffer_ = philox({static_cast<std::uint32_t>(counter_),
                              static_cast<std::uint32_t>(counter_ >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32)},
                             {static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)});
            ++counter_;
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on (0, 1]; never returns zero so log() is always safe.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform integer in [0, m); m is a small alphabet size.
    std::uint32_t uniform_index(std::uint32_t m) {
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(next_u32()) * m) >> 32);
    }

    /// CN(0, 1) sample via Box-Muller; each rail has variance 1/2.
    cplx unit_cn() {
        const double r = std::sqrt(-std::log(uniform_open()));
        const double theta = 2.0 * kPi * uniform_open();
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    /// Philox4x32-10 bijection, exposed for known-answer tests.
    static Block philox(Block ctr, std::array<std::uint32_t, 2> key) {
        constexpr std::uint32_t m0 = 0xD2511F53u;
        constexpr std::uint32_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += w0;
                key[1] += w1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Block buffer_{};
    int pos_ = 4;
};

/// `count` i.i.d. CN(0, variance) samples. Draws unit-variance values and
/// scales them, so streams at different variances differ by a constant factor.
inline ComplexVector draw_cn(RandomStream& stream, int count, double variance) {
    if (!(variance > 0.0)) {
        throw std::invalid_argument("draw_cn: variance must be positive");
    }
    const double scale = std::sqrt(variance);
    ComplexVector out(count);
    for (int i = 0; i < count; ++i) {
        out[i] = scale * stream.unit_cn();
    }
    return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace symbio
