#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hadl/tensor.hpp"

namespace hadl {

/// One-level Haar decomposition of an even-length signal.
struct HaarPair {
    std::vector<double> approx;
    std::vector<double> detail;
};

/// approx[k] = (x[2k] + x[2k+1]) / sqrt2, detail[k] = (x[2k+1] - x[2k]) / sqrt2.
/// Throws OddLength for odd input, TooShort for fewer than two samples.
HaarPair haar_forward(std::span<const double> x);

/// Exact inverse of haar_forward.
std::vector<double> haar_inverse(const HaarPair& pair);

/// Approximation coefficients of every (batch, channel) row; details are dropped.
Tensor3 haar_batch(const Tensor3& x);

/// Unnormalized DCT-II: out[k] = sum_n x[n] cos(pi (n + 1/2) k / N).
/// Evaluated directly from the definition, O(N^2).
std::vector<double> dct2_raw(std::span<const double> x);

/// Orthonormal DCT-II. Preserves the Euclidean norm.
std::vector<double> dct2_orthonormal(std::span<const double> x);

struct Spectrum {
    std::vector<double> coeffs;
    double scale = 1.0;
};

struct SpectrumBatch {
    Tensor3 coeffs;
    double scale = 1.0;
};

/// (2 / lookback) * dct2_raw(row). The row must hold lookback / 2 samples.
Spectrum dct2_scaled(std::span<const double> row, std::size_t lookback);

/// Row-wise dct2_scaled over a batch whose last axis is lookback / 2.
SpectrumBatch dct2_scaled(const Tensor3& approx, std::size_t lookback);

/// Sum of squares.
double energy(std::span<const double> x) noexcept;

/// Cached DCT-II basis for a fixed length, applied as one matrix product per
/// batch. Agrees with dct2_raw to ~1e-12.
class DctPlan {
public:
    explicit DctPlan(std::size_t n);

    std::size_t size() const noexcept { return n_; }

    /// rows x N in, rows x N out; multiplies every output by `scale`.
    Matrix apply(const Eigen::Ref<const Matrix>& rows, double scale = 1.0) const;

private:
    std::size_t n_;
    Matrix basis_;  // basis_(n, k) = cos(pi (n + 1/2) k / N)
};

}  // namespace hadl
