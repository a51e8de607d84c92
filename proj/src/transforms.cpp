#include "hadl/transforms.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hadl/error.hpp"

namespace hadl {

namespace {

// cos(pi (n + 1/2) k / N) with the argument reduced modulo a full period
// before it reaches std::cos, so large n*k products keep full precision.
double dct_kernel(std::size_t n, std::size_t k, std::size_t len) {
    const std::size_t period = 4 * len;
    const std::size_t phase = ((2 * n + 1) * k) % period;
    return std::cos(std::numbers::pi * static_cast<double>(phase) / static_cast<double>(2 * len));
}

void check_even(std::size_t n) {
    if (n < 2) {
        throw Error(ErrorKind::TooShort, "Haar transform needs at least 2 samples, got " + std::to_string(n));
    }
    if (n % 2 != 0) {
        throw Error(ErrorKind::OddLength, "Haar transform needs an even length, got " + std::to_string(n));
    }
}

}  // namespace

HaarPair haar_forward(std::span<const double> x) {
    check_even(x.size());
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const std::size_t half = x.size() / 2;
    HaarPair out{std::vector<double>(half), std::vector<double>(half)};
    for (std::size_t k = 0; k < half; ++k) {
        const double even = x[2 * k];
        const double odd = x[2 * k + 1];
        out.approx[k] = (even + odd) * inv_sqrt2;
        out.detail[k] = (-even + odd) * inv_sqrt2;
    }
    return out;
}

std::vector<double> haar_inverse(const HaarPair& pair) {
    if (pair.approx.size() != pair.detail.size()) {
        throw Error(ErrorKind::ShapeMismatch, "approx and detail lengths differ");
    }
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    std::vector<double> x(2 * pair.approx.size());
    for (std::size_t k = 0; k < pair.approx.size(); ++k) {
        x[2 * k] = (pair.approx[k] - pair.detail[k]) * inv_sqrt2;
        x[2 * k + 1] = (pair.approx[k] + pair.detail[k]) * inv_sqrt2;
    }
    return x;
}

Tensor3 haar_batch(const Tensor3& x) {
    check_even(x.length());
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const std::size_t half = x.length() / 2;
    Tensor3 out(x.batch(), x.channels(), half);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            auto src = x.row(b, c);
            auto dst = out.row(b, c);
            for (std::size_t k = 0; k < half; ++k) {
                dst[k] = (src[2 * k] + src[2 * k + 1]) * inv_sqrt2;
            }
        }
    }
    return out;
}

std::vector<double> dct2_raw(std::span<const double> x) {
    if (x.empty()) {
        throw Error(ErrorKind::Empty, "DCT of an empty vector");
    }
    const std::size_t len = x.size();
    std::vector<double> out(len, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
        double acc = 0.0;
        for (std::size_t n = 0; n < len; ++n) {
            acc += x[n] * dct_kernel(n, k, len);
        }
        out[k] = acc;
    }
    return out;
}

std::vector<double> dct2_orthonormal(std::span<const double> x) {
    auto out = dct2_raw(x);
    const double base = std::sqrt(2.0 / static_cast<double>(x.size()));
    out[0] *= base / std::numbers::sqrt2;
    for (std::size_t k = 1; k < out.size(); ++k) {
        out[k] *= base;
    }
    return out;
}

Spectrum dct2_scaled(std::span<const double> row, std::size_t lookback) {
    if (lookback == 0 || row.size() * 2 != lookback) {
        throw Error(ErrorKind::ShapeMismatch, "scaled DCT expects lookback/2 = " + std::to_string(lookback / 2) +
                                                  " samples, got " + std::to_string(row.size()));
    }
    Spectrum s{dct2_raw(row), 2.0 / static_cast<double>(lookback)};
    for (double& v : s.coeffs) v *= s.scale;
    return s;
}

SpectrumBatch dct2_scaled(const Tensor3& approx, std::size_t lookback) {
    if (lookback == 0 || approx.length() * 2 != lookback) {
        throw Error(ErrorKind::ShapeMismatch, "scaled DCT expects lookback/2 = " + std::to_string(lookback / 2) +
                                                  " samples, got " + std::to_string(approx.length()));
    }
    SpectrumBatch out{Tensor3(approx.batch(), approx.channels(), approx.length()),
                      2.0 / static_cast<double>(lookback)};
    if (approx.empty()) return out;
    DctPlan plan(approx.length());
    out.coeffs.as_matrix() = plan.apply(approx.as_matrix(), out.scale);
    return out;
}

double energy(std::span<const double> x) noexcept {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

DctPlan::DctPlan(std::size_t n) : n_(n), basis_(n, n) {
    if (n == 0) {
        throw Error(ErrorKind::Empty, "DCT plan of length 0");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            basis_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = dct_kernel(i, k, n);
        }
    }
}

Matrix DctPlan::apply(const Eigen::Ref<const Matrix>& rows, double scale) const {
    if (static_cast<std::size_t>(rows.cols()) != n_) {
        throw Error(ErrorKind::ShapeMismatch, "DCT plan of length " + std::to_string(n_) + " applied to rows of " +
                                                  std::to_string(rows.cols()));
    }
    Matrix out = rows * basis_;
    if (scale != 1.0) out *= scale;
    return out;
}

}  // namespace hadl
