#pragma once

// Independent reference implementations. Written straight from the textbook
// definitions in long double; nothing here calls into the library.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<double> dct2(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const long double pi = 3.141592653589793238462643383279502884L;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            acc += static_cast<long double>(x[i]) *
                   std::cos(pi * (2.0L * static_cast<long double>(i) + 1.0L) * static_cast<long double>(k) /
                            (2.0L * static_cast<long double>(n)));
        }
        out[k] = static_cast<double>(acc);
    }
    return out;
}

inline void haar(const std::vector<double>& x, std::vector<double>& approx, std::vector<double>& detail) {
    const long double s = 1.0L / std::sqrt(2.0L);
    approx.clear();
    detail.clear();
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
        approx.push_back(static_cast<double>((static_cast<long double>(x[i]) + x[i + 1]) * s));
        detail.push_back(static_cast<double>((static_cast<long double>(x[i + 1]) - x[i]) * s));
    }
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (auto& e : v) e = u(rng);
    return v;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 0.0;
    for (double v : b) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return scale > 0.0 ? worst / scale : worst;
}

}  // namespace oracle
