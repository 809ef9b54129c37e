#pragma once

// Brute-force reference computations used by the unit and acceptance suites.
// Written directly from the definitions, sharing no code with the library
// kernels they check.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rfcl/tensor.hpp"

namespace rfcl::oracle {

inline Tensor3 random_tensor(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
                             double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor3 t(c, h, w);
    for (double& v : t.data()) v = u(rng);
    return t;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

/// out[r][c] = sum_i sum_u sum_v k[i][u][v] * x[sel_i][r+u][c+v], summed in that order.
inline std::vector<std::vector<double>> conv(const Tensor3& x, const Kernel& k,
                                             const std::vector<std::size_t>& sel) {
    const std::size_t oh = x.height() - k.size + 1, ow = x.width() - k.size + 1;
    std::vector<std::vector<double>> out(oh, std::vector<double>(ow));
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < sel.size(); ++i)
                for (std::size_t u = 0; u < k.size; ++u)
                    for (std::size_t v = 0; v < k.size; ++v)
                        s += k.weights[(i * k.size + u) * k.size + v] * x(sel[i], r + u, c + v);
            out[r][c] = s;
        }
    return out;
}

inline double window_max(const Tensor3& x, std::size_t ch, std::size_t r0, std::size_t c0, std::size_t n) {
    double m = -INFINITY;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) m = std::fmax(m, x(ch, r0 + u, c0 + v));
    return m;
}

/// Row-major sum over the window, then one division.
inline double window_mean(const Tensor3& x, std::size_t ch, std::size_t r0, std::size_t c0, std::size_t n) {
    double s = 0.0;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) s += x(ch, r0 + u, c0 + v);
    return s / static_cast<double>(n * n);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace rfcl::oracle
