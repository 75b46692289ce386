// Test-only reference implementations, independent of the library's
// computation paths: finite differences, direct-loop convolution, brute-force
// nearest-level search, double-precision softmax cross-entropy.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ldp/tensor.hpp"

namespace oracle {

// Max |a−b| normalized by the largest magnitude across both vectors.
inline double max_rel_err(const std::vector<float>& got, const std::vector<double>& want) {
    double scale = 1e-12;
    for (float v : got) scale = std::max(scale, std::abs(static_cast<double>(v)));
    for (double v : want) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(got[i]) - want[i]) / scale);
    return worst;
}

inline double rel_err_scalar(double got, double want) {
    return std::abs(got - want) / std::max({1e-12, std::abs(got), std::abs(want)});
}

// Central finite differences of f at x.
inline std::vector<double> fd_grad(const std::function<double(const std::vector<float>&)>& f, std::vector<float> x,
                                   double h) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const float keep = x[i];
        x[i] = static_cast<float>(keep + h);
        const double up = f(x);
        x[i] = static_cast<float>(keep - h);
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Direct-loop cross-correlation with zero padding.
inline ldp::Tensor conv2d_direct(const ldp::Tensor& x, const ldp::Tensor& w, int stride, int pad) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (ww + 2 * pad - kw) / stride + 1;
    ldp::Tensor out = ldp::Tensor::zeros({n, f, oh, ow});
    for (int64_t in = 0; in < n; ++in)
        for (int64_t of = 0; of < f; ++of)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < c; ++ci)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * stride + ky - pad;
                                const int64_t ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= ww) continue;
                                acc += static_cast<double>(x.data[((in * c + ci) * h + iy) * ww + ix]) *
                                       w.data[((of * c + ci) * kh + ky) * kw + kx];
                            }
                    out.data[((in * f + of) * oh + oy) * ow + ox] = static_cast<float>(acc);
                }
    return out;
}

// Scans every level of the affine grid; ties go to the larger level, matching
// round-half-away-from-zero on non-negative normalized values.
inline float nearest_level(float x, double s, double z, int bits) {
    const int64_t levels = (int64_t{1} << bits);
    double best_dist = std::numeric_limits<double>::infinity();
    double best = z;
    for (int64_t k = 0; k < levels; ++k) {
        const double level = s * static_cast<double>(k) + z;
        const double dist = std::abs(static_cast<double>(x) - level);
        if (dist < best_dist || (dist == best_dist && level > best)) {
            best_dist = dist;
            best = level;
        }
    }
    return static_cast<float>(best);
}

// Double-precision reference softmax cross-entropy (mean over rows).
inline double softmax_ce_ref(const std::vector<float>& logits, const std::vector<int>& labels, int64_t n, int64_t k) {
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double mx = logits[static_cast<size_t>(i * k)];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(logits[static_cast<size_t>(i * k + j)]));
        double zsum = 0.0;
        for (int64_t j = 0; j < k; ++j) zsum += std::exp(static_cast<double>(logits[static_cast<size_t>(i * k + j)]) - mx);
        loss -= static_cast<double>(logits[static_cast<size_t>(i * k + labels[static_cast<size_t>(i)])]) - mx -
                std::log(zsum);
    }
    return loss / static_cast<double>(n);
}

inline ldp::Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    ldp::Tensor t = ldp::Tensor::zeros(std::move(shape));
    for (float& v : t.data) v = dist(rng);
    return t;
}

}  // namespace oracle
