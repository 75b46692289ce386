#include "ldp/quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace ldp {

namespace {
constexpr double kRangeFloor = 1e-8;
constexpr double kGradRangeFloor = 1e-12;
constexpr double kGridSnapTol = 1e-4;  // in grid units; covers float32 storage jitter

double round_half_away(double v) { return v < 0.0 ? std::ceil(v - 0.5) : std::floor(v + 0.5); }
}  // namespace

int bits_of(const PrecisionParam& p) {
    const double b = round_half_away(p.beta * p.n);
    return static_cast<int>(std::clamp(b, static_cast<double>(p.b_min), static_cast<double>(p.b_max)));
}

StepSize step_size(const PrecisionParam& p, double r_range) {
    if (!(r_range > 0.0)) throw std::invalid_argument("step_size: r_range must be positive");
    const int bits = bits_of(p);
    const double levels = std::ldexp(1.0, bits) - 1.0;  // 2^bits − 1
    const double b_smooth = p.beta * p.n;
    const double pow_b = std::exp2(b_smooth);
    const double denom = pow_b - 1.0;
    StepSize out;
    out.s = r_range / levels;
    out.ds_dbeta = -r_range * p.n * std::log(2.0) * pow_b / (denom * denom);
    return out;
}

FakeQuantResult fake_quantize(const Tensor& x, const PrecisionParam& p) {
    if (x.numel() == 0) throw std::invalid_argument("fake_quantize: empty tensor");
    float mn = x.data[0], mx = x.data[0];
    for (float v : x.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double z = mn;
    const double r_range = std::max(static_cast<double>(mx) - static_cast<double>(mn), kRangeFloor);
    const StepSize ss = step_size(p, r_range);
    return fake_quantize_with_grid(x, p, ss.s, z, ss.ds_dbeta);
}

FakeQuantResult fake_quantize_with_grid(const Tensor& x, const PrecisionParam& p, double s, double z,
                                        double ds_dbeta) {
    if (x.numel() == 0) throw std::invalid_argument("fake_quantize: empty tensor");
    if (!(s > 0.0)) throw std::invalid_argument("fake_quantize: step size must be positive");
    const int bits = bits_of(p);
    if (bits < 2 || bits > 31) throw std::invalid_argument("fake_quantize: bits out of [2,31]");
    const double q_max = std::ldexp(1.0, bits) - 1.0;

    FakeQuantResult out;
    out.quantized = Tensor::zeros(x.shape);
    out.cache.v.resize(x.data.size());
    out.cache.r.resize(x.data.size());
    out.cache.in_range.resize(x.data.size());
    out.cache.s = s;
    out.cache.z = z;
    out.cache.bits = bits;
    out.cache.ds_dbeta = ds_dbeta;

    const double range_tol = q_max * 1e-12 + 1e-12;  // boundary elements stay in range despite ulp jitter
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double v = (static_cast<double>(x.data[i]) - z) / s;
        const double vc = std::clamp(v, 0.0, q_max);
        const double r = round_half_away(vc);
        out.cache.v[i] = v;
        out.cache.r[i] = r;
        out.cache.in_range[i] = (v >= -range_tol && v <= q_max + range_tol) ? 1 : 0;
        out.quantized.data[i] = static_cast<float>(s * r + z);
    }
    return out;
}

FakeQuantGrad fake_quantize_backward(const Tensor& upstream, const QuantCache& cache) {
    if (upstream.data.size() != cache.v.size())
        throw std::invalid_argument("fake_quantize_backward: upstream size " + std::to_string(upstream.data.size()) +
                                    " does not match cached size " + std::to_string(cache.v.size()));
    const double q_max = std::ldexp(1.0, cache.bits) - 1.0;
    FakeQuantGrad out;
    out.dx = Tensor::zeros(upstream.shape);
    double acc = 0.0;
    for (size_t i = 0; i < upstream.data.size(); ++i) {
        double ds_i;
        if (cache.in_range[i]) {
            out.dx.data[i] = upstream.data[i];
            ds_i = cache.r[i] - cache.v[i];
        } else {
            ds_i = cache.v[i] < 0.0 ? 0.0 : q_max;
        }
        acc += static_cast<double>(upstream.data[i]) * ds_i;
    }
    out.dbeta = acc * cache.ds_dbeta;
    return out;
}

Tensor stochastic_quantize(const Tensor& g, double s, double z, int bits, std::mt19937_64& rng) {
    if (g.numel() == 0) throw std::invalid_argument("stochastic_quantize: empty tensor");
    if (bits < 1 || bits > 31) throw std::invalid_argument("stochastic_quantize: bits out of [1,31]");
    const double q_max = std::ldexp(1.0, bits) - 1.0;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Tensor out = Tensor::zeros(g.shape);
    for (size_t i = 0; i < g.data.size(); ++i) {
        const double v = std::clamp((static_cast<double>(g.data[i]) - z) / s, 0.0, q_max);
        double lo = std::floor(v);
        double frac = v - lo;
        if (frac < kGridSnapTol) {
            frac = 0.0;
        } else if (frac > 1.0 - kGridSnapTol) {
            lo += 1.0;
            frac = 0.0;
        }
        double level = lo;
        if (frac > 0.0 && uni(rng) < frac) level += 1.0;
        level = std::min(level, q_max);
        out.data[i] = static_cast<float>(s * level + z);
    }
    return out;
}

Tensor quantize_gradient(const Tensor& g, const GradQuantSpec& spec, std::mt19937_64& rng) {
    if (g.numel() == 0) throw std::invalid_argument("quantize_gradient: empty tensor");
    if (spec.bits < 2) throw std::invalid_argument("quantize_gradient: bits must be >= 2");
    float mn = g.data[0], mx = g.data[0];
    for (float v : g.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double range = std::max(static_cast<double>(mx) - static_cast<double>(mn), kGradRangeFloor);
    const double s = range / (std::ldexp(1.0, spec.bits) - 1.0);
    return stochastic_quantize(g, s, mn, spec.bits, rng);
}

void beta_sgd_step(PrecisionParam& p, double g_total) {
    const double lo = static_cast<double>(p.b_min) / p.n;
    p.beta = std::clamp(p.beta - p.lr_beta * g_total, lo, 1.0);
}

}  // namespace ldp
