#pragma once

#include <cstdint>
#include <random>

#include "ldp/tensor.hpp"

namespace ldp {

// Learnable precision of one layer: bits(beta) = Round(beta·n) clamped to
// [b_min, b_max], with b_max == n. beta stays in [b_min/n, 1] by projection.
struct PrecisionParam {
    double beta = 1.0;
    int n = 8;
    int b_min = 2;
    int b_max = 8;
    double lr_beta = 0.1;
    int layer_id = 0;

    static PrecisionParam forced(int bits) {
        PrecisionParam p;
        p.n = bits;
        p.b_min = bits;
        p.b_max = bits;
        p.beta = 1.0;
        return p;
    }
};

// Everything the straight-through backward of fake_quantize needs.
struct QuantCache {
    std::vector<double> v;        // normalized values (x − z)/s
    std::vector<double> r;        // rounded levels after clamping
    std::vector<uint8_t> in_range;
    double s = 0.0;
    double z = 0.0;
    int bits = 0;
    double ds_dbeta = 0.0;
};

struct FakeQuantResult {
    Tensor quantized;
    QuantCache cache;
};

struct FakeQuantGrad {
    Tensor dx;
    double dbeta = 0.0;
};

// Backward-pass gradient quantization spec.
struct GradQuantSpec {
    int bits = 8;
    uint64_t rng_seed = 0;
};

// Round(beta·n) clamped to [b_min, b_max]; half rounds away from zero.
int bits_of(const PrecisionParam& p);

// s = r_range / (2^bits − 1). ds_dbeta differentiates the smooth surrogate
// b̃ = beta·n (Round treated as identity):
//   ds/dbeta = −r_range·n·ln2·2^b̃ / (2^b̃ − 1)²
struct StepSize {
    double s;
    double ds_dbeta;
};
StepSize step_size(const PrecisionParam& p, double r_range);

// Affine fake quantization with a dynamic per-tensor grid: z = min(x),
// r_range = max − min floored at 1e-8, x̂ = s·Round(clamp((x−z)/s, 0, 2^bits−1)) + z.
FakeQuantResult fake_quantize(const Tensor& x, const PrecisionParam& p);

// Same grid math with (s, z) supplied by the caller instead of derived from x.
FakeQuantResult fake_quantize_with_grid(const Tensor& x, const PrecisionParam& p, double s, double z,
                                        double ds_dbeta);

// Straight-through backward: dx passes where in range, 0 elsewhere. The step
// sensitivity per element is (r − v) in range, 0 below, 2^bits−1 above;
// dbeta = Σ upstreamᵢ·dŝᵢ · ds_dbeta.
FakeQuantGrad fake_quantize_backward(const Tensor& upstream, const QuantCache& cache);

// Stochastic rounding onto an explicit affine grid: floor(v) with
// probability 1 − frac(v), else ceil(v). Values within 1e-4 of a level (in
// grid units) round deterministically; float storage of on-grid tensors
// lands within that band.
Tensor stochastic_quantize(const Tensor& g, double s, double z, int bits, std::mt19937_64& rng);

// Per-tensor min/max grid with 2^bits levels (range floored at 1e-12), then
// stochastic rounding.
Tensor quantize_gradient(const Tensor& g, const GradQuantSpec& spec, std::mt19937_64& rng);

// beta <- clamp(beta − lr_beta·g_total, b_min/n, 1); plain SGD, no momentum.
void beta_sgd_step(PrecisionParam& p, double g_total);

}  // namespace ldp
