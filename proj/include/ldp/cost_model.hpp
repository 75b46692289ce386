#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldp/quantizer.hpp"

namespace ldp {

// Full-precision BitOPs of one layer's forward pass at the configured input
// shape. A MAC at a×b bits costs a·b BitOPs, so full precision is 32² = 1024
// per MAC. MAC counts are per sample (batch dimension of 1).
struct LayerCost {
    int layer_id = 0;
    std::string name;
    int64_t macs = 0;
    double o_full() const { return static_cast<double>(macs) * 1024.0; }
};

// Rolling cost bookkeeping for one training run.
struct CostState {
    double c_current = 0.0;
    double t_target = 0.0;
    double t_frac = 0.6;
    double cumulative_train_bitops = 0.0;
};

struct BalanceConfig {
    double alpha = 1.0;
    double epsilon = 1e-12;
};

LayerCost matmul_cost(int layer_id, std::string name, int64_t m, int64_t k, int64_t n);
LayerCost conv_cost(int layer_id, std::string name, int64_t n, int64_t f, int64_t c, int kh, int kw, int64_t oh,
                    int64_t ow);

// Forward cost at explicit bit-widths: C = Σ macs_l · b_l² (== o_full·(b/32)²).
// Always an exact integer value, so sums are order independent.
double forward_cost_bits(const std::vector<int>& bits, const std::vector<LayerCost>& costs);

// Forward cost of the learned precisions: bits taken from bits_of(β^l).
double forward_cost(const std::vector<PrecisionParam>& precisions, const std::vector<LayerCost>& costs);

// Hinge: 0 below the target, C at or above it.
double cost_loss(double c, double t);

// Analytic per-layer gradient of cost_loss through the smooth surrogate
// b̃ = β·n: zero when C < T, else o_full_l·2·(β_l·n_l)·n_l/32².
std::vector<double> cost_grad(const std::vector<PrecisionParam>& precisions, const std::vector<LayerCost>& costs,
                              double c, double t);

// G^l = G_T^l + α·G_C^l·Mean(|G_T|)/(Mean(|G_C|)+ε); means across all layers.
std::vector<double> balance(const std::vector<double>& g_task, const std::vector<double>& g_cost,
                            const BalanceConfig& cfg);

// T = t_frac · Σ o_full·(b_static/32)², the fraction of the static baseline's
// per-iteration cost.
double static_target(const std::vector<LayerCost>& costs, int b_static, double t_frac);

// Training BitOPs of one layer for one iteration at forward width b and
// backward (activation-gradient) width bw: macs·(b² + 2·b·bw) — one forward
// GEMM at b×b plus the two backward GEMMs at b×bw. bw_bits of 0 disables the
// backward term (inference accounting).
double train_bitops(int64_t macs, int bits, int bw_bits);

// One schedule-log row as consumed by reporting and replay.
struct ScheduleRow {
    int64_t iteration = 0;
    int layer_id = 0;
    std::string layer_name;
    double beta = 0.0;
    int bits = 0;
    double fwd_bitops = 0.0;
};

struct CostReportTotals {
    double total_fwd_bitops = 0.0;
    double total_train_bitops = 0.0;
    int64_t iterations = 0;
};

// Per-iteration and cumulative training BitOPs from a complete schedule log.
// Rows must be sorted by (iteration, layer_id) with no gaps: every iteration
// from the first to the last carries one row per layer in `costs`.
// Writes CSV columns: iteration,layer_id,bits,fwd_bitops,train_bitops,
// cumulative_train_bitops and a JSON summary with totals, T, T_stat, t_frac.
CostReportTotals training_bitops_report(const std::vector<ScheduleRow>& log, const std::vector<LayerCost>& costs,
                                        int bw_bits, const std::string& csv_path, const std::string& json_path,
                                        double t_target, double t_stat, double t_frac);

// Validates log ordering/coverage against the layer set; throws naming the
// first missing (iteration, layer) on a gap.
void validate_schedule_log(const std::vector<ScheduleRow>& log, size_t num_layers);

}  // namespace ldp
