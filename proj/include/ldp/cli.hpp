#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldp/train.hpp"

namespace ldp {

// Command implementations behind the binary, callable from tests.

RunArtifacts run_train(const RunConfig& cfg);

EvalResult run_eval(const std::string& checkpoint_path, const std::string& data_spec_json_path,
                    std::optional<int> bits_override);

struct SweepRow {
    double value;
    double final_acc;
    double total_train_bitops;
    double final_inference_bitops;
    std::string output_dir;
};

// Sequential runs with identical seed, one numeric parameter varied; each run
// lands in <out_dir>/<param>=<value>. Combined summary CSV columns:
// value,final_acc,total_train_bitops,final_inference_bitops
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& dotted_param,
                                const std::vector<double>& values, const std::string& out_dir,
                                std::string* summary_csv_path = nullptr);

// Trains with bits forced from a recorded schedule log; β machinery disabled.
RunArtifacts run_replay(const RunConfig& cfg, const std::string& schedule_log_path);

struct CostReport {
    std::vector<LayerCost> layers;
    double t_stat = 0.0;       // Σ o_full·(b_static/32)²
    double t_target = 0.0;     // t_frac · t_stat
    double c_min = 0.0, c_max = 0.0;  // b_min / b_max on every quantized layer
    double o_full_total = 0.0;
    int b_static = 8;
    double t_frac = 0.6;
};

// Static per-layer cost analysis of the configured model; no training.
CostReport run_cost_report(const RunConfig& cfg, const std::string& json_out_path = "");

}  // namespace ldp
