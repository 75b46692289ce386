#pragma once

#include <optional>
#include <string>

#include "ldp/checkpoint.hpp"
#include "ldp/config.hpp"
#include "ldp/dataset.hpp"
#include "ldp/model.hpp"

namespace ldp {

struct RunSummary {
    double final_accuracy = 0.0;        // last epoch-end test accuracy
    double final_loss = 0.0;
    double total_train_bitops = 0.0;    // Σ over train iterations of the documented train formula
    double total_fwd_bitops = 0.0;      // Σ over train iterations of C
    double final_inference_bitops = 0.0;  // Σ macs·b² at the final bits
    int64_t iterations = 0;
    double t_target = 0.0;
    double t_stat = 0.0;
};

struct RunArtifacts {
    std::string output_dir;
    std::string metrics_csv;
    std::string schedule_csv;
    std::string beta_smooth_csv;  // learned runs only; empty otherwise
    std::string cost_report_csv;
    std::string cost_summary_json;
    std::string checkpoint_path;
    std::string summary_json;
    RunSummary summary;
};

// End-to-end training per the run config. An externally built scheduler (the
// replay command) overrides the config's; replay runs also disable all β
// learning. Aborts with a diagnostic naming the iteration if the loss goes
// non-finite.
RunArtifacts train(const RunConfig& cfg, const Scheduler* scheduler_override = nullptr);

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    double inference_bitops = 0.0;
    std::vector<int> bits;
};

// Eval with the stored final bits (or a uniform override) on the given data.
EvalResult evaluate_model(Model& model, const Dataset& data, const std::vector<int>& bits);
EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& data,
                               std::optional<int> bits_override);

// Materializes the configured dataset pair (train, test), normalized as
// configured.
TrainTestSplit load_data(const RunConfig& cfg);

std::vector<int64_t> model_input_shape(const RunConfig& cfg, const Dataset& train);

}  // namespace ldp
