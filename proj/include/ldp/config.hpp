#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldp/model.hpp"
#include "ldp/schedule.hpp"

namespace ldp {

struct DataSpec {
    enum class Kind { synth, idx, glyphs } kind = Kind::synth;
    // synth (gaussian blobs) / glyphs
    int classes = 4;
    int dims = 2;          // synth feature count
    int per_class = 500;   // synth: examples per class (train+test combined)
    double radius = 3.0;   // synth: class-mean sphere radius
    // glyphs: odd sizes keep the stride-2 stage transitions exactly divisible
    int image_size = 13;
    int train_count = 2000, test_count = 500;
    double noise = 0.12;
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    bool normalize = true;  // mean/std standardization (image data)
};

struct PrecisionSpec {
    double lr = 0.1;
    double t_frac = 0.6;
    double alpha = 1.0;
    double epsilon = 1e-12;
    int bw_bits = 8;
    int n = 8;
    int b_min = 3;
    double beta0 = 1.0;
    int b_static = 8;             // baseline width defining T_stat
    int freeze_after_epoch = -1;  // -1: never freeze β
    bool quantize_gradients = true;
};

// Complete, serializable description of a training run; a run is
// reproducible from this plus the build.
struct RunConfig {
    ModelSpec model;  // n/b_min/beta0/lr_beta filled from precision at build time
    DataSpec data;
    int epochs = 10;
    int batch_size = 32;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<double> lr_decay_milestones = {0.5, 0.75};
    double lr_decay_factor = 0.1;
    uint64_t seed = 1;
    std::string output_dir = "runs/out";
    SchedulerSpec scheduler;
    PrecisionSpec precision;
};

// Strict parsing: unknown keys and out-of-range values are rejected with the
// offending dotted path named. Absent keys take the defaults above.
RunConfig parse_config_json(const nlohmann::json& root);
RunConfig parse_and_validate(const std::string& path);

// A bare data section (the eval command's --data file).
DataSpec parse_data_spec_json(const nlohmann::json& j);

nlohmann::json config_to_json(const RunConfig& cfg);

// Applies `value` at a dotted numeric path (e.g. "precision.t_frac") and
// re-validates. Throws if the path does not name a numeric scalar.
RunConfig with_numeric_override(const RunConfig& cfg, const std::string& dotted_path, double value);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace ldp
