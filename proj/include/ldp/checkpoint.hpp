#pragma once

#include <map>
#include <string>
#include <vector>

#include "ldp/config.hpp"
#include "ldp/model.hpp"

namespace ldp {

// Checkpoint file layout:
//   bytes 0..3   magic "LDPC"
//   bytes 4..7   format version, little-endian u32
//   bytes 8..15  metadata length, little-endian u64
//   [metadata]   JSON: tensor names/shapes/offsets, β values, final bits,
//                RunConfig echo
//   [payload]    raw little-endian float32 arrays in metadata order
struct Checkpoint {
    RunConfig config;
    std::vector<int64_t> input_shape;
    std::map<std::string, Tensor> tensors;  // parameters + batch-norm running stats
    std::vector<double> betas;
    std::vector<int> final_bits;
};

void save_checkpoint(const std::string& path, const Model& model, const RunConfig& cfg,
                     const std::vector<int>& final_bits);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model described by a checkpoint (weights, running stats, β).
Model restore_model(const Checkpoint& ckpt);

}  // namespace ldp
