#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldp/tensor.hpp"

namespace ldp {

// In-memory dataset: row-major features, one row per example. Image data
// carries (channels, height, width); vector data has channels == 0.
struct Dataset {
    int64_t count = 0;
    int64_t features = 0;  // per-example feature count
    int64_t channels = 0, height = 0, width = 0;
    int num_classes = 0;
    std::vector<float> x;  // count × features
    std::vector<int> y;

    bool image() const { return channels > 0; }
    Tensor batch(const std::vector<int64_t>& indices) const;
    std::vector<int> labels(const std::vector<int64_t>& indices) const;
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

// IDX format: big-endian magic 0x00000803 (images) / 0x00000801 (labels),
// big-endian dimension sizes, raw bytes. Pixels are scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as an IDX image/label pair (features are clamped
// to [0,1] and stored as bytes).
void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path);

// K Gaussian blobs with unit variance, means on a seeded random sphere of
// radius `radius`; 80/20 train/test split by index.
TrainTestSplit synth_blobs(int classes, int dims, int per_class, double radius, uint64_t seed);

// Desk-scale MNIST-like images: one glyph pattern per class, randomly
// shifted, scaled in intensity, and noised. Returns u8-quantized pixels in
// [0,1] exactly as an IDX round trip would produce. noise_sigma controls
// task difficulty.
Dataset synth_glyphs(int classes, int image_size, int count, uint64_t seed, double noise_sigma = 0.12);

// Standardize features in place with the supplied statistics.
struct NormStats {
    float mean = 0.0f;
    float stddev = 1.0f;
};
NormStats compute_norm_stats(const Dataset& d);
void normalize(Dataset& d, const NormStats& stats);

}  // namespace ldp
