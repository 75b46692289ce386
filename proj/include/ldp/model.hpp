#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ldp/cost_model.hpp"
#include "ldp/param.hpp"
#include "ldp/quantizer.hpp"
#include "ldp/schedule.hpp"
#include "ldp/tape.hpp"

namespace ldp {

enum class ModelKind { mlp, tiny_resnet };

struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    std::vector<int64_t> widths;  // mlp: input width, hidden widths..., classes
    int stem_channels = 8;        // tiny_resnet
    std::array<int, 3> blocks_per_stage = {1, 1, 1};
    int classes = 10;
    bool quantize_first_last = false;
    // precision metadata shared by every quantized layer (b_max == n)
    int n = 8;
    int b_min = 3;
    double beta0 = 1.0;
    double lr_beta = 0.1;
};

// One GEMM site of the network, in forward order.
struct QuantSite {
    std::string name;
    int block = 0;        // stage index used by staged schedules
    bool quantized = false;
    int prec_index = -1;  // index into precisions/costs when quantized
    int64_t macs = 0;     // per-sample MAC count at build shape
};

// Per-step quantization behavior handed to Model::forward.
struct StepContext {
    bool training = false;
    const std::vector<int>* bits = nullptr;  // per quantized layer; null = full-precision bypass
    const std::vector<PrecisionParam>* precisions = nullptr;  // learned runs: source of ds_dbeta
    std::vector<double>* dbeta = nullptr;    // accumulates task β-gradients per layer
    bool quantize_grads = false;
    GradQuantSpec grad_spec;
    std::mt19937_64* grad_rng = nullptr;
};

struct ForwardResult {
    NodeId input = -1;
    NodeId logits = -1;
    NodeId loss = -1;  // -1 when no labels were given
    std::vector<std::pair<Parameter*, NodeId>> param_nodes;
};

struct DenseLayer {
    Parameter w;  // [in, out]
    Parameter b;  // [out]
    int site = -1;
};

struct ConvLayer {
    Parameter w;  // [f, c, kh, kw]
    int stride = 1, pad = 1;
    int site = -1;
};

struct BnLayer {
    Parameter gamma, beta;
    BatchNormState state;
};

struct ResBlock {
    ConvLayer conv1, conv2;
    BnLayer bn1, bn2;
    std::optional<ConvLayer> proj;
    std::optional<BnLayer> proj_bn;
    int stage = 0;
};

class Model {
  public:
    ModelSpec spec;
    std::vector<int64_t> input_shape;  // {d} for mlp, {c,h,w} for images

    std::vector<DenseLayer> dense;  // mlp stack, or the single classifier head
    std::optional<ConvLayer> stem;
    std::optional<BnLayer> stem_bn;
    std::vector<ResBlock> blocks;

    std::vector<QuantSite> sites;
    std::vector<PrecisionParam> precisions;    // one per quantized site
    std::vector<LayerCost> costs;              // aligned with precisions
    std::vector<ScheduledLayer> sched_layers;  // aligned with precisions

    ForwardResult forward(Tape& tape, const Tensor& batch, const std::vector<int>* labels, StepContext& ctx);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void set_weight_hyper(const SgdHyper& h);
    std::vector<int> current_bits() const;  // bits_of(β) per quantized layer

  private:
    NodeId gemm(Tape& tape, NodeId x, NodeId w, int site_index, StepContext& ctx);
    NodeId dense_forward(Tape& tape, NodeId x, DenseLayer& layer, StepContext& ctx, ForwardResult& out);
    NodeId conv_forward(Tape& tape, NodeId x, ConvLayer& layer, StepContext& ctx, ForwardResult& out);
    NodeId bn_forward(Tape& tape, NodeId x, BnLayer& layer, StepContext& ctx, ForwardResult& out);
};

// Deterministic He-style initialization from the supplied rng. Layer costs
// are derived at build time for the given input shape (batch dimension 1).
// With quantize_first_last unset, the first and last GEMM are exempt; if
// that leaves nothing to quantize, all layers are quantized with a warning.
Model build_model(const ModelSpec& spec, const std::vector<int64_t>& input_shape, std::mt19937_64& rng);

}  // namespace ldp
