#pragma once

#include <functional>
#include <vector>

#include "ldp/tensor.hpp"

namespace ldp {

using NodeId = int;

// Per-channel running statistics for batch_norm (eval mode / checkpointing).
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
};

// Reverse-mode tape. Every operation appends a node holding the forward
// value, a zero-initialized gradient buffer, and a backward closure over the
// cached values it needs. Nodes are in topological order by construction:
// inputs of node k always have index < k.
//
// backward() accumulates into grads; repeated calls without a fresh tape
// accumulate further (callers wanting fresh gradients build a new tape).
class Tape {
  public:
    NodeId leaf(Tensor value);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    Tensor& grad(NodeId id) { return nodes_[check(id)].grad; }
    const Tensor& grad(NodeId id) const { return nodes_[check(id)].grad; }
    size_t size() const { return nodes_.size(); }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);           // same shape
    NodeId add_row_bias(NodeId x, NodeId b);  // [m,n] + [n]
    NodeId mul(NodeId a, NodeId b);           // elementwise
    NodeId relu(NodeId x);
    NodeId sum(NodeId x);   // -> scalar
    NodeId mean(NodeId x);  // -> scalar
    NodeId flatten(NodeId x);          // [n, ...] -> [n, rest]
    NodeId global_avg_pool(NodeId x);  // [n,c,h,w] -> [n,c]

    // Patch-flattening pieces. conv2d is their composition, so conv backward
    // reuses the matmul rule and quantization can hook the single GEMM site.
    NodeId im2col(NodeId x, int kh, int kw, int stride, int pad);  // -> [n*oh*ow, c*kh*kw]
    NodeId conv_weight_matrix(NodeId w);                           // [f,c,kh,kw] -> [c*kh*kw, f]
    NodeId conv_output_reshape(NodeId y, int64_t n, int64_t f, int64_t oh, int64_t ow);
    NodeId conv2d(NodeId x, NodeId w, int stride, int pad);

    // Training mode uses batch statistics (batch size >= 2 required) and
    // updates running stats with momentum 0.9; eval mode uses running stats.
    // Variance is floored at 1e-5.
    NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, bool training);

    // Mean negative log-softmax of the true class, max-stabilized.
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels);

    // Escape hatch for ops composed outside the tape (fake-quantized GEMMs).
    // The backward closure receives the tape and the node's own id and is
    // responsible for accumulating into grad(input) for each input.
    NodeId custom(const char* op, std::vector<NodeId> inputs, Tensor out_value,
                  std::function<void(Tape&, NodeId)> backward);

    // Reverse-topological accumulation from a scalar root. Grads of nodes the
    // root does not reach stay zero.
    void backward(NodeId root);

    static int64_t conv_out_dim(int64_t in, int k, int stride, int pad);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<NodeId> inputs;
        std::function<void(Tape&, NodeId)> back;
        const char* op;
    };

    NodeId push(const char* op, std::vector<NodeId> inputs, Tensor value,
                std::function<void(Tape&, NodeId)> back);
    int check(NodeId id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) throw std::out_of_range("Tape: bad node id");
        return id;
    }

    std::vector<Node> nodes_;
};

// Raw GEMM kernels shared by the tape and the quantized-layer wiring.
Tensor matmul_raw(const Tensor& a, const Tensor& b);          // a[m,k]·b[k,n]
Tensor matmul_raw_transa(const Tensor& a, const Tensor& b);   // aᵀ·b, a[k,m]
Tensor matmul_raw_transb(const Tensor& a, const Tensor& b);   // a·bᵀ, b[n,k]

}  // namespace ldp
