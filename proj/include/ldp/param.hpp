#pragma once

#include <string>

#include "ldp/tensor.hpp"

namespace ldp {

struct SgdHyper {
    float lr = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
};

// A trainable tensor plus its momentum buffer. The velocity buffer is
// allocated lazily on the first step.
struct Parameter {
    std::string name;
    Tensor value;
    std::vector<float> velocity;
    SgdHyper hyper;

    Parameter() = default;
    Parameter(std::string n, Tensor v, SgdHyper h = {}) : name(std::move(n)), value(std::move(v)), hyper(h) {}
};

// v <- momentum·v + g + wd·w ; w <- w − lr·v. The caller owns grad zeroing by
// building a fresh tape per step; grads handed in here are consumed once.
inline void sgd_step(Parameter& p, const Tensor& grad) {
    if (grad.numel() == 0 || !grad.same_shape(p.value))
        throw std::invalid_argument("sgd_step: missing or mis-shaped grad for parameter '" + p.name + "'");
    if (p.velocity.empty()) p.velocity.assign(p.value.data.size(), 0.0f);
    for (size_t i = 0; i < p.value.data.size(); ++i) {
        const float g = grad.data[i] + p.hyper.weight_decay * p.value.data[i];
        p.velocity[i] = p.hyper.momentum * p.velocity[i] + g;
        p.value.data[i] -= p.hyper.lr * p.velocity[i];
    }
}

}  // namespace ldp
