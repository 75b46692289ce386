#include "ldp/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace ldp {

NodeId Tape::push(const char* op, std::vector<NodeId> inputs, Tensor value,
                  std::function<void(Tape&, NodeId)> back) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.back = std::move(back);
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) { return push("leaf", {}, std::move(value), nullptr); }

// ---------------------------------------------------------------------------
// GEMM kernels
// ---------------------------------------------------------------------------

Tensor matmul_raw(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    const float* pa = a.data.data();
    const float* pb = b.data.data();
    float* pc = c.data.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const float av = pa[i * k + p];
            if (av == 0.0f) continue;
            const float* brow = pb + p * n;
            float* crow = pc + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_raw_transa(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("matmul_ta: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    const int64_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    const float* pa = a.data.data();
    const float* pb = b.data.data();
    float* pc = c.data.data();
    for (int64_t p = 0; p < k; ++p) {
        const float* arow = pa + p * m;
        const float* brow = pb + p * n;
        for (int64_t i = 0; i < m; ++i) {
            const float av = arow[i];
            if (av == 0.0f) continue;
            float* crow = pc + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_raw_transb(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw std::invalid_argument("matmul_tb: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c = Tensor::zeros({m, n});
    const float* pa = a.data.data();
    const float* pb = b.data.data();
    float* pc = c.data.data();
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = pa + i * k;
        float* crow = pc + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const float* brow = pb + j * k;
            float acc = 0.0f;
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
    return c;
}

namespace {
void axpy(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}
}  // namespace

// ---------------------------------------------------------------------------
// Tape ops
// ---------------------------------------------------------------------------

NodeId Tape::matmul(NodeId a, NodeId b) {
    Tensor out = matmul_raw(value(a), value(b));
    return push("matmul", {a, b}, std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        axpy(t.grad(a), matmul_raw_transb(up, t.value(b)));  // dA = dC·Bᵀ
        axpy(t.grad(b), matmul_raw_transa(t.value(a), up));  // dB = Aᵀ·dC
    });
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    check_same_shape(va, vb, "add");
    Tensor out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    return push("add", {a, b}, std::move(out), [a, b](Tape& t, NodeId self) {
        axpy(t.grad(a), t.grad(self));
        axpy(t.grad(b), t.grad(self));
    });
}

NodeId Tape::add_row_bias(NodeId x, NodeId b) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(b);
    if (vx.rank() != 2 || vb.rank() != 1 || vx.dim(1) != vb.dim(0))
        throw std::invalid_argument("add_row_bias: shape mismatch " + vx.shape_str() + " vs " + vb.shape_str());
    const int64_t m = vx.dim(0), n = vx.dim(1);
    Tensor out = vx;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.data[static_cast<size_t>(i * n + j)] += vb.data[static_cast<size_t>(j)];
    return push("add_row_bias", {x, b}, std::move(out), [x, b, m, n](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        axpy(t.grad(x), up);
        Tensor& gb = t.grad(b);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) gb.data[static_cast<size_t>(j)] += up.data[static_cast<size_t>(i * n + j)];
    });
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    check_same_shape(va, vb, "mul");
    Tensor out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
    return push("mul", {a, b}, std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        for (size_t i = 0; i < up.data.size(); ++i) {
            ga.data[i] += up.data[i] * vb.data[i];
            gb.data[i] += up.data[i] * va.data[i];
        }
    });
}

NodeId Tape::relu(NodeId x) {
    Tensor out = value(x);
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return push("relu", {x}, std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        const Tensor& vx = t.value(x);
        Tensor& gx = t.grad(x);
        for (size_t i = 0; i < up.data.size(); ++i)
            if (vx.data[i] > 0.0f) gx.data[i] += up.data[i];
    });
}

NodeId Tape::sum(NodeId x) {
    double acc = 0.0;
    for (float v : value(x).data) acc += v;
    return push("sum", {x}, Tensor::scalar(static_cast<float>(acc)), [x](Tape& t, NodeId self) {
        const float up = t.grad(self).data[0];
        for (float& g : t.grad(x).data) g += up;
    });
}

NodeId Tape::mean(NodeId x) {
    const int64_t n = value(x).numel();
    double acc = 0.0;
    for (float v : value(x).data) acc += v;
    return push("mean", {x}, Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))),
                [x, n](Tape& t, NodeId self) {
                    const float up = t.grad(self).data[0] / static_cast<float>(n);
                    for (float& g : t.grad(x).data) g += up;
                });
}

NodeId Tape::flatten(NodeId x) {
    const Tensor& vx = value(x);
    if (vx.rank() < 2) throw std::invalid_argument("flatten: rank must be >= 2, got " + vx.shape_str());
    const int64_t n = vx.dim(0);
    const int64_t rest = vx.numel() / n;
    Tensor out({n, rest}, vx.data);
    return push("flatten", {x}, std::move(out), [x](Tape& t, NodeId self) {
        axpy(t.grad(x), t.grad(self));  // same element order
    });
}

NodeId Tape::global_avg_pool(NodeId x) {
    const Tensor& vx = value(x);
    if (vx.rank() != 4) throw std::invalid_argument("global_avg_pool: expected 4-d input, got " + vx.shape_str());
    const int64_t n = vx.dim(0), c = vx.dim(1), hw = vx.dim(2) * vx.dim(3);
    Tensor out = Tensor::zeros({n, c});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
            double acc = 0.0;
            const float* p = vx.data.data() + (i * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) acc += p[k];
            out.data[static_cast<size_t>(i * c + j)] = static_cast<float>(acc / static_cast<double>(hw));
        }
    return push("global_avg_pool", {x}, std::move(out), [x, n, c, hw](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        Tensor& gx = t.grad(x);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < c; ++j) {
                const float g = up.data[static_cast<size_t>(i * c + j)] / static_cast<float>(hw);
                float* p = gx.data.data() + (i * c + j) * hw;
                for (int64_t k = 0; k < hw; ++k) p[k] += g;
            }
    });
}

int64_t Tape::conv_out_dim(int64_t in, int k, int stride, int pad) {
    const int64_t span = in + 2 * pad - k;
    if (span < 0)
        throw std::invalid_argument("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                                    std::to_string(in + 2 * pad));
    if (span % stride != 0)
        throw std::invalid_argument("conv2d: non-integral output size for input " + std::to_string(in) +
                                    ", kernel " + std::to_string(k) + ", stride " + std::to_string(stride) +
                                    ", pad " + std::to_string(pad));
    return span / stride + 1;
}

NodeId Tape::im2col(NodeId x, int kh, int kw, int stride, int pad) {
    const Tensor& vx = value(x);
    if (vx.rank() != 4) throw std::invalid_argument("im2col: expected 4-d input, got " + vx.shape_str());
    if (stride < 1) throw std::invalid_argument("im2col: stride must be >= 1");
    const int64_t n = vx.dim(0), c = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
    const int64_t oh = conv_out_dim(h, kh, stride, pad);
    const int64_t ow = conv_out_dim(w, kw, stride, pad);
    const int64_t rows = n * oh * ow;
    const int64_t cols = c * kh * kw;
    Tensor out = Tensor::zeros({rows, cols});
    for (int64_t in_ = 0; in_ < n; ++in_)
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                float* row = out.data.data() + ((in_ * oh + oy) * ow + ox) * cols;
                for (int64_t ci = 0; ci < c; ++ci)
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        const int64_t iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const float* src = vx.data.data() + ((in_ * c + ci) * h + iy) * w;
                        float* dst = row + (ci * kh + ky) * kw;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const int64_t ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            dst[kx] = src[ix];
                        }
                    }
            }
    return push("im2col", {x}, std::move(out),
                [x, kh, kw, stride, pad, n, c, h, w, oh, ow, cols](Tape& t, NodeId self) {
                    const Tensor& up = t.grad(self);
                    Tensor& gx = t.grad(x);
                    for (int64_t in_ = 0; in_ < n; ++in_)
                        for (int64_t oy = 0; oy < oh; ++oy)
                            for (int64_t ox = 0; ox < ow; ++ox) {
                                const float* row = up.data.data() + ((in_ * oh + oy) * ow + ox) * cols;
                                for (int64_t ci = 0; ci < c; ++ci)
                                    for (int64_t ky = 0; ky < kh; ++ky) {
                                        const int64_t iy = oy * stride + ky - pad;
                                        if (iy < 0 || iy >= h) continue;
                                        float* dst = gx.data.data() + ((in_ * c + ci) * h + iy) * w;
                                        const float* src = row + (ci * kh + ky) * kw;
                                        for (int64_t kx = 0; kx < kw; ++kx) {
                                            const int64_t ix = ox * stride + kx - pad;
                                            if (ix < 0 || ix >= w) continue;
                                            dst[ix] += src[kx];
                                        }
                                    }
                            }
                });
}

NodeId Tape::conv_weight_matrix(NodeId w) {
    const Tensor& vw = value(w);
    if (vw.rank() != 4) throw std::invalid_argument("conv_weight_matrix: expected 4-d weight, got " + vw.shape_str());
    const int64_t f = vw.dim(0), k = vw.numel() / f;
    Tensor out = Tensor::zeros({k, f});
    for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < k; ++j) out.data[static_cast<size_t>(j * f + i)] = vw.data[static_cast<size_t>(i * k + j)];
    return push("conv_weight_matrix", {w}, std::move(out), [w, f, k](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        Tensor& gw = t.grad(w);
        for (int64_t i = 0; i < f; ++i)
            for (int64_t j = 0; j < k; ++j) gw.data[static_cast<size_t>(i * k + j)] += up.data[static_cast<size_t>(j * f + i)];
    });
}

NodeId Tape::conv_output_reshape(NodeId y, int64_t n, int64_t f, int64_t oh, int64_t ow) {
    const Tensor& vy = value(y);  // [n*oh*ow, f]
    if (vy.rank() != 2 || vy.dim(0) != n * oh * ow || vy.dim(1) != f)
        throw std::invalid_argument("conv_output_reshape: got " + vy.shape_str());
    Tensor out = Tensor::zeros({n, f, oh, ow});
    const int64_t hw = oh * ow;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < hw; ++p) {
            const float* src = vy.data.data() + (i * hw + p) * f;
            for (int64_t j = 0; j < f; ++j) out.data[static_cast<size_t>((i * f + j) * hw + p)] = src[j];
        }
    return push("conv_output_reshape", {y}, std::move(out), [y, n, f, hw](Tape& t, NodeId self) {
        const Tensor& up = t.grad(self);
        Tensor& gy = t.grad(y);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t p = 0; p < hw; ++p) {
                float* dst = gy.data.data() + (i * hw + p) * f;
                for (int64_t j = 0; j < f; ++j) dst[j] += up.data[static_cast<size_t>((i * f + j) * hw + p)];
            }
    });
}

NodeId Tape::conv2d(NodeId x, NodeId w, int stride, int pad) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    if (vx.rank() != 4 || vw.rank() != 4)
        throw std::invalid_argument("conv2d: expected 4-d input and weight, got " + vx.shape_str() + " and " +
                                    vw.shape_str());
    if (vx.dim(1) != vw.dim(1))
        throw std::invalid_argument("conv2d: channel mismatch " + vx.shape_str() + " vs " + vw.shape_str());
    const int64_t n = vx.dim(0), f = vw.dim(0);
    const int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
    const int64_t oh = conv_out_dim(vx.dim(2), kh, stride, pad);
    const int64_t ow = conv_out_dim(vx.dim(3), kw, stride, pad);
    NodeId cols = im2col(x, kh, kw, stride, pad);
    NodeId wm = conv_weight_matrix(w);
    NodeId y = matmul(cols, wm);
    return conv_output_reshape(y, n, f, oh, ow);
}

NodeId Tape::batch_norm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, bool training) {
    constexpr double kVarFloor = 1e-5;
    constexpr double kMomentum = 0.9;
    const Tensor& vx = value(x);
    if (vx.rank() != 4) throw std::invalid_argument("batch_norm: expected 4-d input, got " + vx.shape_str());
    const int64_t n = vx.dim(0), c = vx.dim(1), hw = vx.dim(2) * vx.dim(3);
    const Tensor& vg = value(gamma);
    const Tensor& vb = value(beta);
    if (vg.numel() != c || vb.numel() != c)
        throw std::invalid_argument("batch_norm: channel dim " + std::to_string(c) + " does not match gamma/beta of " +
                                    std::to_string(vg.numel()) + "/" + std::to_string(vb.numel()));
    if (training && n < 2)
        throw std::invalid_argument("batch_norm: batch size 1 has no per-batch statistics in training mode");
    if (state.running_mean.numel() != c || state.running_var.numel() != c)
        throw std::invalid_argument("batch_norm: running stats not sized for " + std::to_string(c) + " channels");

    const int64_t m = n * hw;
    std::vector<double> mu(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    if (training) {
        for (int64_t j = 0; j < c; ++j) {
            double s = 0.0, s2 = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                const float* p = vx.data.data() + (i * c + j) * hw;
                for (int64_t k = 0; k < hw; ++k) {
                    s += p[k];
                    s2 += static_cast<double>(p[k]) * p[k];
                }
            }
            const double mean = s / static_cast<double>(m);
            mu[static_cast<size_t>(j)] = mean;
            var[static_cast<size_t>(j)] = std::max(0.0, s2 / static_cast<double>(m) - mean * mean);
            state.running_mean.data[static_cast<size_t>(j)] = static_cast<float>(
                kMomentum * state.running_mean.data[static_cast<size_t>(j)] + (1.0 - kMomentum) * mean);
            state.running_var.data[static_cast<size_t>(j)] = static_cast<float>(
                kMomentum * state.running_var.data[static_cast<size_t>(j)] + (1.0 - kMomentum) * var[static_cast<size_t>(j)]);
        }
    } else {
        for (int64_t j = 0; j < c; ++j) {
            mu[static_cast<size_t>(j)] = state.running_mean.data[static_cast<size_t>(j)];
            var[static_cast<size_t>(j)] = state.running_var.data[static_cast<size_t>(j)];
        }
    }

    std::vector<double> inv_sigma(static_cast<size_t>(c));
    std::vector<char> floored(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j) {
        const double v = var[static_cast<size_t>(j)];
        floored[static_cast<size_t>(j)] = v < kVarFloor;
        inv_sigma[static_cast<size_t>(j)] = 1.0 / std::sqrt(std::max(v, kVarFloor));
    }

    Tensor xhat = Tensor::zeros(vx.shape);
    Tensor out = Tensor::zeros(vx.shape);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
            const float* p = vx.data.data() + (i * c + j) * hw;
            float* ph = xhat.data.data() + (i * c + j) * hw;
            float* po = out.data.data() + (i * c + j) * hw;
            const double mj = mu[static_cast<size_t>(j)], isj = inv_sigma[static_cast<size_t>(j)];
            const double g = vg.data[static_cast<size_t>(j)], b = vb.data[static_cast<size_t>(j)];
            for (int64_t k = 0; k < hw; ++k) {
                const double xh = (p[k] - mj) * isj;
                ph[k] = static_cast<float>(xh);
                po[k] = static_cast<float>(g * xh + b);
            }
        }

    auto xhat_cache = std::make_shared<Tensor>(std::move(xhat));
    auto inv_sigma_cache = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    auto floored_cache = std::make_shared<std::vector<char>>(std::move(floored));
    return push("batch_norm", {x, gamma, beta}, std::move(out),
                [x, gamma, beta, n, c, hw, m, training, xhat_cache, inv_sigma_cache, floored_cache](Tape& t, NodeId self) {
                    const Tensor& up = t.grad(self);
                    const Tensor& vg = t.value(gamma);
                    Tensor& gx = t.grad(x);
                    Tensor& gg = t.grad(gamma);
                    Tensor& gb = t.grad(beta);
                    const Tensor& xh = *xhat_cache;
                    for (int64_t j = 0; j < c; ++j) {
                        double sum_dy = 0.0, sum_dy_xh = 0.0;
                        for (int64_t i = 0; i < n; ++i) {
                            const float* pu = up.data.data() + (i * c + j) * hw;
                            const float* ph = xh.data.data() + (i * c + j) * hw;
                            for (int64_t k = 0; k < hw; ++k) {
                                sum_dy += pu[k];
                                sum_dy_xh += static_cast<double>(pu[k]) * ph[k];
                            }
                        }
                        gg.data[static_cast<size_t>(j)] += static_cast<float>(sum_dy_xh);
                        gb.data[static_cast<size_t>(j)] += static_cast<float>(sum_dy);

                        const double isj = (*inv_sigma_cache)[static_cast<size_t>(j)];
                        const double g = vg.data[static_cast<size_t>(j)];
                        const bool fl = (*floored_cache)[static_cast<size_t>(j)] != 0;
                        for (int64_t i = 0; i < n; ++i) {
                            const float* pu = up.data.data() + (i * c + j) * hw;
                            const float* ph = xh.data.data() + (i * c + j) * hw;
                            float* pg = gx.data.data() + (i * c + j) * hw;
                            for (int64_t k = 0; k < hw; ++k) {
                                double d;
                                if (!training) {
                                    d = g * isj * pu[k];
                                } else if (fl) {
                                    // variance pinned at the floor: only the mean path moves
                                    d = g * isj * (pu[k] - sum_dy / static_cast<double>(m));
                                } else {
                                    d = g * isj *
                                        (pu[k] - sum_dy / static_cast<double>(m) -
                                         ph[k] * sum_dy_xh / static_cast<double>(m));
                                }
                                pg[k] += static_cast<float>(d);
                            }
                        }
                    }
                });
}

NodeId Tape::softmax_cross_entropy(NodeId logits, const std::vector<int>& labels) {
    const Tensor& vl = value(logits);
    if (vl.rank() != 2) throw std::invalid_argument("softmax_cross_entropy: expected 2-d logits, got " + vl.shape_str());
    const int64_t n = vl.dim(0), k = vl.dim(1);
    if (static_cast<int64_t>(labels.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                                    std::to_string(n));
    for (int64_t i = 0; i < n; ++i)
        if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= k)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                                        " out of range [0," + std::to_string(k) + ") at row " + std::to_string(i));

    auto probs = std::make_shared<Tensor>(Tensor::zeros(vl.shape));
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const float* row = vl.data.data() + i * k;
        double mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double z = 0.0;
        for (int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double logz = std::log(z) + mx;
        for (int64_t j = 0; j < k; ++j)
            probs->data[static_cast<size_t>(i * k + j)] = static_cast<float>(std::exp(row[j] - logz));
        loss -= row[labels[static_cast<size_t>(i)]] - logz;
    }
    loss /= static_cast<double>(n);

    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return push("softmax_cross_entropy", {logits}, Tensor::scalar(static_cast<float>(loss)),
                [logits, probs, labels_copy, n, k](Tape& t, NodeId self) {
                    const float up = t.grad(self).data[0];
                    Tensor& gl = t.grad(logits);
                    for (int64_t i = 0; i < n; ++i) {
                        for (int64_t j = 0; j < k; ++j) {
                            float p = probs->data[static_cast<size_t>(i * k + j)];
                            if (j == (*labels_copy)[static_cast<size_t>(i)]) p -= 1.0f;
                            gl.data[static_cast<size_t>(i * k + j)] += up * p / static_cast<float>(n);
                        }
                    }
                });
}

NodeId Tape::custom(const char* op, std::vector<NodeId> inputs, Tensor out_value,
                    std::function<void(Tape&, NodeId)> backward) {
    for (NodeId i : inputs) check(i);
    return push(op, std::move(inputs), std::move(out_value), std::move(backward));
}

void Tape::backward(NodeId root) {
    check(root);
    if (nodes_[static_cast<size_t>(root)].value.numel() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " +
                                    nodes_[static_cast<size_t>(root)].value.shape_str());
    // intermediate grads are scratch for this pass; leaf grads accumulate
    // across calls
    for (NodeId id = 0; id <= root; ++id) {
        Node& node = nodes_[static_cast<size_t>(id)];
        if (node.back) std::fill(node.grad.data.begin(), node.grad.data.end(), 0.0f);
    }
    nodes_[static_cast<size_t>(root)].grad.data[0] += 1.0f;
    for (NodeId id = root; id >= 0; --id) {
        Node& node = nodes_[static_cast<size_t>(id)];
        if (node.back) node.back(*this, id);
    }
}

}  // namespace ldp
