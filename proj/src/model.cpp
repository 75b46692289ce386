#include "ldp/model.hpp"

#include <cmath>
#include <memory>

#include "ldp/log.hpp"

namespace ldp {

namespace {

Tensor he_init(const std::vector<int64_t>& shape, int64_t fan_in, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    Tensor t = Tensor::zeros(shape);
    for (float& v : t.data) v = dist(rng);
    return t;
}

BnLayer make_bn(const std::string& name, int64_t channels) {
    BnLayer bn;
    bn.gamma = Parameter(name + ".gamma", Tensor::full({channels}, 1.0f));
    bn.beta = Parameter(name + ".beta", Tensor::zeros({channels}));
    bn.state.running_mean = Tensor::zeros({channels});
    bn.state.running_var = Tensor::full({channels}, 1.0f);
    // normalization stays full precision and free of weight decay
    bn.gamma.hyper.weight_decay = 0.0f;
    bn.beta.hyper.weight_decay = 0.0f;
    return bn;
}

}  // namespace

Model build_model(const ModelSpec& spec, const std::vector<int64_t>& input_shape, std::mt19937_64& rng) {
    Model m;
    m.spec = spec;
    m.input_shape = input_shape;

    if (spec.kind == ModelKind::mlp) {
        if (spec.widths.size() < 2) throw std::invalid_argument("build_model: mlp needs at least 2 widths");
        for (int64_t w : spec.widths)
            if (w < 1) throw std::invalid_argument("build_model: non-positive mlp width");
        if (input_shape.size() != 1 || input_shape[0] != spec.widths.front())
            throw std::invalid_argument("build_model: mlp input width " + std::to_string(spec.widths.front()) +
                                        " does not match data features");
        const size_t n_layers = spec.widths.size() - 1;
        for (size_t i = 0; i < n_layers; ++i) {
            const int64_t in = spec.widths[i], out = spec.widths[i + 1];
            DenseLayer layer;
            layer.w = Parameter("fc" + std::to_string(i) + ".w", he_init({in, out}, in, rng));
            layer.b = Parameter("fc" + std::to_string(i) + ".b", Tensor::zeros({out}));
            layer.b.hyper.weight_decay = 0.0f;
            layer.site = static_cast<int>(m.sites.size());
            QuantSite site;
            site.name = "fc" + std::to_string(i);
            site.block = static_cast<int>(i * 3 / n_layers);  // thirds, for staged schedules
            site.macs = in * out;
            m.sites.push_back(site);
            m.dense.push_back(std::move(layer));
        }
    } else {
        if (input_shape.size() != 3)
            throw std::invalid_argument("build_model: tiny_resnet needs (channels, height, width) input");
        if (spec.stem_channels < 1) throw std::invalid_argument("build_model: non-positive stem channels");
        for (int b : spec.blocks_per_stage)
            if (b < 1) throw std::invalid_argument("build_model: each stage needs at least one block");
        const int64_t cin = input_shape[0];
        int64_t h = input_shape[1], w = input_shape[2];

        auto conv_site = [&](const std::string& name, int stage, int64_t f, int64_t c, int kh, int kw, int stride,
                             int pad) {
            const int64_t oh = Tape::conv_out_dim(h, kh, stride, pad);
            const int64_t ow = Tape::conv_out_dim(w, kw, stride, pad);
            QuantSite site;
            site.name = name;
            site.block = stage;
            site.macs = f * c * kh * kw * oh * ow;
            m.sites.push_back(site);
            return std::pair<int64_t, int64_t>{oh, ow};
        };

        int64_t channels = spec.stem_channels;
        m.stem = ConvLayer{Parameter("stem.w", he_init({channels, cin, 3, 3}, cin * 9, rng)), 1, 1,
                           static_cast<int>(m.sites.size())};
        std::tie(h, w) = conv_site("stem", 0, channels, cin, 3, 3, 1, 1);
        m.stem_bn = make_bn("stem.bn", channels);

        for (int stage = 0; stage < 3; ++stage) {
            const int64_t out_ch = spec.stem_channels << stage;
            for (int b = 0; b < spec.blocks_per_stage[static_cast<size_t>(stage)]; ++b) {
                const bool downsample = stage > 0 && b == 0;
                const int stride = downsample ? 2 : 1;
                const std::string base = "s" + std::to_string(stage) + ".b" + std::to_string(b);
                ResBlock block;
                block.stage = stage;

                block.conv1 = ConvLayer{Parameter(base + ".conv1.w", he_init({out_ch, channels, 3, 3}, channels * 9, rng)),
                                        stride, 1, static_cast<int>(m.sites.size())};
                auto [h1, w1] = conv_site(base + ".conv1", stage, out_ch, channels, 3, 3, stride, 1);
                block.bn1 = make_bn(base + ".bn1", out_ch);

                const int64_t prev_h = h, prev_w = w;
                h = h1;
                w = w1;
                block.conv2 = ConvLayer{Parameter(base + ".conv2.w", he_init({out_ch, out_ch, 3, 3}, out_ch * 9, rng)),
                                        1, 1, static_cast<int>(m.sites.size())};
                conv_site(base + ".conv2", stage, out_ch, out_ch, 3, 3, 1, 1);
                block.bn2 = make_bn(base + ".bn2", out_ch);

                if (downsample || channels != out_ch) {
                    block.proj = ConvLayer{Parameter(base + ".proj.w", he_init({out_ch, channels, 1, 1}, channels, rng)),
                                           stride, 0, static_cast<int>(m.sites.size())};
                    // projection sees the block's input geometry
                    {
                        const int64_t ph = Tape::conv_out_dim(prev_h, 1, stride, 0);
                        const int64_t pw = Tape::conv_out_dim(prev_w, 1, stride, 0);
                        QuantSite site;
                        site.name = base + ".proj";
                        site.block = stage;
                        site.macs = out_ch * channels * ph * pw;
                        m.sites.push_back(site);
                    }
                    block.proj_bn = make_bn(base + ".proj.bn", out_ch);
                }
                channels = out_ch;
                m.blocks.push_back(std::move(block));
            }
        }

        DenseLayer head;
        head.w = Parameter("fc.w", he_init({channels, spec.classes}, channels, rng));
        head.b = Parameter("fc.b", Tensor::zeros({spec.classes}));
        head.b.hyper.weight_decay = 0.0f;
        head.site = static_cast<int>(m.sites.size());
        QuantSite site;
        site.name = "fc";
        site.block = 2;
        site.macs = channels * spec.classes;
        m.sites.push_back(site);
        m.dense.push_back(std::move(head));
    }

    // decide which sites are quantized
    std::vector<size_t> quantized;
    for (size_t i = 0; i < m.sites.size(); ++i) {
        if (!spec.quantize_first_last && (i == 0 || i + 1 == m.sites.size())) continue;
        quantized.push_back(i);
    }
    if (quantized.empty()) {
        LDP_LOG_WARN("no layers left to quantize after first/last exemption; quantizing all %zu layers",
                     m.sites.size());
        for (size_t i = 0; i < m.sites.size(); ++i) quantized.push_back(i);
    }
    for (size_t qi = 0; qi < quantized.size(); ++qi) {
        QuantSite& site = m.sites[quantized[qi]];
        site.quantized = true;
        site.prec_index = static_cast<int>(qi);
        PrecisionParam p;
        p.n = spec.n;
        p.b_min = spec.b_min;
        p.b_max = spec.n;
        p.beta = spec.beta0;
        p.lr_beta = spec.lr_beta;
        p.layer_id = static_cast<int>(qi);
        m.precisions.push_back(p);
        LayerCost lc;
        lc.layer_id = static_cast<int>(qi);
        lc.name = site.name;
        lc.macs = site.macs;
        m.costs.push_back(lc);
        m.sched_layers.push_back(ScheduledLayer{static_cast<int>(qi), site.name, site.block});
    }
    return m;
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    auto add_conv = [&](ConvLayer& c) { out.push_back(&c.w); };
    auto add_bn = [&](BnLayer& b) {
        out.push_back(&b.gamma);
        out.push_back(&b.beta);
    };
    if (stem) {
        add_conv(*stem);
        add_bn(*stem_bn);
    }
    for (ResBlock& b : blocks) {
        add_conv(b.conv1);
        add_bn(b.bn1);
        add_conv(b.conv2);
        add_bn(b.bn2);
        if (b.proj) add_conv(*b.proj);
        if (b.proj_bn) add_bn(*b.proj_bn);
    }
    for (DenseLayer& d : dense) {
        out.push_back(&d.w);
        out.push_back(&d.b);
    }
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto mut = const_cast<Model*>(this)->parameters();
    return std::vector<const Parameter*>(mut.begin(), mut.end());
}

void Model::set_weight_hyper(const SgdHyper& h) {
    for (Parameter* p : parameters()) {
        const float wd = p->hyper.weight_decay;  // bias/bn exemptions survive lr changes
        p->hyper = h;
        if (wd == 0.0f) p->hyper.weight_decay = 0.0f;
    }
}

std::vector<int> Model::current_bits() const {
    std::vector<int> bits(precisions.size());
    for (size_t i = 0; i < precisions.size(); ++i) bits[i] = bits_of(precisions[i]);
    return bits;
}

NodeId Model::gemm(Tape& tape, NodeId x, NodeId w, int site_index, StepContext& ctx) {
    const QuantSite& site = sites[static_cast<size_t>(site_index)];
    const bool want_quant = site.quantized && ctx.bits != nullptr;
    int bits = 0;
    if (want_quant) {
        bits = (*ctx.bits)[static_cast<size_t>(site.prec_index)];
        if (bits < 2) throw std::invalid_argument("gemm: bits must be >= 2 for layer '" + site.name + "'");
    }
    if (!want_quant || bits >= 32) return tape.matmul(x, w);

    const PrecisionParam p = ctx.precisions != nullptr ? (*ctx.precisions)[static_cast<size_t>(site.prec_index)]
                                                       : PrecisionParam::forced(bits);
    auto fqw = std::make_shared<FakeQuantResult>(fake_quantize(tape.value(w), p));
    auto fqx = std::make_shared<FakeQuantResult>(fake_quantize(tape.value(x), p));
    Tensor y = matmul_raw(fqx->quantized, fqw->quantized);

    const int prec_index = site.prec_index;
    const bool learn = ctx.dbeta != nullptr;
    StepContext* cp = &ctx;
    return tape.custom("quantized_matmul", {x, w}, std::move(y),
                       [x, w, fqx, fqw, prec_index, learn, cp](Tape& t, NodeId self) {
                           const Tensor& up = t.grad(self);
                           const Tensor* dy = &up;
                           Tensor dq;
                           if (cp->quantize_grads) {
                               dq = quantize_gradient(up, cp->grad_spec, *cp->grad_rng);
                               dy = &dq;
                           }
                           Tensor dxq = matmul_raw_transb(*dy, fqw->quantized);  // dY·Wqᵀ
                           Tensor dwq = matmul_raw_transa(fqx->quantized, *dy);  // Xqᵀ·dY
                           FakeQuantGrad gx = fake_quantize_backward(dxq, fqx->cache);
                           FakeQuantGrad gw = fake_quantize_backward(dwq, fqw->cache);
                           Tensor& gxn = t.grad(x);
                           Tensor& gwn = t.grad(w);
                           for (size_t i = 0; i < gxn.data.size(); ++i) gxn.data[i] += gx.dx.data[i];
                           for (size_t i = 0; i < gwn.data.size(); ++i) gwn.data[i] += gw.dx.data[i];
                           if (learn) (*cp->dbeta)[static_cast<size_t>(prec_index)] += gx.dbeta + gw.dbeta;
                       });
}

NodeId Model::dense_forward(Tape& tape, NodeId x, DenseLayer& layer, StepContext& ctx, ForwardResult& out) {
    NodeId w = tape.leaf(layer.w.value);
    NodeId b = tape.leaf(layer.b.value);
    out.param_nodes.push_back({&layer.w, w});
    out.param_nodes.push_back({&layer.b, b});
    NodeId y = gemm(tape, x, w, layer.site, ctx);
    return tape.add_row_bias(y, b);
}

NodeId Model::conv_forward(Tape& tape, NodeId x, ConvLayer& layer, StepContext& ctx, ForwardResult& out) {
    NodeId w = tape.leaf(layer.w.value);
    out.param_nodes.push_back({&layer.w, w});
    const Tensor& vw = layer.w.value;
    const Tensor& vx = tape.value(x);
    const int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
    const int64_t n = vx.dim(0), f = vw.dim(0);
    const int64_t oh = Tape::conv_out_dim(vx.dim(2), kh, layer.stride, layer.pad);
    const int64_t ow = Tape::conv_out_dim(vx.dim(3), kw, layer.stride, layer.pad);
    NodeId cols = tape.im2col(x, kh, kw, layer.stride, layer.pad);
    NodeId wm = tape.conv_weight_matrix(w);
    NodeId y = gemm(tape, cols, wm, layer.site, ctx);
    return tape.conv_output_reshape(y, n, f, oh, ow);
}

NodeId Model::bn_forward(Tape& tape, NodeId x, BnLayer& layer, StepContext& ctx, ForwardResult& out) {
    NodeId g = tape.leaf(layer.gamma.value);
    NodeId b = tape.leaf(layer.beta.value);
    out.param_nodes.push_back({&layer.gamma, g});
    out.param_nodes.push_back({&layer.beta, b});
    return tape.batch_norm(x, g, b, layer.state, ctx.training);
}

ForwardResult Model::forward(Tape& tape, const Tensor& batch, const std::vector<int>* labels, StepContext& ctx) {
    ForwardResult out;
    NodeId x = tape.leaf(batch);
    out.input = x;

    if (spec.kind == ModelKind::mlp) {
        for (size_t i = 0; i < dense.size(); ++i) {
            x = dense_forward(tape, x, dense[i], ctx, out);
            if (i + 1 < dense.size()) x = tape.relu(x);
        }
    } else {
        x = conv_forward(tape, x, *stem, ctx, out);
        x = bn_forward(tape, x, *stem_bn, ctx, out);
        x = tape.relu(x);
        for (ResBlock& block : blocks) {
            NodeId identity = x;
            NodeId h = conv_forward(tape, x, block.conv1, ctx, out);
            h = bn_forward(tape, h, block.bn1, ctx, out);
            h = tape.relu(h);
            h = conv_forward(tape, h, block.conv2, ctx, out);
            h = bn_forward(tape, h, block.bn2, ctx, out);
            NodeId skip = identity;
            if (block.proj) {
                skip = conv_forward(tape, identity, *block.proj, ctx, out);
                skip = bn_forward(tape, skip, *block.proj_bn, ctx, out);
            }
            x = tape.relu(tape.add(h, skip));
        }
        x = tape.global_avg_pool(x);
        x = dense_forward(tape, x, dense.back(), ctx, out);
    }

    out.logits = x;
    if (labels) out.loss = tape.softmax_cross_entropy(x, *labels);
    return out;
}

}  // namespace ldp
