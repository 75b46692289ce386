#include "ldp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ldp/rng.hpp"

namespace ldp {

namespace {
constexpr char kMagic[4] = {'L', 'D', 'P', 'C'};
constexpr uint32_t kVersion = 1;

void write_le32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_le64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

uint32_t read_le32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_le64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated " + path);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

static_assert(std::endian::native == std::endian::little, "float payload is written as raw little-endian words");

// Parameters plus batch-norm running stats, in a stable order.
std::vector<std::pair<std::string, const Tensor*>> model_tensors(const Model& m) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const Parameter* p : m.parameters()) out.push_back({p->name, &p->value});
    auto add_bn = [&](const BnLayer& bn, const std::string& base) {
        out.push_back({base + ".running_mean", &bn.state.running_mean});
        out.push_back({base + ".running_var", &bn.state.running_var});
    };
    if (m.stem_bn) add_bn(*m.stem_bn, "stem.bn");
    for (size_t i = 0; i < m.blocks.size(); ++i) {
        const ResBlock& b = m.blocks[i];
        const std::string base = b.bn1.gamma.name.substr(0, b.bn1.gamma.name.rfind(".bn1.gamma"));
        add_bn(b.bn1, base + ".bn1");
        add_bn(b.bn2, base + ".bn2");
        if (b.proj_bn) add_bn(*b.proj_bn, base + ".proj.bn");
    }
    return out;
}
}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const RunConfig& cfg,
                     const std::vector<int>& final_bits) {
    auto tensors = model_tensors(model);
    nlohmann::json meta;
    meta["config"] = config_to_json(cfg);
    meta["input_shape"] = model.input_shape;
    std::vector<double> betas;
    for (const PrecisionParam& p : model.precisions) betas.push_back(p.beta);
    meta["betas"] = betas;
    meta["final_bits"] = final_bits;
    nlohmann::json tlist = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        tlist.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}, {"count", t->numel()}});
        offset += static_cast<uint64_t>(t->numel()) * sizeof(float);
    }
    meta["tensors"] = tlist;
    const std::string meta_str = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_le32(out, kVersion);
    write_le64(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_le32(in, path);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
    const uint64_t meta_len = read_le64(in, path);
    std::string meta_str(meta_len, '\0');
    if (!in.read(meta_str.data(), static_cast<std::streamsize>(meta_len)))
        throw std::runtime_error("checkpoint: truncated metadata in " + path);
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    Checkpoint ckpt;
    ckpt.config = parse_config_json(meta.at("config"));
    ckpt.input_shape = meta.at("input_shape").get<std::vector<int64_t>>();
    ckpt.betas = meta.at("betas").get<std::vector<double>>();
    ckpt.final_bits = meta.at("final_bits").get<std::vector<int>>();
    for (const auto& entry : meta.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const int64_t count = entry.at("count").get<int64_t>();
        Tensor t = Tensor::zeros(shape);
        if (t.numel() != count)
            throw std::runtime_error("checkpoint: shape/count mismatch for tensor '" + name + "' in " + path);
        if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(float))))
            throw std::runtime_error("checkpoint: truncated payload at tensor '" + name + "' in " + path);
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

Model restore_model(const Checkpoint& ckpt) {
    const RunConfig& cfg = ckpt.config;
    ModelSpec spec = cfg.model;
    spec.n = cfg.precision.n;
    spec.b_min = cfg.precision.b_min;
    spec.beta0 = cfg.precision.beta0;
    spec.lr_beta = cfg.precision.lr;
    std::mt19937_64 rng(derive_seed(cfg.seed, "weights"));
    Model m = build_model(spec, ckpt.input_shape, rng);

    auto load_into = [&](Tensor& dst, const std::string& name) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        if (it->second.shape != dst.shape)
            throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "'");
        dst = it->second;
    };
    for (Parameter* p : m.parameters()) load_into(p->value, p->name);
    auto load_bn = [&](BnLayer& bn, const std::string& base) {
        load_into(bn.state.running_mean, base + ".running_mean");
        load_into(bn.state.running_var, base + ".running_var");
    };
    if (m.stem_bn) load_bn(*m.stem_bn, "stem.bn");
    for (ResBlock& b : m.blocks) {
        const std::string base = b.bn1.gamma.name.substr(0, b.bn1.gamma.name.rfind(".bn1.gamma"));
        load_bn(b.bn1, base + ".bn1");
        load_bn(b.bn2, base + ".bn2");
        if (b.proj_bn) load_bn(*b.proj_bn, base + ".proj.bn");
    }
    if (ckpt.betas.size() != m.precisions.size())
        throw std::runtime_error("checkpoint: β count does not match model");
    for (size_t i = 0; i < m.precisions.size(); ++i) m.precisions[i].beta = ckpt.betas[i];
    return m;
}

}  // namespace ldp
