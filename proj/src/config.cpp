#include "ldp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ldp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

void expect_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, std::string("bad value: ") + e.what());
    }
}

std::string dotted(const std::string& a, const char* b) { return a.empty() ? b : a + "." + b; }

ModelSpec parse_model(const json& j, const std::string& path) {
    ModelSpec m;
    expect_keys(j, path, {"kind", "widths", "stem_channels", "blocks_per_stage", "classes", "quantize_first_last"});
    const std::string kind = get_or<std::string>(j, "kind", "mlp", path);
    if (kind == "mlp")
        m.kind = ModelKind::mlp;
    else if (kind == "tiny_resnet")
        m.kind = ModelKind::tiny_resnet;
    else
        fail(dotted(path, "kind"), "must be 'mlp' or 'tiny_resnet', got '" + kind + "'");
    m.widths = get_or<std::vector<int64_t>>(j, "widths", {2, 64, 64, 4}, path);
    m.stem_channels = get_or<int>(j, "stem_channels", m.stem_channels, path);
    auto bps = get_or<std::vector<int>>(j, "blocks_per_stage", {1, 1, 1}, path);
    if (bps.size() != 3) fail(dotted(path, "blocks_per_stage"), "must have exactly 3 entries");
    m.blocks_per_stage = {bps[0], bps[1], bps[2]};
    m.classes = get_or<int>(j, "classes", m.classes, path);
    m.quantize_first_last = get_or<bool>(j, "quantize_first_last", m.quantize_first_last, path);
    if (m.kind == ModelKind::mlp) {
        if (m.widths.size() < 2) fail(dotted(path, "widths"), "mlp needs at least 2 widths");
        m.classes = static_cast<int>(m.widths.back());
    }
    if (m.classes < 2) fail(dotted(path, "classes"), "must be at least 2");
    return m;
}

DataSpec parse_data(const json& j, const std::string& path) {
    DataSpec d;
    expect_keys(j, path,
                {"kind", "classes", "dims", "per_class", "radius", "image_size", "train_count", "test_count",
                 "noise", "train_images", "train_labels", "test_images", "test_labels", "normalize"});
    const std::string kind = get_or<std::string>(j, "kind", "synth", path);
    if (kind == "synth")
        d.kind = DataSpec::Kind::synth;
    else if (kind == "idx")
        d.kind = DataSpec::Kind::idx;
    else if (kind == "glyphs")
        d.kind = DataSpec::Kind::glyphs;
    else
        fail(dotted(path, "kind"), "must be 'synth', 'idx' or 'glyphs', got '" + kind + "'");
    d.classes = get_or<int>(j, "classes", d.classes, path);
    d.dims = get_or<int>(j, "dims", d.dims, path);
    d.per_class = get_or<int>(j, "per_class", d.per_class, path);
    d.radius = get_or<double>(j, "radius", d.radius, path);
    d.image_size = get_or<int>(j, "image_size", d.image_size, path);
    d.train_count = get_or<int>(j, "train_count", d.train_count, path);
    d.test_count = get_or<int>(j, "test_count", d.test_count, path);
    d.noise = get_or<double>(j, "noise", d.noise, path);
    if (d.noise < 0.0) fail(dotted(path, "noise"), "must be >= 0");
    d.train_images = get_or<std::string>(j, "train_images", "", path);
    d.train_labels = get_or<std::string>(j, "train_labels", "", path);
    d.test_images = get_or<std::string>(j, "test_images", "", path);
    d.test_labels = get_or<std::string>(j, "test_labels", "", path);
    d.normalize = get_or<bool>(j, "normalize", d.normalize, path);
    if (d.kind == DataSpec::Kind::synth && d.classes < 2) fail(dotted(path, "classes"), "must be at least 2");
    if (d.kind == DataSpec::Kind::idx && (d.train_images.empty() || d.train_labels.empty()))
        fail(path, "idx data needs train_images and train_labels");
    return d;
}

SchedulerSpec parse_scheduler(const json& j, const std::string& path) {
    SchedulerSpec s;
    expect_keys(j, path,
                {"kind", "bits", "k", "choices", "active_epochs", "fallback_bits", "per_layer", "stage_epochs",
                 "stage_bits", "b_start", "b_end", "num_stages", "cyc_min", "cyc_max", "cycle_len"});
    const std::string kind = get_or<std::string>(j, "kind", "learned", path);
    try {
        s.kind = schedule_kind_from_name(kind);
    } catch (const std::exception& e) {
        fail(dotted(path, "kind"), e.what());
    }
    if (s.kind == ScheduleKind::replay) fail(dotted(path, "kind"), "replay runs go through the replay command");
    s.bits = get_or<int>(j, "bits", s.bits, path);
    s.k = get_or<int>(j, "k", s.k, path);
    s.choices = get_or<std::vector<int>>(j, "choices", s.choices, path);
    s.active_epochs = get_or<int>(j, "active_epochs", s.active_epochs, path);
    s.fallback_bits = get_or<int>(j, "fallback_bits", s.fallback_bits, path);
    s.per_layer = get_or<bool>(j, "per_layer", s.per_layer, path);
    s.stage_epochs = get_or<std::vector<int>>(j, "stage_epochs", s.stage_epochs, path);
    s.stage_bits = get_or<std::vector<std::vector<int>>>(j, "stage_bits", s.stage_bits, path);
    s.b_start = get_or<int>(j, "b_start", s.b_start, path);
    s.b_end = get_or<int>(j, "b_end", s.b_end, path);
    s.num_stages = get_or<int>(j, "num_stages", s.num_stages, path);
    s.cyc_min = get_or<int>(j, "cyc_min", s.cyc_min, path);
    s.cyc_max = get_or<int>(j, "cyc_max", s.cyc_max, path);
    s.cycle_len = get_or<int>(j, "cycle_len", s.cycle_len, path);

    auto check_bits = [&](int b, const char* key) {
        if (b < 2 || b > 32) fail(dotted(path, key), "bits must be in [2,32], got " + std::to_string(b));
    };
    if (s.kind == ScheduleKind::static_bits) check_bits(s.bits, "bits");
    if (s.kind == ScheduleKind::random_k) {
        if (s.k < 1) fail(dotted(path, "k"), "must be >= 1");
        if (s.choices.empty()) fail(dotted(path, "choices"), "must be non-empty");
        for (int c : s.choices) check_bits(c, "choices");
        check_bits(s.fallback_bits, "fallback_bits");
    }
    if (s.kind == ScheduleKind::staged) {
        if (s.stage_epochs.empty()) fail(dotted(path, "stage_epochs"), "must be non-empty");
        for (const auto& row : s.stage_bits)
            for (int b : row) check_bits(b, "stage_bits");
    }
    if (s.kind == ScheduleKind::progressive) {
        check_bits(s.b_start, "b_start");
        check_bits(s.b_end, "b_end");
        if (s.num_stages < 1) fail(dotted(path, "num_stages"), "must be >= 1");
    }
    if (s.kind == ScheduleKind::cyclic) {
        check_bits(s.cyc_min, "cyc_min");
        check_bits(s.cyc_max, "cyc_max");
        if (s.cyc_min > s.cyc_max) fail(dotted(path, "cyc_min"), "must be <= cyc_max");
        if (s.cycle_len < 1) fail(dotted(path, "cycle_len"), "must be >= 1");
    }
    return s;
}

PrecisionSpec parse_precision(const json& j, const std::string& path) {
    PrecisionSpec p;
    expect_keys(j, path,
                {"lr", "t_frac", "alpha", "epsilon", "bw_bits", "n", "b_min", "beta0", "b_static",
                 "freeze_after_epoch", "quantize_gradients"});
    p.lr = get_or<double>(j, "lr", p.lr, path);
    p.t_frac = get_or<double>(j, "t_frac", p.t_frac, path);
    p.alpha = get_or<double>(j, "alpha", p.alpha, path);
    p.epsilon = get_or<double>(j, "epsilon", p.epsilon, path);
    p.bw_bits = get_or<int>(j, "bw_bits", p.bw_bits, path);
    p.n = get_or<int>(j, "n", p.n, path);
    p.b_min = get_or<int>(j, "b_min", p.b_min, path);
    p.beta0 = get_or<double>(j, "beta0", p.beta0, path);
    p.b_static = get_or<int>(j, "b_static", p.b_static, path);
    p.freeze_after_epoch = get_or<int>(j, "freeze_after_epoch", p.freeze_after_epoch, path);
    p.quantize_gradients = get_or<bool>(j, "quantize_gradients", p.quantize_gradients, path);

    if (!(p.t_frac > 0.0 && p.t_frac <= 1.0)) fail(dotted(path, "t_frac"), "must be in (0,1]");
    if (p.lr <= 0.0) fail(dotted(path, "lr"), "must be positive");
    if (p.alpha < 0.0) fail(dotted(path, "alpha"), "must be >= 0");
    if (p.epsilon <= 0.0) fail(dotted(path, "epsilon"), "must be positive");
    if (p.bw_bits < 2) fail(dotted(path, "bw_bits"), "must be >= 2");
    if (p.n < 2 || p.n > 31) fail(dotted(path, "n"), "must be in [2,31]");
    if (p.b_min < 2 || p.b_min > p.n) fail(dotted(path, "b_min"), "must be in [2, n]");
    const double beta_lo = static_cast<double>(p.b_min) / p.n;
    if (p.beta0 < beta_lo || p.beta0 > 1.0)
        fail(dotted(path, "beta0"), "must be in [b_min/n, 1] = [" + std::to_string(beta_lo) + ", 1]");
    if (p.b_static < 2 || p.b_static > 32) fail(dotted(path, "b_static"), "must be in [2,32]");
    return p;
}

}  // namespace

DataSpec parse_data_spec_json(const nlohmann::json& j) { return parse_data(j, "data"); }

RunConfig parse_config_json(const json& root) {
    RunConfig cfg;
    expect_keys(root, "", {"model", "data", "train", "precision"});
    if (root.contains("model")) cfg.model = parse_model(root.at("model"), "model");
    if (root.contains("data")) cfg.data = parse_data(root.at("data"), "data");
    if (root.contains("precision")) cfg.precision = parse_precision(root.at("precision"), "precision");

    if (root.contains("train")) {
        const json& j = root.at("train");
        const std::string path = "train";
        expect_keys(j, path,
                    {"epochs", "batch_size", "lr", "momentum", "weight_decay", "lr_decay_milestones",
                     "lr_decay_factor", "seed", "output_dir", "scheduler"});
        cfg.epochs = get_or<int>(j, "epochs", cfg.epochs, path);
        cfg.batch_size = get_or<int>(j, "batch_size", cfg.batch_size, path);
        cfg.lr = get_or<double>(j, "lr", cfg.lr, path);
        cfg.momentum = get_or<double>(j, "momentum", cfg.momentum, path);
        cfg.weight_decay = get_or<double>(j, "weight_decay", cfg.weight_decay, path);
        cfg.lr_decay_milestones = get_or<std::vector<double>>(j, "lr_decay_milestones", cfg.lr_decay_milestones, path);
        cfg.lr_decay_factor = get_or<double>(j, "lr_decay_factor", cfg.lr_decay_factor, path);
        cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed, path);
        cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir, path);
        if (j.contains("scheduler")) cfg.scheduler = parse_scheduler(j.at("scheduler"), "train.scheduler");
        if (cfg.epochs < 1) fail("train.epochs", "must be >= 1");
        if (cfg.batch_size < 1) fail("train.batch_size", "must be >= 1");
        if (cfg.lr <= 0.0) fail("train.lr", "must be positive");
        if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) fail("train.momentum", "must be in [0,1)");
        for (double mstone : cfg.lr_decay_milestones)
            if (mstone <= 0.0 || mstone > 1.0) fail("train.lr_decay_milestones", "entries must be in (0,1]");
    }

    // consistency across sections
    if (cfg.model.kind == ModelKind::tiny_resnet && cfg.data.kind == DataSpec::Kind::synth)
        fail("data.kind", "tiny_resnet needs image data (idx or glyphs)");
    const int data_classes = cfg.data.kind == DataSpec::Kind::synth || cfg.data.kind == DataSpec::Kind::glyphs
                                 ? cfg.data.classes
                                 : -1;
    if (data_classes > 0 && cfg.model.classes != data_classes)
        fail("model.classes", "model emits " + std::to_string(cfg.model.classes) + " classes but data has " +
                                  std::to_string(data_classes));
    return cfg;
}

RunConfig parse_and_validate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": malformed JSON: " + e.what());
    }
    return parse_config_json(root);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    json model = {
        {"kind", cfg.model.kind == ModelKind::mlp ? "mlp" : "tiny_resnet"},
        {"widths", cfg.model.widths},
        {"stem_channels", cfg.model.stem_channels},
        {"blocks_per_stage", std::vector<int>{cfg.model.blocks_per_stage[0], cfg.model.blocks_per_stage[1],
                                              cfg.model.blocks_per_stage[2]}},
        {"classes", cfg.model.classes},
        {"quantize_first_last", cfg.model.quantize_first_last},
    };
    const char* data_kind = cfg.data.kind == DataSpec::Kind::synth ? "synth"
                            : cfg.data.kind == DataSpec::Kind::idx ? "idx"
                                                                   : "glyphs";
    json data = {
        {"kind", data_kind},
        {"classes", cfg.data.classes},
        {"dims", cfg.data.dims},
        {"per_class", cfg.data.per_class},
        {"radius", cfg.data.radius},
        {"image_size", cfg.data.image_size},
        {"train_count", cfg.data.train_count},
        {"test_count", cfg.data.test_count},
        {"noise", cfg.data.noise},
        {"train_images", cfg.data.train_images},
        {"train_labels", cfg.data.train_labels},
        {"test_images", cfg.data.test_images},
        {"test_labels", cfg.data.test_labels},
        {"normalize", cfg.data.normalize},
    };
    json sched = {{"kind", schedule_kind_name(cfg.scheduler.kind)}};
    switch (cfg.scheduler.kind) {
        case ScheduleKind::static_bits: sched["bits"] = cfg.scheduler.bits; break;
        case ScheduleKind::random_k:
            sched["k"] = cfg.scheduler.k;
            sched["choices"] = cfg.scheduler.choices;
            sched["active_epochs"] = cfg.scheduler.active_epochs;
            sched["fallback_bits"] = cfg.scheduler.fallback_bits;
            sched["per_layer"] = cfg.scheduler.per_layer;
            break;
        case ScheduleKind::staged:
            sched["stage_epochs"] = cfg.scheduler.stage_epochs;
            sched["stage_bits"] = cfg.scheduler.stage_bits;
            break;
        case ScheduleKind::progressive:
            sched["b_start"] = cfg.scheduler.b_start;
            sched["b_end"] = cfg.scheduler.b_end;
            sched["num_stages"] = cfg.scheduler.num_stages;
            break;
        case ScheduleKind::cyclic:
            sched["cyc_min"] = cfg.scheduler.cyc_min;
            sched["cyc_max"] = cfg.scheduler.cyc_max;
            sched["cycle_len"] = cfg.scheduler.cycle_len;
            break;
        case ScheduleKind::learned:
        case ScheduleKind::replay: break;
    }
    json train = {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"lr", cfg.lr},
        {"momentum", cfg.momentum},
        {"weight_decay", cfg.weight_decay},
        {"lr_decay_milestones", cfg.lr_decay_milestones},
        {"lr_decay_factor", cfg.lr_decay_factor},
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
        {"scheduler", sched},
    };
    json precision = {
        {"lr", cfg.precision.lr},
        {"t_frac", cfg.precision.t_frac},
        {"alpha", cfg.precision.alpha},
        {"epsilon", cfg.precision.epsilon},
        {"bw_bits", cfg.precision.bw_bits},
        {"n", cfg.precision.n},
        {"b_min", cfg.precision.b_min},
        {"beta0", cfg.precision.beta0},
        {"b_static", cfg.precision.b_static},
        {"freeze_after_epoch", cfg.precision.freeze_after_epoch},
        {"quantize_gradients", cfg.precision.quantize_gradients},
    };
    return json{{"model", model}, {"data", data}, {"train", train}, {"precision", precision}};
}

RunConfig with_numeric_override(const RunConfig& cfg, const std::string& dotted_path, double value) {
    json root = config_to_json(cfg);
    json* node = &root;
    std::stringstream ss(dotted_path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw std::invalid_argument("override: empty parameter path");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) throw std::invalid_argument("override: no such section '" + parts[i] + "'");
        node = &node->at(parts[i]);
    }
    const std::string& leaf = parts.back();
    if (!node->contains(leaf)) throw std::invalid_argument("override: no such parameter '" + dotted_path + "'");
    json& slot = node->at(leaf);
    if (slot.is_number_integer() || slot.is_number_unsigned())
        slot = static_cast<int64_t>(value);
    else if (slot.is_number_float())
        slot = value;
    else
        throw std::invalid_argument("override: parameter '" + dotted_path + "' is not numeric");
    return parse_config_json(root);
}

bool operator==(const RunConfig& a, const RunConfig& b) { return config_to_json(a) == config_to_json(b); }

}  // namespace ldp
