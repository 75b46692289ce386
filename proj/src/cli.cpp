#include "ldp/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ldp/log.hpp"
#include "ldp/rng.hpp"

namespace ldp {

namespace fs = std::filesystem;

RunArtifacts run_train(const RunConfig& cfg) { return train(cfg); }

EvalResult run_eval(const std::string& checkpoint_path, const std::string& data_spec_json_path,
                    std::optional<int> bits_override) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    RunConfig cfg = ckpt.config;
    if (!data_spec_json_path.empty()) {
        std::ifstream in(data_spec_json_path);
        if (!in) throw std::runtime_error("eval: cannot open data spec " + data_spec_json_path);
        cfg.data = parse_data_spec_json(nlohmann::json::parse(in));
    }
    TrainTestSplit data = load_data(cfg);
    Model model = restore_model(ckpt);
    std::vector<int> bits = ckpt.final_bits;
    if (bits_override) bits.assign(model.precisions.size(), *bits_override);
    return evaluate_model(model, data.test, bits);
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& dotted_param,
                                const std::vector<double>& values, const std::string& out_dir,
                                std::string* summary_csv_path) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    fs::create_directories(out_dir);
    std::vector<SweepRow> rows;
    for (double v : values) {
        RunConfig cfg = with_numeric_override(base, dotted_param, v);
        char tag[64];
        std::snprintf(tag, sizeof(tag), "%s=%g", dotted_param.c_str(), v);
        cfg.output_dir = (fs::path(out_dir) / tag).string();
        LDP_LOG_INFO("sweep run %s", tag);
        RunArtifacts art = train(cfg);
        rows.push_back(SweepRow{v, art.summary.final_accuracy, art.summary.total_train_bitops,
                                art.summary.final_inference_bitops, art.output_dir});
    }
    const std::string csv_path = (fs::path(out_dir) / "sweep_summary.csv").string();
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("sweep: cannot open " + csv_path);
    out << "value,final_acc,total_train_bitops,final_inference_bitops\n";
    char line[256];
    for (const SweepRow& r : rows) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", r.value, r.final_acc, r.total_train_bitops,
                      r.final_inference_bitops);
        out << line;
    }
    if (summary_csv_path) *summary_csv_path = csv_path;
    return rows;
}

RunArtifacts run_replay(const RunConfig& cfg, const std::string& schedule_log_path) {
    std::vector<ScheduleRow> log = read_schedule_csv(schedule_log_path);

    // layer layout comes from the configured model, built throwaway here
    ModelSpec spec = cfg.model;
    spec.n = cfg.precision.n;
    spec.b_min = cfg.precision.b_min;
    spec.beta0 = cfg.precision.beta0;
    spec.lr_beta = cfg.precision.lr;
    TrainTestSplit data = load_data(cfg);
    std::mt19937_64 rng = substream(cfg.seed, "weights");
    Model probe = build_model(spec, model_input_shape(cfg, data.train), rng);

    Scheduler sched = Scheduler::from_log(log, probe.sched_layers);
    return train(cfg, &sched);
}

CostReport run_cost_report(const RunConfig& cfg, const std::string& json_out_path) {
    ModelSpec spec = cfg.model;
    spec.n = cfg.precision.n;
    spec.b_min = cfg.precision.b_min;
    spec.beta0 = cfg.precision.beta0;
    spec.lr_beta = cfg.precision.lr;
    TrainTestSplit data = load_data(cfg);
    std::mt19937_64 rng = substream(cfg.seed, "weights");
    Model model = build_model(spec, model_input_shape(cfg, data.train), rng);

    CostReport rep;
    rep.layers = model.costs;
    rep.b_static = cfg.precision.b_static;
    rep.t_frac = cfg.precision.t_frac;
    rep.t_stat = static_target(model.costs, cfg.precision.b_static, 1.0);
    rep.t_target = cfg.precision.t_frac * rep.t_stat;
    std::vector<int> lo(model.costs.size(), cfg.precision.b_min), hi(model.costs.size(), cfg.precision.n);
    rep.c_min = forward_cost_bits(lo, model.costs);
    rep.c_max = forward_cost_bits(hi, model.costs);
    for (const LayerCost& lc : model.costs) rep.o_full_total += lc.o_full();

    if (!json_out_path.empty()) {
        nlohmann::json layers = nlohmann::json::array();
        for (const LayerCost& lc : rep.layers)
            layers.push_back({{"layer_id", lc.layer_id}, {"name", lc.name}, {"macs", lc.macs}, {"o_full", lc.o_full()}});
        nlohmann::json j = {
            {"layers", layers},       {"T_stat", rep.t_stat}, {"T", rep.t_target},  {"c_min", rep.c_min},
            {"c_max", rep.c_max},     {"o_full_total", rep.o_full_total},           {"b_static", rep.b_static},
            {"t_frac", rep.t_frac},
        };
        std::ofstream out(json_out_path);
        if (!out) throw std::runtime_error("cost-report: cannot open " + json_out_path);
        out << j.dump(2) << "\n";
    }
    return rep;
}

}  // namespace ldp
