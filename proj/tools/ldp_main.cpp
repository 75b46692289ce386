// ldp: learnable dynamic precision training at desk scale.
//
// Subcommands: train, eval, sweep, replay, cost-report. All diagnostics go to
// stderr; results and artifact paths go to stdout. Exit status is nonzero on
// any error.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldp/cli.hpp"
#include "ldp/log.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("bad numeric value '" + item + "' in --values");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("--values is empty");
    return out;
}

void print_artifacts(const ldp::RunArtifacts& art) {
    std::printf("output_dir: %s\n", art.output_dir.c_str());
    std::printf("metrics: %s\n", art.metrics_csv.c_str());
    std::printf("schedule: %s\n", art.schedule_csv.c_str());
    std::printf("cost_report: %s\n", art.cost_report_csv.c_str());
    std::printf("checkpoint: %s\n", art.checkpoint_path.c_str());
    std::printf("summary: %s\n", art.summary_json.c_str());
    if (!art.beta_smooth_csv.empty()) std::printf("beta_smooth: %s\n", art.beta_smooth_csv.c_str());
    std::printf("final_accuracy: %.6f\n", art.summary.final_accuracy);
    std::printf("total_train_bitops: %.17g\n", art.summary.total_train_bitops);
    std::printf("final_inference_bitops: %.17g\n", art.summary.final_inference_bitops);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learnable dynamic precision trainer"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, data_path, param, values_csv, out_dir, log_path;
    int bits_override = -1;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model from a config file");
    train_cmd->add_option("--config", config_path, "run config JSON")->required();
    train_cmd->add_option("--out", out_dir, "override train.output_dir");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "data spec JSON (defaults to the checkpoint's)");
    eval_cmd->add_option("--bits", bits_override, "force this bit-width on every quantized layer");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
    sweep_cmd->add_option("--config", config_path, "run config JSON")->required();
    sweep_cmd->add_option("--param", param, "dotted numeric config path, e.g. precision.t_frac")->required();
    sweep_cmd->add_option("--values", values_csv, "comma-separated numeric values")->required();
    sweep_cmd->add_option("--out", out_dir, "sweep output directory");

    CLI::App* replay_cmd = app.add_subcommand("replay", "train with bits forced from a schedule log");
    replay_cmd->add_option("--config", config_path, "run config JSON")->required();
    replay_cmd->add_option("--schedule", log_path, "schedule CSV from a previous run")->required();
    replay_cmd->add_option("--out", out_dir, "override train.output_dir");

    CLI::App* cost_cmd = app.add_subcommand("cost-report", "static per-layer BitOPs analysis");
    cost_cmd->add_option("--config", config_path, "run config JSON")->required();
    cost_cmd->add_option("--out", out_dir, "where to write cost_report.json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            ldp::RunConfig cfg = ldp::parse_and_validate(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            print_artifacts(ldp::run_train(cfg));
        } else if (eval_cmd->parsed()) {
            std::optional<int> bits;
            if (bits_override > 0) bits = bits_override;
            ldp::EvalResult r = ldp::run_eval(checkpoint_path, data_path, bits);
            std::printf("accuracy: %.6f\n", r.accuracy);
            std::printf("loss: %.6f\n", r.loss);
            std::printf("inference_bitops: %.17g\n", r.inference_bitops);
        } else if (sweep_cmd->parsed()) {
            ldp::RunConfig cfg = ldp::parse_and_validate(config_path);
            if (out_dir.empty()) out_dir = cfg.output_dir + "_sweep";
            std::string summary_path;
            auto rows = ldp::run_sweep(cfg, param, parse_values(values_csv), out_dir, &summary_path);
            std::printf("sweep_summary: %s\n", summary_path.c_str());
            for (const auto& r : rows)
                std::printf("%s=%g: acc %.6f, train_bitops %.6g, inference_bitops %.6g\n", param.c_str(), r.value,
                            r.final_acc, r.total_train_bitops, r.final_inference_bitops);
        } else if (replay_cmd->parsed()) {
            ldp::RunConfig cfg = ldp::parse_and_validate(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            print_artifacts(ldp::run_replay(cfg, log_path));
        } else if (cost_cmd->parsed()) {
            ldp::RunConfig cfg = ldp::parse_and_validate(config_path);
            const std::string json_out = out_dir.empty() ? "" : out_dir + "/cost_report.json";
            if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
            ldp::CostReport rep = ldp::run_cost_report(cfg, json_out);
            std::printf("layer_id,name,macs,o_full\n");
            for (const auto& lc : rep.layers)
                std::printf("%d,%s,%lld,%.17g\n", lc.layer_id, lc.name.c_str(), static_cast<long long>(lc.macs),
                            lc.o_full());
            std::printf("T_stat: %.17g (b_static=%d)\n", rep.t_stat, rep.b_static);
            std::printf("T: %.17g (t_frac=%g)\n", rep.t_target, rep.t_frac);
            std::printf("C_min: %.17g\n", rep.c_min);
            std::printf("C_max: %.17g\n", rep.c_max);
            if (!json_out.empty()) std::printf("cost_report_json: %s\n", json_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
