#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ldp/checkpoint.hpp"
#include "ldp/cli.hpp"
#include "ldp/train.hpp"

using namespace ldp;
namespace fs = std::filesystem;

namespace {

fs::path test_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "ldp_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

RunConfig tiny_mlp_config(const fs::path& out, uint64_t seed = 1) {
    RunConfig cfg;
    cfg.model.kind = ModelKind::mlp;
    cfg.model.widths = {2, 16, 16, 2};
    cfg.model.classes = 2;
    cfg.data.kind = DataSpec::Kind::synth;
    cfg.data.classes = 2;
    cfg.data.dims = 2;
    cfg.data.per_class = 100;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = seed;
    cfg.output_dir = out.string();
    cfg.scheduler.kind = ScheduleKind::static_bits;
    cfg.scheduler.bits = 8;
    return cfg;
}

}  // namespace

TEST_CASE("an empty precision section takes the documented defaults") {
    const fs::path dir = test_dir("defaults");
    const std::string path = write_file(dir / "cfg.json", R"({
        "model": {"kind": "mlp", "widths": [2, 8, 2]},
        "data": {"kind": "synth", "classes": 2},
        "train": {"epochs": 1},
        "precision": {}
    })");
    RunConfig cfg = parse_and_validate(path);
    CHECK(cfg.precision.lr == 0.1);
    CHECK(cfg.precision.t_frac == 0.6);
    CHECK(cfg.precision.alpha == 1.0);
    CHECK(cfg.precision.epsilon == 1e-12);
    CHECK(cfg.precision.bw_bits == 8);
    CHECK(cfg.precision.n == 8);
    CHECK(cfg.precision.b_min == 3);
    CHECK(cfg.scheduler.kind == ScheduleKind::learned);
    CHECK(cfg.lr == 0.1);
    CHECK(cfg.momentum == 0.9);
    CHECK(cfg.weight_decay == 1e-4);
}

TEST_CASE("out-of-range values name the offending dotted path") {
    const fs::path dir = test_dir("ranges");
    const std::string path = write_file(dir / "bad.json", R"({
        "precision": {"t_frac": 1.5}
    })");
    CHECK_THROWS_WITH_AS(parse_and_validate(path), doctest::Contains("precision.t_frac"), std::invalid_argument);

    const std::string path2 = write_file(dir / "bad2.json", R"({"train": {"epochs": 0}})");
    CHECK_THROWS_WITH_AS(parse_and_validate(path2), doctest::Contains("train.epochs"), std::invalid_argument);
}

TEST_CASE("unknown keys are rejected with their path") {
    const fs::path dir = test_dir("strict");
    const std::string path = write_file(dir / "bad.json", R"({
        "train": {"scheduler": {"kindd": "static"}}
    })");
    CHECK_THROWS_WITH_AS(parse_and_validate(path), doctest::Contains("train.scheduler.kindd"),
                         std::invalid_argument);

    const std::string path2 = write_file(dir / "bad2.json", R"({"modle": {}})");
    CHECK_THROWS_WITH_AS(parse_and_validate(path2), doctest::Contains("modle"), std::invalid_argument);
}

TEST_CASE("malformed json is reported as such") {
    const fs::path dir = test_dir("malformed");
    const std::string path = write_file(dir / "bad.json", "{ not json ");
    CHECK_THROWS_WITH_AS(parse_and_validate(path), doctest::Contains("malformed"), std::invalid_argument);
}

TEST_CASE("config serialization round trips") {
    const fs::path dir = test_dir("roundtrip");
    RunConfig cfg = tiny_mlp_config(dir);
    cfg.scheduler.kind = ScheduleKind::random_k;
    cfg.scheduler.k = 5;
    cfg.scheduler.choices = {4, 8};
    cfg.precision.t_frac = 0.55;
    RunConfig back = parse_config_json(config_to_json(cfg));
    CHECK(back == cfg);

    RunConfig staged = tiny_mlp_config(dir);
    staged.scheduler.kind = ScheduleKind::staged;
    staged.scheduler.stage_epochs = {0, 1};
    staged.scheduler.stage_bits = {{4, 6, 8}, {8, 8, 8}};
    CHECK(parse_config_json(config_to_json(staged)) == staged);
}

TEST_CASE("numeric override navigates dotted paths") {
    const fs::path dir = test_dir("override");
    RunConfig cfg = tiny_mlp_config(dir);
    RunConfig changed = with_numeric_override(cfg, "precision.t_frac", 0.5);
    CHECK(changed.precision.t_frac == 0.5);
    RunConfig changed2 = with_numeric_override(cfg, "train.epochs", 7);
    CHECK(changed2.epochs == 7);
    CHECK_THROWS_WITH_AS(with_numeric_override(cfg, "data.kind", 1.0), doctest::Contains("not numeric"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(with_numeric_override(cfg, "precision.nope", 1.0), doctest::Contains("no such"),
                         std::invalid_argument);
    CHECK_THROWS_AS(with_numeric_override(cfg, "precision.t_frac", 2.0), std::invalid_argument);  // re-validated
}

TEST_CASE("sweep produces one run per value plus a combined summary") {
    const fs::path dir = test_dir("sweep");
    RunConfig cfg = tiny_mlp_config(dir / "base", 5);
    std::string summary_path;
    auto rows = run_sweep(cfg, "train.batch_size", {8, 16, 32}, (dir / "out").string(), &summary_path);
    REQUIRE(rows.size() == 3);
    for (const SweepRow& r : rows) {
        CHECK(fs::exists(fs::path(r.output_dir) / "metrics.csv"));
        CHECK(fs::exists(fs::path(r.output_dir) / "checkpoint.ldpc"));
    }
    const std::string summary = slurp(summary_path);
    CHECK(summary.rfind("value,final_acc,total_train_bitops,final_inference_bitops\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
}

TEST_CASE("sweeping t_frac upward never reduces the total training bitops") {
    // the controller tracks T, so higher targets cost more; 2% slack absorbs
    // hinge transients at the start of each run
    const fs::path dir = test_dir("sweep_tfrac");
    RunConfig cfg;
    cfg.model.kind = ModelKind::mlp;
    cfg.model.widths = {2, 64, 64, 2};
    cfg.model.classes = 2;
    cfg.model.quantize_first_last = true;
    cfg.data.kind = DataSpec::Kind::synth;
    cfg.data.classes = 2;
    cfg.data.dims = 2;
    cfg.data.per_class = 400;
    cfg.data.radius = 1.5;
    cfg.epochs = 10;
    cfg.batch_size = 16;
    cfg.lr = 0.05;
    cfg.seed = 6;
    cfg.output_dir = (dir / "base").string();
    cfg.scheduler.kind = ScheduleKind::learned;

    auto rows = run_sweep(cfg, "precision.t_frac", {0.5, 0.6, 0.7}, (dir / "out").string());
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].total_train_bitops >= 0.98 * rows[0].total_train_bitops);
    CHECK(rows[2].total_train_bitops >= 0.98 * rows[1].total_train_bitops);
}

TEST_CASE("a single-value sweep equals a plain train run") {
    const fs::path dir = test_dir("sweep_single");
    RunConfig cfg = tiny_mlp_config(dir / "plain", 9);
    RunArtifacts direct = train(cfg);
    auto rows = run_sweep(cfg, "precision.t_frac", {0.6}, (dir / "out").string());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].final_acc == direct.summary.final_accuracy);
    CHECK(rows[0].total_train_bitops == direct.summary.total_train_bitops);
    CHECK(rows[0].final_inference_bitops == direct.summary.final_inference_bitops);
}

TEST_CASE("replaying a static log matches the direct static run bit for bit") {
    const fs::path dir = test_dir("replay_static");
    RunConfig cfg = tiny_mlp_config(dir / "direct", 31);
    RunArtifacts direct = train(cfg);

    RunConfig replay_cfg = cfg;
    replay_cfg.output_dir = (dir / "replayed").string();
    RunArtifacts replayed = run_replay(replay_cfg, direct.schedule_csv);
    CHECK(slurp(direct.metrics_csv) == slurp(replayed.metrics_csv));
    CHECK(slurp(direct.schedule_csv) == slurp(replayed.schedule_csv));
}

TEST_CASE("replaying a learned log reproduces its forward-cost sequence exactly") {
    const fs::path dir = test_dir("replay_learned");
    RunConfig cfg = tiny_mlp_config(dir / "learned", 33);
    cfg.scheduler.kind = ScheduleKind::learned;
    cfg.epochs = 3;
    RunArtifacts learned = train(cfg);

    RunConfig replay_cfg = cfg;
    replay_cfg.output_dir = (dir / "replayed").string();
    RunArtifacts replayed = run_replay(replay_cfg, learned.schedule_csv);

    auto cost_sequence = [](const std::string& path) {
        std::map<int64_t, double> c;
        for (const ScheduleRow& row : read_schedule_csv(path)) c[row.iteration] += row.fwd_bitops;
        return c;
    };
    CHECK(cost_sequence(learned.schedule_csv) == cost_sequence(replayed.schedule_csv));
}

TEST_CASE("a truncated replay log names the first missing iteration") {
    const fs::path dir = test_dir("replay_truncated");
    RunConfig cfg = tiny_mlp_config(dir / "direct", 35);
    RunArtifacts direct = train(cfg);

    // keep only the first half of the iterations
    std::vector<ScheduleRow> log = read_schedule_csv(direct.schedule_csv);
    const int64_t kept_iters = direct.summary.iterations / 2;
    std::vector<ScheduleRow> truncated;
    for (const ScheduleRow& row : log)
        if (row.iteration < kept_iters) truncated.push_back(row);
    const std::string trunc_path = (dir / "truncated.csv").string();
    write_schedule_csv(trunc_path, truncated);

    RunConfig replay_cfg = cfg;
    replay_cfg.output_dir = (dir / "replayed").string();
    const std::string expect = "first missing iteration " + std::to_string(kept_iters);
    try {
        run_replay(replay_cfg, trunc_path);
        FAIL("expected a coverage error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find(expect) != std::string::npos);
    }
}

TEST_CASE("cost report matches a hand count and the exact target fraction") {
    const fs::path dir = test_dir("cost_report");
    RunConfig cfg;
    cfg.model.kind = ModelKind::mlp;
    cfg.model.widths = {784, 256, 128, 10};
    cfg.model.classes = 10;
    cfg.data.kind = DataSpec::Kind::synth;
    cfg.data.classes = 10;
    cfg.data.dims = 784;
    cfg.data.per_class = 10;
    cfg.output_dir = dir.string();

    CostReport rep = run_cost_report(cfg, (dir / "report.json").string());
    // only fc1 (256->128) is quantized under the default exemption
    REQUIRE(rep.layers.size() == 1);
    CHECK(rep.layers[0].macs == 256 * 128);
    CHECK(rep.layers[0].o_full() == 256.0 * 128.0 * 1024.0);
    CHECK(rep.t_stat == 256.0 * 128.0 * 64.0);
    CHECK(rep.t_target == 0.6 * rep.t_stat);  // exact: 0.6·T_stat
    CHECK(rep.c_min == 256.0 * 128.0 * 9.0);  // b_min = 3 on every quantized layer
    CHECK(rep.c_max == 256.0 * 128.0 * 64.0);
    CHECK(fs::exists(dir / "report.json"));

    // quantize-all variant covers all three layers
    RunConfig all = cfg;
    all.model.quantize_first_last = true;
    CostReport rep_all = run_cost_report(all, "");
    CHECK(rep_all.layers.size() == 3);
    const double want_total = (784.0 * 256 + 256.0 * 128 + 128.0 * 10) * 1024.0;
    CHECK(rep_all.o_full_total == want_total);
}

TEST_CASE("eval command reuses the checkpoint data spec or an explicit one") {
    const fs::path dir = test_dir("eval_cmd");
    RunConfig cfg = tiny_mlp_config(dir / "run", 41);
    RunArtifacts art = train(cfg);

    EvalResult same = run_eval(art.checkpoint_path, "", std::nullopt);
    CHECK(same.accuracy == art.summary.final_accuracy);

    // explicit data spec JSON (same synth spec, different seed comes from the
    // checkpoint's train seed so the split is identical)
    const std::string data_spec = write_file(dir / "data.json", R"({
        "kind": "synth", "classes": 2, "dims": 2, "per_class": 100
    })");
    EvalResult explicit_data = run_eval(art.checkpoint_path, data_spec, std::nullopt);
    CHECK(explicit_data.accuracy == same.accuracy);

    EvalResult forced = run_eval(art.checkpoint_path, "", 32);
    CHECK(forced.inference_bitops > same.inference_bitops);
}

#ifdef LDP_CLI_BINARY
TEST_CASE("binary exit status: zero on success, nonzero on error") {
    const fs::path dir = test_dir("process");
    const std::string good = write_file(dir / "good.json", R"({
        "model": {"kind": "mlp", "widths": [2, 8, 2]},
        "data": {"kind": "synth", "classes": 2, "per_class": 20},
        "train": {"epochs": 1, "batch_size": 8, "output_dir": ")" + (dir / "out").string() + R"("}
    })");
    const std::string cmd_ok = std::string(LDP_CLI_BINARY) + " cost-report --config " + good + " > " +
                               (dir / "ok.log").string() + " 2>&1";
    CHECK(std::system(cmd_ok.c_str()) == 0);

    const std::string bad = write_file(dir / "bad.json", R"({"precision": {"t_frac": 9}})");
    const std::string cmd_bad = std::string(LDP_CLI_BINARY) + " cost-report --config " + bad + " > " +
                                (dir / "bad.out").string() + " 2> " + (dir / "bad.err").string();
    CHECK(std::system(cmd_bad.c_str()) != 0);
    // error goes to the diagnostic stream, not the data stream
    CHECK(slurp((dir / "bad.out").string()).empty());
    CHECK(slurp((dir / "bad.err").string()).find("precision.t_frac") != std::string::npos);

    const std::string cmd_trainish = std::string(LDP_CLI_BINARY) + " train --config " + good + " > " +
                                     (dir / "train.log").string() + " 2>&1";
    CHECK(std::system(cmd_trainish.c_str()) == 0);
    CHECK(fs::exists(dir / "out" / "metrics.csv"));
    CHECK(fs::file_size(dir / "out" / "metrics.csv") > 0);
}
#endif
