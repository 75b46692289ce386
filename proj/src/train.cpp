#include "ldp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ldp/log.hpp"
#include "ldp/rng.hpp"

namespace ldp {

namespace {

struct MetricsRow {
    int64_t iteration;
    int epoch;
    const char* split;
    double loss;
    double accuracy;
    double avg_bits;
    double iter_fwd_bitops;
    double iter_train_bitops;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open metrics csv for writing: " + path);
    out << "iteration,epoch,split,loss,accuracy,avg_bits,iter_fwd_bitops,iter_train_bitops\n";
    char line[320];
    for (const MetricsRow& r : rows) {
        std::snprintf(line, sizeof(line), "%lld,%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(r.iteration), r.epoch, r.split, r.loss, r.accuracy, r.avg_bits,
                      r.iter_fwd_bitops, r.iter_train_bitops);
        out << line;
    }
}

double accuracy_of(const Tensor& logits, const std::vector<int>& labels) {
    const int64_t n = logits.dim(0), k = logits.dim(1);
    int64_t hits = 0;
    for (int64_t i = 0; i < n; ++i) {
        const float* row = logits.data.data() + i * k;
        int64_t best = 0;
        for (int64_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

double mean_bits(const std::vector<int>& bits) {
    if (bits.empty()) return 32.0;
    double s = 0.0;
    for (int b : bits) s += b;
    return s / static_cast<double>(bits.size());
}

}  // namespace

TrainTestSplit load_data(const RunConfig& cfg) {
    switch (cfg.data.kind) {
        case DataSpec::Kind::synth:
            return synth_blobs(cfg.data.classes, cfg.data.dims, cfg.data.per_class, cfg.data.radius, cfg.seed);
        case DataSpec::Kind::glyphs: {
            TrainTestSplit split;
            split.train = synth_glyphs(cfg.data.classes, cfg.data.image_size, cfg.data.train_count,
                                       derive_seed(cfg.seed, "glyph-train"), cfg.data.noise);
            split.test = synth_glyphs(cfg.data.classes, cfg.data.image_size, cfg.data.test_count,
                                      derive_seed(cfg.seed, "glyph-test"), cfg.data.noise);
            if (cfg.data.normalize) {
                const NormStats stats = compute_norm_stats(split.train);
                normalize(split.train, stats);
                normalize(split.test, stats);
            }
            return split;
        }
        case DataSpec::Kind::idx: {
            TrainTestSplit split;
            split.train = load_idx(cfg.data.train_images, cfg.data.train_labels);
            if (!cfg.data.test_images.empty()) {
                split.test = load_idx(cfg.data.test_images, cfg.data.test_labels);
            } else {
                // hold out the last 20% by index
                const int64_t train_count = split.train.count * 8 / 10;
                Dataset& all = split.train;
                Dataset test;
                test.features = all.features;
                test.channels = all.channels;
                test.height = all.height;
                test.width = all.width;
                test.num_classes = all.num_classes;
                test.count = all.count - train_count;
                test.x.assign(all.x.begin() + train_count * all.features, all.x.end());
                test.y.assign(all.y.begin() + train_count, all.y.end());
                all.count = train_count;
                all.x.resize(static_cast<size_t>(train_count * all.features));
                all.y.resize(static_cast<size_t>(train_count));
                split.test = std::move(test);
            }
            if (cfg.data.normalize) {
                const NormStats stats = compute_norm_stats(split.train);
                normalize(split.train, stats);
                normalize(split.test, stats);
            }
            return split;
        }
    }
    throw std::logic_error("load_data: unreachable");
}

std::vector<int64_t> model_input_shape(const RunConfig& cfg, const Dataset& train) {
    if (cfg.model.kind == ModelKind::mlp) return {train.features};
    if (!train.image()) throw std::invalid_argument("tiny_resnet needs image data");
    return {train.channels, train.height, train.width};
}

EvalResult evaluate_model(Model& model, const Dataset& data, const std::vector<int>& bits) {
    if (bits.size() != model.precisions.size())
        throw std::invalid_argument("evaluate: bits vector does not match quantized layer count");
    EvalResult out;
    out.bits = bits;
    const int64_t eval_batch = 256;
    double loss_sum = 0.0;
    int64_t hits = 0;
    StepContext ctx;
    ctx.training = false;
    ctx.bits = model.precisions.empty() ? nullptr : &bits;
    for (int64_t start = 0; start < data.count; start += eval_batch) {
        const int64_t stop = std::min(data.count, start + eval_batch);
        std::vector<int64_t> idx(static_cast<size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        Tensor batch = data.batch(idx);
        std::vector<int> labels = data.labels(idx);
        Tape tape;
        ForwardResult fwd = model.forward(tape, batch, &labels, ctx);
        loss_sum += static_cast<double>(tape.value(fwd.loss).data[0]) * static_cast<double>(stop - start);
        const Tensor& logits = tape.value(fwd.logits);
        hits += static_cast<int64_t>(std::lround(accuracy_of(logits, labels) * static_cast<double>(stop - start)));
    }
    out.loss = loss_sum / static_cast<double>(data.count);
    out.accuracy = static_cast<double>(hits) / static_cast<double>(data.count);
    out.inference_bitops = forward_cost_bits(bits, model.costs);
    return out;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& data,
                               std::optional<int> bits_override) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Model model = restore_model(ckpt);
    std::vector<int> bits = ckpt.final_bits;
    if (bits_override) bits.assign(model.precisions.size(), *bits_override);
    return evaluate_model(model, data, bits);
}

RunArtifacts train(const RunConfig& cfg, const Scheduler* scheduler_override) {
    namespace fs = std::filesystem;
    RunArtifacts art;
    art.output_dir = cfg.output_dir;
    fs::create_directories(cfg.output_dir);

    TrainTestSplit data = load_data(cfg);
    if (data.train.num_classes > cfg.model.classes)
        throw std::invalid_argument("train: data has " + std::to_string(data.train.num_classes) +
                                    " classes but the model emits " + std::to_string(cfg.model.classes));

    ModelSpec spec = cfg.model;
    spec.n = cfg.precision.n;
    spec.b_min = cfg.precision.b_min;
    spec.beta0 = cfg.precision.beta0;
    spec.lr_beta = cfg.precision.lr;
    std::mt19937_64 weights_rng = substream(cfg.seed, "weights");
    Model model = build_model(spec, model_input_shape(cfg, data.train), weights_rng);

    std::optional<Scheduler> own_scheduler;
    if (!scheduler_override)
        own_scheduler = Scheduler::make(cfg.scheduler, model.sched_layers, cfg.epochs,
                                        derive_seed(cfg.seed, "randomk"), &model.precisions);
    const Scheduler& sched = scheduler_override ? *scheduler_override : *own_scheduler;
    const bool learned = !scheduler_override && sched.kind() == ScheduleKind::learned;

    const double t_stat = static_target(model.costs, cfg.precision.b_static, 1.0);
    const double t_target = cfg.precision.t_frac * t_stat;
    const BalanceConfig balance_cfg{cfg.precision.alpha, cfg.precision.epsilon};

    SgdHyper base_hyper;
    base_hyper.lr = static_cast<float>(cfg.lr);
    base_hyper.momentum = static_cast<float>(cfg.momentum);
    base_hyper.weight_decay = static_cast<float>(cfg.weight_decay);
    model.set_weight_hyper(base_hyper);

    std::mt19937_64 order_rng = substream(cfg.seed, "data-order");
    std::mt19937_64 sround_rng = substream(cfg.seed, "stochastic-rounding");

    const size_t num_layers = model.precisions.size();
    const int64_t iters_per_epoch = data.train.count / cfg.batch_size;
    if (iters_per_epoch < 1)
        throw std::invalid_argument("train: batch size " + std::to_string(cfg.batch_size) +
                                    " exceeds training set of " + std::to_string(data.train.count));
    if (scheduler_override && sched.kind() == ScheduleKind::replay &&
        sched.replay_iterations() < iters_per_epoch * cfg.epochs) {
        throw std::invalid_argument("replay: log covers " + std::to_string(sched.replay_iterations()) +
                                    " iterations but the run needs " + std::to_string(iters_per_epoch * cfg.epochs) +
                                    "; first missing iteration " + std::to_string(sched.replay_iterations()));
    }

    std::vector<MetricsRow> metrics;
    std::vector<ScheduleRow> schedule_log;
    std::vector<std::pair<int64_t, std::vector<double>>> beta_trace;  // learned: raw β per iteration
    std::vector<int64_t> order(static_cast<size_t>(data.train.count));
    std::iota(order.begin(), order.end(), 0);

    GradQuantSpec grad_spec;
    grad_spec.bits = cfg.precision.bw_bits;
    grad_spec.rng_seed = derive_seed(cfg.seed, "stochastic-rounding");

    int64_t iteration = 0;
    std::vector<int> bits(num_layers, cfg.precision.b_static);
    double final_eval_acc = 0.0, final_eval_loss = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // step-decay weight lr
        double lr = cfg.lr;
        for (double mstone : cfg.lr_decay_milestones)
            if (epoch >= mstone * cfg.epochs) lr *= cfg.lr_decay_factor;
        SgdHyper hyper = base_hyper;
        hyper.lr = static_cast<float>(lr);
        model.set_weight_hyper(hyper);

        std::shuffle(order.begin(), order.end(), order_rng);
        const bool freeze_beta = cfg.precision.freeze_after_epoch >= 0 && epoch >= cfg.precision.freeze_after_epoch;

        for (int64_t step = 0; step < iters_per_epoch; ++step, ++iteration) {
            std::vector<int64_t> idx(order.begin() + step * cfg.batch_size,
                                     order.begin() + (step + 1) * cfg.batch_size);
            Tensor batch = data.train.batch(idx);
            std::vector<int> labels = data.train.labels(idx);

            for (size_t l = 0; l < num_layers; ++l)
                bits[l] = learned ? bits_of(model.precisions[l])
                                  : sched.bits_for(iteration, epoch, static_cast<int>(l));

            std::vector<double> dbeta(num_layers, 0.0);
            StepContext ctx;
            ctx.training = true;
            ctx.bits = num_layers ? &bits : nullptr;
            ctx.precisions = learned ? &model.precisions : nullptr;
            ctx.dbeta = learned ? &dbeta : nullptr;
            ctx.quantize_grads = cfg.precision.quantize_gradients && num_layers > 0;
            ctx.grad_spec = grad_spec;
            ctx.grad_rng = &sround_rng;

            Tape tape;
            ForwardResult fwd = model.forward(tape, batch, &labels, ctx);
            const double loss = tape.value(fwd.loss).data[0];
            if (!std::isfinite(loss))
                throw std::runtime_error("train: loss became non-finite at iteration " + std::to_string(iteration) +
                                         " (epoch " + std::to_string(epoch) + ")");
            const double acc = accuracy_of(tape.value(fwd.logits), labels);
            tape.backward(fwd.loss);

            const double c_now = forward_cost_bits(bits, model.costs);
            double iter_train = 0.0;
            for (size_t l = 0; l < num_layers; ++l)
                iter_train += train_bitops(model.costs[l].macs, bits[l],
                                           cfg.precision.quantize_gradients ? cfg.precision.bw_bits : 0);

            // schedule rows carry the β that produced this iteration's bits
            for (size_t l = 0; l < num_layers; ++l) {
                ScheduleRow row;
                row.iteration = iteration;
                row.layer_id = static_cast<int>(l);
                row.layer_name = model.costs[l].name;
                row.beta = learned ? model.precisions[l].beta : static_cast<double>(bits[l]) / cfg.precision.n;
                row.bits = bits[l];
                row.fwd_bitops = static_cast<double>(model.costs[l].macs) * bits[l] * bits[l];
                schedule_log.push_back(std::move(row));
            }
            if (learned) {
                std::vector<double> betas(num_layers);
                for (size_t l = 0; l < num_layers; ++l) betas[l] = model.precisions[l].beta;
                beta_trace.push_back({iteration, std::move(betas)});
            }

            // weight update
            for (auto& [param, node] : fwd.param_nodes) sgd_step(*param, tape.grad(node));

            // precision update
            if (learned && !freeze_beta) {
                std::vector<double> g_cost = cost_grad(model.precisions, model.costs, c_now, t_target);
                std::vector<double> g = balance(dbeta, g_cost, balance_cfg);
                for (size_t l = 0; l < num_layers; ++l) beta_sgd_step(model.precisions[l], g[l]);
            }

            metrics.push_back(MetricsRow{iteration, epoch, "train", loss, acc, mean_bits(bits), c_now, iter_train});
        }

        EvalResult ev = evaluate_model(model, data.test, bits);
        final_eval_acc = ev.accuracy;
        final_eval_loss = ev.loss;
        metrics.push_back(MetricsRow{iteration, epoch, "test", ev.loss, ev.accuracy, mean_bits(bits),
                                     forward_cost_bits(bits, model.costs),
                                     0.0});
        LDP_LOG_INFO("epoch %d: test acc %.4f, loss %.4f, avg bits %.2f", epoch, ev.accuracy, ev.loss,
                     mean_bits(bits));
    }

    // artifacts
    art.metrics_csv = (fs::path(cfg.output_dir) / "metrics.csv").string();
    art.schedule_csv = (fs::path(cfg.output_dir) / "schedule.csv").string();
    art.cost_report_csv = (fs::path(cfg.output_dir) / "cost_report.csv").string();
    art.cost_summary_json = (fs::path(cfg.output_dir) / "cost_summary.json").string();
    art.checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.ldpc").string();
    art.summary_json = (fs::path(cfg.output_dir) / "summary.json").string();

    write_metrics_csv(art.metrics_csv, metrics);
    write_schedule_csv(art.schedule_csv, schedule_log);
    if (learned) {
        // moving-average β (window = one epoch) for visualization only; the
        // training path and schedule.csv always carry raw values
        art.beta_smooth_csv = (fs::path(cfg.output_dir) / "beta_smooth.csv").string();
        std::ofstream out(art.beta_smooth_csv);
        out << "iteration,layer_id,beta_smooth\n";
        const size_t window = static_cast<size_t>(std::max<int64_t>(1, iters_per_epoch));
        std::vector<double> acc(num_layers, 0.0);
        std::vector<std::vector<double>> hist;
        char line[128];
        for (size_t i = 0; i < beta_trace.size(); ++i) {
            hist.push_back(beta_trace[i].second);
            for (size_t l = 0; l < num_layers; ++l) acc[l] += beta_trace[i].second[l];
            if (hist.size() > window)
                for (size_t l = 0; l < num_layers; ++l) acc[l] -= hist[hist.size() - window - 1][l];
            const double denom = static_cast<double>(std::min(hist.size(), window));
            for (size_t l = 0; l < num_layers; ++l) {
                std::snprintf(line, sizeof(line), "%lld,%zu,%.17g\n",
                              static_cast<long long>(beta_trace[i].first), l, acc[l] / denom);
                out << line;
            }
        }
    }

    CostReportTotals report;
    if (!schedule_log.empty()) {
        report = training_bitops_report(schedule_log, model.costs,
                                        cfg.precision.quantize_gradients ? cfg.precision.bw_bits : 0,
                                        art.cost_report_csv, art.cost_summary_json, t_target, t_stat,
                                        cfg.precision.t_frac);
    }

    save_checkpoint(art.checkpoint_path, model, cfg, bits);

    art.summary.final_accuracy = final_eval_acc;
    art.summary.final_loss = final_eval_loss;
    art.summary.total_train_bitops = report.total_train_bitops;
    art.summary.total_fwd_bitops = report.total_fwd_bitops;
    art.summary.final_inference_bitops = forward_cost_bits(bits, model.costs);
    art.summary.iterations = iteration;
    art.summary.t_target = t_target;
    art.summary.t_stat = t_stat;

    nlohmann::json summary = {
        {"final_accuracy", art.summary.final_accuracy},
        {"final_loss", art.summary.final_loss},
        {"total_train_bitops", art.summary.total_train_bitops},
        {"total_fwd_bitops", art.summary.total_fwd_bitops},
        {"final_inference_bitops", art.summary.final_inference_bitops},
        {"iterations", art.summary.iterations},
        {"T", art.summary.t_target},
        {"T_stat", art.summary.t_stat},
        {"t_frac", cfg.precision.t_frac},
    };
    std::ofstream js(art.summary_json);
    js << summary.dump(2) << "\n";
    return art;
}

}  // namespace ldp
