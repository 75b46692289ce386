#include "ldp/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ldp {

LayerCost matmul_cost(int layer_id, std::string name, int64_t m, int64_t k, int64_t n) {
    LayerCost lc;
    lc.layer_id = layer_id;
    lc.name = std::move(name);
    lc.macs = m * k * n;
    return lc;
}

LayerCost conv_cost(int layer_id, std::string name, int64_t n, int64_t f, int64_t c, int kh, int kw, int64_t oh,
                    int64_t ow) {
    LayerCost lc;
    lc.layer_id = layer_id;
    lc.name = std::move(name);
    lc.macs = n * f * c * static_cast<int64_t>(kh) * kw * oh * ow;
    return lc;
}

double forward_cost_bits(const std::vector<int>& bits, const std::vector<LayerCost>& costs) {
    if (bits.size() != costs.size())
        throw std::invalid_argument("forward_cost: " + std::to_string(bits.size()) + " bit entries for " +
                                    std::to_string(costs.size()) + " layers");
    double c = 0.0;
    for (size_t i = 0; i < costs.size(); ++i)
        c += static_cast<double>(costs[i].macs) * bits[i] * bits[i];
    return c;
}

double forward_cost(const std::vector<PrecisionParam>& precisions, const std::vector<LayerCost>& costs) {
    if (precisions.size() != costs.size())
        throw std::invalid_argument("forward_cost: " + std::to_string(precisions.size()) + " precisions for " +
                                    std::to_string(costs.size()) + " layers");
    std::vector<int> bits(precisions.size());
    for (size_t i = 0; i < precisions.size(); ++i) bits[i] = bits_of(precisions[i]);
    return forward_cost_bits(bits, costs);
}

double cost_loss(double c, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("cost_loss: target must be positive");
    return c < t ? 0.0 : c;
}

std::vector<double> cost_grad(const std::vector<PrecisionParam>& precisions, const std::vector<LayerCost>& costs,
                              double c, double t) {
    if (precisions.size() != costs.size())
        throw std::invalid_argument("cost_grad: " + std::to_string(precisions.size()) + " precisions for " +
                                    std::to_string(costs.size()) + " layers");
    std::vector<double> g(precisions.size(), 0.0);
    if (c < t) return g;
    for (size_t i = 0; i < precisions.size(); ++i) {
        const double b_smooth = precisions[i].beta * precisions[i].n;
        g[i] = costs[i].o_full() * 2.0 * b_smooth / 1024.0 * precisions[i].n;
    }
    return g;
}

std::vector<double> balance(const std::vector<double>& g_task, const std::vector<double>& g_cost,
                            const BalanceConfig& cfg) {
    if (g_task.size() != g_cost.size())
        throw std::invalid_argument("balance: vector length mismatch " + std::to_string(g_task.size()) + " vs " +
                                    std::to_string(g_cost.size()));
    double mean_t = 0.0, mean_c = 0.0;
    for (size_t i = 0; i < g_task.size(); ++i) {
        mean_t += std::abs(g_task[i]);
        mean_c += std::abs(g_cost[i]);
    }
    if (!g_task.empty()) {
        mean_t /= static_cast<double>(g_task.size());
        mean_c /= static_cast<double>(g_task.size());
    }
    std::vector<double> g = g_task;
    if (mean_c == 0.0) return g;  // inactive cost term contributes exactly nothing
    const double scale = cfg.alpha * mean_t / (mean_c + cfg.epsilon);
    for (size_t i = 0; i < g.size(); ++i) g[i] += g_cost[i] * scale;
    return g;
}

double static_target(const std::vector<LayerCost>& costs, int b_static, double t_frac) {
    if (!(t_frac > 0.0 && t_frac <= 1.0)) throw std::invalid_argument("static_target: t_frac must be in (0,1]");
    double t_stat = 0.0;
    for (const LayerCost& lc : costs) t_stat += static_cast<double>(lc.macs) * b_static * b_static;
    return t_frac * t_stat;
}

double train_bitops(int64_t macs, int bits, int bw_bits) {
    return static_cast<double>(macs) * (static_cast<double>(bits) * bits + 2.0 * bits * bw_bits);
}

void validate_schedule_log(const std::vector<ScheduleRow>& log, size_t num_layers) {
    if (log.empty()) throw std::invalid_argument("schedule log: empty");
    if (num_layers == 0) throw std::invalid_argument("schedule log: no layers");
    if (log.size() % num_layers != 0)
        throw std::invalid_argument("schedule log: " + std::to_string(log.size()) + " rows is not a multiple of " +
                                    std::to_string(num_layers) + " layers");
    const int64_t first = log.front().iteration;
    for (size_t i = 0; i < log.size(); ++i) {
        const int64_t expect_iter = first + static_cast<int64_t>(i / num_layers);
        const int expect_layer = static_cast<int>(i % num_layers);
        if (log[i].iteration != expect_iter || log[i].layer_id != expect_layer)
            throw std::invalid_argument("schedule log: gap or disorder at row " + std::to_string(i) +
                                        ": expected iteration " + std::to_string(expect_iter) + " layer " +
                                        std::to_string(expect_layer) + ", found iteration " +
                                        std::to_string(log[i].iteration) + " layer " +
                                        std::to_string(log[i].layer_id));
    }
}

CostReportTotals training_bitops_report(const std::vector<ScheduleRow>& log, const std::vector<LayerCost>& costs,
                                        int bw_bits, const std::string& csv_path, const std::string& json_path,
                                        double t_target, double t_stat, double t_frac) {
    validate_schedule_log(log, costs.size());

    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("training_bitops_report: cannot open " + csv_path);
    csv << "# train_bitops = macs*(bits^2 + 2*bits*bw), bw=" << bw_bits << "; fwd_bitops = macs*bits^2\n";
    csv << "iteration,layer_id,bits,fwd_bitops,train_bitops,cumulative_train_bitops\n";

    CostReportTotals totals;
    double cum = 0.0;
    char line[256];
    for (const ScheduleRow& row : log) {
        const LayerCost& lc = costs[static_cast<size_t>(row.layer_id)];
        const double fwd = static_cast<double>(lc.macs) * row.bits * row.bits;
        const double train = train_bitops(lc.macs, row.bits, bw_bits);
        cum += train;
        totals.total_fwd_bitops += fwd;
        std::snprintf(line, sizeof(line), "%lld,%d,%d,%.17g,%.17g,%.17g\n", static_cast<long long>(row.iteration),
                      row.layer_id, row.bits, fwd, train, cum);
        csv << line;
    }
    totals.total_train_bitops = cum;
    totals.iterations = static_cast<int64_t>(log.size() / costs.size());

    nlohmann::json summary = {
        {"total_fwd_bitops", totals.total_fwd_bitops},
        {"total_train_bitops", totals.total_train_bitops},
        {"iterations", totals.iterations},
        {"bw_bits", bw_bits},
        {"T", t_target},
        {"T_stat", t_stat},
        {"t_frac", t_frac},
    };
    std::ofstream js(json_path);
    if (!js) throw std::runtime_error("training_bitops_report: cannot open " + json_path);
    js << summary.dump(2) << "\n";
    return totals;
}

}  // namespace ldp
