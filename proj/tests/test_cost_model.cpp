#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ldp/cost_model.hpp"
#include "oracles.hpp"

using namespace ldp;

namespace {

PrecisionParam prec(double beta, int n) {
    PrecisionParam p;
    p.beta = beta;
    p.n = n;
    p.b_min = 2;
    p.b_max = n;
    return p;
}

std::vector<ScheduleRow> constant_log(int iters, const std::vector<LayerCost>& costs, int bits) {
    std::vector<ScheduleRow> log;
    for (int it = 0; it < iters; ++it)
        for (const LayerCost& lc : costs) {
            ScheduleRow r;
            r.iteration = it;
            r.layer_id = lc.layer_id;
            r.layer_name = lc.name;
            r.bits = bits;
            r.beta = bits / 8.0;
            r.fwd_bitops = static_cast<double>(lc.macs) * bits * bits;
            log.push_back(r);
        }
    return log;
}

}  // namespace

TEST_CASE("layer full-precision BitOPs") {
    LayerCost fc = matmul_cost(0, "fc", 1, 784, 256);
    CHECK(fc.macs == 200704);
    CHECK(fc.o_full() == 205520896.0);

    LayerCost cv = conv_cost(1, "conv", 1, 1, 1, 3, 3, 1, 1);
    CHECK(cv.macs == 9);
    CHECK(cv.o_full() == 9216.0);

    // two-layer hand count: 4·2·9·5·5 + 8·4·9·3·3
    LayerCost c1 = conv_cost(0, "c1", 1, 4, 2, 3, 3, 5, 5);
    LayerCost c2 = conv_cost(1, "c2", 1, 8, 4, 3, 3, 3, 3);
    CHECK(c1.macs + c2.macs == 4 * 2 * 9 * 5 * 5 + 8 * 4 * 9 * 3 * 3);
}

TEST_CASE("forward_cost worked examples") {
    std::vector<LayerCost> costs(1);
    costs[0].macs = 1000;
    CHECK(forward_cost({prec(1.0, 8)}, costs) == doctest::Approx(64000.0).epsilon(1e-12));  // 1024000·(8/32)²

    std::vector<LayerCost> five;
    std::vector<PrecisionParam> precs;
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int64_t> macs_dist(10, 100000);
    std::uniform_real_distribution<double> beta_dist(0.25, 1.0);
    for (int i = 0; i < 5; ++i) {
        LayerCost lc;
        lc.layer_id = i;
        lc.macs = macs_dist(rng);
        five.push_back(lc);
        precs.push_back(prec(beta_dist(rng), 8));
    }
    // all layers at 32 bits equals the full-precision total
    std::vector<int> all32(5, 32);
    double o_total = 0.0;
    for (const LayerCost& lc : five) o_total += lc.o_full();
    CHECK(forward_cost_bits(all32, five) == o_total);

    // brute-force per-layer sum oracle
    double want = 0.0;
    for (int i = 0; i < 5; ++i) {
        const int b = bits_of(precs[static_cast<size_t>(i)]);
        want += five[static_cast<size_t>(i)].o_full() * (b / 32.0) * (b / 32.0);
    }
    CHECK(forward_cost(precs, five) == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(forward_cost_bits({8}, five), std::invalid_argument);
}

TEST_CASE("forward_cost is monotone in every beta") {
    std::vector<LayerCost> costs;
    for (int i = 0; i < 4; ++i) {
        LayerCost lc;
        lc.layer_id = i;
        lc.macs = 1000 * (i + 1);
        costs.push_back(lc);
    }
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> beta_dist(0.25, 0.9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PrecisionParam> ps;
        for (int i = 0; i < 4; ++i) ps.push_back(prec(beta_dist(rng), 8));
        const double base = forward_cost(ps, costs);
        for (int i = 0; i < 4; ++i) {
            std::vector<PrecisionParam> bumped = ps;
            bumped[static_cast<size_t>(i)].beta = std::min(1.0, bumped[static_cast<size_t>(i)].beta + 0.1);
            CHECK(forward_cost(bumped, costs) >= base);
        }
    }
}

TEST_CASE("cost_loss hinge") {
    CHECK(cost_loss(5.0, 10.0) == 0.0);
    CHECK(cost_loss(10.0, 10.0) == 10.0);  // boundary takes the C >= T branch
    CHECK(cost_loss(64000.0, 60000.0) == 64000.0);
    CHECK_THROWS_AS(cost_loss(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("cost_grad worked example and hinge gating") {
    std::vector<LayerCost> costs(1);
    costs[0].macs = 1000;
    std::vector<PrecisionParam> ps = {prec(0.25, 32)};

    std::vector<double> zero = cost_grad(ps, costs, 5.0, 10.0);
    CHECK(zero == std::vector<double>{0.0});

    // active: 1024000·2·8/1024·32 = 512000
    std::vector<double> g = cost_grad(ps, costs, 10.0, 10.0);
    CHECK(g[0] == doctest::Approx(512000.0).epsilon(1e-12));
}

TEST_CASE("cost_grad is zero exactly when cost_loss is zero") {
    std::vector<LayerCost> costs(2);
    costs[0].macs = 10;
    costs[1].macs = 20;
    costs[1].layer_id = 1;
    std::vector<PrecisionParam> ps = {prec(0.5, 8), prec(0.75, 8)};
    for (double c : {1.0, 9.99, 10.0, 10.01, 50.0}) {
        std::vector<double> g = cost_grad(ps, costs, c, 10.0);
        const bool all_zero = g[0] == 0.0 && g[1] == 0.0;
        CHECK(all_zero == (cost_loss(c, 10.0) == 0.0));
    }
}

TEST_CASE("cost_grad matches finite differences of the smooth surrogate") {
    std::vector<LayerCost> costs;
    for (int i = 0; i < 3; ++i) {
        LayerCost lc;
        lc.layer_id = i;
        lc.macs = 500 + 333 * i;
        costs.push_back(lc);
    }
    std::vector<PrecisionParam> ps = {prec(0.6, 8), prec(0.8, 8), prec(0.5, 8)};
    auto c_smooth = [&](const std::vector<PrecisionParam>& p) {
        double c = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            const double b = p[i].beta * p[i].n;
            c += costs[i].o_full() * (b / 32.0) * (b / 32.0);
        }
        return c;
    };
    std::vector<double> g = cost_grad(ps, costs, /*c=*/1.0, /*t=*/0.5);  // hinge active
    const double h = 1e-6;
    for (size_t i = 0; i < ps.size(); ++i) {
        std::vector<PrecisionParam> up = ps, down = ps;
        up[i].beta += h;
        down[i].beta -= h;
        const double fd = (c_smooth(up) - c_smooth(down)) / (2.0 * h);
        CHECK(oracle::rel_err_scalar(g[i], fd) < 1e-6);
    }
}

TEST_CASE("balance worked examples") {
    BalanceConfig cfg{1.0, 0.0};
    std::vector<double> g = balance({1.0, -1.0}, {2.0, 2.0}, cfg);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(g[1]) < 1e-12);

    std::vector<double> gt = {0.3, -0.7, 0.1};
    CHECK(balance(gt, {0.0, 0.0, 0.0}, BalanceConfig{1.0, 1e-12}) == gt);
    CHECK(balance(gt, {5.0, -2.0, 9.0}, BalanceConfig{0.0, 1e-12}) == gt);

    CHECK_THROWS_AS(balance({1.0}, {1.0, 2.0}, cfg), std::invalid_argument);
}

TEST_CASE("balance equalizes the mean magnitudes at alpha=1") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> gt(7), gc(7);
        for (double& v : gt) v = dist(rng);
        for (double& v : gc) v = std::abs(dist(rng)) + 0.01;
        std::vector<double> g = balance(gt, gc, BalanceConfig{1.0, 0.0});
        double mean_t = 0.0, mean_scaled = 0.0;
        for (size_t i = 0; i < gt.size(); ++i) {
            mean_t += std::abs(gt[i]);
            mean_scaled += std::abs(g[i] - gt[i]);
        }
        CHECK(mean_scaled / gt.size() == doctest::Approx(mean_t / gt.size()).epsilon(1e-12));
    }
}

TEST_CASE("balance is invariant to uniform positive rescaling of the cost gradient") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    std::uniform_real_distribution<double> scale_dist(1e-3, 1e3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> gt(5), gc(5);
        for (double& v : gt) v = dist(rng);
        for (double& v : gc) v = dist(rng);
        bool all_zero = true;
        for (double v : gc) all_zero &= v == 0.0;
        if (all_zero) gc[0] = 1.0;
        const double c = scale_dist(rng);
        std::vector<double> scaled = gc;
        for (double& v : scaled) v *= c;
        BalanceConfig cfg{1.0, 0.0};
        std::vector<double> a = balance(gt, gc, cfg);
        std::vector<double> b = balance(gt, scaled, cfg);
        double scale = 1e-12;
        for (size_t i = 0; i < a.size(); ++i) scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
        for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12 * scale);
    }
}

TEST_CASE("closed loop with a zeroed task gradient never raises beta") {
    // Eq-5 balancing yokes the cost term to the task gradient's mean
    // magnitude, so a zeroed task gradient freezes β outright; the trajectory
    // is non-increasing above the target and frozen below it.
    std::vector<LayerCost> costs(2);
    costs[0].macs = 4000;
    costs[1].macs = 1000;
    costs[1].layer_id = 1;
    std::vector<PrecisionParam> ps = {prec(1.0, 8), prec(1.0, 8)};
    for (auto& p : ps) p.b_min = 3;
    const double t = 0.5 * static_target(costs, 8, 1.0);

    std::vector<double> zero_task(2, 0.0);
    for (int iter = 0; iter < 200; ++iter) {
        const double c = forward_cost(ps, costs);
        std::vector<double> g_cost = cost_grad(ps, costs, c, t);
        std::vector<double> g = balance(zero_task, g_cost, BalanceConfig{1.0, 1e-12});
        std::vector<double> before = {ps[0].beta, ps[1].beta};
        beta_sgd_step(ps[0], g[0]);
        beta_sgd_step(ps[1], g[1]);
        for (int l = 0; l < 2; ++l) {
            CHECK(ps[static_cast<size_t>(l)].beta <= before[static_cast<size_t>(l)]);  // never increases
            if (c < t) CHECK(ps[static_cast<size_t>(l)].beta == before[static_cast<size_t>(l)]);  // frozen below T
        }
    }
}

TEST_CASE("static_target worked examples") {
    std::vector<LayerCost> costs(1);
    costs[0].macs = 1000;
    CHECK(static_target(costs, 8, 0.6) == doctest::Approx(38400.0).epsilon(1e-12));
    const double t_stat = static_target(costs, 8, 1.0);
    for (double frac : {0.5, 0.6, 0.7})
        CHECK(static_target(costs, 8, frac) == doctest::Approx(frac * t_stat).epsilon(1e-12));
    CHECK_THROWS_AS(static_target(costs, 8, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(static_target(costs, 8, 1.5), std::invalid_argument);
}

TEST_CASE("train_bitops formula") {
    CHECK(train_bitops(1000, 8, 8) == 192000.0);  // 1000·(64 + 2·8·8)
    CHECK(train_bitops(1000, 8, 0) == 64000.0);   // backward term disabled
}

TEST_CASE("training_bitops_report totals and gap detection") {
    namespace fs = std::filesystem;
    std::vector<LayerCost> costs;
    for (int i = 0; i < 2; ++i) {
        LayerCost lc;
        lc.layer_id = i;
        lc.name = "l" + std::to_string(i);
        lc.macs = 1000 * (i + 1);
        costs.push_back(lc);
    }
    const fs::path dir = fs::temp_directory_path() / "ldp_cost_report_test";
    fs::create_directories(dir);

    std::vector<ScheduleRow> log = constant_log(10, costs, 8);
    CostReportTotals totals = training_bitops_report(log, costs, 8, (dir / "r.csv").string(),
                                                     (dir / "r.json").string(), 100.0, 200.0, 0.5);
    const double per_iter = train_bitops(1000, 8, 8) + train_bitops(2000, 8, 8);
    CHECK(totals.total_train_bitops == 10.0 * per_iter);
    CHECK(totals.iterations == 10);

    std::vector<ScheduleRow> gapped = log;
    gapped.erase(gapped.begin() + 4, gapped.begin() + 6);  // drop iteration 2 entirely
    CHECK_THROWS_WITH_AS(training_bitops_report(gapped, costs, 8, (dir / "g.csv").string(),
                                                (dir / "g.json").string(), 100.0, 200.0, 0.5),
                         doctest::Contains("gap"), std::invalid_argument);

    std::vector<ScheduleRow> short_row = log;
    short_row.erase(short_row.begin() + 5);  // layer count no longer divides the rows
    CHECK_THROWS_AS(training_bitops_report(short_row, costs, 8, (dir / "g.csv").string(),
                                           (dir / "g.json").string(), 100.0, 200.0, 0.5),
                    std::invalid_argument);

    CHECK_THROWS_AS(validate_schedule_log({}, 2), std::invalid_argument);
}
