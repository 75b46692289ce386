#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ldp/cost_model.hpp"
#include "ldp/quantizer.hpp"

namespace ldp {

enum class ScheduleKind { static_bits, random_k, staged, progressive, cyclic, learned, replay };

std::string schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from_name(const std::string& name);

// Declarative description of a precision schedule (the config-file view).
struct SchedulerSpec {
    ScheduleKind kind = ScheduleKind::learned;
    int bits = 8;                        // static
    int k = 10;                          // random_k: redraw period in iterations
    std::vector<int> choices = {4, 6, 8};
    int active_epochs = 1 << 30;         // random_k: epochs with random draws
    int fallback_bits = 8;               // random_k: outside active epochs
    bool per_layer = false;              // random_k ablation: independent draw per layer
    std::vector<int> stage_epochs;       // staged: stage start epochs, first must be 0
    std::vector<std::vector<int>> stage_bits;  // staged: per stage, per block
    int b_start = 8, b_end = 8, num_stages = 4;  // progressive
    int cyc_min = 4, cyc_max = 8, cycle_len = 10;  // cyclic (epochs per period)
};

struct ScheduledLayer {
    int layer_id = 0;
    std::string name;
    int block = 0;  // block index used by staged schedules
};

// Uniform per-iteration bit-width source. Deterministic given (spec, seed);
// random_k draws are a pure function of (seed, iteration/k) so replays and
// repeated queries agree.
class Scheduler {
  public:
    static Scheduler make(const SchedulerSpec& spec, const std::vector<ScheduledLayer>& layers, int total_epochs,
                          uint64_t seed, const std::vector<PrecisionParam>* learned_params);

    // Reconstructs a forced-bits scheduler from a recorded log (sorted by
    // (iteration, layer_id), gapless). Throws on empty, unsorted, or gapped
    // input.
    static Scheduler from_log(const std::vector<ScheduleRow>& log, const std::vector<ScheduledLayer>& layers);

    int bits_for(int64_t iteration, int epoch, int layer_id) const;
    ScheduleKind kind() const { return spec_.kind; }
    bool learned() const { return spec_.kind == ScheduleKind::learned; }

    // Replay coverage: highest iteration present (replay kind only).
    int64_t replay_iterations() const { return replay_iters_; }

  private:
    SchedulerSpec spec_;
    std::vector<ScheduledLayer> layers_;
    int total_epochs_ = 1;
    uint64_t seed_ = 0;
    const std::vector<PrecisionParam>* learned_params_ = nullptr;
    std::vector<int> replay_bits_;  // [iteration * L + layer]
    int64_t replay_iters_ = 0;
    int64_t replay_first_ = 0;

    const ScheduledLayer& layer(int layer_id) const;
};

// Lossless schedule logging: CSV with header
//   iteration,layer_id,layer_name,beta,bits,fwd_bitops,cum_fwd_bitops
void write_schedule_csv(const std::string& path, const std::vector<ScheduleRow>& rows);
std::vector<ScheduleRow> read_schedule_csv(const std::string& path);

}  // namespace ldp
