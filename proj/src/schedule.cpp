#include "ldp/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ldp/rng.hpp"

namespace ldp {

std::string schedule_kind_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::static_bits: return "static";
        case ScheduleKind::random_k: return "random_k";
        case ScheduleKind::staged: return "staged";
        case ScheduleKind::progressive: return "progressive";
        case ScheduleKind::cyclic: return "cyclic";
        case ScheduleKind::learned: return "learned";
        case ScheduleKind::replay: return "replay";
    }
    return "?";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
    if (name == "static") return ScheduleKind::static_bits;
    if (name == "random_k") return ScheduleKind::random_k;
    if (name == "staged") return ScheduleKind::staged;
    if (name == "progressive") return ScheduleKind::progressive;
    if (name == "cyclic") return ScheduleKind::cyclic;
    if (name == "learned") return ScheduleKind::learned;
    if (name == "replay") return ScheduleKind::replay;
    throw std::invalid_argument("unknown scheduler kind '" + name + "'");
}

Scheduler Scheduler::make(const SchedulerSpec& spec, const std::vector<ScheduledLayer>& layers, int total_epochs,
                          uint64_t seed, const std::vector<PrecisionParam>* learned_params) {
    Scheduler s;
    s.spec_ = spec;
    s.layers_ = layers;
    s.total_epochs_ = std::max(1, total_epochs);
    s.seed_ = seed;
    s.learned_params_ = learned_params;
    switch (spec.kind) {
        case ScheduleKind::learned:
            if (!learned_params || learned_params->size() != layers.size())
                throw std::invalid_argument("scheduler: learned kind needs one precision param per layer");
            break;
        case ScheduleKind::random_k:
            if (spec.k < 1) throw std::invalid_argument("scheduler: random_k period must be >= 1");
            if (spec.choices.empty()) throw std::invalid_argument("scheduler: random_k needs a non-empty choice list");
            break;
        case ScheduleKind::staged: {
            if (spec.stage_epochs.empty() || spec.stage_epochs.front() != 0)
                throw std::invalid_argument("scheduler: staged stage_epochs must start at 0");
            for (size_t i = 1; i < spec.stage_epochs.size(); ++i)
                if (spec.stage_epochs[i] <= spec.stage_epochs[i - 1])
                    throw std::invalid_argument("scheduler: staged stage_epochs must be strictly increasing");
            if (spec.stage_bits.size() != spec.stage_epochs.size())
                throw std::invalid_argument("scheduler: staged needs one bit vector per stage");
            break;
        }
        case ScheduleKind::progressive:
            if (spec.num_stages < 1) throw std::invalid_argument("scheduler: progressive needs num_stages >= 1");
            break;
        case ScheduleKind::cyclic:
            if (spec.cycle_len < 1) throw std::invalid_argument("scheduler: cyclic needs cycle_len >= 1");
            break;
        case ScheduleKind::static_bits: break;
        case ScheduleKind::replay: throw std::invalid_argument("scheduler: replay kind is built via from_log");
    }
    return s;
}

Scheduler Scheduler::from_log(const std::vector<ScheduleRow>& log, const std::vector<ScheduledLayer>& layers) {
    if (log.empty()) throw std::invalid_argument("replay: schedule log is empty");
    validate_schedule_log(log, layers.size());
    Scheduler s;
    s.spec_.kind = ScheduleKind::replay;
    s.layers_ = layers;
    s.replay_first_ = log.front().iteration;
    s.replay_iters_ = static_cast<int64_t>(log.size() / layers.size());
    s.replay_bits_.reserve(log.size());
    for (const ScheduleRow& row : log) s.replay_bits_.push_back(row.bits);
    return s;
}

const ScheduledLayer& Scheduler::layer(int layer_id) const {
    for (const ScheduledLayer& l : layers_)
        if (l.layer_id == layer_id) return l;
    throw std::invalid_argument("scheduler: unknown layer id " + std::to_string(layer_id));
}

int Scheduler::bits_for(int64_t iteration, int epoch, int layer_id) const {
    switch (spec_.kind) {
        case ScheduleKind::static_bits: return spec_.bits;
        case ScheduleKind::random_k: {
            if (epoch >= spec_.active_epochs) return spec_.fallback_bits;
            const uint64_t draw_index = static_cast<uint64_t>(iteration / spec_.k);
            uint64_t h = hash_draw(seed_, draw_index);
            if (spec_.per_layer) h = splitmix64(h ^ static_cast<uint64_t>(layer_id + 1));
            return spec_.choices[h % spec_.choices.size()];
        }
        case ScheduleKind::staged: {
            size_t stage = 0;
            for (size_t i = 0; i < spec_.stage_epochs.size(); ++i)
                if (epoch >= spec_.stage_epochs[i]) stage = i;
            const ScheduledLayer& l = layer(layer_id);
            const std::vector<int>& bits = spec_.stage_bits[stage];
            if (l.block < 0 || static_cast<size_t>(l.block) >= bits.size())
                throw std::invalid_argument("scheduler: staged mapping has no block " + std::to_string(l.block) +
                                            " for layer '" + l.name + "'");
            return bits[static_cast<size_t>(l.block)];
        }
        case ScheduleKind::progressive: {
            const int stage = std::min(spec_.num_stages - 1,
                                       static_cast<int>(static_cast<int64_t>(epoch) * spec_.num_stages / total_epochs_));
            if (spec_.num_stages == 1) return spec_.b_end;
            const double t = static_cast<double>(stage) / (spec_.num_stages - 1);
            return static_cast<int>(std::lround(spec_.b_start + (spec_.b_end - spec_.b_start) * t));
        }
        case ScheduleKind::cyclic: {
            const double phase = 2.0 * M_PI * static_cast<double>(epoch % spec_.cycle_len) / spec_.cycle_len;
            const double t = (1.0 - std::cos(phase)) / 2.0;
            return static_cast<int>(std::lround(spec_.cyc_min + (spec_.cyc_max - spec_.cyc_min) * t));
        }
        case ScheduleKind::learned:
            layer(layer_id);  // validates the id
            return bits_of((*learned_params_)[static_cast<size_t>(layer_id)]);
        case ScheduleKind::replay: {
            const int64_t rel = iteration - replay_first_;
            if (rel < 0 || rel >= replay_iters_)
                throw std::out_of_range("replay: log does not cover iteration " + std::to_string(iteration) +
                                        " (first missing iteration " + std::to_string(replay_first_ + replay_iters_) +
                                        ")");
            return replay_bits_[static_cast<size_t>(rel * static_cast<int64_t>(layers_.size()) + layer_id)];
        }
    }
    throw std::logic_error("scheduler: unreachable");
}

void write_schedule_csv(const std::string& path, const std::vector<ScheduleRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open schedule csv for writing: " + path);
    out << "iteration,layer_id,layer_name,beta,bits,fwd_bitops,cum_fwd_bitops\n";
    char line[320];
    double cum = 0.0;
    for (const ScheduleRow& r : rows) {
        cum += r.fwd_bitops;
        std::snprintf(line, sizeof(line), "%lld,%d,%s,%.17g,%d,%.17g,%.17g\n", static_cast<long long>(r.iteration),
                      r.layer_id, r.layer_name.c_str(), r.beta, r.bits, r.fwd_bitops, cum);
        out << line;
    }
}

std::vector<ScheduleRow> read_schedule_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schedule csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("schedule csv is empty: " + path);
    if (line.rfind("iteration,layer_id,layer_name", 0) != 0)
        throw std::runtime_error("schedule csv has unexpected header: " + line);
    std::vector<ScheduleRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        ScheduleRow r;
        std::getline(ss, field, ',');
        r.iteration = std::stoll(field);
        std::getline(ss, field, ',');
        r.layer_id = std::stoi(field);
        std::getline(ss, r.layer_name, ',');
        std::getline(ss, field, ',');
        r.beta = std::stod(field);
        std::getline(ss, field, ',');
        r.bits = std::stoi(field);
        std::getline(ss, field, ',');
        r.fwd_bitops = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace ldp
