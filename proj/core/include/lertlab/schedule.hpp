#pragma once

#include <cstdint>
#include <string>

#include "lertlab/encoder.hpp"

namespace lertlab {

// Per-task ramp end fractions. Presets attach the fractions to ramp rank:
// the first-named task ends earliest (1/6 of total), then 1/3, then 1/2.
struct TaskFractions {
    double pos = 1.0 / 6.0;
    double ner = 1.0 / 3.0;
    double dep = 1.0 / 2.0;
};

struct ScheduleConfig {
    int64_t total_steps = 0;
    std::string preset = "PND";  // PND, PDN, NPD, DNP, none
    TaskFractions fractions;     // derived from the preset
    bool pos_enabled = true;     // disabled tasks contribute zero weight
    bool ner_enabled = true;
    bool dep_enabled = true;
};

struct ScheduleState {
    int64_t step = 0;
    double lambda_pos = 0.0;
    double lambda_ner = 0.0;
    double lambda_dep = 0.0;
};

// min(t / T, 1). T el 0 is a configuration error.
double lambda_at(int64_t t, int64_t t_end);

// Ramp end fractions for a preset name; "none" pins every lambda at 1.
TaskFractions preset_fractions(const std::string& name);

// Ramp end step for one task: round(total * fraction), at least 1.
int64_t ramp_end_step(int64_t total_steps, double fraction);

// Lambda values at step t. Disabled tasks get lambda 0; preset "none" gives
// lambda 1 for every enabled task at every t.
ScheduleState schedule_at(int64_t t, const ScheduleConfig& cfg);

// combined = mlm + lambda_P * pos + lambda_N * ner + lambda_D * dep.
double combine_losses(const LossBreakdown& breakdown, const ScheduleState& state);

ScheduleConfig make_schedule(int64_t total_steps, const std::string& preset);

// One CSV row per trace step: t,lambda_P,lambda_N,lambda_D with
// shortest-round-trip number formatting.
std::string schedule_trace_csv(const ScheduleConfig& cfg, int64_t every);

}  // namespace lertlab
