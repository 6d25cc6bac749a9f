#include "lertlab/schedule.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "lertlab/error.hpp"

namespace lertlab {

double lambda_at(int64_t t, int64_t t_end) {
    if (t_end <= 0) raise(ErrorKind::Config, "ramp end step must be positive");
    if (t < 0) raise(ErrorKind::Config, "step must be non-negative");
    if (t >= t_end) return 1.0;
    return static_cast<double>(t) / static_cast<double>(t_end);
}

TaskFractions preset_fractions(const std::string& name) {
    // The order string lists tasks from fastest ramp (1/6) to slowest (1/2).
    const double first = 1.0 / 6.0, second = 1.0 / 3.0, third = 1.0 / 2.0;
    if (name == "PND") return {first, second, third};
    if (name == "PDN") return {first, third, second};
    if (name == "NPD") return {second, first, third};
    if (name == "DNP") return {third, second, first};
    if (name == "none") return {1.0, 1.0, 1.0};  // unused; lambdas are pinned at 1
    raise(ErrorKind::Config, "unknown schedule preset '" + name + "'");
}

int64_t ramp_end_step(int64_t total_steps, double fraction) {
    if (total_steps <= 0) raise(ErrorKind::Config, "total_steps must be positive");
    if (!(fraction > 0.0 && fraction <= 1.0)) raise(ErrorKind::Config, "end fraction must lie in (0, 1]");
    int64_t t_end = std::llround(static_cast<double>(total_steps) * fraction);
    return t_end < 1 ? 1 : t_end;
}

ScheduleState schedule_at(int64_t t, const ScheduleConfig& cfg) {
    ScheduleState state;
    state.step = t;
    if (cfg.preset == "none") {
        state.lambda_pos = cfg.pos_enabled ? 1.0 : 0.0;
        state.lambda_ner = cfg.ner_enabled ? 1.0 : 0.0;
        state.lambda_dep = cfg.dep_enabled ? 1.0 : 0.0;
        return state;
    }
    state.lambda_pos = cfg.pos_enabled ? lambda_at(t, ramp_end_step(cfg.total_steps, cfg.fractions.pos)) : 0.0;
    state.lambda_ner = cfg.ner_enabled ? lambda_at(t, ramp_end_step(cfg.total_steps, cfg.fractions.ner)) : 0.0;
    state.lambda_dep = cfg.dep_enabled ? lambda_at(t, ramp_end_step(cfg.total_steps, cfg.fractions.dep)) : 0.0;
    return state;
}

double combine_losses(const LossBreakdown& breakdown, const ScheduleState& state) {
    return breakdown.mlm_loss + state.lambda_pos * breakdown.pos_loss +
           state.lambda_ner * breakdown.ner_loss + state.lambda_dep * breakdown.dep_loss;
}

ScheduleConfig make_schedule(int64_t total_steps, const std::string& preset) {
    ScheduleConfig cfg;
    cfg.total_steps = total_steps;
    cfg.preset = preset;
    cfg.fractions = preset_fractions(preset);
    if (total_steps <= 0) raise(ErrorKind::Config, "total_steps must be positive");
    return cfg;
}

namespace {

void append_number(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

std::string schedule_trace_csv(const ScheduleConfig& cfg, int64_t every) {
    if (every <= 0) raise(ErrorKind::Config, "trace interval must be positive");
    std::string out = "t,lambda_P,lambda_N,lambda_D\n";
    for (int64_t t = 0; t <= cfg.total_steps; t += every) {
        ScheduleState s = schedule_at(t, cfg);
        out += std::to_string(t);
        out += ',';
        append_number(out, s.lambda_pos);
        out += ',';
        append_number(out, s.lambda_ner);
        out += ',';
        append_number(out, s.lambda_dep);
        out += '\n';
    }
    return out;
}

}  // namespace lertlab
