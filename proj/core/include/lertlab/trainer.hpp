#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lertlab/checkpoint.hpp"
#include "lertlab/corpus.hpp"
#include "lertlab/encoder.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/metrics.hpp"
#include "lertlab/model.hpp"
#include "lertlab/schedule.hpp"

namespace lertlab {

struct OptimizerConfig {
    double peak_lr = 1e-4;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    int64_t warmup_steps = 0;
    int64_t total_steps = 0;
    int64_t accumulation_factor = 1;
    uint64_t seed = 42;
};

void validate_optimizer(const OptimizerConfig& cfg);

// Linear warmup from 0 to peak_lr over warmup_steps, then linear decay to 0
// at total_steps.
double lr_at(int64_t t, const OptimizerConfig& cfg);

// Moments are kept in double so the update matches a wide-precision Adam
// reference; the checkpoint rounds them to the format's float32.
struct AdamState {
    ParamStore<double> m;
    ParamStore<double> v;
    int64_t step = 0;  // completed optimizer steps
};

AdamState init_adam(const ParamStore<float>& params);

// Bias-corrected Adam with decoupled weight decay; biases and LayerNorm
// parameters (1-D tensors) are decay-exempt. All update math runs in double
// and rounds once into each parameter's storage type.
template <typename T>
void adamw_step(ParamStore<T>& params, const ParamStore<double>& grads, AdamState& state,
                const OptimizerConfig& cfg, double lr) {
    const int64_t tau = state.step + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(tau));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(tau));
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        Tensor<T>& p = params.tensors[i];
        const Tensor<double>& g = grads.tensors[i];
        Tensor<double>& m = state.m.tensors[i];
        Tensor<double>& v = state.v.tensors[i];
        if (g.shape != p.shape) raise(ErrorKind::Shape, "gradient shape mismatch for " + params.names[i]);
        const bool decay = cfg.weight_decay > 0.0 && p.shape.size() >= 2;
        for (size_t j = 0; j < p.data.size(); ++j) {
            const double grad = g.data[j];
            const double m_new = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * grad;
            const double v_new = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * grad * grad;
            m.data[j] = m_new;
            v.data[j] = v_new;
            const double m_hat = m_new / bc1;
            const double v_hat = v_new / bc2;
            double update = lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
            if (decay) update += lr * cfg.weight_decay * static_cast<double>(p.data[j]);
            const double next = static_cast<double>(p.data[j]) - update;
            if (!std::isfinite(next))
                raise(ErrorKind::Numeric, "non-finite update for tensor " + params.names[i]);
            p.data[j] = static_cast<T>(next);
        }
    }
    ++state.step;
}

struct TrainerConfig {
    int64_t batch_size = 16;
    int64_t checkpoint_every = 0;  // 0 = final checkpoint only
    bool deterministic = true;     // wallclock_ms reported as 0
    std::string out_dir;           // when set: metrics.jsonl + checkpoints
};

struct TrainResult {
    ParamStore<float> params;
    AdamState adam;
    std::vector<MetricsRecord> metrics;
    int64_t degenerate_batches = 0;  // steps with zero masked positions
};

// The pre-training loop. Per step: assemble the step's sentence batch
// (bucketed by encoded length, batch order shuffled per epoch under the
// seed), mask each sentence with its own (epoch, sentence-index) stream,
// run accumulation_factor micro-batches of forward/backward, take one AdamW
// step with the step's lr and lambda weights, and emit one metrics record.
// `resume` continues from a checkpoint's parameters, moments and step.
TrainResult train(const Corpus& corpus, const Vocab& vocab, const TagSets& tagsets,
                  const ModelConfig& model_cfg, const MaskingConfig& masking_cfg,
                  const ScheduleConfig& schedule_cfg, const OptimizerConfig& optimizer_cfg,
                  const TrainerConfig& trainer_cfg,
                  const Checkpoint* resume = nullptr);

// Vocabulary for a training run: corpus vocab plus, for LMLM modes, the
// mode's mask tokens appended after the corpus entries.
Vocab build_training_vocab(const Corpus& corpus, const MaskingConfig& masking_cfg, const TagSets& tagsets);

}  // namespace lertlab
