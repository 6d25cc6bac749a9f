#include "lertlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lertlab/rng.hpp"

namespace lertlab {

void validate_optimizer(const OptimizerConfig& cfg) {
    if (cfg.total_steps < 1) raise(ErrorKind::Config, "total_steps must be positive");
    if (cfg.warmup_steps < 0 || cfg.warmup_steps >= cfg.total_steps)
        raise(ErrorKind::Config, "warmup_steps must lie in [0, total_steps)");
    if (cfg.accumulation_factor < 1) raise(ErrorKind::Config, "accumulation_factor must be at least 1");
    if (cfg.peak_lr <= 0.0) raise(ErrorKind::Config, "peak_lr must be positive");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        raise(ErrorKind::Config, "adam betas must lie in [0, 1)");
    if (cfg.eps <= 0.0) raise(ErrorKind::Config, "adam eps must be positive");
    if (cfg.weight_decay < 0.0) raise(ErrorKind::Config, "weight_decay must be non-negative");
}

double lr_at(int64_t t, const OptimizerConfig& cfg) {
    if (t < 0 || t > cfg.total_steps) raise(ErrorKind::Config, "step outside [0, total_steps]");
    if (cfg.warmup_steps > 0 && t < cfg.warmup_steps)
        return cfg.peak_lr * static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
    if (t >= cfg.total_steps) return 0.0;
    return cfg.peak_lr * static_cast<double>(cfg.total_steps - t) /
           static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

AdamState init_adam(const ParamStore<float>& params) {
    AdamState state;
    state.m = params.zeros_like<double>();
    state.v = params.zeros_like<double>();
    state.step = 0;
    return state;
}

Vocab build_training_vocab(const Corpus& corpus, const MaskingConfig& masking_cfg, const TagSets& tagsets) {
    Vocab vocab = build_vocab(corpus);
    if (masking_cfg.lmlm_mode != LmlmMode::Off) {
        auto tokens = lmlm_mask_vocabulary(masking_cfg.lmlm_mode, tagsets, corpus);
        append_lmlm_tokens(vocab, tokens);
    }
    return vocab;
}

namespace {

struct StepPlan {
    std::vector<std::vector<int64_t>> batches;  // sentence indices, bucketed by length
};

StepPlan plan_batches(const std::vector<EncodedSentence>& encoded, int64_t batch_size) {
    std::vector<int64_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return encoded[static_cast<size_t>(a)].length() < encoded[static_cast<size_t>(b)].length();
    });
    StepPlan plan;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
        size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
        plan.batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                                  order.begin() + static_cast<ptrdiff_t>(end));
    }
    return plan;
}

}  // namespace

TrainResult train(const Corpus& corpus, const Vocab& vocab, const TagSets& tagsets,
                  const ModelConfig& model_cfg, const MaskingConfig& masking_cfg,
                  const ScheduleConfig& schedule_cfg, const OptimizerConfig& optimizer_cfg,
                  const TrainerConfig& trainer_cfg, const Checkpoint* resume) {
    validate_model(model_cfg);
    validate_masking(masking_cfg);
    validate_optimizer(optimizer_cfg);
    if (corpus.empty()) raise(ErrorKind::Data, "training corpus is empty");
    if (model_cfg.vocab != vocab.size())
        raise(ErrorKind::Config, "model vocab (" + std::to_string(model_cfg.vocab) +
                                     ") does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
    if (schedule_cfg.total_steps != optimizer_cfg.total_steps)
        raise(ErrorKind::Config, "schedule and optimizer disagree on total_steps");
    if (trainer_cfg.batch_size < 1) raise(ErrorKind::Config, "batch_size must be positive");

    const TagHeadSizes head_sizes = tag_head_sizes(tagsets);
    const uint64_t seed = optimizer_cfg.seed;

    TrainResult result;
    int64_t start_step = 0;
    if (resume) {
        if (!resume->moments) raise(ErrorKind::Config, "resume checkpoint lacks optimizer state");
        result.params = resume->params.cast<float>();
        result.adam.m = resume->moments->m.cast<double>();
        result.adam.v = resume->moments->v.cast<double>();
        result.adam.step = resume->moments->step;
        start_step = resume->moments->step;
    } else {
        result.params = init_params<float>(model_cfg, head_sizes, seed);
        result.adam = init_adam(result.params);
    }

    std::vector<EncodedSentence> encoded;
    encoded.reserve(corpus.size());
    for (const auto& sentence : corpus)
        encoded.push_back(encode_sentence(sentence, vocab, tagsets, model_cfg.max_len));
    const StepPlan plan = plan_batches(encoded, trainer_cfg.batch_size);
    const int64_t batches_per_epoch = static_cast<int64_t>(plan.batches.size());

    std::ofstream metrics_out;
    if (!trainer_cfg.out_dir.empty()) {
        std::filesystem::create_directories(trainer_cfg.out_dir);
        const auto mode = start_step > 0 ? std::ios::app : std::ios::trunc;
        metrics_out.open(trainer_cfg.out_dir + "/metrics.jsonl", std::ios::binary | mode);
        if (!metrics_out) raise(ErrorKind::Io, "cannot open metrics.jsonl under " + trainer_cfg.out_dir);
    }
    auto save = [&](const std::string& name) {
        if (trainer_cfg.out_dir.empty()) return;
        Checkpoint ckpt;
        ckpt.config = model_cfg;
        ckpt.heads = head_sizes;
        ckpt.params = result.params.cast<float>();
        ckpt.moments.emplace();
        ckpt.moments->m = result.adam.m.cast<float>();  // format is float32
        ckpt.moments->v = result.adam.v.cast<float>();
        ckpt.moments->step = result.adam.step;
        save_checkpoint(ckpt, trainer_cfg.out_dir + "/" + name);
    };

    // Epoch-shuffled batch order; recomputed per epoch so resume lands on the
    // same stream.
    int64_t cached_epoch = -1;
    std::vector<int64_t> batch_order(static_cast<size_t>(batches_per_epoch));
    auto batch_for_step = [&](int64_t t) {
        const int64_t epoch = t / batches_per_epoch;
        if (epoch != cached_epoch) {
            std::iota(batch_order.begin(), batch_order.end(), 0);
            Rng rng(derive_seed(seed, "batchorder", static_cast<uint64_t>(epoch)));
            rng.shuffle(batch_order);
            cached_epoch = epoch;
        }
        return std::pair<int64_t, int64_t>(epoch, batch_order[static_cast<size_t>(t % batches_per_epoch)]);
    };

    int64_t t = start_step;
    try {
        for (; t < optimizer_cfg.total_steps; ++t) {
            const auto step_start = std::chrono::steady_clock::now();
            const auto [epoch, batch_idx] = batch_for_step(t);
            const std::vector<int64_t>& sentence_ids = plan.batches[static_cast<size_t>(batch_idx)];

            std::vector<MaskedExample> examples;
            examples.reserve(sentence_ids.size());
            for (int64_t sid : sentence_ids) {
                const EncodedSentence& enc = encoded[static_cast<size_t>(sid)];
                Rng rng(derive_seed(seed, "mask", static_cast<uint64_t>(epoch), static_cast<uint64_t>(sid)));
                std::vector<int32_t> word_sizes(static_cast<size_t>(enc.word_count()));
                for (int32_t w = 0; w < enc.word_count(); ++w) word_sizes[static_cast<size_t>(w)] = enc.word_size(w);
                auto spans = select_spans(word_sizes, rng, masking_cfg);
                examples.push_back(apply_masking(enc, spans, rng, masking_cfg, vocab, tagsets));
            }

            int64_t m_total = 0;
            for (const auto& ex : examples) m_total += ex.masked_count();

            const ScheduleState lambda = schedule_at(t, schedule_cfg);
            const TaskWeights weights{lambda.lambda_pos, lambda.lambda_ner, lambda.lambda_dep};
            const double lr = lr_at(t, optimizer_cfg);

            LossSums sums;
            if (m_total > 0) {
                ParamStore<double> grads = result.params.zeros_like<double>();
                const double inv_m = 1.0 / static_cast<double>(m_total);
                const int64_t factor = optimizer_cfg.accumulation_factor;
                const int64_t per_micro =
                    (static_cast<int64_t>(examples.size()) + factor - 1) / factor;
                for (int64_t f = 0; f < factor; ++f) {
                    const int64_t lo = f * per_micro;
                    const int64_t hi = std::min<int64_t>(static_cast<int64_t>(examples.size()), lo + per_micro);
                    if (lo >= hi) break;
                    Batch batch = make_batch(std::span<const MaskedExample>(examples.data() + lo,
                                                                            static_cast<size_t>(hi - lo)));
                    auto fwd = forward(result.params, batch, model_cfg);
                    sums.mlm += fwd.sums.mlm;
                    sums.pos += fwd.sums.pos;
                    sums.ner += fwd.sums.ner;
                    sums.dep += fwd.sums.dep;
                    sums.count += fwd.sums.count;
                    backward(result.params, batch, model_cfg, fwd, weights, inv_m, grads);
                }
                adamw_step(result.params, grads, result.adam, optimizer_cfg, lr);
            } else {
                ++result.degenerate_batches;
                ++result.adam.step;
            }

            MetricsRecord record;
            record.step = t;
            record.lr = lr;
            record.lambda_pos = lambda.lambda_pos;
            record.lambda_ner = lambda.lambda_ner;
            record.lambda_dep = lambda.lambda_dep;
            LossBreakdown breakdown = to_breakdown(sums);
            breakdown.combined = combine_losses(breakdown, lambda);
            record.loss_mlm = breakdown.mlm_loss;
            record.loss_pos = breakdown.pos_loss;
            record.loss_ner = breakdown.ner_loss;
            record.loss_dep = breakdown.dep_loss;
            record.loss_total = breakdown.combined;
            record.masked_count = m_total;
            if (!trainer_cfg.deterministic) {
                record.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - step_start)
                                          .count();
            }
            result.metrics.push_back(record);
            if (metrics_out.is_open()) metrics_out << metrics_to_json(record) << '\n';

            if (trainer_cfg.checkpoint_every > 0 && (t + 1) % trainer_cfg.checkpoint_every == 0 &&
                t + 1 < optimizer_cfg.total_steps)
                save("step_" + std::to_string(t + 1) + ".ckpt");
        }
    } catch (const Error& e) {
        save("abort.ckpt");
        if (metrics_out.is_open()) metrics_out.flush();
        throw Error(e.kind(), "training aborted at step " + std::to_string(t) + ": " + e.what());
    }
    save("final.ckpt");
    return result;
}

}  // namespace lertlab
