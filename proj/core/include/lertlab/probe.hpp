#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lertlab/corpus.hpp"
#include "lertlab/encoder.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/model.hpp"

namespace lertlab {

// Masked-position accuracies: fraction of masked positions where each head's
// argmax equals the gold target. Masking is deterministic given the seed.
struct MaskedEval {
    double mlm_acc = 0.0;
    double pos_acc = 0.0;
    double ner_acc = 0.0;
    double dep_acc = 0.0;
    int64_t positions = 0;
};

MaskedEval masked_eval(const ParamStore<float>& params, const ModelConfig& model_cfg,
                       const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                       const MaskingConfig& masking_cfg, uint64_t seed, int64_t batch_size = 32);

double masked_tag_accuracy(const ParamStore<float>& params, const ModelConfig& model_cfg,
                           const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                           const MaskingConfig& masking_cfg, TagKind task, uint64_t seed);

// Chance-floor baseline: accuracy of always predicting the task's most
// frequent gold tag over the corpus words.
double majority_class_rate(const Corpus& corpus, const TagSets& tagsets, TagKind task);

// Span-level F1 of the pretrained NER head applied to every word of the
// uncorrupted heldout corpus (word label = prediction at its first subtoken).
double ner_head_span_f1(const ParamStore<float>& params, const ModelConfig& model_cfg,
                        const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                        int64_t batch_size = 32);

// Strict BIEOS span F1 between gold and predicted word-level label id
// sequences. Malformed predicted spans simply yield no span.
double bieos_span_f1(const std::vector<std::vector<int32_t>>& gold,
                     const std::vector<std::vector<int32_t>>& predicted, const TagSet& ner);

struct ProbeConfig {
    double train_fraction = 0.8;
    int64_t epochs = 30;
    int64_t batch_size = 16;
    double lr = 0.05;
    double weight_decay = 0.0;
    bool frozen = true;
    uint64_t seed = 0;
};

struct ProbeScores {
    double dev = 0.0;    // token accuracy, or span F1 for NER
    double train = 0.0;  // same metric on the probe's own training split
};

// Trains a fresh linear head over H at every word's first subtoken position
// (encoder frozen unless cfg.frozen is false) on a deterministic train/dev
// split and scores both splits: span-level F1 for NER, token accuracy for
// POS and DEP.
ProbeScores probe_finetune(const ParamStore<float>& params, const ModelConfig& model_cfg,
                           const Vocab& vocab, const TagSets& tagsets, const Corpus& corpus,
                           TagKind task, const ProbeConfig& cfg);

// Run metadata plus every probe metric for one pretraining run.
struct ProbeReport {
    std::string run_name;
    std::string config_hash;  // FNV-1a of the resolved config text
    uint64_t seed = 0;
    int64_t steps = 0;
    MaskedEval masked;
    double ner_f = 0.0;      // NER head span F1 on the plain heldout
    double probe_pos = 0.0;  // frozen linear-probe scores
    double probe_ner = 0.0;
    double probe_dep = 0.0;
};

// Stable 64-bit FNV-1a content hash, hex-encoded.
std::string fnv1a_hex(const std::string& text);

std::string probe_report_json(const ProbeReport& report);
ProbeReport probe_report_from_json(const std::string& text);

}  // namespace lertlab
