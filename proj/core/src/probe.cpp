#include "lertlab/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "lertlab/metrics.hpp"
#include "lertlab/rng.hpp"
#include "lertlab/trainer.hpp"

#include "json.hpp"

namespace lertlab {

namespace {

// Batch over plain (uncorrupted) encodings with one slot per word's first
// subtoken, targets broadcast from the word.
Batch plain_word_batch(std::span<const EncodedSentence* const> sentences) {
    Batch batch;
    batch.count = static_cast<int64_t>(sentences.size());
    for (const auto* enc : sentences)
        batch.length = std::max(batch.length, static_cast<int64_t>(enc->token_ids.size()));
    batch.ids.assign(static_cast<size_t>(batch.count * batch.length), Vocab::kPad);
    batch.segments.assign(static_cast<size_t>(batch.count * batch.length), 0);
    batch.live.assign(static_cast<size_t>(batch.count * batch.length), 0);
    for (int64_t b = 0; b < batch.count; ++b) {
        const EncodedSentence& enc = *sentences[static_cast<size_t>(b)];
        for (size_t t = 0; t < enc.token_ids.size(); ++t) {
            batch.ids[static_cast<size_t>(b * batch.length) + t] = enc.token_ids[t];
            batch.live[static_cast<size_t>(b * batch.length) + t] = 1;
        }
        for (const auto& [start, end] : enc.word_spans) {
            (void)end;
            batch.slots.push_back({static_cast<int32_t>(b), start, enc.token_ids[static_cast<size_t>(start)],
                                   enc.pos_ids[static_cast<size_t>(start)],
                                   enc.ner_ids[static_cast<size_t>(start)],
                                   enc.dep_ids[static_cast<size_t>(start)]});
        }
    }
    return batch;
}

int32_t argmax_row(const Tensor<float>& probs, int64_t row) {
    const float* r = probs.row(row);
    int32_t best = 0;
    for (int64_t i = 1; i < probs.cols(); ++i)
        if (r[i] > r[best]) best = static_cast<int32_t>(i);
    return best;
}

}  // namespace

MaskedEval masked_eval(const ParamStore<float>& params, const ModelConfig& model_cfg,
                       const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                       const MaskingConfig& masking_cfg, uint64_t seed, int64_t batch_size) {
    if (heldout.empty()) raise(ErrorKind::Data, "heldout corpus is empty");
    for (const auto& [name, kind] : {std::pair<const char*, TagKind>{"head.pos.w", TagKind::Pos},
                                     {"head.ner.w", TagKind::Ner},
                                     {"head.dep.w", TagKind::Dep}}) {
        if (!params.has(name)) raise(ErrorKind::Config, std::string("checkpoint lacks ") + name);
        if (params.at(name).dim(0) != static_cast<int64_t>(tagsets.of(kind).size()))
            raise(ErrorKind::Config, std::string(name) + " width does not match the tag inventory");
    }
    MaskedEval eval;
    int64_t correct_mlm = 0, correct_pos = 0, correct_ner = 0, correct_dep = 0;

    std::vector<MaskedExample> examples;
    for (size_t i = 0; i < heldout.size(); ++i) {
        EncodedSentence enc = encode_sentence(heldout[i], vocab, tagsets, model_cfg.max_len);
        Rng rng(derive_seed(seed, "eval-mask", 0, i));
        std::vector<int32_t> word_sizes(static_cast<size_t>(enc.word_count()));
        for (int32_t w = 0; w < enc.word_count(); ++w) word_sizes[static_cast<size_t>(w)] = enc.word_size(w);
        auto spans = select_spans(word_sizes, rng, masking_cfg);
        examples.push_back(apply_masking(enc, spans, rng, masking_cfg, vocab, tagsets));

        const bool flush = examples.size() == static_cast<size_t>(batch_size) || i + 1 == heldout.size();
        if (!flush) continue;
        Batch batch = make_batch(examples);
        auto fwd = forward(params, batch, model_cfg);
        for (int64_t s = 0; s < batch.masked_count(); ++s) {
            const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
            correct_mlm += argmax_row(fwd.mlm_probs, s) == slot.mlm_target;
            correct_pos += argmax_row(fwd.pos_probs, s) == slot.pos_target;
            correct_ner += argmax_row(fwd.ner_probs, s) == slot.ner_target;
            correct_dep += argmax_row(fwd.dep_probs, s) == slot.dep_target;
        }
        eval.positions += batch.masked_count();
        examples.clear();
    }
    if (eval.positions > 0) {
        const double inv = 1.0 / static_cast<double>(eval.positions);
        eval.mlm_acc = static_cast<double>(correct_mlm) * inv;
        eval.pos_acc = static_cast<double>(correct_pos) * inv;
        eval.ner_acc = static_cast<double>(correct_ner) * inv;
        eval.dep_acc = static_cast<double>(correct_dep) * inv;
    }
    return eval;
}

double masked_tag_accuracy(const ParamStore<float>& params, const ModelConfig& model_cfg,
                           const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                           const MaskingConfig& masking_cfg, TagKind task, uint64_t seed) {
    MaskedEval eval = masked_eval(params, model_cfg, vocab, tagsets, heldout, masking_cfg, seed);
    switch (task) {
        case TagKind::Pos: return eval.pos_acc;
        case TagKind::Ner: return eval.ner_acc;
        case TagKind::Dep: return eval.dep_acc;
    }
    return 0.0;
}

double majority_class_rate(const Corpus& corpus, const TagSets& tagsets, TagKind task) {
    std::map<int32_t, int64_t> counts;
    int64_t total = 0;
    for (const auto& sentence : corpus) {
        for (const auto& word : sentence.words) {
            const std::string& label = task == TagKind::Pos ? word.pos
                                     : task == TagKind::Ner ? word.ner
                                                            : word.dep;
            ++counts[tagsets.of(task).id_of(label)];
            ++total;
        }
    }
    if (total == 0) raise(ErrorKind::Data, "empty corpus");
    int64_t best = 0;
    for (const auto& [_, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(total);
}

namespace {

struct SpanKey {
    size_t sentence;
    int32_t begin;
    int32_t end;
    int32_t type;  // entity type encoded by the NER label suffix id
    auto operator<=>(const SpanKey&) const = default;
};

// Strict decode: S-X spans and B-X I-X* E-X runs with a consistent type.
void collect_spans(const std::vector<int32_t>& labels, const TagSet& ner, size_t sentence,
                   std::vector<SpanKey>& out) {
    const int32_t n = static_cast<int32_t>(labels.size());
    auto prefix = [&](int32_t i) { return ner.label_of(labels[static_cast<size_t>(i)])[0]; };
    auto type_of = [&](int32_t i) {
        const std::string& l = ner.label_of(labels[static_cast<size_t>(i)]);
        return l == "O" ? std::string() : l.substr(2);
    };
    for (int32_t i = 0; i < n;) {
        const char p = prefix(i);
        if (p == 'S') {
            out.push_back({sentence, i, i + 1, labels[static_cast<size_t>(i)]});
            ++i;
        } else if (p == 'B') {
            const std::string type = type_of(i);
            int32_t j = i + 1;
            while (j < n && prefix(j) == 'I' && type_of(j) == type) ++j;
            if (j < n && prefix(j) == 'E' && type_of(j) == type) {
                out.push_back({sentence, i, j + 1, ner.id_of("B-" + type)});
                i = j + 1;
            } else {
                ++i;  // malformed run, no span
            }
        } else {
            ++i;
        }
    }
}

}  // namespace

double bieos_span_f1(const std::vector<std::vector<int32_t>>& gold,
                     const std::vector<std::vector<int32_t>>& predicted, const TagSet& ner) {
    if (gold.size() != predicted.size()) raise(ErrorKind::Input, "sentence count mismatch");
    std::vector<SpanKey> gold_spans, pred_spans;
    for (size_t s = 0; s < gold.size(); ++s) {
        collect_spans(gold[s], ner, s, gold_spans);
        collect_spans(predicted[s], ner, s, pred_spans);
    }
    std::sort(gold_spans.begin(), gold_spans.end());
    std::sort(pred_spans.begin(), pred_spans.end());
    std::vector<SpanKey> hits;
    std::set_intersection(gold_spans.begin(), gold_spans.end(), pred_spans.begin(), pred_spans.end(),
                          std::back_inserter(hits));
    const double tp = static_cast<double>(hits.size());
    const double denom = static_cast<double>(gold_spans.size() + pred_spans.size());
    if (denom == 0.0) return 1.0;  // no entities anywhere, vacuous match
    return 2.0 * tp / denom;
}

namespace {

struct WordPredictions {
    std::vector<std::vector<int32_t>> gold;
    std::vector<std::vector<int32_t>> predicted;
};

// Runs the chosen pretrained head over every word (first subtoken) of the
// plain corpus.
WordPredictions head_word_predictions(const ParamStore<float>& params, const ModelConfig& model_cfg,
                                      const Vocab& vocab, const TagSets& tagsets, const Corpus& corpus,
                                      TagKind task, int64_t batch_size) {
    WordPredictions out;
    std::vector<EncodedSentence> encoded;
    for (const auto& sentence : corpus)
        encoded.push_back(encode_sentence(sentence, vocab, tagsets, model_cfg.max_len));

    std::vector<const EncodedSentence*> pending;
    auto flush = [&]() {
        if (pending.empty()) return;
        Batch batch = plain_word_batch(pending);
        auto fwd = forward(params, batch, model_cfg);
        const Tensor<float>& probs = task == TagKind::Pos ? fwd.pos_probs
                                   : task == TagKind::Ner ? fwd.ner_probs
                                                          : fwd.dep_probs;
        size_t slot = 0;
        for (size_t b = 0; b < pending.size(); ++b) {
            std::vector<int32_t> gold_row, pred_row;
            for (int32_t w = 0; w < pending[b]->word_count(); ++w, ++slot) {
                const MaskedSlot& s = batch.slots[slot];
                gold_row.push_back(task == TagKind::Pos ? s.pos_target
                                 : task == TagKind::Ner ? s.ner_target
                                                        : s.dep_target);
                pred_row.push_back(argmax_row(probs, static_cast<int64_t>(slot)));
            }
            out.gold.push_back(std::move(gold_row));
            out.predicted.push_back(std::move(pred_row));
        }
        pending.clear();
    };
    for (size_t i = 0; i < encoded.size(); ++i) {
        pending.push_back(&encoded[i]);
        if (pending.size() == static_cast<size_t>(batch_size)) flush();
    }
    flush();
    return out;
}

}  // namespace

double ner_head_span_f1(const ParamStore<float>& params, const ModelConfig& model_cfg,
                        const Vocab& vocab, const TagSets& tagsets, const Corpus& heldout,
                        int64_t batch_size) {
    auto preds = head_word_predictions(params, model_cfg, vocab, tagsets, heldout, TagKind::Ner, batch_size);
    return bieos_span_f1(preds.gold, preds.predicted, tagsets.ner);
}

ProbeScores probe_finetune(const ParamStore<float>& params, const ModelConfig& model_cfg,
                           const Vocab& vocab, const TagSets& tagsets, const Corpus& corpus,
                           TagKind task, const ProbeConfig& cfg) {
    if (corpus.size() < 2) raise(ErrorKind::Data, "probe corpus needs at least two sentences");
    const int64_t width = static_cast<int64_t>(tagsets.of(task).size());
    const int64_t d = model_cfg.hidden;

    std::vector<EncodedSentence> encoded;
    for (const auto& sentence : corpus)
        encoded.push_back(encode_sentence(sentence, vocab, tagsets, model_cfg.max_len));

    // Deterministic split.
    std::vector<size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(cfg.seed, "probe-split"));
    split_rng.shuffle(order);
    size_t train_n = static_cast<size_t>(std::llround(cfg.train_fraction * static_cast<double>(order.size())));
    train_n = std::min(std::max<size_t>(train_n, 1), order.size() - 1);
    std::vector<size_t> train_ids(order.begin(), order.begin() + static_cast<ptrdiff_t>(train_n));
    std::vector<size_t> dev_ids(order.begin() + static_cast<ptrdiff_t>(train_n), order.end());
    if (train_ids.empty() || dev_ids.empty()) raise(ErrorKind::Data, "probe split produced an empty side");

    // Fresh linear head; fine-tuned encoder copy only when not frozen.
    ParamStore<float> encoder_params = params.cast<float>();
    ParamStore<float> head;
    Rng init_rng(derive_seed(cfg.seed, "probe-init"));
    detail::init_matrix(head.add("probe.w", {width, d}), init_rng, model_cfg.init_std);
    head.add("probe.b", {width});

    OptimizerConfig head_opt;
    head_opt.peak_lr = cfg.lr;
    head_opt.weight_decay = cfg.weight_decay;
    head_opt.total_steps = std::max<int64_t>(1, cfg.epochs * static_cast<int64_t>(train_ids.size()));
    head_opt.warmup_steps = 0;
    AdamState head_adam = init_adam(head);
    OptimizerConfig enc_opt = head_opt;
    enc_opt.peak_lr = cfg.lr * 0.1;  // gentler when unfreezing
    AdamState enc_adam = init_adam(encoder_params);

    auto gold_of = [&](const MaskedSlot& s) {
        return task == TagKind::Pos ? s.pos_target : task == TagKind::Ner ? s.ner_target : s.dep_target;
    };

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> shuffled = train_ids;
        Rng epoch_rng(derive_seed(cfg.seed, "probe-epoch", static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(shuffled);
        for (size_t start = 0; start < shuffled.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(shuffled.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<const EncodedSentence*> sentences;
            for (size_t i = start; i < end; ++i) sentences.push_back(&encoded[shuffled[i]]);
            Batch batch = plain_word_batch(sentences);
            auto fwd = forward(encoder_params, batch, model_cfg);

            const int64_t k = batch.masked_count();
            if (k == 0) continue;
            // Gather word rows, head forward, softmax CE.
            Tensor<float> h_rows({k, d});
            for (int64_t s = 0; s < k; ++s) {
                const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
                const float* src = fwd.hidden.row(static_cast<int64_t>(slot.seq) * batch.length + slot.pos);
                std::copy(src, src + d, h_rows.row(s));
            }
            Tensor<float> probs({k, width});
            nn::linear(h_rows, head.at("probe.w"), head.at("probe.b"), probs);
            std::vector<int32_t> targets;
            targets.reserve(static_cast<size_t>(k));
            for (const auto& slot : batch.slots) targets.push_back(gold_of(slot));
            nn::softmax_rows_nll(probs, targets);

            const double inv_m = 1.0 / static_cast<double>(k);
            Tensor<double> dlogits({k, width});
            for (int64_t r = 0; r < k; ++r) {
                const float* pr = probs.row(r);
                double* dr = dlogits.row(r);
                for (int64_t i = 0; i < width; ++i) dr[i] = inv_m * static_cast<double>(pr[i]);
                dr[targets[static_cast<size_t>(r)]] -= inv_m;
            }
            ParamStore<double> head_grads = head.zeros_like<double>();
            Tensor<double> d_rows({k, d});
            nn::linear_backward(h_rows, head.at("probe.w"), dlogits, head_grads.at("probe.w"),
                                head_grads.at("probe.b"), cfg.frozen ? nullptr : &d_rows, false);
            const double lr = cfg.lr;  // constant probe lr
            adamw_step(head, head_grads, head_adam, head_opt, lr);

            if (!cfg.frozen) {
                ParamStore<double> enc_grads = encoder_params.zeros_like<double>();
                Tensor<double> dh({batch.count * batch.length, d});
                for (int64_t s = 0; s < k; ++s) {
                    const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
                    double* dst = dh.row(static_cast<int64_t>(slot.seq) * batch.length + slot.pos);
                    const double* src = d_rows.row(s);
                    for (int64_t i = 0; i < d; ++i) dst[i] += src[i];
                }
                encoder_backward(encoder_params, batch, model_cfg, fwd, std::move(dh), enc_grads);
                adamw_step(encoder_params, enc_grads, enc_adam, enc_opt, enc_opt.peak_lr);
            }
        }
    }

    auto score_split = [&](const std::vector<size_t>& ids) {
        std::vector<std::vector<int32_t>> gold, predicted;
        int64_t correct = 0, total = 0;
        for (size_t start = 0; start < ids.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(ids.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<const EncodedSentence*> sentences;
            for (size_t i = start; i < end; ++i) sentences.push_back(&encoded[ids[i]]);
            Batch batch = plain_word_batch(sentences);
            auto fwd = forward(encoder_params, batch, model_cfg);
            const int64_t k = batch.masked_count();
            Tensor<float> h_rows({k, d});
            for (int64_t s = 0; s < k; ++s) {
                const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
                const float* src = fwd.hidden.row(static_cast<int64_t>(slot.seq) * batch.length + slot.pos);
                std::copy(src, src + d, h_rows.row(s));
            }
            Tensor<float> logits({k, width});
            nn::linear(h_rows, head.at("probe.w"), head.at("probe.b"), logits);
            size_t slot_idx = 0;
            for (const auto* enc : sentences) {
                std::vector<int32_t> gold_row, pred_row;
                for (int32_t w = 0; w < enc->word_count(); ++w, ++slot_idx) {
                    const int32_t g = gold_of(batch.slots[slot_idx]);
                    const int32_t p = argmax_row(logits, static_cast<int64_t>(slot_idx));
                    gold_row.push_back(g);
                    pred_row.push_back(p);
                    correct += g == p;
                    ++total;
                }
                gold.push_back(std::move(gold_row));
                predicted.push_back(std::move(pred_row));
            }
        }
        if (task == TagKind::Ner) return bieos_span_f1(gold, predicted, tagsets.ner);
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    };

    ProbeScores scores;
    scores.dev = score_split(dev_ids);
    scores.train = score_split(train_ids);
    return scores;
}

std::string fnv1a_hex(const std::string& text) {
    uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string probe_report_json(const ProbeReport& r) {
    nlohmann::json j = {
        {"run", r.run_name},
        {"config_hash", r.config_hash},
        {"seed", r.seed},
        {"steps", r.steps},
        {"positions", r.masked.positions},
        {"mlm_acc", r.masked.mlm_acc},
        {"pos_acc", r.masked.pos_acc},
        {"ner_acc", r.masked.ner_acc},
        {"dep_acc", r.masked.dep_acc},
        {"ner_f", r.ner_f},
        {"probe_pos", r.probe_pos},
        {"probe_ner", r.probe_ner},
        {"probe_dep", r.probe_dep},
    };
    return j.dump();
}

ProbeReport probe_report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Parse, std::string("bad probe report: ") + e.what());
    }
    ProbeReport r;
    r.run_name = j.at("run").get<std::string>();
    r.config_hash = j.value("config_hash", "");
    r.seed = j.value("seed", uint64_t{0});
    r.steps = j.at("steps").get<int64_t>();
    r.masked.positions = j.at("positions").get<int64_t>();
    r.masked.mlm_acc = j.at("mlm_acc").get<double>();
    r.masked.pos_acc = j.at("pos_acc").get<double>();
    r.masked.ner_acc = j.at("ner_acc").get<double>();
    r.masked.dep_acc = j.at("dep_acc").get<double>();
    r.ner_f = j.at("ner_f").get<double>();
    r.probe_pos = j.at("probe_pos").get<double>();
    r.probe_ner = j.at("probe_ner").get<double>();
    r.probe_dep = j.at("probe_dep").get<double>();
    return r;
}

}  // namespace lertlab
