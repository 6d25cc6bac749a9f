// Acceptance suite: runs each numbered criterion at its stated tolerance and
// prints exactly one PASS/FAIL line per criterion. `--only N` restricts the
// run to a single criterion (used by ctest).

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lertlab/ablation.hpp"
#include "lertlab/checkpoint.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/metrics.hpp"
#include "lertlab/model.hpp"
#include "lertlab/probe.hpp"
#include "lertlab/run_config.hpp"
#include "lertlab/schedule.hpp"
#include "lertlab/synth.hpp"
#include "lertlab/trainer.hpp"

namespace {

using namespace lertlab;

const TagSets kSets = builtin_tagsets();

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool condition, const std::string& what) {
        if (!condition && ok) {
            ok = false;
            detail = what;
        }
    }
};

// ---------------------------------------------------------------- criterion 1
// Schedule exactness at total 1.2M under PND.
Check criterion_schedule_exactness() {
    Check c;
    ScheduleConfig cfg = make_schedule(1200000, "PND");
    struct Expected {
        int64_t t;
        double pos, ner, dep;
    };
    const Expected table[] = {
        {0, 0.0, 0.0, 0.0},
        {100000, 0.5, 0.25, 1.0 / 6.0},
        {200000, 1.0, 0.5, 1.0 / 3.0},
        {400000, 1.0, 1.0, 2.0 / 3.0},
        {600000, 1.0, 1.0, 1.0},
        {1000000, 1.0, 1.0, 1.0},
    };
    for (const Expected& e : table) {
        ScheduleState s = schedule_at(e.t, cfg);
        std::ostringstream at;
        at << "t=" << e.t;
        c.expect(s.lambda_pos == e.pos, at.str() + " lambda_P");
        c.expect(s.lambda_ner == e.ner, at.str() + " lambda_N");
        c.expect(s.lambda_dep == e.dep, at.str() + " lambda_D");
    }
    return c;
}

// ---------------------------------------------------------------- criterion 2
// Analytic gradients vs central finite differences on the check model.
Check criterion_gradient_correctness() {
    Check c;
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.ffn_inner = 32;
    cfg.vocab = 20;
    cfg.max_len = 12;
    auto params = init_params<double>(cfg, tag_head_sizes(kSets), 424242);

    std::vector<MaskedExample> examples;
    auto example = [](std::vector<int32_t> ids, std::vector<int32_t> positions,
                      std::vector<int32_t> mlm, std::vector<int32_t> pos, std::vector<int32_t> ner,
                      std::vector<int32_t> dep) {
        MaskedExample ex;
        ex.input_ids = std::move(ids);
        ex.is_masked_position.assign(ex.input_ids.size(), 0);
        for (int32_t p : positions) ex.is_masked_position[static_cast<size_t>(p)] = 1;
        ex.positions = std::move(positions);
        ex.mlm_targets = std::move(mlm);
        ex.pos_targets = std::move(pos);
        ex.ner_targets = std::move(ner);
        ex.dep_targets = std::move(dep);
        return ex;
    };
    examples.push_back(example({2, 7, 9, 13, 4, 3}, {1, 4}, {7, 18}, {0, 27}, {1, 12}, {2, 13}));
    examples.push_back(example({2, 11, 4, 3}, {2}, {6}, {9}, {3}, {0}));
    Batch batch = make_batch(examples);

    const TaskWeights weights{1.0, 1.0, 1.0};
    auto fwd = forward(params, batch, cfg);
    const double inv_m = 1.0 / static_cast<double>(fwd.sums.count);
    ParamStore<double> analytic = params.zeros_like<double>();
    backward(params, batch, cfg, fwd, weights, inv_m, analytic);

    const double epsilon = 1e-5;
    double worst = 0.0;
    std::string worst_tensor;
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        for (size_t j = 0; j < params.tensors[t].data.size(); ++j) {
            const double saved = params.tensors[t].data[j];
            auto loss_at = [&](double value) {
                params.tensors[t].data[j] = value;
                auto f = forward(params, batch, cfg);
                return (f.sums.mlm + f.sums.pos + f.sums.ner + f.sums.dep) * inv_m;
            };
            const double fd = (loss_at(saved + epsilon) - loss_at(saved - epsilon)) / (2.0 * epsilon);
            params.tensors[t].data[j] = saved;
            const double a = analytic.tensors[t].data[j];
            const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-5});
            if (rel > worst) {
                worst = rel;
                worst_tensor = params.names[t];
            }
        }
    }
    std::ostringstream msg;
    msg << "max relative error " << worst << " in " << worst_tensor;
    c.expect(worst < 1e-4, msg.str());
    c.detail = c.ok ? msg.str() : c.detail;
    return c;
}

// ---------------------------------------------------------------- criterion 3
// Masking statistics over 10k synthetic sentences.
Check criterion_masking_statistics() {
    Check c;
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    grammar.min_clauses = 3;
    grammar.max_clauses = 6;
    Corpus corpus = synth_corpus(2024, 10000, grammar);
    Vocab vocab = build_vocab(corpus);
    MaskingConfig cfg;

    int64_t masked_subtokens = 0, total_subtokens = 0;
    int64_t masked_token = 0, kept = 0, randomized = 0;
    int64_t whole_word_violations = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        EncodedSentence enc = encode_sentence(corpus[i], vocab, kSets, 512);
        std::vector<int32_t> sizes(static_cast<size_t>(enc.word_count()));
        for (int32_t w = 0; w < enc.word_count(); ++w) sizes[static_cast<size_t>(w)] = enc.word_size(w);
        Rng rng(derive_seed(9, "mask", 0, i));
        auto spans = select_spans(sizes, rng, cfg);
        MaskedExample ex = apply_masking(enc, spans, rng, cfg, vocab, kSets);

        masked_subtokens += ex.masked_count();
        total_subtokens += enc.subtoken_count();
        for (size_t s = 0; s < ex.positions.size(); ++s) {
            const size_t p = static_cast<size_t>(ex.positions[s]);
            if (ex.input_ids[p] == Vocab::kMask)
                ++masked_token;
            else if (ex.input_ids[p] == ex.mlm_targets[s])
                ++kept;
            else
                ++randomized;
        }
        for (int32_t w = 0; w < enc.word_count(); ++w) {
            auto [start, end] = enc.word_spans[static_cast<size_t>(w)];
            bool any = false, all = true;
            for (int32_t p = start; p < end; ++p) {
                any |= ex.is_masked_position[static_cast<size_t>(p)] != 0;
                all &= ex.is_masked_position[static_cast<size_t>(p)] != 0;
            }
            whole_word_violations += any != all;
        }
    }
    const double fraction = static_cast<double>(masked_subtokens) / static_cast<double>(total_subtokens);
    const double total = static_cast<double>(masked_token + kept + randomized);
    const double f_mask = static_cast<double>(masked_token) / total;
    const double f_keep = static_cast<double>(kept) / total;
    const double f_rand = static_cast<double>(randomized) / total;

    std::ostringstream msg;
    msg << "fraction " << fraction << ", corruption " << f_mask << '/' << f_keep << '/' << f_rand
        << ", violations " << whole_word_violations;
    c.expect(fraction >= 0.14 && fraction <= 0.16, "masked fraction " + std::to_string(fraction));
    c.expect(std::fabs(f_mask - 0.80) < 0.015, "mask share " + std::to_string(f_mask));
    c.expect(std::fabs(f_keep - 0.10) < 0.015, "keep share " + std::to_string(f_keep));
    c.expect(std::fabs(f_rand - 0.10) < 0.015, "random share " + std::to_string(f_rand));
    c.expect(whole_word_violations == 0, "whole-word violations");
    if (c.ok) c.detail = msg.str();
    return c;
}

// ---------------------------------------------------------------- criterion 4
// Loss accounting across an entire 2k-step run.
Check criterion_loss_accounting() {
    Check c;
    Corpus corpus = synth_corpus(88, 24, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    ModelConfig model;
    model.layers = 1;
    model.hidden = 16;
    model.heads = 2;
    model.ffn_inner = 32;
    model.vocab = vocab.size();
    model.max_len = 64;
    ScheduleConfig schedule = make_schedule(2000, "PND");
    OptimizerConfig optimizer;
    optimizer.total_steps = 2000;
    optimizer.warmup_steps = 100;
    optimizer.peak_lr = 1e-3;
    optimizer.seed = 12;
    TrainerConfig trainer_cfg;
    trainer_cfg.batch_size = 4;
    MaskingConfig masking;

    TrainResult result = train(corpus, vocab, kSets, model, masking, schedule, optimizer, trainer_cfg);
    c.expect(result.metrics.size() == 2000, "expected 2000 metrics records");
    for (const auto& r : result.metrics) {
        ScheduleState s = schedule_at(r.step, schedule);
        if (!(r.lambda_pos == s.lambda_pos && r.lambda_ner == s.lambda_ner &&
              r.lambda_dep == s.lambda_dep)) {
            c.expect(false, "lambda mismatch at step " + std::to_string(r.step));
            break;
        }
        const double resum = r.loss_mlm + r.lambda_pos * r.loss_pos + r.lambda_ner * r.loss_ner +
                             r.lambda_dep * r.loss_dep;
        if (std::fabs(r.loss_total - resum) > 1e-6) {
            c.expect(false, "loss_total mismatch at step " + std::to_string(r.step));
            break;
        }
    }
    if (c.ok) c.detail = "2000 records, lambdas exact, totals re-sum within 1e-6";
    return c;
}

// ---------------------------------------------------------------- criterion 5
// Overfit witness: 500 steps on 32 sentences.
Check criterion_overfit_witness() {
    Check c;
    Corpus corpus = synth_corpus(77, 32, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    ModelConfig model = model_preset("micro");
    model.vocab = vocab.size();
    ScheduleConfig schedule = make_schedule(500, "PND");
    OptimizerConfig optimizer;
    optimizer.total_steps = 500;
    optimizer.warmup_steps = 25;
    optimizer.peak_lr = 3e-3;
    optimizer.seed = 3;
    TrainerConfig trainer_cfg;
    trainer_cfg.batch_size = 32;
    MaskingConfig masking;

    TrainResult result = train(corpus, vocab, kSets, model, masking, schedule, optimizer, trainer_cfg);
    const double ln_v = std::log(static_cast<double>(vocab.size()));
    const double first = result.metrics.front().loss_mlm;
    const double final_loss = result.metrics.back().loss_mlm;
    std::ostringstream msg;
    msg << "ln V " << ln_v << ", initial " << first << ", final " << final_loss;
    c.expect(std::fabs(first - ln_v) < 0.1 * ln_v, "initial loss " + std::to_string(first) +
                                                        " not near ln V " + std::to_string(ln_v));
    c.expect(final_loss < 0.5, "final mlm loss " + std::to_string(final_loss));
    if (c.ok) c.detail = msg.str();
    return c;
}

// ---------------------------------------------------------------- criterion 6
// Linguistic-head learnability after 2k steps on the synthetic corpus.
Check criterion_head_learnability() {
    Check c;
    Corpus corpus = synth_corpus(606, 512, SynthGrammarConfig::defaults());
    Corpus heldout = synth_corpus(derive_seed(606, "heldout"), 128, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    ModelConfig model = model_preset("micro");
    model.vocab = vocab.size();
    ScheduleConfig schedule = make_schedule(2000, "PND");
    OptimizerConfig optimizer;
    optimizer.total_steps = 2000;
    optimizer.warmup_steps = 100;
    optimizer.peak_lr = 3e-3;
    optimizer.seed = 11;
    TrainerConfig trainer_cfg;
    trainer_cfg.batch_size = 16;
    MaskingConfig masking;

    TrainResult result = train(corpus, vocab, kSets, model, masking, schedule, optimizer, trainer_cfg);
    auto params = result.params.cast<float>();
    MaskedEval eval = masked_eval(params, model, vocab, kSets, heldout, masking, 5);
    std::ostringstream msg;
    msg << "pos " << eval.pos_acc << ", dep " << eval.dep_acc << " over " << eval.positions
        << " masked positions";
    c.expect(eval.pos_acc >= 0.95, "pos accuracy " + std::to_string(eval.pos_acc));
    c.expect(eval.dep_acc >= 0.90, "dep accuracy " + std::to_string(eval.dep_acc));
    if (c.ok) c.detail = msg.str();
    return c;
}

// ---------------------------------------------------------------- criterion 7
// Ablation-harness structure: the three built-in matrices at toy scale.
Check criterion_ablation_structure() {
    Check c;
    RunConfig base = RunConfig::from_text(R"({
        "seed": 21,
        "grammar": {"train_sentences": 24, "heldout_sentences": 12},
        "model": {"preset": "micro", "layers": 1, "hidden": 16, "heads": 2, "ffn_inner": 32,
                  "max_len": 64},
        "schedule": {"total_steps": 6},
        "optimizer": {"warmup_steps": 2},
        "trainer": {"batch_size": 8},
        "probe": {"epochs": 2}
    })");
    const std::string out_root = "acceptance_ablation";
    std::filesystem::remove_all(out_root);

    const struct {
        const char* name;
        size_t rows;
    } matrices[] = {{"features", 6}, {"order", 5}, {"lmlm", 6}};
    for (const auto& m : matrices) {
        auto matrix = builtin_matrix(m.name);
        c.expect(matrix.size() == m.rows,
                 std::string(m.name) + " row count " + std::to_string(matrix.size()));
        AblationReport report = run_ablation(base, matrix, out_root + "/" + m.name, 2);
        c.expect(report.rows.size() == m.rows, std::string(m.name) + " emitted rows");
        for (const auto& row : report.rows)
            c.expect(!row.failed, std::string(m.name) + "/" + row.name + " failed: " + row.error);
        // Reported, not asserted: the relative orderings.
        std::printf("%s\n", ablation_markdown(report).c_str());
    }
    // Feature-ablation rows other than the full schedule use equal weighting.
    for (const auto& row : builtin_matrix("features")) {
        if (row.name == "lip") continue;
        bool none_preset = false;
        for (const auto& [key, value] : row.overrides)
            none_preset |= key == "schedule.preset" && value == "none";
        c.expect(none_preset, "feature row " + row.name + " must use equal weighting");
    }
    std::filesystem::remove_all(out_root);
    if (c.ok) c.detail = "matrices 6/5/6 rows, all runs completed";
    return c;
}

// ---------------------------------------------------------------- criterion 8
// Determinism and persistence.
Check criterion_determinism_persistence() {
    Check c;
    Corpus corpus = synth_corpus(314, 24, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    ModelConfig model;
    model.layers = 1;
    model.hidden = 32;
    model.heads = 2;
    model.ffn_inner = 64;
    model.vocab = vocab.size();
    model.max_len = 64;
    MaskingConfig masking;
    ScheduleConfig schedule = make_schedule(20, "PND");
    OptimizerConfig optimizer;
    optimizer.total_steps = 20;
    optimizer.warmup_steps = 4;
    optimizer.peak_lr = 2e-3;
    optimizer.seed = 99;
    TrainerConfig plain;
    plain.batch_size = 8;

    auto relative_distance = [](const ParamStore<float>& a, const ParamStore<float>& b) {
        double diff = 0.0, norm = 0.0;
        for (size_t i = 0; i < a.tensors.size(); ++i)
            for (size_t j = 0; j < a.tensors[i].data.size(); ++j) {
                const double d = static_cast<double>(a.tensors[i].data[j]) - b.tensors[i].data[j];
                diff += d * d;
                norm += static_cast<double>(a.tensors[i].data[j]) * a.tensors[i].data[j];
            }
        return std::sqrt(diff / norm);
    };

    // (a) bitwise-identical metrics streams.
    TrainResult run1 = train(corpus, vocab, kSets, model, masking, schedule, optimizer, plain);
    TrainResult run2 = train(corpus, vocab, kSets, model, masking, schedule, optimizer, plain);
    std::string stream1, stream2;
    for (const auto& r : run1.metrics) stream1 += metrics_to_json(r) + "\n";
    for (const auto& r : run2.metrics) stream2 += metrics_to_json(r) + "\n";
    c.expect(stream1 == stream2, "metrics streams differ between identical runs");

    // (b) save -> load -> resume within 1e-6 relative parameter distance.
    const std::string dir = "acceptance_resume";
    std::filesystem::remove_all(dir);
    TrainerConfig with_ckpt = plain;
    with_ckpt.out_dir = dir;
    with_ckpt.checkpoint_every = 10;
    TrainResult full = train(corpus, vocab, kSets, model, masking, schedule, optimizer, with_ckpt);
    Checkpoint mid = load_checkpoint(dir + "/step_10.ckpt");
    TrainResult resumed = train(corpus, vocab, kSets, model, masking, schedule, optimizer, plain, &mid);
    const double resume_distance = relative_distance(full.params, resumed.params);
    c.expect(resume_distance < 1e-6, "resume distance " + std::to_string(resume_distance));
    std::filesystem::remove_all(dir);

    // (c) accumulation factor 4 vs 1.
    Corpus corpus32 = synth_corpus(555, 32, SynthGrammarConfig::defaults());
    Vocab vocab32 = build_vocab(corpus32);
    ModelConfig model32 = model;
    model32.vocab = vocab32.size();
    ScheduleConfig schedule12 = make_schedule(12, "PND");
    OptimizerConfig opt12 = optimizer;
    opt12.total_steps = 12;
    TrainerConfig batch32;
    batch32.batch_size = 32;
    TrainResult whole = train(corpus32, vocab32, kSets, model32, masking, schedule12, opt12, batch32);
    OptimizerConfig opt_accum = opt12;
    opt_accum.accumulation_factor = 4;
    TrainResult accum = train(corpus32, vocab32, kSets, model32, masking, schedule12, opt_accum, batch32);
    const double accum_distance = relative_distance(whole.params, accum.params);
    c.expect(accum_distance < 1e-6, "accumulation distance " + std::to_string(accum_distance));

    if (c.ok) {
        std::ostringstream msg;
        msg << "streams identical, resume distance " << resume_distance << ", accumulation distance "
            << accum_distance;
        c.detail = msg.str();
    }
    return c;
}

// ---------------------------------------------------------------- criterion 9
// LMLM vocabulary expansion counts.
Check criterion_lmlm_vocabulary() {
    Check c;
    Corpus corpus = synth_corpus(17, 400, [] {
        SynthGrammarConfig g = SynthGrammarConfig::defaults();
        g.max_clauses = 3;
        return g;
    }());
    const struct {
        LmlmMode mode;
        size_t expected;
    } cases[] = {
        {LmlmMode::Pos, 28},
        {LmlmMode::Ner, 13},
        {LmlmMode::Dep, 14},
        {LmlmMode::Mix, 55},
    };
    Vocab base = build_vocab(corpus);
    for (const auto& [mode, expected] : cases) {
        MaskingConfig cfg;
        cfg.lmlm_mode = mode;
        Vocab expanded = build_training_vocab(corpus, cfg, kSets);
        c.expect(static_cast<size_t>(expanded.size() - base.size()) == expected,
                 std::string(lmlm_mode_name(mode)) + " expansion " +
                     std::to_string(expanded.size() - base.size()));
    }
    // Mode all matches an independent brute-force triple count.
    std::set<std::tuple<std::string, std::string, std::string>> triples;
    for (const auto& sentence : corpus)
        for (const auto& word : sentence.words) triples.insert({word.pos, word.ner, word.dep});
    MaskingConfig all_cfg;
    all_cfg.lmlm_mode = LmlmMode::All;
    Vocab all_vocab = build_training_vocab(corpus, all_cfg, kSets);
    c.expect(static_cast<size_t>(all_vocab.size() - base.size()) == triples.size(),
             "all-mode expansion " + std::to_string(all_vocab.size() - base.size()) + " vs brute force " +
                 std::to_string(triples.size()));
    if (c.ok) c.detail = "expansions 28/13/14/55, all-mode matches " + std::to_string(triples.size()) +
                         " observed triples";
    return c;
}

// --------------------------------------------------------------- criterion 10
// Parameter-count witness for the base preset.
Check criterion_parameter_count() {
    Check c;
    ModelConfig base = model_preset("base");
    base.vocab = 21128;
    const int64_t count = parameter_count(base, tag_head_sizes(kSets));
    const double deviation = std::fabs(static_cast<double>(count) - 102e6) / 102e6;
    std::ostringstream msg;
    msg << "closed-form count " << count << " (" << deviation * 100.0 << "% from 102M)";
    c.expect(deviation < 0.01, msg.str());
    if (c.ok) c.detail = msg.str();
    return c;
}

struct Criterion {
    int number;
    const char* name;
    std::function<Check()> run;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    const std::vector<Criterion> criteria = {
        {1, "schedule exactness", criterion_schedule_exactness},
        {2, "gradient correctness", criterion_gradient_correctness},
        {3, "masking statistics", criterion_masking_statistics},
        {4, "loss accounting", criterion_loss_accounting},
        {5, "overfit witness", criterion_overfit_witness},
        {6, "linguistic-head learnability", criterion_head_learnability},
        {7, "ablation-harness structure", criterion_ablation_structure},
        {8, "determinism and persistence", criterion_determinism_persistence},
        {9, "lmlm vocabulary", criterion_lmlm_vocabulary},
        {10, "parameter-count witness", criterion_parameter_count},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (only != 0 && criterion.number != only) continue;
        Check result;
        try {
            result = criterion.run();
        } catch (const std::exception& e) {
            result.ok = false;
            result.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d (%s)%s%s\n", result.ok ? "PASS" : "FAIL", criterion.number,
                    criterion.name, result.detail.empty() ? "" : ": ", result.detail.c_str());
        std::fflush(stdout);
        failures += !result.ok;
    }
    return failures == 0 ? 0 : 1;
}
