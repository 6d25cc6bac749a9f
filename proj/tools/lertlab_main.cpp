// lertlab: multi-task masked-LM pre-training lab.
//
// Subcommands: gen-corpus, build-vocab, mask-dump, pretrain, probe, ablate,
// trace-schedule, report. Every config-driven command echoes its fully
// resolved config before running; re-running the echoed config reproduces
// the run bit for bit.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lertlab/ablation.hpp"
#include "lertlab/checkpoint.hpp"
#include "lertlab/error.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/probe.hpp"
#include "lertlab/run_config.hpp"
#include "lertlab/schedule.hpp"
#include "lertlab/synth.hpp"
#include "lertlab/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using namespace lertlab;

// Seed precedence: --seed flag, then the config file, then LERTLAB_SEED,
// then the built-in default.
RunConfig build_config(const std::string& config_path, const std::optional<uint64_t>& seed_flag,
                       const std::vector<std::string>& overrides) {
    std::string text = "{}";
    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) raise(ErrorKind::Io, "cannot open config file '" + config_path + "'");
        text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    RunConfig cfg = RunConfig::from_text(text);
    const bool file_sets_seed = [&] {
        try {
            return nlohmann::json::parse(text).contains("seed");
        } catch (const nlohmann::json::exception&) {
            return false;  // from_text already rejected malformed JSON
        }
    }();
    if (!file_sets_seed) {
        if (const char* env = std::getenv("LERTLAB_SEED"); env && *env)
            cfg.set_override("seed", env);
    }
    if (seed_flag) cfg.set_override("seed", std::to_string(*seed_flag));

    // Remaining --section.key value (or --section.key=value) pairs.
    for (size_t i = 0; i < overrides.size(); ++i) {
        std::string token = overrides[i];
        if (token.rfind("--", 0) != 0)
            raise(ErrorKind::Config, "unexpected argument '" + token + "' (overrides look like --schedule.preset PND)");
        token = token.substr(2);
        std::string value;
        if (auto eq = token.find('='); eq != std::string::npos) {
            value = token.substr(eq + 1);
            token = token.substr(0, eq);
        } else {
            if (i + 1 >= overrides.size())
                raise(ErrorKind::Config, "override '--" + token + "' is missing a value");
            value = overrides[++i];
        }
        cfg.set_override(token, value);
    }
    return cfg;
}

void echo_config(const RunConfig& cfg) { std::cout << cfg.echo() << std::endl; }

void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write '" + path + "'");
    out << text;
}

Corpus resolve_corpus(const RunConfig& cfg, bool heldout, const TagSets& tagsets) {
    const std::string path = heldout ? cfg.corpus_heldout() : cfg.corpus_train();
    if (!path.empty()) return read_corpus_file(path, tagsets);
    if (heldout)
        return synth_corpus(derive_seed(cfg.seed(), "heldout"), cfg.grammar_heldout_sentences(), cfg.grammar());
    return synth_corpus(cfg.seed(), cfg.grammar_train_sentences(), cfg.grammar());
}

std::string tagsets_json(const TagSets& tagsets) {
    return "[" + tagsets.pos.to_json() + "," + tagsets.ner.to_json() + "," + tagsets.dep.to_json() + "]\n";
}

int cmd_gen_corpus(const RunConfig& cfg, const std::string& train_out, const std::string& heldout_out,
                   const std::string& tagset_out) {
    const TagSets tagsets = builtin_tagsets();
    Corpus train = synth_corpus(cfg.seed(), cfg.grammar_train_sentences(), cfg.grammar());
    Corpus heldout =
        synth_corpus(derive_seed(cfg.seed(), "heldout"), cfg.grammar_heldout_sentences(), cfg.grammar());
    write_corpus_file(train_out, train);
    write_corpus_file(heldout_out, heldout);
    if (!tagset_out.empty()) write_text(tagset_out, tagsets_json(tagsets));
    std::cout << "wrote " << train.size() << " train and " << heldout.size() << " heldout sentences\n";
    return 0;
}

int cmd_build_vocab(const std::string& corpus_path, const std::string& out_path) {
    std::cout << "{\"corpus\": \"" << corpus_path << "\", \"out\": \"" << out_path << "\"}\n";
    const TagSets tagsets = builtin_tagsets();
    Corpus corpus = read_corpus_file(corpus_path, tagsets);
    Vocab vocab = build_vocab(corpus);
    write_vocab_file(out_path, vocab);
    std::cout << "wrote " << vocab.size() << " tokens\n";
    return 0;
}

int cmd_mask_dump(const RunConfig& cfg, const std::string& corpus_path, const std::string& out_path) {
    const TagSets tagsets = builtin_tagsets();
    Corpus corpus = corpus_path.empty() ? resolve_corpus(cfg, false, tagsets)
                                        : read_corpus_file(corpus_path, tagsets);
    const MaskingConfig masking = cfg.masking();
    Vocab vocab = build_training_vocab(corpus, masking, tagsets);
    const ModelConfig model_cfg = cfg.model(vocab.size());

    std::ostringstream lines;
    for (size_t i = 0; i < corpus.size(); ++i) {
        EncodedSentence enc = encode_sentence(corpus[i], vocab, tagsets, model_cfg.max_len);
        Rng rng(derive_seed(cfg.seed(), "mask", 0, i));
        std::vector<int32_t> sizes(static_cast<size_t>(enc.word_count()));
        for (int32_t w = 0; w < enc.word_count(); ++w) sizes[static_cast<size_t>(w)] = enc.word_size(w);
        auto spans = select_spans(sizes, rng, masking);
        lines << mask_dump_line(apply_masking(enc, spans, rng, masking, vocab, tagsets)) << '\n';
    }
    write_text(out_path, lines.str());
    std::cout << "wrote " << corpus.size() << " masked examples\n";
    return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& resume_path) {
    const TagSets tagsets = builtin_tagsets();
    Corpus train_corpus = resolve_corpus(cfg, false, tagsets);
    const MaskingConfig masking = cfg.masking();
    Vocab vocab = build_training_vocab(train_corpus, masking, tagsets);
    const ModelConfig model_cfg = cfg.model(vocab.size());
    if (!cfg.out_dir().empty()) {
        std::filesystem::create_directories(cfg.out_dir());
        write_text(cfg.out_dir() + "/config.json", cfg.echo() + "\n");
        write_vocab_file(cfg.out_dir() + "/vocab.txt", vocab);
        write_text(cfg.out_dir() + "/tagsets.json", tagsets_json(tagsets));
    }
    Checkpoint resume_ckpt;
    const Checkpoint* resume = nullptr;
    if (!resume_path.empty()) {
        resume_ckpt = load_checkpoint(resume_path);
        resume = &resume_ckpt;
    }
    TrainResult result = train(train_corpus, vocab, tagsets, model_cfg, masking, cfg.schedule(),
                               cfg.optimizer(), cfg.trainer(), resume);
    if (result.metrics.empty()) {
        std::cout << "nothing to do; checkpoint already at total_steps\n";
        return 0;
    }
    const auto& last = result.metrics.back();
    std::cout << "finished " << result.metrics.size() << " steps; final loss_total "
              << format_double(last.loss_total) << '\n';
    return 0;
}

int cmd_probe(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& vocab_path) {
    const TagSets tagsets = builtin_tagsets();
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Vocab vocab = read_vocab_file(vocab_path);
    if (vocab.size() != ckpt.config.vocab)
        raise(ErrorKind::Config, "vocab file does not match the checkpoint's vocabulary size");
    Corpus heldout = resolve_corpus(cfg, true, tagsets);

    ProbeReport report;
    report.run_name = checkpoint_path;
    report.config_hash = fnv1a_hex(cfg.echo());
    report.seed = cfg.seed();
    report.steps = ckpt.moments ? ckpt.moments->step : 0;
    report.masked = masked_eval(ckpt.params, ckpt.config, vocab, tagsets, heldout, cfg.masking(),
                                derive_seed(cfg.seed(), "eval"));
    report.ner_f = ner_head_span_f1(ckpt.params, ckpt.config, vocab, tagsets, heldout);
    ProbeConfig probe_cfg = cfg.probe();
    report.probe_pos =
        probe_finetune(ckpt.params, ckpt.config, vocab, tagsets, heldout, TagKind::Pos, probe_cfg).dev;
    report.probe_ner =
        probe_finetune(ckpt.params, ckpt.config, vocab, tagsets, heldout, TagKind::Ner, probe_cfg).dev;
    report.probe_dep =
        probe_finetune(ckpt.params, ckpt.config, vocab, tagsets, heldout, TagKind::Dep, probe_cfg).dev;

    std::cout << probe_report_json(report) << '\n';
    if (!cfg.out_dir().empty()) {
        std::filesystem::create_directories(cfg.out_dir());
        write_text(cfg.out_dir() + "/row.json", probe_report_json(report) + "\n");
    }
    // Chance-level baselines alongside the measured accuracies.
    std::cout << "majority baselines: pos " << format_double(majority_class_rate(heldout, tagsets, TagKind::Pos))
              << " ner " << format_double(majority_class_rate(heldout, tagsets, TagKind::Ner)) << " dep "
              << format_double(majority_class_rate(heldout, tagsets, TagKind::Dep)) << '\n';
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& matrix_name, int jobs) {
    auto matrix = builtin_matrix(matrix_name);
    const std::string out_dir = cfg.out_dir().empty() ? ("ablation-" + matrix_name) : cfg.out_dir();
    AblationReport report = run_ablation(cfg, matrix, out_dir, jobs);
    write_text(out_dir + "/report.csv", ablation_csv(report));
    write_text(out_dir + "/report.md", ablation_markdown(report));
    std::cout << ablation_markdown(report);
    for (const auto& row : report.rows)
        if (row.failed) std::cerr << "run '" << row.name << "' failed: " << row.error << '\n';
    return 0;
}

int cmd_trace_schedule(int64_t total, const std::string& preset, int64_t every, const std::string& out) {
    std::cerr << "{\"total\": " << total << ", \"preset\": \"" << preset << "\", \"every\": " << every
              << "}\n";
    ScheduleConfig cfg = make_schedule(total, preset);
    std::string csv = schedule_trace_csv(cfg, every);
    if (out.empty())
        std::cout << csv;
    else
        write_text(out, csv);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv,
               const std::string& out_md) {
    std::cerr << "{\"dirs\": " << run_dirs.size() << ", \"out_csv\": \"" << out_csv
              << "\", \"out_md\": \"" << out_md << "\"}\n";
    AblationReport report = merge_run_dirs(run_dirs);
    if (!out_csv.empty()) write_text(out_csv, ablation_csv(report));
    if (!out_md.empty()) write_text(out_md, ablation_markdown(report));
    std::cout << ablation_markdown(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task masked-LM pre-training lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed_flag;
    auto add_config_options = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config");
        sub->add_option("--seed", seed_flag, "seed override");
        sub->allow_extras();  // --section.key value overrides
    };

    auto* gen = app.add_subcommand("gen-corpus", "generate synthetic train/heldout corpora");
    std::string train_out = "train.tsv", heldout_out = "heldout.tsv", tagset_out;
    gen->add_option("--train-out", train_out, "train TSV path");
    gen->add_option("--heldout-out", heldout_out, "heldout TSV path");
    gen->add_option("--tagset-out", tagset_out, "tag inventory JSON path");
    add_config_options(gen);

    auto* vocab_cmd = app.add_subcommand("build-vocab", "build a vocabulary from a corpus TSV");
    std::string corpus_path, vocab_out = "vocab.txt";
    vocab_cmd->add_option("--corpus", corpus_path, "corpus TSV")->required();
    vocab_cmd->add_option("--out", vocab_out, "vocab file path");

    auto* dump = app.add_subcommand("mask-dump", "dump masked examples as JSON lines");
    std::string dump_corpus, dump_out = "masked.jsonl";
    dump->add_option("--corpus", dump_corpus, "corpus TSV (default: synthetic per config)");
    dump->add_option("--out", dump_out, "output JSONL path");
    add_config_options(dump);

    auto* pretrain = app.add_subcommand("pretrain", "run the multi-task pre-training loop");
    std::string resume_path;
    pretrain->add_option("--resume", resume_path, "checkpoint to resume from");
    add_config_options(pretrain);

    auto* probe = app.add_subcommand("probe", "evaluate a checkpoint's heads and linear probes");
    std::string ckpt_path, vocab_path;
    probe->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    probe->add_option("--vocab", vocab_path, "vocab file from the pretraining run")->required();
    add_config_options(probe);

    auto* ablate = app.add_subcommand("ablate", "run a built-in study matrix");
    std::string matrix_name = "features";
    int jobs = 1;
    ablate->add_option("--matrix", matrix_name, "features | order | lmlm");
    ablate->add_option("--jobs", jobs, "parallel runs");
    add_config_options(ablate);

    auto* trace = app.add_subcommand("trace-schedule", "emit the lambda ramp as CSV");
    int64_t trace_total = 1200000, trace_every = 10000;
    std::string trace_preset = "PND", trace_out;
    trace->add_option("--total", trace_total, "total training steps");
    trace->add_option("--preset", trace_preset, "PND | PDN | NPD | DNP | none");
    trace->add_option("--every", trace_every, "emit every N steps");
    trace->add_option("--out", trace_out, "CSV path (default stdout)");

    auto* report = app.add_subcommand("report", "merge run directories into one table");
    std::vector<std::string> run_dirs;
    std::string report_csv, report_md;
    report->add_option("dirs", run_dirs, "run directories containing row.json")->required();
    report->add_option("--out-csv", report_csv, "merged CSV path");
    report->add_option("--out-md", report_md, "merged Markdown path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            RunConfig cfg = build_config(config_path, seed_flag, gen->remaining());
            echo_config(cfg);
            return cmd_gen_corpus(cfg, train_out, heldout_out, tagset_out);
        }
        if (vocab_cmd->parsed()) return cmd_build_vocab(corpus_path, vocab_out);
        if (dump->parsed()) {
            RunConfig cfg = build_config(config_path, seed_flag, dump->remaining());
            echo_config(cfg);
            return cmd_mask_dump(cfg, dump_corpus, dump_out);
        }
        if (pretrain->parsed()) {
            RunConfig cfg = build_config(config_path, seed_flag, pretrain->remaining());
            echo_config(cfg);
            return cmd_pretrain(cfg, resume_path);
        }
        if (probe->parsed()) {
            RunConfig cfg = build_config(config_path, seed_flag, probe->remaining());
            echo_config(cfg);
            return cmd_probe(cfg, ckpt_path, vocab_path);
        }
        if (ablate->parsed()) {
            RunConfig cfg = build_config(config_path, seed_flag, ablate->remaining());
            echo_config(cfg);
            return cmd_ablate(cfg, matrix_name, jobs);
        }
        if (trace->parsed()) return cmd_trace_schedule(trace_total, trace_preset, trace_every, trace_out);
        if (report->parsed()) return cmd_report(run_dirs, report_csv, report_md);
    } catch (const lertlab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
