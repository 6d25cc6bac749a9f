#include "lertlab/ablation.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lertlab/synth.hpp"
#include "lertlab/trainer.hpp"

namespace lertlab {

std::vector<MatrixRow> builtin_matrix(const std::string& name) {
    auto tasks = [](bool pos, bool ner, bool dep) {
        return std::vector<std::pair<std::string, std::string>>{
            {"schedule.preset", "none"},
            {"schedule.pos", pos ? "true" : "false"},
            {"schedule.ner", ner ? "true" : "false"},
            {"schedule.dep", dep ? "true" : "false"},
        };
    };
    if (name == "features") {
        return {
            {"baseline", tasks(false, false, false)},
            {"pos", tasks(true, false, false)},
            {"ner", tasks(false, true, false)},
            {"dep", tasks(false, false, true)},
            {"all", tasks(true, true, true)},
            {"lip", {{"schedule.preset", "PND"}}},
        };
    }
    if (name == "order") {
        return {
            {"pnd", {{"schedule.preset", "PND"}}},
            {"pdn", {{"schedule.preset", "PDN"}}},
            {"npd", {{"schedule.preset", "NPD"}}},
            {"dnp", {{"schedule.preset", "DNP"}}},
            {"none", {{"schedule.preset", "none"}}},
        };
    }
    if (name == "lmlm") {
        auto lmlm = [&tasks](const char* mode) {
            auto overrides = tasks(false, false, false);  // pure MLM study
            overrides.emplace_back("lmlm.mode", mode);
            return overrides;
        };
        return {
            {"mlm", lmlm("off")},
            {"pos-mask", lmlm("pos")},
            {"ner-mask", lmlm("ner")},
            {"dep-mask", lmlm("dep")},
            {"all-mask", lmlm("all")},
            {"mix-mask", lmlm("mix")},
        };
    }
    raise(ErrorKind::Config, "unknown matrix '" + name + "' (expected features, order, or lmlm)");
}

RunOutcome execute_run(const RunConfig& config, const std::string& run_name) {
    const TagSets tagsets = builtin_tagsets();

    Corpus train_corpus;
    if (!config.corpus_train().empty())
        train_corpus = read_corpus_file(config.corpus_train(), tagsets);
    else
        train_corpus = synth_corpus(config.seed(), config.grammar_train_sentences(), config.grammar());
    Corpus heldout;
    if (!config.corpus_heldout().empty())
        heldout = read_corpus_file(config.corpus_heldout(), tagsets);
    else
        heldout = synth_corpus(derive_seed(config.seed(), "heldout"), config.grammar_heldout_sentences(),
                               config.grammar());

    const MaskingConfig masking_cfg = config.masking();
    Vocab vocab = build_training_vocab(train_corpus, masking_cfg, tagsets);
    const ModelConfig model_cfg = config.model(vocab.size());

    TrainResult trained = train(train_corpus, vocab, tagsets, model_cfg, masking_cfg, config.schedule(),
                                config.optimizer(), config.trainer());

    RunOutcome outcome;
    outcome.model_cfg = model_cfg;
    outcome.vocab = vocab;
    outcome.report.run_name = run_name;
    outcome.report.config_hash = fnv1a_hex(config.echo());
    outcome.report.seed = config.seed();
    outcome.report.steps = config.schedule().total_steps;
    outcome.report.masked = masked_eval(trained.params, model_cfg, vocab, tagsets, heldout, masking_cfg,
                                        derive_seed(config.seed(), "eval"));
    outcome.report.ner_f = ner_head_span_f1(trained.params, model_cfg, vocab, tagsets, heldout);
    ProbeConfig probe_cfg = config.probe();
    outcome.report.probe_pos =
        probe_finetune(trained.params, model_cfg, vocab, tagsets, heldout, TagKind::Pos, probe_cfg).dev;
    outcome.report.probe_ner =
        probe_finetune(trained.params, model_cfg, vocab, tagsets, heldout, TagKind::Ner, probe_cfg).dev;
    outcome.report.probe_dep =
        probe_finetune(trained.params, model_cfg, vocab, tagsets, heldout, TagKind::Dep, probe_cfg).dev;
    outcome.params = std::move(trained.params);
    return outcome;
}

AblationReport run_ablation(const RunConfig& base, const std::vector<MatrixRow>& matrix,
                            const std::string& out_dir, int jobs) {
    if (jobs < 1) raise(ErrorKind::Config, "jobs must be at least 1");
    AblationReport report;
    report.rows.resize(matrix.size());

    auto run_one = [&](size_t idx) {
        const MatrixRow& row = matrix[idx];
        AblationRowResult& result = report.rows[idx];
        result.name = row.name;
        try {
            RunConfig config = base;
            for (const auto& [key, value] : row.overrides) config.set_override(key, value);
            if (!out_dir.empty()) {
                config.set_override("out_dir", out_dir + "/" + row.name);
                std::filesystem::create_directories(out_dir + "/" + row.name);
                std::ofstream cfg_out(out_dir + "/" + row.name + "/config.json", std::ios::binary);
                cfg_out << config.echo() << '\n';
            }
            RunOutcome outcome = execute_run(config, row.name);
            result.report = outcome.report;
            if (!out_dir.empty()) {
                std::ofstream row_out(out_dir + "/" + row.name + "/row.json", std::ios::binary);
                row_out << probe_report_json(outcome.report) << '\n';
            }
        } catch (const std::exception& e) {
            result.failed = true;
            result.error = e.what();
        }
    };

    if (jobs == 1) {
        for (size_t i = 0; i < matrix.size(); ++i) run_one(i);
        return report;
    }
    size_t next = 0;
    std::mutex mu;
    auto worker = [&]() {
        for (;;) {
            size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= matrix.size()) return;
                idx = next++;
            }
            run_one(idx);
        }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return report;
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed << v;
    return out.str();
}

}  // namespace

std::string ablation_csv(const AblationReport& report) {
    std::string out = "run,steps,mlm_acc,pos_acc,ner_acc,dep_acc,ner_f,probe_pos,probe_ner,probe_dep,status\n";
    for (const auto& row : report.rows) {
        const ProbeReport& r = row.report;
        out += row.name + ',' + std::to_string(r.steps) + ',' + fmt(r.masked.mlm_acc) + ',' +
               fmt(r.masked.pos_acc) + ',' + fmt(r.masked.ner_acc) + ',' + fmt(r.masked.dep_acc) + ',' +
               fmt(r.ner_f) + ',' + fmt(r.probe_pos) + ',' + fmt(r.probe_ner) + ',' + fmt(r.probe_dep) +
               ',' + (row.failed ? "failed" : "ok") + '\n';
    }
    return out;
}

std::string ablation_markdown(const AblationReport& report) {
    std::string out =
        "| run | steps | mlm_acc | pos_acc | ner_acc | dep_acc | ner_f | probe_pos | probe_ner | "
        "probe_dep | status |\n"
        "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
        const ProbeReport& r = row.report;
        out += "| " + row.name + " | " + std::to_string(r.steps) + " | " + fmt(r.masked.mlm_acc) + " | " +
               fmt(r.masked.pos_acc) + " | " + fmt(r.masked.ner_acc) + " | " + fmt(r.masked.dep_acc) +
               " | " + fmt(r.ner_f) + " | " + fmt(r.probe_pos) + " | " + fmt(r.probe_ner) + " | " +
               fmt(r.probe_dep) + " | " + (row.failed ? "failed" : "ok") + " |\n";
    }
    return out;
}

AblationReport merge_run_dirs(const std::vector<std::string>& run_dirs) {
    AblationReport report;
    for (const auto& dir : run_dirs) {
        std::ifstream in(dir + "/row.json", std::ios::binary);
        if (!in) raise(ErrorKind::Io, "no row.json under '" + dir + "'");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        AblationRowResult row;
        row.report = probe_report_from_json(text);
        row.name = row.report.run_name;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace lertlab
