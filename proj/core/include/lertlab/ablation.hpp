#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lertlab/probe.hpp"
#include "lertlab/run_config.hpp"

namespace lertlab {

// One named run: overrides applied on top of the matrix's shared base config.
struct MatrixRow {
    std::string name;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// The three built-in study matrices:
//   features: baseline / pos / ner / dep / all / lip       (6 rows)
//   order:    pnd / pdn / npd / dnp / none                 (5 rows)
//   lmlm:     mlm / pos-mask / ner-mask / dep-mask /
//             all-mask / mix-mask                          (6 rows)
// Feature-ablation rows other than "lip" use equal weighting (no warmup).
std::vector<MatrixRow> builtin_matrix(const std::string& name);

// Full pipeline for one run config: resolve corpora (file or synthetic),
// build the vocabulary (with LMLM expansion), pretrain, then evaluate the
// heads and the frozen linear probes on the heldout corpus.
struct RunOutcome {
    ProbeReport report;
    ParamStore<float> params;
    ModelConfig model_cfg;
    Vocab vocab;
};

RunOutcome execute_run(const RunConfig& config, const std::string& run_name);

struct AblationRowResult {
    std::string name;
    bool failed = false;
    std::string error;
    ProbeReport report;
};

struct AblationReport {
    std::vector<AblationRowResult> rows;
};

// Runs each row end-to-end (pretrain then probe) into out_dir/<row name>.
// A failing row is recorded and the matrix continues. jobs > 1 runs rows in
// parallel; results are reported in matrix order either way.
AblationReport run_ablation(const RunConfig& base, const std::vector<MatrixRow>& matrix,
                            const std::string& out_dir, int jobs = 1);

std::string ablation_csv(const AblationReport& report);
std::string ablation_markdown(const AblationReport& report);

// Merges row.json files from run directories into one report.
AblationReport merge_run_dirs(const std::vector<std::string>& run_dirs);

}  // namespace lertlab
