#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lertlab/masking.hpp"
#include "lertlab/model.hpp"
#include "lertlab/probe.hpp"
#include "lertlab/schedule.hpp"
#include "lertlab/synth.hpp"
#include "lertlab/trainer.hpp"

namespace lertlab {

// One experiment = one JSON document. Unknown keys are rejected, defaults are
// always applied, and the fully-resolved document echoes back verbatim so a
// run can be reproduced from its own echo. Value semantics: copies are
// independent documents.
class RunConfig {
  public:
    static RunConfig defaults();
    static RunConfig from_text(const std::string& json_text);
    static RunConfig from_file(const std::string& path);

    RunConfig(const RunConfig& other);
    RunConfig& operator=(const RunConfig& other);
    RunConfig(RunConfig&&) noexcept;
    RunConfig& operator=(RunConfig&&) noexcept;
    ~RunConfig();

    // Dotted-path override, e.g. ("schedule.preset", "PND") or
    // ("masking.mask_ratio", "0.2"). The path must name an existing leaf.
    void set_override(const std::string& dotted_path, const std::string& value);

    std::string echo() const;  // pretty-printed, stable key order

    uint64_t seed() const;
    std::string out_dir() const;
    std::string corpus_train() const;
    std::string corpus_heldout() const;
    int64_t grammar_train_sentences() const;
    int64_t grammar_heldout_sentences() const;

    SynthGrammarConfig grammar() const;
    MaskingConfig masking() const;
    ModelConfig model(int32_t vocab) const;
    ScheduleConfig schedule() const;
    OptimizerConfig optimizer() const;
    TrainerConfig trainer() const;
    ProbeConfig probe() const;

  private:
    RunConfig();
    struct Doc;
    std::unique_ptr<Doc> doc_;
};

}  // namespace lertlab
