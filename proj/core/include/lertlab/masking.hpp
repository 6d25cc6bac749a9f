#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lertlab/corpus.hpp"
#include "lertlab/rng.hpp"
#include "lertlab/tags.hpp"

namespace lertlab {

enum class LmlmMode { Off, Pos, Ner, Dep, All, Mix };

const char* lmlm_mode_name(LmlmMode mode);
LmlmMode lmlm_mode_from_name(const std::string& name);  // Config on unknown

struct MaskingConfig {
    double mask_ratio = 0.15;
    std::vector<double> ngram_weights = {0.4, 0.3, 0.2, 0.1};     // n = 1..4
    std::array<double, 3> corruption_split = {0.8, 0.1, 0.1};     // mask / keep / random
    LmlmMode lmlm_mode = LmlmMode::Off;
};

// mask_ratio in (0,1); ngram_weights and corruption_split each sum to 1
// within 1e-9.
void validate_masking(const MaskingConfig& cfg);

// Half-open range of word indices selected for whole-word masking.
struct WordSpan {
    int32_t first = 0;
    int32_t last = 0;  // exclusive
};

struct MaskedExample {
    std::vector<int32_t> input_ids;
    std::vector<uint8_t> is_masked_position;  // one flag per position
    // Parallel arrays over masked positions, ascending by position.
    std::vector<int32_t> positions;
    std::vector<int32_t> mlm_targets;
    std::vector<int32_t> pos_targets;
    std::vector<int32_t> ner_targets;
    std::vector<int32_t> dep_targets;
    int64_t lmlm_fallbacks = 0;  // composite token missing, plain [MASK] used

    int32_t masked_count() const { return static_cast<int32_t>(positions.size()); }
};

// Draws n-gram lengths from ngram_weights and places non-overlapping word
// spans until the subtoken budget ceil(mask_ratio * subtoken_count) is
// reached or nothing more fits. Spans never exceed the budget except when
// the budget is smaller than every single word, in which case the smallest
// word is masked so every sentence carries at least one prediction.
std::vector<WordSpan> select_spans(std::span<const int32_t> word_subtoken_counts, Rng& rng,
                                   const MaskingConfig& cfg);

// Masks every subtoken of every selected word. Each masked position draws
// its corruption type independently: substitute the mask token (plain or
// LMLM), keep the original id, or substitute a uniformly random corpus
// token id. The MLM target is always the pre-corruption id and the tag
// targets are always the broadcast word tags.
MaskedExample apply_masking(const EncodedSentence& enc, std::span<const WordSpan> spans, Rng& rng,
                            const MaskingConfig& cfg, const Vocab& vocab, const TagSets& tagsets);

// New mask-token strings for the given mode, in a deterministic order:
//   pos/ner/dep -> one token per label ([MASK-POS-n], ...),
//   all         -> one composite token per distinct tag triple in the corpus,
//   mix         -> the union of the three single-tag inventories (55).
std::vector<std::string> lmlm_mask_vocabulary(LmlmMode mode, const TagSets& tagsets, const Corpus& corpus);

// Appends mask tokens after the existing entries and records lmlm_begin.
void append_lmlm_tokens(Vocab& vocab, std::span<const std::string> tokens);

// Mask-token string for one masked position's broadcast tags. Mode mix
// draws one of the three tasks uniformly from rng.
std::string lmlm_mask_token_for(int32_t pos_id, int32_t ner_id, int32_t dep_id, LmlmMode mode,
                                Rng& rng, const TagSets& tagsets);

// Debug dump: one MaskedExample as a single JSON line with explicit target
// arrays (integers only, so the encoding is byte-stable).
std::string mask_dump_line(const MaskedExample& ex);

}  // namespace lertlab
