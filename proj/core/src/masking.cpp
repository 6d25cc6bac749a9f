#include "lertlab/masking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "lertlab/error.hpp"

namespace lertlab {

const char* lmlm_mode_name(LmlmMode mode) {
    switch (mode) {
        case LmlmMode::Off: return "off";
        case LmlmMode::Pos: return "pos";
        case LmlmMode::Ner: return "ner";
        case LmlmMode::Dep: return "dep";
        case LmlmMode::All: return "all";
        case LmlmMode::Mix: return "mix";
    }
    return "?";
}

LmlmMode lmlm_mode_from_name(const std::string& name) {
    for (LmlmMode mode : {LmlmMode::Off, LmlmMode::Pos, LmlmMode::Ner, LmlmMode::Dep, LmlmMode::All, LmlmMode::Mix})
        if (name == lmlm_mode_name(mode)) return mode;
    raise(ErrorKind::Config, "unknown lmlm mode '" + name + "'");
}

void validate_masking(const MaskingConfig& cfg) {
    if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0))
        raise(ErrorKind::Config, "mask_ratio must lie in (0, 1)");
    if (cfg.ngram_weights.empty()) raise(ErrorKind::Config, "ngram_weights must be non-empty");
    double wsum = std::accumulate(cfg.ngram_weights.begin(), cfg.ngram_weights.end(), 0.0);
    if (std::fabs(wsum - 1.0) > 1e-9) raise(ErrorKind::Config, "ngram_weights must sum to 1");
    for (double w : cfg.ngram_weights)
        if (w < 0.0) raise(ErrorKind::Config, "ngram_weights must be non-negative");
    double csum = cfg.corruption_split[0] + cfg.corruption_split[1] + cfg.corruption_split[2];
    if (std::fabs(csum - 1.0) > 1e-9) raise(ErrorKind::Config, "corruption_split must sum to 1");
    for (double c : cfg.corruption_split)
        if (c < 0.0) raise(ErrorKind::Config, "corruption_split must be non-negative");
}

std::vector<WordSpan> select_spans(std::span<const int32_t> word_subtoken_counts, Rng& rng,
                                   const MaskingConfig& cfg) {
    const int32_t word_count = static_cast<int32_t>(word_subtoken_counts.size());
    if (word_count < 1) raise(ErrorKind::Input, "select_spans requires at least one word");
    int64_t total = 0;
    for (int32_t c : word_subtoken_counts) total += c;
    const int64_t budget = static_cast<int64_t>(std::ceil(cfg.mask_ratio * static_cast<double>(total)));

    std::vector<int32_t> order(word_count);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<uint8_t> covered(word_count, 0);
    std::vector<WordSpan> spans;
    int64_t masked = 0;
    for (int32_t start : order) {
        if (masked >= budget) break;
        if (covered[start]) continue;
        int32_t len = 1 + static_cast<int32_t>(rng.next_weighted(cfg.ngram_weights));
        int32_t end = start;
        int64_t size = 0;
        while (end < word_count && end - start < len && !covered[end]) {
            size += word_subtoken_counts[end];
            ++end;
        }
        // Shrink from the right so the budget is never exceeded.
        while (end > start && masked + size > budget) {
            --end;
            size -= word_subtoken_counts[end];
        }
        if (end == start) continue;
        for (int32_t w = start; w < end; ++w) covered[w] = 1;
        spans.push_back({start, end});
        masked += size;
    }
    if (spans.empty()) {
        // Budget smaller than every word: mask the smallest word reached
        // first so each sentence has at least one prediction.
        int32_t best = order[0];
        for (int32_t w : order)
            if (word_subtoken_counts[w] < word_subtoken_counts[best]) best = w;
        spans.push_back({best, best + 1});
    }
    std::sort(spans.begin(), spans.end(), [](const WordSpan& a, const WordSpan& b) { return a.first < b.first; });
    return spans;
}

namespace {

std::string single_tag_token(TagKind kind, const std::string& label) {
    return std::string("[MASK-") + tag_kind_name(kind) + "-" + label + "]";
}

std::string composite_token(const TagSets& tagsets, int32_t pos_id, int32_t ner_id, int32_t dep_id) {
    return "[MASK-ALL-" + tagsets.pos.label_of(pos_id) + "-" + tagsets.ner.label_of(ner_id) + "-" +
           tagsets.dep.label_of(dep_id) + "]";
}

}  // namespace

MaskedExample apply_masking(const EncodedSentence& enc, std::span<const WordSpan> spans, Rng& rng,
                            const MaskingConfig& cfg, const Vocab& vocab, const TagSets& tagsets) {
    MaskedExample ex;
    ex.input_ids = enc.token_ids;
    ex.is_masked_position.assign(enc.token_ids.size(), 0);

    const double p_mask = cfg.corruption_split[0];
    const double p_keep = cfg.corruption_split[1];
    const int32_t random_pool = vocab.corpus_token_count();
    if (random_pool <= 0) raise(ErrorKind::Config, "vocabulary has no corpus tokens for random replacement");

    for (const WordSpan& span : spans) {
        if (span.first < 0 || span.last > enc.word_count() || span.first >= span.last)
            raise(ErrorKind::Input, "word span out of range");
        for (int32_t w = span.first; w < span.last; ++w) {
            auto [begin, end] = enc.word_spans[w];
            for (int32_t p = begin; p < end; ++p) {
                if (ex.is_masked_position[p]) raise(ErrorKind::Input, "overlapping word spans");
                ex.is_masked_position[p] = 1;
                ex.positions.push_back(p);
                ex.mlm_targets.push_back(enc.token_ids[p]);
                ex.pos_targets.push_back(enc.pos_ids[p]);
                ex.ner_targets.push_back(enc.ner_ids[p]);
                ex.dep_targets.push_back(enc.dep_ids[p]);

                double r = rng.next_real();
                if (r < p_mask) {
                    int32_t substitute = Vocab::kMask;
                    if (cfg.lmlm_mode != LmlmMode::Off) {
                        std::string token = lmlm_mask_token_for(enc.pos_ids[p], enc.ner_ids[p],
                                                                enc.dep_ids[p], cfg.lmlm_mode, rng, tagsets);
                        auto it = vocab.index.find(token);
                        if (it != vocab.index.end()) {
                            substitute = it->second;
                        } else if (cfg.lmlm_mode == LmlmMode::All) {
                            ++ex.lmlm_fallbacks;  // unseen triple, plain [MASK]
                        } else {
                            raise(ErrorKind::Config, "LMLM token '" + token + "' missing from vocabulary");
                        }
                    }
                    ex.input_ids[p] = substitute;
                } else if (r < p_mask + p_keep) {
                    // keep the original surface id
                } else {
                    ex.input_ids[p] =
                        Vocab::kNumSpecials + static_cast<int32_t>(rng.next_index(static_cast<uint64_t>(random_pool)));
                }
            }
        }
    }
    return ex;
}

std::vector<std::string> lmlm_mask_vocabulary(LmlmMode mode, const TagSets& tagsets, const Corpus& corpus) {
    auto single = [&](TagKind kind) {
        std::vector<std::string> tokens;
        const TagSet& set = tagsets.of(kind);
        tokens.reserve(set.size());
        for (const auto& label : set.labels()) tokens.push_back(single_tag_token(kind, label));
        return tokens;
    };
    switch (mode) {
        case LmlmMode::Off:
            raise(ErrorKind::Config, "lmlm_mask_vocabulary requires a mode other than off");
        case LmlmMode::Pos: return single(TagKind::Pos);
        case LmlmMode::Ner: return single(TagKind::Ner);
        case LmlmMode::Dep: return single(TagKind::Dep);
        case LmlmMode::Mix: {
            std::vector<std::string> tokens = single(TagKind::Pos);
            for (auto& t : single(TagKind::Ner)) tokens.push_back(std::move(t));
            for (auto& t : single(TagKind::Dep)) tokens.push_back(std::move(t));
            return tokens;
        }
        case LmlmMode::All: {
            if (corpus.empty())
                raise(ErrorKind::Data, "composite mask tokens need a non-empty corpus");
            std::map<std::tuple<int32_t, int32_t, int32_t>, bool> triples;
            for (const auto& sentence : corpus)
                for (const auto& word : sentence.words)
                    triples[{tagsets.pos.id_of(word.pos), tagsets.ner.id_of(word.ner),
                             tagsets.dep.id_of(word.dep)}] = true;
            std::vector<std::string> tokens;
            tokens.reserve(triples.size());
            for (const auto& [triple, _] : triples)
                tokens.push_back(composite_token(tagsets, std::get<0>(triple), std::get<1>(triple),
                                                 std::get<2>(triple)));
            return tokens;
        }
    }
    raise(ErrorKind::Config, "unhandled lmlm mode");
}

void append_lmlm_tokens(Vocab& vocab, std::span<const std::string> tokens) {
    vocab.lmlm_begin = vocab.size();
    for (const auto& token : tokens) vocab.append(token);
}

std::string lmlm_mask_token_for(int32_t pos_id, int32_t ner_id, int32_t dep_id, LmlmMode mode,
                                Rng& rng, const TagSets& tagsets) {
    switch (mode) {
        case LmlmMode::Off:
            raise(ErrorKind::Config, "lmlm_mask_token_for requires a mode other than off");
        case LmlmMode::Pos: return single_tag_token(TagKind::Pos, tagsets.pos.label_of(pos_id));
        case LmlmMode::Ner: return single_tag_token(TagKind::Ner, tagsets.ner.label_of(ner_id));
        case LmlmMode::Dep: return single_tag_token(TagKind::Dep, tagsets.dep.label_of(dep_id));
        case LmlmMode::All: return composite_token(tagsets, pos_id, ner_id, dep_id);
        case LmlmMode::Mix:
            switch (rng.next_index(3)) {
                case 0: return single_tag_token(TagKind::Pos, tagsets.pos.label_of(pos_id));
                case 1: return single_tag_token(TagKind::Ner, tagsets.ner.label_of(ner_id));
                default: return single_tag_token(TagKind::Dep, tagsets.dep.label_of(dep_id));
            }
    }
    raise(ErrorKind::Config, "unhandled lmlm mode");
}

std::string mask_dump_line(const MaskedExample& ex) {
    std::ostringstream out;
    auto array = [&](const char* key, const std::vector<int32_t>& values) {
        out << '"' << key << "\":[";
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out << ',';
            out << values[i];
        }
        out << ']';
    };
    out << '{';
    array("input_ids", ex.input_ids);
    out << ',';
    array("masked_positions", ex.positions);
    out << ',';
    array("mlm_targets", ex.mlm_targets);
    out << ',';
    array("pos_targets", ex.pos_targets);
    out << ',';
    array("ner_targets", ex.ner_targets);
    out << ',';
    array("dep_targets", ex.dep_targets);
    out << ",\"lmlm_fallbacks\":" << ex.lmlm_fallbacks << '}';
    return out.str();
}

}  // namespace lertlab
