#include <set>
#include <sstream>
#include <tuple>

#include "lertlab/corpus.hpp"
#include "lertlab/error.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/synth.hpp"

#include "doctest.h"

using namespace lertlab;

TEST_SUITE_BEGIN("masking");

namespace {

const TagSets kSets = builtin_tagsets();

struct Fixture {
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    Corpus corpus;
    Vocab vocab;
    std::vector<EncodedSentence> encoded;

    explicit Fixture(int64_t sentences, int min_clauses = 1, int max_clauses = 1, uint64_t seed = 404) {
        grammar.min_clauses = min_clauses;
        grammar.max_clauses = max_clauses;
        corpus = synth_corpus(seed, sentences, grammar);
        vocab = build_vocab(corpus);
        for (const auto& s : corpus) encoded.push_back(encode_sentence(s, vocab, kSets, 512));
    }

    std::vector<int32_t> word_sizes(size_t i) const {
        const EncodedSentence& enc = encoded[i];
        std::vector<int32_t> sizes(static_cast<size_t>(enc.word_count()));
        for (int32_t w = 0; w < enc.word_count(); ++w) sizes[static_cast<size_t>(w)] = enc.word_size(w);
        return sizes;
    }
};

}  // namespace

TEST_CASE("config validation enforces the stated invariants") {
    MaskingConfig cfg;
    validate_masking(cfg);
    cfg.mask_ratio = 0.0;
    CHECK_THROWS_AS(validate_masking(cfg), Error);
    cfg.mask_ratio = 1.0;
    CHECK_THROWS_AS(validate_masking(cfg), Error);
    cfg = MaskingConfig{};
    cfg.ngram_weights = {0.5, 0.6};
    CHECK_THROWS_AS(validate_masking(cfg), Error);
    cfg = MaskingConfig{};
    cfg.corruption_split = {0.9, 0.2, 0.1};
    CHECK_THROWS_AS(validate_masking(cfg), Error);
}

TEST_CASE("a vanishing ratio still masks at least one word") {
    MaskingConfig cfg;
    cfg.mask_ratio = 1e-9;
    Rng rng(1);
    std::vector<int32_t> sizes(100, 2);  // every word multi-subtoken
    auto spans = select_spans(sizes, rng, cfg);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].last - spans[0].first == 1);
}

TEST_CASE("spans never overlap and never cross the sentence end") {
    Fixture fx(200, 1, 4);
    MaskingConfig cfg;
    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        Rng rng(1000 + i);
        auto sizes = fx.word_sizes(i);
        auto spans = select_spans(sizes, rng, cfg);
        int32_t prev_end = -1;
        for (const auto& span : spans) {
            CHECK(span.first >= 0);
            CHECK(span.first > prev_end - 1);
            CHECK(span.first >= prev_end);
            CHECK(span.last <= static_cast<int32_t>(sizes.size()));
            CHECK(span.first < span.last);
            prev_end = span.last;
        }
    }
}

TEST_CASE("masked-subtoken fraction lands in the target window over 10k sentences") {
    // Long multi-clause sentences keep the per-sentence ceiling overhead small.
    Fixture fx(10000, 3, 6, 2024);
    MaskingConfig cfg;
    int64_t masked = 0, total = 0;
    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        Rng rng(derive_seed(9, "mask", 0, i));
        auto sizes = fx.word_sizes(i);
        auto spans = select_spans(sizes, rng, cfg);
        for (const auto& span : spans)
            for (int32_t w = span.first; w < span.last; ++w) masked += sizes[static_cast<size_t>(w)];
        total += fx.encoded[i].subtoken_count();
    }
    const double fraction = static_cast<double>(masked) / static_cast<double>(total);
    CHECK(fraction >= 0.14);
    CHECK(fraction <= 0.16);
}

TEST_CASE("whole-word property: all subtokens of a selected word are masked") {
    Fixture fx(300, 1, 3);
    MaskingConfig cfg;
    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        Rng rng(derive_seed(77, "mask", 0, i));
        const EncodedSentence& enc = fx.encoded[i];
        auto sizes = fx.word_sizes(i);
        auto spans = select_spans(sizes, rng, cfg);
        MaskedExample ex = apply_masking(enc, spans, rng, cfg, fx.vocab, kSets);
        for (int32_t w = 0; w < enc.word_count(); ++w) {
            auto [start, end] = enc.word_spans[static_cast<size_t>(w)];
            bool any = false, all = true;
            for (int32_t p = start; p < end; ++p) {
                any |= ex.is_masked_position[static_cast<size_t>(p)] != 0;
                all &= ex.is_masked_position[static_cast<size_t>(p)] != 0;
            }
            CHECK(any == all);
        }
    }
}

TEST_CASE("degenerate corruption split masks every selected position with [MASK]") {
    Fixture fx(50);
    MaskingConfig cfg;
    cfg.corruption_split = {1.0, 0.0, 0.0};
    Rng rng(5);
    const EncodedSentence& enc = fx.encoded[0];
    auto sizes = fx.word_sizes(0);
    auto spans = select_spans(sizes, rng, cfg);
    MaskedExample ex = apply_masking(enc, spans, rng, cfg, fx.vocab, kSets);
    REQUIRE(ex.masked_count() > 0);
    for (int32_t p : ex.positions) CHECK(ex.input_ids[static_cast<size_t>(p)] == Vocab::kMask);
}

TEST_CASE("corruption frequencies stay within 1.5 points of 80/10/10") {
    Fixture fx(4000, 2, 4, 31);
    MaskingConfig cfg;
    int64_t masked = 0, kept = 0, randomized = 0;
    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        Rng rng(derive_seed(8, "mask", 0, i));
        const EncodedSentence& enc = fx.encoded[i];
        auto sizes = fx.word_sizes(i);
        auto spans = select_spans(sizes, rng, cfg);
        MaskedExample ex = apply_masking(enc, spans, rng, cfg, fx.vocab, kSets);
        for (size_t s = 0; s < ex.positions.size(); ++s) {
            const size_t p = static_cast<size_t>(ex.positions[s]);
            if (ex.input_ids[p] == Vocab::kMask)
                ++masked;
            else if (ex.input_ids[p] == ex.mlm_targets[s])
                ++kept;
            else
                ++randomized;
        }
    }
    const double total = static_cast<double>(masked + kept + randomized);
    REQUIRE(total > 10000);
    CHECK(std::fabs(static_cast<double>(masked) / total - 0.80) < 0.015);
    CHECK(std::fabs(static_cast<double>(kept) / total - 0.10) < 0.015);
    CHECK(std::fabs(static_cast<double>(randomized) / total - 0.10) < 0.015);
}

TEST_CASE("mlm target is always the pre-corruption id and tags broadcast") {
    Fixture fx(100, 1, 2);
    MaskingConfig cfg;
    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        Rng rng(derive_seed(15, "mask", 0, i));
        const EncodedSentence& enc = fx.encoded[i];
        auto sizes = fx.word_sizes(i);
        auto spans = select_spans(sizes, rng, cfg);
        MaskedExample ex = apply_masking(enc, spans, rng, cfg, fx.vocab, kSets);
        for (size_t s = 0; s < ex.positions.size(); ++s) {
            const size_t p = static_cast<size_t>(ex.positions[s]);
            CHECK(ex.mlm_targets[s] == enc.token_ids[p]);
            CHECK(ex.pos_targets[s] == enc.pos_ids[p]);
            CHECK(ex.ner_targets[s] == enc.ner_ids[p]);
            CHECK(ex.dep_targets[s] == enc.dep_ids[p]);
        }
        // Unmasked positions are untouched.
        for (size_t p = 0; p < ex.input_ids.size(); ++p)
            if (!ex.is_masked_position[p]) CHECK(ex.input_ids[p] == enc.token_ids[p]);
    }
}

TEST_CASE("identical stream state reproduces masking bit for bit") {
    Fixture fx(20);
    MaskingConfig cfg;
    const EncodedSentence& enc = fx.encoded[3];
    auto sizes = fx.word_sizes(3);
    Rng r1(42), r2(42);
    auto spans1 = select_spans(sizes, r1, cfg);
    auto spans2 = select_spans(sizes, r2, cfg);
    MaskedExample a = apply_masking(enc, spans1, r1, cfg, fx.vocab, kSets);
    MaskedExample b = apply_masking(enc, spans2, r2, cfg, fx.vocab, kSets);
    CHECK(a.input_ids == b.input_ids);
    CHECK(a.positions == b.positions);
    CHECK(mask_dump_line(a) == mask_dump_line(b));
}

TEST_CASE("lmlm vocabularies have the published counts") {
    Fixture fx(200, 1, 3);
    CHECK(lmlm_mask_vocabulary(LmlmMode::Pos, kSets, fx.corpus).size() == 28);
    CHECK(lmlm_mask_vocabulary(LmlmMode::Ner, kSets, fx.corpus).size() == 13);
    CHECK(lmlm_mask_vocabulary(LmlmMode::Dep, kSets, fx.corpus).size() == 14);
    CHECK(lmlm_mask_vocabulary(LmlmMode::Mix, kSets, fx.corpus).size() == 55);

    auto pos_tokens = lmlm_mask_vocabulary(LmlmMode::Pos, kSets, fx.corpus);
    CHECK(std::find(pos_tokens.begin(), pos_tokens.end(), "[MASK-POS-n]") != pos_tokens.end());

    CHECK_THROWS_AS(lmlm_mask_vocabulary(LmlmMode::Off, kSets, fx.corpus), Error);
    CHECK_THROWS_AS(lmlm_mask_vocabulary(LmlmMode::All, kSets, Corpus{}), Error);
}

TEST_CASE("composite vocabulary matches a brute-force triple count") {
    Fixture fx(500, 1, 4, 98);
    // Independent count of distinct (pos, ner, dep) triples.
    std::set<std::tuple<std::string, std::string, std::string>> triples;
    for (const auto& sentence : fx.corpus)
        for (const auto& word : sentence.words) triples.insert({word.pos, word.ner, word.dep});
    auto tokens = lmlm_mask_vocabulary(LmlmMode::All, kSets, fx.corpus);
    CHECK(tokens.size() == triples.size());
}

TEST_CASE("lmlm token naming follows the tag") {
    Rng rng(1);
    CHECK(lmlm_mask_token_for(kSets.pos.id_of("n"), kSets.ner.id_of("O"), kSets.dep.id_of("HED"),
                              LmlmMode::Pos, rng, kSets) == "[MASK-POS-n]");
    CHECK(lmlm_mask_token_for(kSets.pos.id_of("v"), kSets.ner.id_of("O"), kSets.dep.id_of("HED"),
                              LmlmMode::Dep, rng, kSets) == "[MASK-DEP-HED]");
    CHECK(lmlm_mask_token_for(kSets.pos.id_of("v"), kSets.ner.id_of("S-Nh"), kSets.dep.id_of("VOB"),
                              LmlmMode::All, rng, kSets) == "[MASK-ALL-v-S-Nh-VOB]");
}

TEST_CASE("mix mode picks each task about a third of the time") {
    Rng rng(77);
    int pos = 0, ner = 0, dep = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string token = lmlm_mask_token_for(0, 0, 0, LmlmMode::Mix, rng, kSets);
        if (token.rfind("[MASK-POS-", 0) == 0)
            ++pos;
        else if (token.rfind("[MASK-NER-", 0) == 0)
            ++ner;
        else
            ++dep;
    }
    for (int count : {pos, ner, dep}) CHECK(std::fabs(count / 10000.0 - 1.0 / 3.0) < 0.02);
}

TEST_CASE("single-tag lmlm masking only changes the substitute token") {
    Fixture fx(60, 1, 2, 5);
    MaskingConfig off_cfg;
    MaskingConfig pos_cfg;
    pos_cfg.lmlm_mode = LmlmMode::Pos;
    Vocab lmlm_vocab = fx.vocab;
    append_lmlm_tokens(lmlm_vocab, lmlm_mask_vocabulary(LmlmMode::Pos, kSets, fx.corpus));

    for (size_t i = 0; i < fx.encoded.size(); ++i) {
        const EncodedSentence& enc = fx.encoded[i];
        auto sizes = fx.word_sizes(i);
        Rng r1(derive_seed(4, "mask", 0, i)), r2(derive_seed(4, "mask", 0, i));
        auto spans1 = select_spans(sizes, r1, off_cfg);
        auto spans2 = select_spans(sizes, r2, pos_cfg);
        MaskedExample off = apply_masking(enc, spans1, r1, off_cfg, fx.vocab, kSets);
        MaskedExample lm = apply_masking(enc, spans2, r2, pos_cfg, lmlm_vocab, kSets);
        REQUIRE(off.positions == lm.positions);
        for (size_t s = 0; s < off.positions.size(); ++s) {
            const size_t p = static_cast<size_t>(off.positions[s]);
            if (off.input_ids[p] == Vocab::kMask) {
                const std::string& token = lmlm_vocab.tokens[static_cast<size_t>(lm.input_ids[p])];
                CHECK(token == "[MASK-POS-" + kSets.pos.label_of(off.pos_targets[s]) + "]");
            } else {
                CHECK(lm.input_ids[p] == off.input_ids[p]);  // keep/random unchanged
            }
        }
    }
}

TEST_CASE("unseen composite triples fall back to plain [MASK] and are counted") {
    // LMLM vocabulary built from a corpus that lacks the triple being masked.
    std::istringstream small("x\tn\tO\tSBV\ny\tv\tO\tHED\n");
    Corpus lmlm_source = read_corpus(small, kSets);

    std::istringstream other("z\ta\tO\tATT\nw\tn\tO\tSBV\nv\tv\tO\tHED\n");
    Corpus target = read_corpus(other, kSets);
    Corpus combined = lmlm_source;
    combined.insert(combined.end(), target.begin(), target.end());
    Vocab vocab = build_vocab(combined);
    append_lmlm_tokens(vocab, lmlm_mask_vocabulary(LmlmMode::All, kSets, lmlm_source));

    MaskingConfig cfg;
    cfg.lmlm_mode = LmlmMode::All;
    cfg.corruption_split = {1.0, 0.0, 0.0};
    cfg.mask_ratio = 0.99;  // mask everything we can
    EncodedSentence enc = encode_sentence(target[0], vocab, kSets, 64);
    std::vector<int32_t> sizes(static_cast<size_t>(enc.word_count()));
    for (int32_t w = 0; w < enc.word_count(); ++w) sizes[static_cast<size_t>(w)] = enc.word_size(w);
    Rng rng(3);
    auto spans = select_spans(sizes, rng, cfg);
    MaskedExample ex = apply_masking(enc, spans, rng, cfg, vocab, kSets);
    CHECK(ex.lmlm_fallbacks > 0);
    // The (a, O, ATT) triple was never seen, so its positions fall back.
    bool used_plain_mask = false;
    for (int32_t p : ex.positions)
        used_plain_mask |= ex.input_ids[static_cast<size_t>(p)] == Vocab::kMask;
    CHECK(used_plain_mask);
}

TEST_CASE("mask dump lines carry explicit target arrays") {
    Fixture fx(5);
    MaskingConfig cfg;
    Rng rng(9);
    auto sizes = fx.word_sizes(0);
    auto spans = select_spans(sizes, rng, cfg);
    MaskedExample ex = apply_masking(fx.encoded[0], spans, rng, cfg, fx.vocab, kSets);
    const std::string line = mask_dump_line(ex);
    CHECK(line.find("\"input_ids\":[") != std::string::npos);
    CHECK(line.find("\"mlm_targets\":[") != std::string::npos);
    CHECK(line.find("\"dep_targets\":[") != std::string::npos);
    CHECK(line.find("\"lmlm_fallbacks\":0") != std::string::npos);
    CHECK(line.back() == '}');
}

TEST_SUITE_END();
