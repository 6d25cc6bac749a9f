#include <benchmark/benchmark.h>

#include "lertlab/masking.hpp"
#include "lertlab/synth.hpp"

namespace {

using namespace lertlab;

void BM_select_and_apply(benchmark::State& state) {
    TagSets tagsets = builtin_tagsets();
    SynthGrammarConfig grammar = SynthGrammarConfig::defaults();
    grammar.min_clauses = 2;
    grammar.max_clauses = 5;
    Corpus corpus = synth_corpus(11, 256, grammar);
    Vocab vocab = build_vocab(corpus);
    MaskingConfig cfg;

    std::vector<EncodedSentence> encoded;
    std::vector<std::vector<int32_t>> sizes;
    for (const auto& sentence : corpus) {
        encoded.push_back(encode_sentence(sentence, vocab, tagsets, 512));
        std::vector<int32_t> s(static_cast<size_t>(encoded.back().word_count()));
        for (int32_t w = 0; w < encoded.back().word_count(); ++w) s[static_cast<size_t>(w)] = encoded.back().word_size(w);
        sizes.push_back(std::move(s));
    }

    uint64_t epoch = 0;
    for (auto _ : state) {
        ++epoch;
        int64_t masked = 0;
        for (size_t i = 0; i < encoded.size(); ++i) {
            Rng rng(derive_seed(5, "mask", epoch, i));
            auto spans = select_spans(sizes[i], rng, cfg);
            MaskedExample ex = apply_masking(encoded[i], spans, rng, cfg, vocab, tagsets);
            masked += ex.masked_count();
        }
        benchmark::DoNotOptimize(masked);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(encoded.size()));
}
BENCHMARK(BM_select_and_apply);

}  // namespace
