#include <benchmark/benchmark.h>

#include "lertlab/encoder.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/synth.hpp"

namespace {

using namespace lertlab;

struct EncoderSetup {
    TagSets tagsets = builtin_tagsets();
    Corpus corpus = synth_corpus(1, 64, SynthGrammarConfig::defaults());
    Vocab vocab = build_vocab(corpus);
    ModelConfig cfg = model_preset("micro");
    ParamStore<float> params;
    Batch batch;

    explicit EncoderSetup(int64_t batch_size) {
        cfg.vocab = vocab.size();
        params = init_params<float>(cfg, tag_head_sizes(tagsets), 7);
        MaskingConfig masking;
        std::vector<MaskedExample> examples;
        for (int64_t i = 0; i < batch_size; ++i) {
            EncodedSentence enc = encode_sentence(corpus[static_cast<size_t>(i)], vocab, tagsets, cfg.max_len);
            std::vector<int32_t> sizes(static_cast<size_t>(enc.word_count()));
            for (int32_t w = 0; w < enc.word_count(); ++w) sizes[static_cast<size_t>(w)] = enc.word_size(w);
            Rng rng(derive_seed(3, "mask", 0, static_cast<uint64_t>(i)));
            auto spans = select_spans(sizes, rng, masking);
            examples.push_back(apply_masking(enc, spans, rng, masking, vocab, tagsets));
        }
        batch = make_batch(examples);
    }
};

void BM_forward_micro(benchmark::State& state) {
    EncoderSetup setup(state.range(0));
    for (auto _ : state) {
        auto fwd = forward(setup.params, setup.batch, setup.cfg);
        benchmark::DoNotOptimize(fwd.sums.mlm);
    }
    state.SetItemsProcessed(state.iterations() * setup.batch.count * setup.batch.length);
}
BENCHMARK(BM_forward_micro)->Arg(4)->Arg(16);

void BM_forward_backward_micro(benchmark::State& state) {
    EncoderSetup setup(state.range(0));
    const TaskWeights weights{1.0, 1.0, 1.0};
    for (auto _ : state) {
        auto fwd = forward(setup.params, setup.batch, setup.cfg);
        ParamStore<double> grads = setup.params.zeros_like<double>();
        backward(setup.params, setup.batch, setup.cfg, fwd, weights,
                 1.0 / static_cast<double>(fwd.sums.count), grads);
        benchmark::DoNotOptimize(grads.tensors.front().data.data());
    }
    state.SetItemsProcessed(state.iterations() * setup.batch.count * setup.batch.length);
}
BENCHMARK(BM_forward_backward_micro)->Arg(4)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
