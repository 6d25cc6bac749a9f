#include <benchmark/benchmark.h>

#include "lertlab/model.hpp"
#include "lertlab/trainer.hpp"

namespace {

using namespace lertlab;

void BM_adamw_step_micro(benchmark::State& state) {
    ModelConfig cfg = model_preset("micro");
    cfg.vocab = 128;
    auto params = init_params<float>(cfg, TagHeadSizes{}, 3);
    AdamState adam = init_adam(params);
    ParamStore<double> grads = params.zeros_like<double>();
    Rng rng(9);
    for (auto& tensor : grads.tensors)
        for (auto& g : tensor.data) g = rng.next_normal() * 1e-3;

    OptimizerConfig opt;
    opt.total_steps = 1 << 30;
    for (auto _ : state) {
        adamw_step(params, grads, adam, opt, 1e-4);
        benchmark::DoNotOptimize(params.tensors.front().data.data());
    }
    state.SetItemsProcessed(state.iterations() * params.total_params());
}
BENCHMARK(BM_adamw_step_micro);

}  // namespace
