#include "lertlab/encoder.hpp"

#include <algorithm>

namespace lertlab {

Batch make_batch(std::span<const MaskedExample> examples) {
    Batch batch;
    batch.count = static_cast<int64_t>(examples.size());
    for (const auto& ex : examples)
        batch.length = std::max(batch.length, static_cast<int64_t>(ex.input_ids.size()));
    batch.ids.assign(static_cast<size_t>(batch.count * batch.length), Vocab::kPad);
    batch.segments.assign(static_cast<size_t>(batch.count * batch.length), 0);
    batch.live.assign(static_cast<size_t>(batch.count * batch.length), 0);
    for (int64_t b = 0; b < batch.count; ++b) {
        const MaskedExample& ex = examples[static_cast<size_t>(b)];
        for (size_t t = 0; t < ex.input_ids.size(); ++t) {
            batch.ids[static_cast<size_t>(b * batch.length) + t] = ex.input_ids[t];
            batch.live[static_cast<size_t>(b * batch.length) + t] = 1;
        }
        for (size_t s = 0; s < ex.positions.size(); ++s) {
            batch.slots.push_back({static_cast<int32_t>(b), ex.positions[s], ex.mlm_targets[s],
                                   ex.pos_targets[s], ex.ner_targets[s], ex.dep_targets[s]});
        }
    }
    return batch;
}

LossBreakdown to_breakdown(const LossSums& sums) {
    LossBreakdown out;
    out.masked_count = sums.count;
    if (sums.count > 0) {
        const double inv = 1.0 / static_cast<double>(sums.count);
        out.mlm_loss = sums.mlm * inv;
        out.pos_loss = sums.pos * inv;
        out.ner_loss = sums.ner * inv;
        out.dep_loss = sums.dep * inv;
    }
    return out;
}

}  // namespace lertlab
