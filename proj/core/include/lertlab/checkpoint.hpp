#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lertlab/model.hpp"

namespace lertlab {

// Optimizer state serialized alongside the parameters: first/second Adam
// moments mirroring every parameter tensor, plus the completed step count.
struct TrainMoments {
    ParamStore<float> m;
    ParamStore<float> v;
    int64_t step = 0;
};

struct Checkpoint {
    ModelConfig config;
    TagHeadSizes heads;
    ParamStore<float> params;
    std::optional<TrainMoments> moments;
};

// File layout: 8-byte magic "LERTCKPT", little-endian u64 JSON header length,
// the JSON header (format version, model config, tensor directory of
// name/shape/offset), then raw little-endian IEEE-754 single-precision
// tensor data in directory order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lertlab
