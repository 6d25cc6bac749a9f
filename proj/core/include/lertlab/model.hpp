#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lertlab/error.hpp"
#include "lertlab/rng.hpp"
#include "lertlab/tags.hpp"
#include "lertlab/tensor.hpp"

namespace lertlab {

struct ModelConfig {
    int32_t layers = 2;
    int32_t hidden = 64;
    int32_t heads = 4;
    int32_t ffn_inner = 256;  // 4 * hidden by convention
    int32_t vocab = 0;        // filled from the corpus vocabulary
    int32_t max_len = 128;
    int32_t segments = 2;
    double layernorm_eps = 1e-12;
    double init_std = 0.02;
};

void validate_model(const ModelConfig& cfg);

// Presets: micro (desk default) plus the published small/base/large shapes.
// vocab is left at 0 except where a caller sets it.
ModelConfig model_preset(const std::string& name);

struct TagHeadSizes {
    int32_t pos = 28;
    int32_t ner = 13;
    int32_t dep = 14;
};

inline TagHeadSizes tag_head_sizes(const TagSets& tagsets) {
    return {static_cast<int32_t>(tagsets.pos.size()), static_cast<int32_t>(tagsets.ner.size()),
            static_cast<int32_t>(tagsets.dep.size())};
}

// Named tensors in a stable directory order (creation order). The token
// embedding is a single storage shared by the input lookup and the MLM
// output projection.
template <typename T>
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor<T>> tensors;
    std::unordered_map<std::string, size_t> index;

    Tensor<T>& add(const std::string& name, std::vector<int64_t> shape) {
        auto [it, inserted] = index.emplace(name, tensors.size());
        if (!inserted) raise(ErrorKind::Config, "duplicate tensor name '" + name + "'");
        names.push_back(name);
        tensors.emplace_back(std::move(shape));
        return tensors.back();
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    Tensor<T>& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) raise(ErrorKind::Config, "unknown tensor '" + name + "'");
        return tensors[it->second];
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) raise(ErrorKind::Config, "unknown tensor '" + name + "'");
        return tensors[it->second];
    }
    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }
    // Same names and shapes, zero-filled, as accumulator type U.
    template <typename U>
    ParamStore<U> zeros_like() const {
        ParamStore<U> out;
        for (size_t i = 0; i < tensors.size(); ++i) out.add(names[i], tensors[i].shape);
        return out;
    }
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (size_t i = 0; i < tensors.size(); ++i) {
            auto& t = out.add(names[i], tensors[i].shape);
            for (int64_t j = 0; j < tensors[i].numel(); ++j)
                t.data[static_cast<size_t>(j)] = static_cast<U>(tensors[i].data[static_cast<size_t>(j)]);
        }
        return out;
    }
};

// Closed-form parameter count of the architecture, no allocation.
int64_t parameter_count(const ModelConfig& cfg, const TagHeadSizes& heads);

// Weight decay exemption: biases and LayerNorm parameters (all 1-D tensors).
inline bool decay_exempt(const Tensor<float>& t) { return t.shape.size() < 2; }

namespace detail {

template <typename T>
void init_matrix(Tensor<T>& t, Rng& rng, double stddev) {
    for (auto& v : t.data) v = static_cast<T>(rng.next_trunc_normal(stddev));
}

}  // namespace detail

// Truncated-normal weights (std init_std), zero biases, unit LayerNorm gains.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, const TagHeadSizes& heads, uint64_t seed) {
    validate_model(cfg);
    ParamStore<T> p;
    Rng rng(derive_seed(seed, "init"));
    const int64_t d = cfg.hidden;
    const int64_t inner = cfg.ffn_inner;

    auto weight = [&](const std::string& name, std::vector<int64_t> shape) {
        detail::init_matrix(p.add(name, std::move(shape)), rng, cfg.init_std);
    };
    auto zeros = [&](const std::string& name, std::vector<int64_t> shape) { p.add(name, std::move(shape)); };
    auto layernorm = [&](const std::string& prefix) {
        p.add(prefix + ".g", {d}).fill(T{1});
        zeros(prefix + ".b", {d});
    };

    weight("embed.tok", {cfg.vocab, d});
    weight("embed.pos", {cfg.max_len, d});
    weight("embed.seg", {cfg.segments, d});
    layernorm("embed.ln");
    for (int32_t l = 0; l < cfg.layers; ++l) {
        std::string lp = "layer" + std::to_string(l);
        for (const char* proj : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"}) weight(lp + proj, {d, d});
        for (const char* bias : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"}) zeros(lp + bias, {d});
        layernorm(lp + ".attn.ln");
        weight(lp + ".ffn.w1", {inner, d});
        zeros(lp + ".ffn.b1", {inner});
        weight(lp + ".ffn.w2", {d, inner});
        zeros(lp + ".ffn.b2", {d});
        layernorm(lp + ".ffn.ln");
    }
    weight("mlm.fc.w", {d, d});
    zeros("mlm.fc.b", {d});
    layernorm("mlm.ln");
    zeros("mlm.bias", {cfg.vocab});
    weight("head.pos.w", {heads.pos, d});
    zeros("head.pos.b", {heads.pos});
    weight("head.ner.w", {heads.ner, d});
    zeros("head.ner.b", {heads.ner});
    weight("head.dep.w", {heads.dep, d});
    zeros("head.dep.b", {heads.dep});
    return p;
}

}  // namespace lertlab
