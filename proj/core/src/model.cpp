#include "lertlab/model.hpp"

namespace lertlab {

void validate_model(const ModelConfig& cfg) {
    if (cfg.layers < 1 || cfg.hidden < 1 || cfg.heads < 1 || cfg.ffn_inner < 1 || cfg.max_len < 3 ||
        cfg.segments < 1)
        raise(ErrorKind::Config, "model dimensions must be positive");
    if (cfg.hidden % cfg.heads != 0) raise(ErrorKind::Config, "hidden size must be divisible by heads");
    if (cfg.vocab < 5) raise(ErrorKind::Config, "model vocab must cover the five special tokens");
    if (cfg.layernorm_eps <= 0.0) raise(ErrorKind::Config, "layernorm_eps must be positive");
}

ModelConfig model_preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "micro") {
        cfg.layers = 2;
        cfg.hidden = 64;
        cfg.heads = 4;
        cfg.max_len = 128;
    } else if (name == "small") {
        cfg.layers = 12;
        cfg.hidden = 256;
        cfg.heads = 4;
        cfg.max_len = 512;
    } else if (name == "base") {
        cfg.layers = 12;
        cfg.hidden = 768;
        cfg.heads = 12;
        cfg.max_len = 512;
    } else if (name == "large") {
        cfg.layers = 24;
        cfg.hidden = 1024;
        cfg.heads = 16;
        cfg.max_len = 512;
    } else {
        raise(ErrorKind::Config, "unknown model preset '" + name + "'");
    }
    cfg.ffn_inner = 4 * cfg.hidden;
    return cfg;
}

int64_t parameter_count(const ModelConfig& cfg, const TagHeadSizes& heads) {
    const int64_t d = cfg.hidden;
    const int64_t inner = cfg.ffn_inner;
    const int64_t ln = 2 * d;

    int64_t embeddings = static_cast<int64_t>(cfg.vocab) * d + static_cast<int64_t>(cfg.max_len) * d +
                         static_cast<int64_t>(cfg.segments) * d + ln;
    int64_t per_layer = 4 * (d * d + d)           // q, k, v, o projections
                      + ln                        // attention LayerNorm
                      + inner * d + inner         // ffn.w1
                      + d * inner + d             // ffn.w2
                      + ln;                       // ffn LayerNorm
    int64_t mlm = d * d + d + ln + cfg.vocab;     // transform + LayerNorm + output bias (E is tied)
    int64_t task_heads = static_cast<int64_t>(heads.pos) * d + heads.pos +
                         static_cast<int64_t>(heads.ner) * d + heads.ner +
                         static_cast<int64_t>(heads.dep) * d + heads.dep;
    return embeddings + cfg.layers * per_layer + mlm + task_heads;
}

}  // namespace lertlab
