#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lertlab/error.hpp"
#include "lertlab/masking.hpp"
#include "lertlab/model.hpp"
#include "lertlab/tensor.hpp"

namespace lertlab {

// One masked prediction site inside a padded batch.
struct MaskedSlot {
    int32_t seq = 0;
    int32_t pos = 0;
    int32_t mlm_target = 0;
    int32_t pos_target = 0;
    int32_t ner_target = 0;
    int32_t dep_target = 0;
};

// Padded batch. PAD fills the tail of shorter sequences and is excluded from
// attention by the live mask.
struct Batch {
    int64_t count = 0;   // sequences
    int64_t length = 0;  // padded length
    std::vector<int32_t> ids;       // count * length
    std::vector<int32_t> segments;  // count * length, all zero here
    std::vector<uint8_t> live;      // count * length
    std::vector<MaskedSlot> slots;  // ascending (seq, pos)

    int64_t masked_count() const { return static_cast<int64_t>(slots.size()); }
};

Batch make_batch(std::span<const MaskedExample> examples);

// Sum (not mean) of the per-position negative log-likelihoods, kept separate
// per head so micro-batch sums can be pooled before normalizing.
struct LossSums {
    double mlm = 0.0;
    double pos = 0.0;
    double ner = 0.0;
    double dep = 0.0;
    int64_t count = 0;
};

struct LossBreakdown {
    double mlm_loss = 0.0;
    double pos_loss = 0.0;
    double ner_loss = 0.0;
    double dep_loss = 0.0;
    int64_t masked_count = 0;
    double combined = 0.0;  // filled by the schedule's combine step
};

// Mean losses; a zero masked count yields zero losses (degenerate batch).
LossBreakdown to_breakdown(const LossSums& sums);

struct TaskWeights {
    double pos = 1.0;
    double ner = 1.0;
    double dep = 1.0;
};

namespace nn {

template <typename T>
struct LnCache {
    std::vector<T> mean;
    std::vector<T> rstd;
};

// y = x W^T + b with W of shape (out, in); dot products accumulate in double.
template <typename T>
void linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
    const int64_t rows = x.rows(), in = x.cols(), out = w.dim(0);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        for (int64_t o = 0; o < out; ++o) {
            const T* wr = w.row(o);
            double acc = static_cast<double>(b.data[static_cast<size_t>(o)]);
            for (int64_t i = 0; i < in; ++i) acc += static_cast<double>(xr[i]) * static_cast<double>(wr[i]);
            yr[o] = static_cast<T>(acc);
        }
    }
}

// Backward of linear: accumulates dW, db and writes/accumulates dx.
template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<double>& dy,
                     Tensor<double>& dw, Tensor<double>& db, Tensor<double>* dx, bool accumulate_dx) {
    const int64_t rows = x.rows(), in = x.cols(), out = w.dim(0);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x.row(r);
        const double* dyr = dy.row(r);
        for (int64_t o = 0; o < out; ++o) {
            const double g = dyr[o];
            if (g == 0.0) continue;
            db.data[static_cast<size_t>(o)] += g;
            double* dwr = dw.row(o);
            for (int64_t i = 0; i < in; ++i) dwr[i] += g * static_cast<double>(xr[i]);
        }
        if (dx) {
            double* dxr = dx->row(r);
            for (int64_t i = 0; i < in; ++i) {
                double acc = accumulate_dx ? dxr[i] : 0.0;
                for (int64_t o = 0; o < out; ++o)
                    acc += dyr[o] * static_cast<double>(w.row(o)[i]);
                dxr[i] = acc;
            }
        }
    }
}

template <typename T>
void layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps,
               Tensor<T>& y, LnCache<T>& cache) {
    const int64_t rows = x.rows(), d = x.cols();
    cache.mean.resize(static_cast<size_t>(rows));
    cache.rstd.resize(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x.row(r);
        double mean = 0.0;
        for (int64_t i = 0; i < d; ++i) mean += static_cast<double>(xr[i]);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            double c = static_cast<double>(xr[i]) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double rstd = 1.0 / std::sqrt(var + eps);
        cache.mean[static_cast<size_t>(r)] = static_cast<T>(mean);
        cache.rstd[static_cast<size_t>(r)] = static_cast<T>(rstd);
        T* yr = y.row(r);
        for (int64_t i = 0; i < d; ++i) {
            double norm = (static_cast<double>(xr[i]) - mean) * rstd;
            yr[i] = static_cast<T>(norm * static_cast<double>(gain.data[static_cast<size_t>(i)]) +
                                   static_cast<double>(bias.data[static_cast<size_t>(i)]));
        }
    }
}

template <typename T>
void layernorm_backward(const Tensor<T>& x, const Tensor<T>& gain, const LnCache<T>& cache,
                        const Tensor<double>& dy, Tensor<double>& dgain, Tensor<double>& dbias,
                        Tensor<double>& dx, bool accumulate_dx) {
    const int64_t rows = x.rows(), d = x.cols();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        const double mean = static_cast<double>(cache.mean[static_cast<size_t>(r)]);
        const double rstd = static_cast<double>(cache.rstd[static_cast<size_t>(r)]);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            double xhat = (static_cast<double>(xr[i]) - mean) * rstd;
            double dxhat = dyr[i] * static_cast<double>(gain.data[static_cast<size_t>(i)]);
            dgain.data[static_cast<size_t>(i)] += dyr[i] * xhat;
            dbias.data[static_cast<size_t>(i)] += dyr[i];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (int64_t i = 0; i < d; ++i) {
            double xhat = (static_cast<double>(xr[i]) - mean) * rstd;
            double dxhat = dyr[i] * static_cast<double>(gain.data[static_cast<size_t>(i)]);
            double v = rstd * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
            if (accumulate_dx)
                dxr[i] += v;
            else
                dxr[i] = v;
        }
    }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

// Softmax rows plus, per row, the summed negative log-likelihood of the
// target id, accumulated in double.
template <typename T>
double softmax_rows_nll(Tensor<T>& logits_to_probs, std::span<const int32_t> targets) {
    const int64_t rows = logits_to_probs.rows(), width = logits_to_probs.cols();
    double nll = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        T* row = logits_to_probs.row(r);
        double maxv = static_cast<double>(row[0]);
        for (int64_t i = 1; i < width; ++i) maxv = std::max(maxv, static_cast<double>(row[i]));
        double sum = 0.0;
        for (int64_t i = 0; i < width; ++i) sum += std::exp(static_cast<double>(row[i]) - maxv);
        const double log_sum = std::log(sum);
        const int32_t target = targets[static_cast<size_t>(r)];
        if (target < 0 || target >= width) raise(ErrorKind::Input, "target id outside head width");
        nll += -(static_cast<double>(row[target]) - maxv - log_sum);
        const double inv = 1.0 / sum;
        for (int64_t i = 0; i < width; ++i)
            row[i] = static_cast<T>(std::exp(static_cast<double>(row[i]) - maxv) * inv);
    }
    return nll;
}

// Mean negative log-likelihood of the target in each probability row.
// An empty batch (M = 0) is defined as 0 and bumps the warning counter.
template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const int32_t> targets,
                     int64_t* degenerate_counter = nullptr) {
    const int64_t rows = probs.rows(), width = probs.cols();
    if (rows == 0) {
        if (degenerate_counter) ++*degenerate_counter;
        return 0.0;
    }
    if (static_cast<int64_t>(targets.size()) != rows)
        raise(ErrorKind::Input, "one target id per probability row required");
    double total = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        const int32_t target = targets[static_cast<size_t>(r)];
        if (target < 0 || target >= width) raise(ErrorKind::Input, "target id outside row width");
        total += -std::log(static_cast<double>(probs.row(r)[target]));
    }
    return total / static_cast<double>(rows);
}

}  // namespace nn

template <typename T>
struct LayerCache {
    Tensor<T> input;     // (B*T, d)
    Tensor<T> q, k, v;   // (B*T, d)
    Tensor<T> att;       // (B, A, T, T)
    Tensor<T> ctx;       // (B*T, d) heads re-concatenated
    Tensor<T> attn_res;  // (B*T, d) input + attention output
    nn::LnCache<T> ln1;
    Tensor<T> ln1_out;   // (B*T, d)
    Tensor<T> ffn_pre;   // (B*T, inner)
    Tensor<T> ffn_act;   // (B*T, inner)
    Tensor<T> ffn_res;   // (B*T, d) ln1_out + ffn output
    nn::LnCache<T> ln2;
    Tensor<T> out;       // (B*T, d)
};

template <typename T>
struct ForwardResult {
    Tensor<T> hidden;           // H: (B*T, d)
    Tensor<T> mlm_input;        // H^m: (k, d) gathered masked rows
    Tensor<T> mlm_fc_pre;       // (k, d)
    Tensor<T> mlm_fc_act;       // (k, d)
    nn::LnCache<T> mlm_ln;
    Tensor<T> mlm_transformed;  // H~^m: (k, d)
    Tensor<T> mlm_probs;        // (k, V)
    Tensor<T> pos_probs;        // (k, V_P)
    Tensor<T> ner_probs;        // (k, V_N)
    Tensor<T> dep_probs;        // (k, V_D)
    LossSums sums;

    Tensor<T> embed_sum;  // (B*T, d) pre-LayerNorm embedding sum
    nn::LnCache<T> embed_ln;
    std::vector<LayerCache<T>> layers;
};

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& where) {
    for (T v : t.data)
        if (!std::isfinite(static_cast<double>(v)))
            raise(ErrorKind::Numeric, "non-finite activation in " + where);
}

}  // namespace detail

// Post-LayerNorm encoder plus MLM transform and the four prediction heads,
// evaluated only at masked positions. Deterministic: fixed iteration order,
// no threading.
template <typename T>
ForwardResult<T> forward(const ParamStore<T>& params, const Batch& batch, const ModelConfig& cfg) {
    const int64_t B = batch.count, L = batch.length, d = cfg.hidden;
    const int64_t n = B * L;
    const int64_t A = cfg.heads, hd = d / A;
    if (L > cfg.max_len) raise(ErrorKind::Input, "batch length exceeds max_len");
    for (int32_t id : batch.ids)
        if (id < 0 || id >= cfg.vocab) raise(ErrorKind::Input, "token id outside the vocabulary");

    ForwardResult<T> fwd;
    const Tensor<T>& tok = params.at("embed.tok");
    const Tensor<T>& pos = params.at("embed.pos");
    const Tensor<T>& seg = params.at("embed.seg");

    fwd.embed_sum = Tensor<T>({n, d});
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t t = 0; t < L; ++t) {
            const int64_t r = b * L + t;
            const T* te = tok.row(batch.ids[static_cast<size_t>(r)]);
            const T* pe = pos.row(t);
            const T* se = seg.row(batch.segments[static_cast<size_t>(r)]);
            T* out = fwd.embed_sum.row(r);
            for (int64_t i = 0; i < d; ++i)
                out[i] = static_cast<T>(static_cast<double>(te[i]) + static_cast<double>(pe[i]) +
                                        static_cast<double>(se[i]));
        }
    }
    Tensor<T> x({n, d});
    nn::layernorm(fwd.embed_sum, params.at("embed.ln.g"), params.at("embed.ln.b"), cfg.layernorm_eps, x,
                  fwd.embed_ln);
    detail::check_finite(x, "embed.ln");

    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    fwd.layers.resize(static_cast<size_t>(cfg.layers));
    for (int32_t l = 0; l < cfg.layers; ++l) {
        LayerCache<T>& c = fwd.layers[static_cast<size_t>(l)];
        const std::string lp = "layer" + std::to_string(l);
        c.input = std::move(x);
        c.q = Tensor<T>({n, d});
        c.k = Tensor<T>({n, d});
        c.v = Tensor<T>({n, d});
        nn::linear(c.input, params.at(lp + ".attn.wq"), params.at(lp + ".attn.bq"), c.q);
        nn::linear(c.input, params.at(lp + ".attn.wk"), params.at(lp + ".attn.bk"), c.k);
        nn::linear(c.input, params.at(lp + ".attn.wv"), params.at(lp + ".attn.bv"), c.v);

        c.att = Tensor<T>({B, A, L, L});
        c.ctx = Tensor<T>({n, d});
        std::vector<double> scores(static_cast<size_t>(L));
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t h = 0; h < A; ++h) {
                for (int64_t t = 0; t < L; ++t) {
                    const int64_t rq = b * L + t;
                    T* att_row = c.att.data.data() + ((b * A + h) * L + t) * L;
                    if (!batch.live[static_cast<size_t>(rq)]) continue;  // PAD query: zero row
                    const T* qr = c.q.row(rq) + h * hd;
                    double maxv = -1e300;
                    for (int64_t u = 0; u < L; ++u) {
                        if (!batch.live[static_cast<size_t>(b * L + u)]) continue;
                        const T* kr = c.k.row(b * L + u) + h * hd;
                        double acc = 0.0;
                        for (int64_t i = 0; i < hd; ++i)
                            acc += static_cast<double>(qr[i]) * static_cast<double>(kr[i]);
                        scores[static_cast<size_t>(u)] = acc * scale;
                        maxv = std::max(maxv, acc * scale);
                    }
                    double sum = 0.0;
                    for (int64_t u = 0; u < L; ++u) {
                        if (!batch.live[static_cast<size_t>(b * L + u)]) continue;
                        sum += std::exp(scores[static_cast<size_t>(u)] - maxv);
                    }
                    const double inv = 1.0 / sum;
                    for (int64_t u = 0; u < L; ++u) {
                        if (!batch.live[static_cast<size_t>(b * L + u)]) continue;
                        att_row[u] = static_cast<T>(std::exp(scores[static_cast<size_t>(u)] - maxv) * inv);
                    }
                    T* ctx = c.ctx.row(rq) + h * hd;
                    for (int64_t i = 0; i < hd; ++i) {
                        double acc = 0.0;
                        for (int64_t u = 0; u < L; ++u) {
                            const double a = static_cast<double>(att_row[u]);
                            if (a != 0.0)
                                acc += a * static_cast<double>(c.v.row(b * L + u)[h * hd + i]);
                        }
                        ctx[i] = static_cast<T>(acc);
                    }
                }
            }
        }

        Tensor<T> attn_out({n, d});
        nn::linear(c.ctx, params.at(lp + ".attn.wo"), params.at(lp + ".attn.bo"), attn_out);
        c.attn_res = Tensor<T>({n, d});
        for (int64_t i = 0; i < n * d; ++i)
            c.attn_res.data[static_cast<size_t>(i)] =
                static_cast<T>(static_cast<double>(c.input.data[static_cast<size_t>(i)]) +
                               static_cast<double>(attn_out.data[static_cast<size_t>(i)]));
        c.ln1_out = Tensor<T>({n, d});
        nn::layernorm(c.attn_res, params.at(lp + ".attn.ln.g"), params.at(lp + ".attn.ln.b"),
                      cfg.layernorm_eps, c.ln1_out, c.ln1);

        c.ffn_pre = Tensor<T>({n, cfg.ffn_inner});
        nn::linear(c.ln1_out, params.at(lp + ".ffn.w1"), params.at(lp + ".ffn.b1"), c.ffn_pre);
        c.ffn_act = Tensor<T>({n, cfg.ffn_inner});
        for (int64_t i = 0; i < c.ffn_pre.numel(); ++i)
            c.ffn_act.data[static_cast<size_t>(i)] =
                static_cast<T>(nn::gelu(static_cast<double>(c.ffn_pre.data[static_cast<size_t>(i)])));
        Tensor<T> ffn_out({n, d});
        nn::linear(c.ffn_act, params.at(lp + ".ffn.w2"), params.at(lp + ".ffn.b2"), ffn_out);
        c.ffn_res = Tensor<T>({n, d});
        for (int64_t i = 0; i < n * d; ++i)
            c.ffn_res.data[static_cast<size_t>(i)] =
                static_cast<T>(static_cast<double>(c.ln1_out.data[static_cast<size_t>(i)]) +
                               static_cast<double>(ffn_out.data[static_cast<size_t>(i)]));
        c.out = Tensor<T>({n, d});
        nn::layernorm(c.ffn_res, params.at(lp + ".ffn.ln.g"), params.at(lp + ".ffn.ln.b"),
                      cfg.layernorm_eps, c.out, c.ln2);
        detail::check_finite(c.out, lp);
        x = c.out;  // copy; the cache keeps the layer output
    }
    fwd.hidden = std::move(x);

    // Gather masked rows, transform, and run the four heads.
    const int64_t k = batch.masked_count();
    fwd.mlm_input = Tensor<T>({k, d});
    for (int64_t s = 0; s < k; ++s) {
        const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
        const T* src = fwd.hidden.row(static_cast<int64_t>(slot.seq) * L + slot.pos);
        std::copy(src, src + d, fwd.mlm_input.row(s));
    }
    fwd.mlm_fc_pre = Tensor<T>({k, d});
    nn::linear(fwd.mlm_input, params.at("mlm.fc.w"), params.at("mlm.fc.b"), fwd.mlm_fc_pre);
    fwd.mlm_fc_act = Tensor<T>({k, d});
    for (int64_t i = 0; i < fwd.mlm_fc_pre.numel(); ++i)
        fwd.mlm_fc_act.data[static_cast<size_t>(i)] =
            static_cast<T>(nn::gelu(static_cast<double>(fwd.mlm_fc_pre.data[static_cast<size_t>(i)])));
    fwd.mlm_transformed = Tensor<T>({k, d});
    nn::layernorm(fwd.mlm_fc_act, params.at("mlm.ln.g"), params.at("mlm.ln.b"), cfg.layernorm_eps,
                  fwd.mlm_transformed, fwd.mlm_ln);

    std::vector<int32_t> mlm_targets, pos_targets, ner_targets, dep_targets;
    mlm_targets.reserve(static_cast<size_t>(k));
    for (const MaskedSlot& slot : batch.slots) {
        mlm_targets.push_back(slot.mlm_target);
        pos_targets.push_back(slot.pos_target);
        ner_targets.push_back(slot.ner_target);
        dep_targets.push_back(slot.dep_target);
    }

    fwd.mlm_probs = Tensor<T>({k, cfg.vocab});
    nn::linear(fwd.mlm_transformed, tok, params.at("mlm.bias"), fwd.mlm_probs);
    fwd.sums.mlm = nn::softmax_rows_nll(fwd.mlm_probs, mlm_targets);

    auto run_head = [&](const char* w, const char* b, Tensor<T>& probs,
                        std::span<const int32_t> targets) {
        const Tensor<T>& weight = params.at(w);
        probs = Tensor<T>({k, weight.dim(0)});
        nn::linear(fwd.mlm_transformed, weight, params.at(b), probs);
        return nn::softmax_rows_nll(probs, targets);
    };
    fwd.sums.pos = run_head("head.pos.w", "head.pos.b", fwd.pos_probs, pos_targets);
    fwd.sums.ner = run_head("head.ner.w", "head.ner.b", fwd.ner_probs, ner_targets);
    fwd.sums.dep = run_head("head.dep.w", "head.dep.b", fwd.dep_probs, dep_targets);
    fwd.sums.count = k;
    return fwd;
}

// Backward through the encoder blocks and embeddings given dx, the gradient
// with respect to the final hidden states H (shape B*T x d). Accumulates
// into grads; dx is consumed.
template <typename T>
void encoder_backward(const ParamStore<T>& params, const Batch& batch, const ModelConfig& cfg,
                      const ForwardResult<T>& fwd, Tensor<double> dx, ParamStore<double>& grads);

// Gradient of combined = inv_m * (sum_mlm + w.pos*sum_pos + w.ner*sum_ner +
// w.dep*sum_dep) with respect to every parameter, accumulated into grads.
// inv_m is 1/M of the (possibly pooled) masked-position count.
template <typename T>
void backward(const ParamStore<T>& params, const Batch& batch, const ModelConfig& cfg,
              const ForwardResult<T>& fwd, const TaskWeights& weights, double inv_m,
              ParamStore<double>& grads) {
    const int64_t B = batch.count, L = batch.length, d = cfg.hidden;
    const int64_t n = B * L;
    const int64_t k = batch.masked_count();

    // Head gradients: dlogits = weight * (p - y) * inv_m.
    Tensor<double> d_transformed({k, d});
    auto head_backward = [&](const Tensor<T>& probs, auto target_of, double task_weight,
                             const char* w_name, const char* b_name) {
        if (task_weight == 0.0) return;
        const int64_t width = probs.cols();
        Tensor<double> dlogits({k, width});
        for (int64_t r = 0; r < k; ++r) {
            const T* pr = probs.row(r);
            double* dr = dlogits.row(r);
            for (int64_t i = 0; i < width; ++i) dr[i] = task_weight * inv_m * static_cast<double>(pr[i]);
            dr[target_of(batch.slots[static_cast<size_t>(r)])] -= task_weight * inv_m;
        }
        const Tensor<T>& w = params.at(w_name);
        nn::linear_backward(fwd.mlm_transformed, w, dlogits, grads.at(w_name), grads.at(b_name),
                            &d_transformed, /*accumulate_dx=*/true);
    };
    // The MLM projection is the tied token embedding, so its gradient lands
    // directly in embed.tok alongside the input-lookup contribution below.
    head_backward(fwd.mlm_probs, [](const MaskedSlot& s) { return s.mlm_target; }, 1.0, "embed.tok",
                  "mlm.bias");
    head_backward(fwd.pos_probs, [](const MaskedSlot& s) { return s.pos_target; }, weights.pos,
                  "head.pos.w", "head.pos.b");
    head_backward(fwd.ner_probs, [](const MaskedSlot& s) { return s.ner_target; }, weights.ner,
                  "head.ner.w", "head.ner.b");
    head_backward(fwd.dep_probs, [](const MaskedSlot& s) { return s.dep_target; }, weights.dep,
                  "head.dep.w", "head.dep.b");

    // MLM transform backward: LayerNorm, GELU, projection.
    Tensor<double> d_fc_act({k, d});
    nn::layernorm_backward(fwd.mlm_fc_act, params.at("mlm.ln.g"), fwd.mlm_ln, d_transformed,
                           grads.at("mlm.ln.g"), grads.at("mlm.ln.b"), d_fc_act, false);
    Tensor<double> d_fc_pre({k, d});
    for (int64_t i = 0; i < k * d; ++i)
        d_fc_pre.data[static_cast<size_t>(i)] =
            d_fc_act.data[static_cast<size_t>(i)] *
            nn::gelu_grad(static_cast<double>(fwd.mlm_fc_pre.data[static_cast<size_t>(i)]));
    Tensor<double> d_mlm_input({k, d});
    nn::linear_backward(fwd.mlm_input, params.at("mlm.fc.w"), d_fc_pre, grads.at("mlm.fc.w"),
                        grads.at("mlm.fc.b"), &d_mlm_input, false);

    // Scatter masked-row gradients back into the sequence.
    Tensor<double> dx({n, d});
    for (int64_t s = 0; s < k; ++s) {
        const MaskedSlot& slot = batch.slots[static_cast<size_t>(s)];
        double* dst = dx.row(static_cast<int64_t>(slot.seq) * L + slot.pos);
        const double* src = d_mlm_input.row(s);
        for (int64_t i = 0; i < d; ++i) dst[i] += src[i];
    }
    encoder_backward(params, batch, cfg, fwd, std::move(dx), grads);
}

template <typename T>
void encoder_backward(const ParamStore<T>& params, const Batch& batch, const ModelConfig& cfg,
                      const ForwardResult<T>& fwd, Tensor<double> dx, ParamStore<double>& grads) {
    const int64_t B = batch.count, L = batch.length, d = cfg.hidden;
    const int64_t n = B * L;
    const int64_t A = cfg.heads, hd = d / A;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    for (int32_t l = cfg.layers - 1; l >= 0; --l) {
        const LayerCache<T>& c = fwd.layers[static_cast<size_t>(l)];
        const std::string lp = "layer" + std::to_string(l);

        Tensor<double> d_ffn_res({n, d});
        nn::layernorm_backward(c.ffn_res, params.at(lp + ".ffn.ln.g"), c.ln2, dx,
                               grads.at(lp + ".ffn.ln.g"), grads.at(lp + ".ffn.ln.b"), d_ffn_res, false);
        // Residual: d_ffn_res feeds both the FFN branch and ln1_out.
        Tensor<double> d_ffn_act({n, cfg.ffn_inner});
        nn::linear_backward(c.ffn_act, params.at(lp + ".ffn.w2"), d_ffn_res, grads.at(lp + ".ffn.w2"),
                            grads.at(lp + ".ffn.b2"), &d_ffn_act, false);
        Tensor<double> d_ffn_pre({n, cfg.ffn_inner});
        for (int64_t i = 0; i < d_ffn_pre.numel(); ++i)
            d_ffn_pre.data[static_cast<size_t>(i)] =
                d_ffn_act.data[static_cast<size_t>(i)] *
                nn::gelu_grad(static_cast<double>(c.ffn_pre.data[static_cast<size_t>(i)]));
        Tensor<double> d_ln1_out = d_ffn_res;  // residual path
        nn::linear_backward(c.ln1_out, params.at(lp + ".ffn.w1"), d_ffn_pre, grads.at(lp + ".ffn.w1"),
                            grads.at(lp + ".ffn.b1"), &d_ln1_out, /*accumulate_dx=*/true);

        Tensor<double> d_attn_res({n, d});
        nn::layernorm_backward(c.attn_res, params.at(lp + ".attn.ln.g"), c.ln1, d_ln1_out,
                               grads.at(lp + ".attn.ln.g"), grads.at(lp + ".attn.ln.b"), d_attn_res,
                               false);
        Tensor<double> d_input = d_attn_res;  // residual path
        Tensor<double> d_ctx({n, d});
        nn::linear_backward(c.ctx, params.at(lp + ".attn.wo"), d_attn_res, grads.at(lp + ".attn.wo"),
                            grads.at(lp + ".attn.bo"), &d_ctx, false);

        Tensor<double> dq({n, d}), dk({n, d}), dv({n, d});
        std::vector<double> datt(static_cast<size_t>(L));
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t h = 0; h < A; ++h) {
                for (int64_t t = 0; t < L; ++t) {
                    const int64_t rq = b * L + t;
                    if (!batch.live[static_cast<size_t>(rq)]) continue;
                    const T* att_row = c.att.data.data() + ((b * A + h) * L + t) * L;
                    const double* dctx = d_ctx.row(rq) + h * hd;
                    // datt[u] = dctx . v_u ; dv_u += att[u] * dctx
                    double dot_att = 0.0;
                    for (int64_t u = 0; u < L; ++u) {
                        const double a = static_cast<double>(att_row[u]);
                        if (a == 0.0) {
                            datt[static_cast<size_t>(u)] = 0.0;
                            continue;
                        }
                        const T* vu = c.v.row(b * L + u) + h * hd;
                        double* dvu = dv.row(b * L + u) + h * hd;
                        double acc = 0.0;
                        for (int64_t i = 0; i < hd; ++i) {
                            acc += dctx[i] * static_cast<double>(vu[i]);
                            dvu[i] += a * dctx[i];
                        }
                        datt[static_cast<size_t>(u)] = acc;
                        dot_att += a * acc;
                    }
                    // Softmax backward, then dq/dk through the scaled dot.
                    const T* qr = c.q.row(rq) + h * hd;
                    double* dqr = dq.row(rq) + h * hd;
                    for (int64_t u = 0; u < L; ++u) {
                        const double a = static_cast<double>(att_row[u]);
                        if (a == 0.0) continue;
                        const double dscore = a * (datt[static_cast<size_t>(u)] - dot_att) * scale;
                        const T* ku = c.k.row(b * L + u) + h * hd;
                        double* dku = dk.row(b * L + u) + h * hd;
                        for (int64_t i = 0; i < hd; ++i) {
                            dqr[i] += dscore * static_cast<double>(ku[i]);
                            dku[i] += dscore * static_cast<double>(qr[i]);
                        }
                    }
                }
            }
        }
        nn::linear_backward(c.input, params.at(lp + ".attn.wq"), dq, grads.at(lp + ".attn.wq"),
                            grads.at(lp + ".attn.bq"), &d_input, true);
        nn::linear_backward(c.input, params.at(lp + ".attn.wk"), dk, grads.at(lp + ".attn.wk"),
                            grads.at(lp + ".attn.bk"), &d_input, true);
        nn::linear_backward(c.input, params.at(lp + ".attn.wv"), dv, grads.at(lp + ".attn.wv"),
                            grads.at(lp + ".attn.bv"), &d_input, true);
        dx = std::move(d_input);
    }

    // Embedding LayerNorm, then scatter into the three embedding tables.
    Tensor<double> d_sum({n, d});
    nn::layernorm_backward(fwd.embed_sum, params.at("embed.ln.g"), fwd.embed_ln, dx,
                           grads.at("embed.ln.g"), grads.at("embed.ln.b"), d_sum, false);
    Tensor<double>& d_tok = grads.at("embed.tok");
    Tensor<double>& d_pos = grads.at("embed.pos");
    Tensor<double>& d_seg = grads.at("embed.seg");
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t t = 0; t < L; ++t) {
            const int64_t r = b * L + t;
            const double* src = d_sum.row(r);
            double* tok_row = d_tok.row(batch.ids[static_cast<size_t>(r)]);
            double* pos_row = d_pos.row(t);
            double* seg_row = d_seg.row(batch.segments[static_cast<size_t>(r)]);
            for (int64_t i = 0; i < d; ++i) {
                tok_row[i] += src[i];
                pos_row[i] += src[i];
                seg_row[i] += src[i];
            }
        }
    }

    for (size_t gi = 0; gi < grads.tensors.size(); ++gi)
        for (double v : grads.tensors[gi].data)
            if (!std::isfinite(v))
                raise(ErrorKind::Numeric, "non-finite gradient in " + grads.names[gi]);
}

}  // namespace lertlab
