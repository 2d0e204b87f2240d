#pragma once

// Toy-scale BERT-style encoder with MLM and NSP heads, hand-written forward
// and backward passes. Everything is templated on the scalar type: training
// runs in float, gradient checking in double. Post-norm residual blocks,
// erf GELU, additive -1e9 attention masking, MLM output projection tied to
// the token embedding table.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "finlm/instances.hpp"
#include "finlm/tensor.hpp"

namespace finlm::model {

class NumericError : public Error {
public:
    using Error::Error;
};

struct ModelConfig {
    int layers = 2;
    int hidden = 64;
    int heads = 2;
    int ffn = 256;
    int vocab_size = 0;
    int max_positions = 128;
    int type_vocab = 2;
    double dropout = 0.1;
    double init_std = 0.02;
    std::uint64_t seed = 0;

    int head_dim() const { return hidden / heads; }

    void validate() const {
        if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || vocab_size < 1 ||
            max_positions < 1)
            throw ConfigError("model dimensions must be positive");
        if (hidden % heads != 0) throw ConfigError("hidden must be divisible by heads");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
    }
};

// ------------------------------------------------------------ parameters ---

template <class S>
struct LayerParams {
    MatX<S> wq, wk, wv, wo;       // H x H
    VecX<S> bq, bk, bv, bo;       // H
    VecX<S> ln_attn_g, ln_attn_b;  // H
    MatX<S> w1;                   // H x F
    VecX<S> b1;                   // F
    MatX<S> w2;                   // F x H
    VecX<S> b2;                   // H
    VecX<S> ln_ffn_g, ln_ffn_b;   // H
};

template <class S>
struct Params {
    MatX<S> tok_emb;  // V x H (also the tied MLM output projection)
    MatX<S> pos_emb;  // P x H
    MatX<S> seg_emb;  // type_vocab x H
    VecX<S> emb_ln_g, emb_ln_b;
    std::vector<LayerParams<S>> layers;
    MatX<S> mlm_w;  // H x H transform
    VecX<S> mlm_b;
    VecX<S> mlm_ln_g, mlm_ln_b;
    VecX<S> mlm_out_b;  // V
    MatX<S> pooler_w;   // H x H
    VecX<S> pooler_b;
    MatX<S> nsp_w;  // H x 2
    VecX<S> nsp_b;  // 2

    static Params shaped(const ModelConfig& c) {
        Params p;
        p.tok_emb.setZero(c.vocab_size, c.hidden);
        p.pos_emb.setZero(c.max_positions, c.hidden);
        p.seg_emb.setZero(c.type_vocab, c.hidden);
        p.emb_ln_g.setZero(c.hidden);
        p.emb_ln_b.setZero(c.hidden);
        p.layers.resize(static_cast<std::size_t>(c.layers));
        for (LayerParams<S>& l : p.layers) {
            l.wq.setZero(c.hidden, c.hidden);
            l.wk.setZero(c.hidden, c.hidden);
            l.wv.setZero(c.hidden, c.hidden);
            l.wo.setZero(c.hidden, c.hidden);
            l.bq.setZero(c.hidden);
            l.bk.setZero(c.hidden);
            l.bv.setZero(c.hidden);
            l.bo.setZero(c.hidden);
            l.ln_attn_g.setZero(c.hidden);
            l.ln_attn_b.setZero(c.hidden);
            l.w1.setZero(c.hidden, c.ffn);
            l.b1.setZero(c.ffn);
            l.w2.setZero(c.ffn, c.hidden);
            l.b2.setZero(c.hidden);
            l.ln_ffn_g.setZero(c.hidden);
            l.ln_ffn_b.setZero(c.hidden);
        }
        p.mlm_w.setZero(c.hidden, c.hidden);
        p.mlm_b.setZero(c.hidden);
        p.mlm_ln_g.setZero(c.hidden);
        p.mlm_ln_b.setZero(c.hidden);
        p.mlm_out_b.setZero(c.vocab_size);
        p.pooler_w.setZero(c.hidden, c.hidden);
        p.pooler_b.setZero(c.hidden);
        p.nsp_w.setZero(c.hidden, 2);
        p.nsp_b.setZero(2);
        return p;
    }
};

// Fixed visitation order; every consumer (Adam, checkpoints, grad check)
// zips by index over this list.
template <class S>
std::vector<TensorView<S>> collect_tensors(Params<S>& p) {
    std::vector<TensorView<S>> t;
    t.push_back(view_of<S>("token_embedding", p.tok_emb, true));
    t.push_back(view_of<S>("position_embedding", p.pos_emb, true));
    t.push_back(view_of<S>("segment_embedding", p.seg_emb, true));
    t.push_back(view_of<S>("embedding_ln_gain", p.emb_ln_g, false));
    t.push_back(view_of<S>("embedding_ln_bias", p.emb_ln_b, false));
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        LayerParams<S>& l = p.layers[i];
        std::string pre = "layer" + std::to_string(i) + ".";
        t.push_back(view_of<S>(pre + "attn_q_w", l.wq, true));
        t.push_back(view_of<S>(pre + "attn_q_b", l.bq, false));
        t.push_back(view_of<S>(pre + "attn_k_w", l.wk, true));
        t.push_back(view_of<S>(pre + "attn_k_b", l.bk, false));
        t.push_back(view_of<S>(pre + "attn_v_w", l.wv, true));
        t.push_back(view_of<S>(pre + "attn_v_b", l.bv, false));
        t.push_back(view_of<S>(pre + "attn_out_w", l.wo, true));
        t.push_back(view_of<S>(pre + "attn_out_b", l.bo, false));
        t.push_back(view_of<S>(pre + "ln_attn_gain", l.ln_attn_g, false));
        t.push_back(view_of<S>(pre + "ln_attn_bias", l.ln_attn_b, false));
        t.push_back(view_of<S>(pre + "ffn_w1", l.w1, true));
        t.push_back(view_of<S>(pre + "ffn_b1", l.b1, false));
        t.push_back(view_of<S>(pre + "ffn_w2", l.w2, true));
        t.push_back(view_of<S>(pre + "ffn_b2", l.b2, false));
        t.push_back(view_of<S>(pre + "ln_ffn_gain", l.ln_ffn_g, false));
        t.push_back(view_of<S>(pre + "ln_ffn_bias", l.ln_ffn_b, false));
    }
    t.push_back(view_of<S>("mlm_transform_w", p.mlm_w, true));
    t.push_back(view_of<S>("mlm_transform_b", p.mlm_b, false));
    t.push_back(view_of<S>("mlm_ln_gain", p.mlm_ln_g, false));
    t.push_back(view_of<S>("mlm_ln_bias", p.mlm_ln_b, false));
    t.push_back(view_of<S>("mlm_output_bias", p.mlm_out_b, false));
    t.push_back(view_of<S>("pooler_w", p.pooler_w, true));
    t.push_back(view_of<S>("pooler_b", p.pooler_b, false));
    t.push_back(view_of<S>("nsp_w", p.nsp_w, true));
    t.push_back(view_of<S>("nsp_b", p.nsp_b, false));
    return t;
}

// Truncated normal(0, init_std) weights, zero biases, unit layer-norm gains.
template <class S>
Params<S> init_params(const ModelConfig& c) {
    c.validate();
    Params<S> p = Params<S>::shaped(c);
    Rng rng = Rng::derive(c.seed, "init");
    for (TensorView<S>& tv : collect_tensors(p)) {
        bool gain = tv.name.find("gain") != std::string::npos;
        bool bias = !gain && (tv.name.find("_b") != std::string::npos ||
                              tv.name.find("bias") != std::string::npos);
        for (std::ptrdiff_t k = 0; k < tv.size; ++k) {
            if (gain) tv.data[k] = S(1);
            else if (bias) tv.data[k] = S(0);
            else tv.data[k] = static_cast<S>(rng.next_truncated_normal(c.init_std));
        }
    }
    return p;
}

// ----------------------------------------------------------------- batch ---

// Instances padded to a common length with PAD id 0 and an attention mask.
struct Batch {
    int size = 0;     // B
    int seq_len = 0;  // S
    std::vector<std::int32_t> token_ids;    // B*S
    std::vector<std::int32_t> segment_ids;  // B*S
    std::vector<std::uint8_t> attn_mask;    // B*S, 1 = real token
    struct MaskedSlot {
        int row;  // b*S + position
        std::int32_t label;
    };
    std::vector<MaskedSlot> mlm_slots;
    std::vector<std::int32_t> nsp_labels;  // B, may be empty for classification
};

inline Batch make_batch(const std::vector<tok::PretrainInstance>& instances,
                        const ModelConfig& config) {
    Batch b;
    b.size = static_cast<int>(instances.size());
    std::size_t longest = 0;
    for (const tok::PretrainInstance& inst : instances)
        longest = std::max(longest, inst.token_ids.size());
    if (longest > static_cast<std::size_t>(config.max_positions))
        throw ConfigError("instance longer than max_positions");
    b.seq_len = static_cast<int>(longest);
    b.token_ids.assign(static_cast<std::size_t>(b.size) * longest, vocab::kPadId);
    b.segment_ids.assign(static_cast<std::size_t>(b.size) * longest, 0);
    b.attn_mask.assign(static_cast<std::size_t>(b.size) * longest, 0);
    for (int i = 0; i < b.size; ++i) {
        const tok::PretrainInstance& inst = instances[static_cast<std::size_t>(i)];
        std::size_t base = static_cast<std::size_t>(i) * longest;
        for (std::size_t k = 0; k < inst.token_ids.size(); ++k) {
            b.token_ids[base + k] = inst.token_ids[k];
            b.segment_ids[base + k] = inst.segment_ids[k];
            b.attn_mask[base + k] = 1;
        }
        for (std::size_t k = 0; k < inst.mlm_positions.size(); ++k)
            b.mlm_slots.push_back({static_cast<int>(base) + inst.mlm_positions[k],
                                   inst.mlm_labels[k]});
        b.nsp_labels.push_back(static_cast<std::int32_t>(inst.nsp_label));
    }
    return b;
}

// ------------------------------------------------------------ activations ---

template <class S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865476)));
}

template <class S>
S gelu_grad(S x) {
    S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865476)));
    S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014327);
    return cdf + x * pdf;
}

inline constexpr double kLayerNormEps = 1e-12;

template <class S>
struct LnCache {
    MatX<S> xhat;    // N x H
    VecX<S> inv_std;  // N
};

template <class S>
MatX<S> layer_norm(const MatX<S>& x, const VecX<S>& gain, const VecX<S>& bias, LnCache<S>& cache) {
    const Eigen::Index n = x.rows(), h = x.cols();
    cache.xhat.resize(n, h);
    cache.inv_std.resize(n);
    MatX<S> out(n, h);
    for (Eigen::Index r = 0; r < n; ++r) {
        S mean = x.row(r).mean();
        S var = (x.row(r).array() - mean).square().mean();
        S inv = S(1) / std::sqrt(var + S(kLayerNormEps));
        cache.inv_std(r) = inv;
        cache.xhat.row(r) = ((x.row(r).array() - mean) * inv).matrix();
        out.row(r) = cache.xhat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
    }
    return out;
}

template <class S>
MatX<S> layer_norm_backward(const MatX<S>& dy, const LnCache<S>& cache, const VecX<S>& gain,
                            VecX<S>& dgain, VecX<S>& dbias) {
    const Eigen::Index n = dy.rows(), h = dy.cols();
    MatX<S> dx(n, h);
    for (Eigen::Index r = 0; r < n; ++r) {
        auto xhat = cache.xhat.row(r).array();
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dy.row(r).array() * gain.transpose().array();
        S m1 = dxhat.mean();
        S m2 = (dxhat * xhat).mean();
        dx.row(r) = (cache.inv_std(r) * (dxhat - m1 - xhat * m2)).matrix();
        dgain += (dy.row(r).array() * xhat).matrix().transpose();
        dbias += dy.row(r).transpose();
    }
    return dx;
}

// Inverted dropout; the multiplicative mask is cached for the backward pass.
// An empty mask means identity (eval mode or rate 0).
template <class S>
void apply_dropout(MatX<S>& x, double rate, Rng& rng, MatX<S>& mask_out) {
    if (rate <= 0.0) {
        mask_out.resize(0, 0);
        return;
    }
    S scale = static_cast<S>(1.0 / (1.0 - rate));
    mask_out.resize(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            mask_out(r, c) = rng.next_double() < rate ? S(0) : scale;
    x = x.cwiseProduct(mask_out);
}

// --------------------------------------------------------------- forward ---

struct RunMode {
    bool train = false;
    std::uint64_t dropout_seed = 0;
    std::int64_t step = 0;
};

template <class S>
struct LayerCache {
    MatX<S> input;             // B*S x H
    MatX<S> q, k, v;           // B*S x H
    std::vector<MatX<S>> attn_probs;  // B*A entries of S x S (pre-dropout)
    std::vector<MatX<S>> attn_drop;
    MatX<S> context;           // B*S x H
    MatX<S> attn_out_drop_mask;
    LnCache<S> ln_attn;
    MatX<S> x1;                // post first LN
    MatX<S> z1;                // pre-GELU, B*S x F
    MatX<S> ffn_hidden;        // GELU(z1)
    MatX<S> ffn_drop_mask;
    LnCache<S> ln_ffn;
};

template <class S>
struct ForwardCache {
    MatX<S> emb_sum;
    LnCache<S> emb_ln;
    MatX<S> emb_drop_mask;
    MatX<S> x0;  // encoder input after embedding LN + dropout
    std::vector<LayerCache<S>> layers;
    MatX<S> encoder_out;  // B*S x H
    // heads
    std::vector<int> mlm_rows;
    MatX<S> mlm_gathered;   // Nm x H
    MatX<S> mlm_z;          // pre-GELU
    MatX<S> mlm_act;        // GELU out
    LnCache<S> mlm_ln;
    MatX<S> mlm_ln_out;     // Nm x H
    MatX<S> mlm_logits;     // Nm x V
    MatX<S> mlm_probs;      // Nm x V softmax
    MatX<S> pooled_pre;     // B x H pre-tanh
    MatX<S> pooled;         // B x H tanh
    MatX<S> nsp_logits;     // B x 2
    MatX<S> nsp_probs;      // B x 2
};

struct ForwardResult {
    double mlm_loss = 0.0;
    double nsp_loss = 0.0;
    double total() const { return mlm_loss + nsp_loss; }
};

namespace detail {

template <class S>
void check_finite(const MatX<S>& x, const char* where, std::int64_t step) {
    if (!x.allFinite())
        throw NumericError(std::string("non-finite activation in ") + where + " at step " +
                           std::to_string(step));
}

template <class S>
void softmax_rows(MatX<S>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        S mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

}  // namespace detail

// Runs the embedding stack and encoder layers; returns B*S x H final states.
template <class S>
MatX<S> encoder_forward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
                        const RunMode& mode, ForwardCache<S>& cache) {
    const int B = batch.size, T = batch.seq_len, H = cfg.hidden, A = cfg.heads;
    const int dh = cfg.head_dim();
    const Eigen::Index N = static_cast<Eigen::Index>(B) * T;
    const S inv_sqrt_dh = S(1) / std::sqrt(static_cast<S>(dh));
    const double drop = mode.train ? cfg.dropout : 0.0;
    int drop_site = 0;
    auto drop_rng = [&]() {
        return Rng::derive(mode.dropout_seed, "dropout", static_cast<std::uint64_t>(mode.step),
                           static_cast<std::uint64_t>(drop_site++));
    };

    if (T > cfg.max_positions) throw ConfigError("sequence longer than max_positions");

    cache.emb_sum.resize(N, H);
    for (Eigen::Index r = 0; r < N; ++r) {
        std::int32_t tid = batch.token_ids[static_cast<std::size_t>(r)];
        if (tid < 0 || tid >= cfg.vocab_size) throw ConfigError("token id out of range");
        cache.emb_sum.row(r) = p.tok_emb.row(tid) +
                               p.pos_emb.row(static_cast<Eigen::Index>(r % T)) +
                               p.seg_emb.row(batch.segment_ids[static_cast<std::size_t>(r)]);
    }
    MatX<S> x = layer_norm(cache.emb_sum, p.emb_ln_g, p.emb_ln_b, cache.emb_ln);
    {
        Rng rng = drop_rng();
        apply_dropout(x, drop, rng, cache.emb_drop_mask);
    }
    cache.x0 = x;
    detail::check_finite(x, "embeddings", mode.step);

    cache.layers.assign(static_cast<std::size_t>(cfg.layers), LayerCache<S>{});
    for (int l = 0; l < cfg.layers; ++l) {
        LayerCache<S>& lc = cache.layers[static_cast<std::size_t>(l)];
        const LayerParams<S>& lp = p.layers[static_cast<std::size_t>(l)];
        lc.input = x;
        lc.q = (x * lp.wq).rowwise() + lp.bq.transpose();
        lc.k = (x * lp.wk).rowwise() + lp.bk.transpose();
        lc.v = (x * lp.wv).rowwise() + lp.bv.transpose();

        lc.attn_probs.assign(static_cast<std::size_t>(B) * A, MatX<S>());
        lc.attn_drop.assign(static_cast<std::size_t>(B) * A, MatX<S>());
        lc.context.setZero(N, H);
        for (int b = 0; b < B; ++b) {
            for (int a = 0; a < A; ++a) {
                auto q = lc.q.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                auto k = lc.k.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                auto v = lc.v.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                MatX<S> scores = q * k.transpose() * inv_sqrt_dh;
                for (int j = 0; j < T; ++j)
                    if (!batch.attn_mask[static_cast<std::size_t>(b) * T + j])
                        scores.col(j).array() = S(-1e9);
                detail::softmax_rows(scores);
                MatX<S>& probs = lc.attn_probs[static_cast<std::size_t>(b) * A + a];
                probs = std::move(scores);
                MatX<S> dropped = probs;
                {
                    Rng rng = drop_rng();
                    apply_dropout(dropped, drop, rng,
                                  lc.attn_drop[static_cast<std::size_t>(b) * A + a]);
                }
                lc.context.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh) = dropped * v;
            }
        }
        MatX<S> attn_out = (lc.context * lp.wo).rowwise() + lp.bo.transpose();
        {
            Rng rng = drop_rng();
            apply_dropout(attn_out, drop, rng, lc.attn_out_drop_mask);
        }
        MatX<S> r1 = x + attn_out;
        lc.x1 = layer_norm(r1, lp.ln_attn_g, lp.ln_attn_b, lc.ln_attn);

        lc.z1 = (lc.x1 * lp.w1).rowwise() + lp.b1.transpose();
        lc.ffn_hidden = lc.z1.unaryExpr([](S v) { return gelu(v); });
        MatX<S> ffn_out = (lc.ffn_hidden * lp.w2).rowwise() + lp.b2.transpose();
        {
            Rng rng = drop_rng();
            apply_dropout(ffn_out, drop, rng, lc.ffn_drop_mask);
        }
        MatX<S> r2 = lc.x1 + ffn_out;
        x = layer_norm(r2, lp.ln_ffn_g, lp.ln_ffn_b, lc.ln_ffn);
        detail::check_finite(x, ("encoder layer " + std::to_string(l)).c_str(), mode.step);
    }
    cache.encoder_out = x;
    return x;
}

// Pooled CLS representation: tanh(W * h_cls + b).
template <class S>
MatX<S> pooler_forward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
                       ForwardCache<S>& cache) {
    const int B = batch.size;
    cache.pooled_pre.resize(B, cfg.hidden);
    for (int b = 0; b < B; ++b)
        cache.pooled_pre.row(b) =
            cache.encoder_out.row(static_cast<Eigen::Index>(b) * batch.seq_len) * p.pooler_w +
            p.pooler_b.transpose();
    cache.pooled = cache.pooled_pre.unaryExpr([](S v) { return std::tanh(v); });
    return cache.pooled;
}

// Mean cross-entropy over rows; fills probs with row softmax.
template <class S>
double softmax_cross_entropy(const MatX<S>& logits, const std::vector<std::int32_t>& labels,
                             MatX<S>& probs) {
    probs = logits;
    detail::softmax_rows(probs);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        double pr = static_cast<double>(probs(r, labels[static_cast<std::size_t>(r)]));
        loss -= std::log(std::max(pr, 1e-300));
    }
    return loss / static_cast<double>(std::max<Eigen::Index>(1, probs.rows()));
}

// Full pretraining forward: encoder, tied-projection MLM head, NSP head.
template <class S>
ForwardResult forward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
                      const RunMode& mode, ForwardCache<S>& cache) {
    encoder_forward(cfg, p, batch, mode, cache);

    ForwardResult res;
    const std::size_t nm = batch.mlm_slots.size();
    cache.mlm_rows.clear();
    if (nm > 0) {
        cache.mlm_gathered.resize(static_cast<Eigen::Index>(nm), cfg.hidden);
        std::vector<std::int32_t> labels(nm);
        for (std::size_t i = 0; i < nm; ++i) {
            cache.mlm_rows.push_back(batch.mlm_slots[i].row);
            cache.mlm_gathered.row(static_cast<Eigen::Index>(i)) =
                cache.encoder_out.row(batch.mlm_slots[i].row);
            labels[i] = batch.mlm_slots[i].label;
        }
        cache.mlm_z = (cache.mlm_gathered * p.mlm_w).rowwise() + p.mlm_b.transpose();
        cache.mlm_act = cache.mlm_z.unaryExpr([](S v) { return gelu(v); });
        cache.mlm_ln_out = layer_norm(cache.mlm_act, p.mlm_ln_g, p.mlm_ln_b, cache.mlm_ln);
        cache.mlm_logits = (cache.mlm_ln_out * p.tok_emb.transpose()).rowwise() +
                           p.mlm_out_b.transpose();
        res.mlm_loss = softmax_cross_entropy(cache.mlm_logits, labels, cache.mlm_probs);
    }

    pooler_forward(cfg, p, batch, cache);
    if (!batch.nsp_labels.empty()) {
        cache.nsp_logits = (cache.pooled * p.nsp_w).rowwise() + p.nsp_b.transpose();
        res.nsp_loss = softmax_cross_entropy(cache.nsp_logits, batch.nsp_labels, cache.nsp_probs);
    }
    if (!std::isfinite(res.mlm_loss) || !std::isfinite(res.nsp_loss))
        throw NumericError("non-finite loss at step " + std::to_string(mode.step));
    return res;
}

// -------------------------------------------------------------- backward ---

// Backward through the encoder given d(encoder_out); accumulates into grads
// and returns nothing (embedding gradients are scattered directly).
template <class S>
void encoder_backward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
                      const ForwardCache<S>& cache, MatX<S> dx, Params<S>& grads) {
    const int B = batch.size, T = batch.seq_len, A = cfg.heads;
    const int dh = cfg.head_dim();
    const S inv_sqrt_dh = S(1) / std::sqrt(static_cast<S>(dh));

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerCache<S>& lc = cache.layers[static_cast<std::size_t>(l)];
        const LayerParams<S>& lp = p.layers[static_cast<std::size_t>(l)];
        LayerParams<S>& lg = grads.layers[static_cast<std::size_t>(l)];

        MatX<S> d_r2 = layer_norm_backward(dx, lc.ln_ffn, lp.ln_ffn_g, lg.ln_ffn_g, lg.ln_ffn_b);
        MatX<S> d_x1 = d_r2;
        MatX<S> d_ffn_out = std::move(d_r2);
        if (lc.ffn_drop_mask.size() > 0) d_ffn_out = d_ffn_out.cwiseProduct(lc.ffn_drop_mask);
        lg.w2 += lc.ffn_hidden.transpose() * d_ffn_out;
        lg.b2 += d_ffn_out.colwise().sum().transpose();
        MatX<S> d_hidden = d_ffn_out * lp.w2.transpose();
        MatX<S> d_z1 = d_hidden.cwiseProduct(lc.z1.unaryExpr([](S v) { return gelu_grad(v); }));
        lg.w1 += lc.x1.transpose() * d_z1;
        lg.b1 += d_z1.colwise().sum().transpose();
        d_x1 += d_z1 * lp.w1.transpose();

        MatX<S> d_r1 =
            layer_norm_backward(d_x1, lc.ln_attn, lp.ln_attn_g, lg.ln_attn_g, lg.ln_attn_b);
        MatX<S> d_input = d_r1;
        MatX<S> d_attn_out = std::move(d_r1);
        if (lc.attn_out_drop_mask.size() > 0)
            d_attn_out = d_attn_out.cwiseProduct(lc.attn_out_drop_mask);
        lg.wo += lc.context.transpose() * d_attn_out;
        lg.bo += d_attn_out.colwise().sum().transpose();
        MatX<S> d_context = d_attn_out * lp.wo.transpose();

        MatX<S> d_q = MatX<S>::Zero(lc.q.rows(), lc.q.cols());
        MatX<S> d_k = MatX<S>::Zero(lc.k.rows(), lc.k.cols());
        MatX<S> d_v = MatX<S>::Zero(lc.v.rows(), lc.v.cols());
        for (int b = 0; b < B; ++b) {
            for (int a = 0; a < A; ++a) {
                const MatX<S>& probs = lc.attn_probs[static_cast<std::size_t>(b) * A + a];
                const MatX<S>& dmask = lc.attn_drop[static_cast<std::size_t>(b) * A + a];
                auto q = lc.q.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                auto k = lc.k.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                auto v = lc.v.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);
                auto d_ctx = d_context.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh);

                MatX<S> dropped = dmask.size() > 0 ? probs.cwiseProduct(dmask) : probs;
                MatX<S> d_dropped = d_ctx * v.transpose();
                d_v.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh) +=
                    dropped.transpose() * d_ctx;
                MatX<S> d_probs =
                    dmask.size() > 0 ? MatX<S>(d_dropped.cwiseProduct(dmask)) : std::move(d_dropped);
                // softmax backward: dS = P (.) (dP - rowsum(dP (.) P))
                MatX<S> d_scores(probs.rows(), probs.cols());
                for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                    S dot = probs.row(r).dot(d_probs.row(r));
                    d_scores.row(r) =
                        probs.row(r).cwiseProduct(d_probs.row(r)) - probs.row(r) * dot;
                }
                d_q.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh) +=
                    d_scores * k * inv_sqrt_dh;
                d_k.block(static_cast<Eigen::Index>(b) * T, a * dh, T, dh) +=
                    d_scores.transpose() * q * inv_sqrt_dh;
            }
        }
        lg.wq += lc.input.transpose() * d_q;
        lg.bq += d_q.colwise().sum().transpose();
        lg.wk += lc.input.transpose() * d_k;
        lg.bk += d_k.colwise().sum().transpose();
        lg.wv += lc.input.transpose() * d_v;
        lg.bv += d_v.colwise().sum().transpose();
        d_input += d_q * lp.wq.transpose() + d_k * lp.wk.transpose() + d_v * lp.wv.transpose();
        dx = std::move(d_input);
    }

    if (cache.emb_drop_mask.size() > 0) dx = dx.cwiseProduct(cache.emb_drop_mask);
    MatX<S> d_emb =
        layer_norm_backward(dx, cache.emb_ln, p.emb_ln_g, grads.emb_ln_g, grads.emb_ln_b);
    const Eigen::Index N = d_emb.rows();
    for (Eigen::Index r = 0; r < N; ++r) {
        grads.tok_emb.row(batch.token_ids[static_cast<std::size_t>(r)]) += d_emb.row(r);
        grads.pos_emb.row(static_cast<Eigen::Index>(r % T)) += d_emb.row(r);
        grads.seg_emb.row(batch.segment_ids[static_cast<std::size_t>(r)]) += d_emb.row(r);
    }
}

// Backward through pooler given d(pooled); adds d(encoder_out) into dx.
template <class S>
void pooler_backward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
                     const ForwardCache<S>& cache, const MatX<S>& d_pooled, Params<S>& grads,
                     MatX<S>& dx) {
    MatX<S> d_pre = d_pooled.cwiseProduct(
        cache.pooled.unaryExpr([](S v) { return S(1) - v * v; }));
    MatX<S> cls(batch.size, cfg.hidden);
    for (int b = 0; b < batch.size; ++b)
        cls.row(b) = cache.encoder_out.row(static_cast<Eigen::Index>(b) * batch.seq_len);
    grads.pooler_w += cls.transpose() * d_pre;
    grads.pooler_b += d_pre.colwise().sum().transpose();
    MatX<S> d_cls = d_pre * p.pooler_w.transpose();
    for (int b = 0; b < batch.size; ++b)
        dx.row(static_cast<Eigen::Index>(b) * batch.seq_len) += d_cls.row(b);
}

// Full pretraining backward; grads must be zero-initialized (shaped).
template <class S>
void backward(const ModelConfig& cfg, const Params<S>& p, const Batch& batch,
              const ForwardCache<S>& cache, Params<S>& grads) {
    MatX<S> dx = MatX<S>::Zero(cache.encoder_out.rows(), cache.encoder_out.cols());

    const std::size_t nm = batch.mlm_slots.size();
    if (nm > 0) {
        MatX<S> d_logits = cache.mlm_probs;
        for (std::size_t i = 0; i < nm; ++i)
            d_logits(static_cast<Eigen::Index>(i), batch.mlm_slots[i].label) -= S(1);
        d_logits /= static_cast<S>(nm);
        grads.mlm_out_b += d_logits.colwise().sum().transpose();
        grads.tok_emb += d_logits.transpose() * cache.mlm_ln_out;
        MatX<S> d_ln_out = d_logits * p.tok_emb;
        MatX<S> d_act =
            layer_norm_backward(d_ln_out, cache.mlm_ln, p.mlm_ln_g, grads.mlm_ln_g, grads.mlm_ln_b);
        MatX<S> d_z = d_act.cwiseProduct(cache.mlm_z.unaryExpr([](S v) { return gelu_grad(v); }));
        grads.mlm_w += cache.mlm_gathered.transpose() * d_z;
        grads.mlm_b += d_z.colwise().sum().transpose();
        MatX<S> d_gathered = d_z * p.mlm_w.transpose();
        for (std::size_t i = 0; i < nm; ++i)
            dx.row(cache.mlm_rows[i]) += d_gathered.row(static_cast<Eigen::Index>(i));
    }

    if (!batch.nsp_labels.empty()) {
        MatX<S> d_logits = cache.nsp_probs;
        for (int b = 0; b < batch.size; ++b)
            d_logits(b, batch.nsp_labels[static_cast<std::size_t>(b)]) -= S(1);
        d_logits /= static_cast<S>(batch.size);
        grads.nsp_w += cache.pooled.transpose() * d_logits;
        grads.nsp_b += d_logits.colwise().sum().transpose();
        MatX<S> d_pooled = d_logits * p.nsp_w.transpose();
        pooler_backward(cfg, p, batch, cache, d_pooled, grads, dx);
    }

    encoder_backward(cfg, p, batch, cache, std::move(dx), grads);
}

}  // namespace finlm::model
