#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/embeddings.hpp"
#include "fsner/kernels.hpp"
#include "fsner/rng.hpp"
#include "fsner/tensor.hpp"

namespace fsner {

struct NetworkConfig {
    int char_vocab = Vocab::char_vocab_size;  // 97
    int char_dim = 30;
    int max_chars = 52;
    int conv_kernels = 30;
    int conv_width = 3;
    double dropout_rate = 0.5;
    int word_dim = 50;   // d
    int casing_dim = kCasingCount;  // V_ca
    int lstm_units = 200;  // H per direction
    int n_tags = 0;
    bool batch_norm = false;
    bool trainable_embeddings = false;
    double char_init_range = 0.5;

    int concat_width() const { return conv_kernels + word_dim + casing_dim; }
    bool operator==(const NetworkConfig&) const = default;
};

template <class T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <class T>
const Tensor<T>* find_tensor(const NamedTensors<T>& m, const std::string& name) {
    for (const auto& [k, t] : m) {
        if (k == name) return &t;
    }
    return nullptr;
}

// Every named parameter tensor of the architecture. Trainable set: char
// embeddings, conv, both LSTM directions, the output layer, batch-norm
// gamma/beta, and the word embeddings when unfrozen. The casing embedding is
// a frozen one-hot table; bn_mean/bn_var are running statistics, not
// gradient-trained.
template <class T>
struct ModelParamsT {
    NetworkConfig config;
    Tensor<T> char_embed;    // (char_vocab x char_dim)
    Tensor<T> conv_kernel;   // (conv_width x char_dim x conv_kernels)
    Tensor<T> conv_bias;     // (conv_kernels)
    Tensor<T> word_embed;    // (V_w x word_dim)
    Tensor<T> casing_embed;  // (casing_dim x casing_dim)
    LstmWeights<T> lstm_fwd;
    LstmWeights<T> lstm_bwd;
    Tensor<T> output_kernel;  // (2H x n_tags)
    Tensor<T> output_bias;    // (n_tags)
    Tensor<T> bn_gamma, bn_beta, bn_mean, bn_var;  // (F) each, present iff batch_norm

    std::vector<std::pair<std::string, Tensor<T>*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor<T>*>> out = {
            {"char_embed", &char_embed},     {"conv_kernel", &conv_kernel},
            {"conv_bias", &conv_bias},       {"word_embed", &word_embed},
            {"casing_embed", &casing_embed}, {"lstm_fwd_W", &lstm_fwd.W},
            {"lstm_fwd_U", &lstm_fwd.U},     {"lstm_fwd_b", &lstm_fwd.b},
            {"lstm_bwd_W", &lstm_bwd.W},     {"lstm_bwd_U", &lstm_bwd.U},
            {"lstm_bwd_b", &lstm_bwd.b},     {"output_kernel", &output_kernel},
            {"output_bias", &output_bias},
        };
        if (config.batch_norm) {
            out.emplace_back("bn_gamma", &bn_gamma);
            out.emplace_back("bn_beta", &bn_beta);
            out.emplace_back("bn_mean", &bn_mean);
            out.emplace_back("bn_var", &bn_var);
        }
        return out;
    }
    std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const {
        auto mutable_view = const_cast<ModelParamsT*>(this)->named_tensors();
        std::vector<std::pair<std::string, const Tensor<T>*>> out;
        out.reserve(mutable_view.size());
        for (auto& [k, t] : mutable_view) out.emplace_back(k, t);
        return out;
    }

    std::vector<std::string> trainable_names() const {
        std::vector<std::string> out = {"char_embed", "conv_kernel", "conv_bias"};
        if (config.trainable_embeddings) out.push_back("word_embed");
        for (const char* n : {"lstm_fwd_W", "lstm_fwd_U", "lstm_fwd_b", "lstm_bwd_W", "lstm_bwd_U",
                              "lstm_bwd_b", "output_kernel", "output_bias"})
            out.push_back(n);
        if (config.batch_norm) {
            out.push_back("bn_gamma");
            out.push_back("bn_beta");
        }
        return out;
    }
};

using ModelParams = ModelParamsT<float>;

template <class T>
Tensor<T>* find_tensor_ptr(ModelParamsT<T>& m, const std::string& name) {
    for (auto& [k, t] : m.named_tensors()) {
        if (k == name) return t;
    }
    return nullptr;
}

template <class T>
const Tensor<T>* find_tensor_ptr(const ModelParamsT<T>& m, const std::string& name) {
    return find_tensor_ptr(const_cast<ModelParamsT<T>&>(m), name);
}

inline const std::vector<std::string>& lstm_tensor_names() {
    static const std::vector<std::string> names = {"lstm_fwd_W", "lstm_fwd_U", "lstm_fwd_b",
                                                   "lstm_bwd_W", "lstm_bwd_U", "lstm_bwd_b"};
    return names;
}

inline const std::vector<std::string>& output_tensor_names() {
    static const std::vector<std::string> names = {"output_kernel", "output_bias"};
    return names;
}

template <class T>
T glorot_limit(int fan_in, int fan_out) {
    return T(std::sqrt(6.0 / (double(fan_in) + double(fan_out))));
}

// Char embedding ~ U(-r, r); casing embedding is the identity; word rows are
// copied from the embedding matrix (PAD = zeros, UNK = mean row); kernels are
// Glorot uniform; all biases zero.
template <class T>
ModelParamsT<T> init_model(const NetworkConfig& config, const EmbeddingMatrix& emb, uint64_t seed) {
    require(config.n_tags >= 1, "init_model: n_tags must be set");
    require(emb.d == config.word_dim,
            "init_model: embedding dimension " + std::to_string(emb.d) +
                " does not match configured word_dim " + std::to_string(config.word_dim));
    require(config.casing_dim == kCasingCount, "init_model: casing_dim must be 8");

    Rng rng(mix_seed(seed, 0x1217));
    auto uniform_fill = [&](Tensor<T>& t, double limit) {
        for (auto& x : t.v) x = T(rng.uniform(-limit, limit));
    };

    ModelParamsT<T> m;
    m.config = config;

    m.char_embed = Tensor<T>({config.char_vocab, config.char_dim});
    uniform_fill(m.char_embed, config.char_init_range);

    m.conv_kernel = Tensor<T>({config.conv_width, config.char_dim, config.conv_kernels});
    uniform_fill(m.conv_kernel, double(glorot_limit<T>(config.conv_width * config.char_dim,
                                                       config.conv_width * config.conv_kernels)));
    m.conv_bias = Tensor<T>({config.conv_kernels});

    const int64_t v_w = emb.size() + 2;
    m.word_embed = Tensor<T>({int(v_w), config.word_dim});
    for (int j = 0; j < config.word_dim; ++j) {
        double mean = 0;
        for (int64_t i = 0; i < emb.size(); ++i) mean += emb.row(i)[j];
        m.word_embed.at(Vocab::word_unk, j) = T(mean / double(emb.size()));
    }
    for (int64_t i = 0; i < emb.size(); ++i) {
        for (int j = 0; j < config.word_dim; ++j) m.word_embed.at(int(i) + 2, j) = T(emb.row(i)[j]);
    }

    m.casing_embed = Tensor<T>({config.casing_dim, config.casing_dim});
    for (int i = 0; i < config.casing_dim; ++i) m.casing_embed.at(i, i) = T(1);

    const int din = config.concat_width();
    const int H = config.lstm_units;
    for (LstmWeights<T>* w : {&m.lstm_fwd, &m.lstm_bwd}) {
        *w = LstmWeights<T>::zeros(din, H);
        uniform_fill(w->W, double(glorot_limit<T>(din, 4 * H)));
        uniform_fill(w->U, double(glorot_limit<T>(H, 4 * H)));
    }

    m.output_kernel = Tensor<T>({2 * H, config.n_tags});
    uniform_fill(m.output_kernel, double(glorot_limit<T>(2 * H, config.n_tags)));
    m.output_bias = Tensor<T>({config.n_tags});

    if (config.batch_norm) {
        const int F = config.concat_width();
        m.bn_gamma = Tensor<T>({F});
        m.bn_gamma.fill(T(1));
        m.bn_beta = Tensor<T>({F});
        m.bn_mean = Tensor<T>({F});
        m.bn_var = Tensor<T>({F});
        m.bn_var.fill(T(1));
    }
    return m;
}

// Tensor shapes observed during a forward pass, all (b, w, ...).
struct ForwardTrace {
    std::vector<int> char_embed_shape;
    std::vector<int> char_feature_shape;
    std::vector<int> concat_shape;
    std::vector<int> blstm_shape;
};

template <class T>
struct NetworkCache {
    int b = 0, w = 0;
    Tensor<T> char_emb;        // (N x max_chars x char_dim), post drop1
    std::vector<T> drop1_mask;
    Tensor<T> conv_out;        // (N x max_chars x conv_kernels)
    std::vector<int> pool_argmax;  // (N x conv_kernels)
    std::vector<T> drop2_mask;
    Tensor<T> concat;          // (N x F), pre batch norm
    std::vector<int> bn_rows;
    BatchNormCache<T> bn_cache;
    Tensor<T> features;        // (N x F), what the BLSTM consumes
    std::vector<BiScanCache<T>> scans;  // per sentence
    Tensor<T> blstm_out;       // (N x 2H)
    Tensor<T> logits;          // (N x n_tags)
};

// Char path: embed -> dropout -> conv -> maxpool(max_chars) -> dropout; the
// 30-d result is concatenated with word and casing embeddings, optionally
// batch-normalized over unmasked positions, fed through the BLSTM and the
// dense output layer. Returns per-position logits (N = b*w rows); use
// forward() for probabilities. Train mode mutates bn running stats.
template <class T>
Tensor<T> forward_logits(ModelParamsT<T>& params, const Batch& batch, RunMode mode, Rng* rng,
                         NetworkCache<T>* cache = nullptr, ForwardTrace* trace = nullptr) {
    const NetworkConfig& cfg = params.config;
    require(batch.max_chars == cfg.max_chars, "forward: batch max_chars mismatch");
    const int b = batch.b, w = batch.w;
    const int N = b * w;
    const int C = cfg.max_chars, cd = cfg.char_dim, ck = cfg.conv_kernels;
    const int F = cfg.concat_width();
    const int H = cfg.lstm_units;
    const bool train = mode == RunMode::train;
    const double rate = train ? cfg.dropout_rate : 0.0;

    NetworkCache<T> local;
    NetworkCache<T>& cc = cache ? *cache : local;
    cc.b = b;
    cc.w = w;
    cc.char_emb = Tensor<T>({N, C, cd});
    cc.conv_out = Tensor<T>({N, C, ck});
    cc.pool_argmax.assign(size_t(N) * ck, 0);
    cc.concat = Tensor<T>({N, F});
    if (rate > 0) {
        cc.drop1_mask.assign(size_t(N) * C * cd, T(0));
        cc.drop2_mask.assign(size_t(N) * ck, T(0));
    }
    if (rate > 0) require(rng != nullptr, "forward: train-mode dropout needs an rng");
    const T scale = T(rate > 0 ? 1.0 / (1.0 - rate) : 1.0);

    for (int r = 0; r < N; ++r) {
        if (!batch.mask[size_t(r)]) continue;
        const int s = r / w, t = r % w;
        const int* chars = batch.chars_at(s, t);
        T* emb_rows = cc.char_emb.v.data() + size_t(r) * C * cd;
        for (int c = 0; c < C; ++c) {
            const T* src = params.char_embed.row(chars[c]);
            T* dst = emb_rows + size_t(c) * cd;
            std::copy(src, src + cd, dst);
        }
        if (rate > 0) {
            T* mask_row = cc.drop1_mask.data() + size_t(r) * C * cd;
            for (int i = 0; i < C * cd; ++i) {
                const T m = rng->uniform() < rate ? T(0) : scale;
                mask_row[i] = m;
                emb_rows[i] *= m;
            }
        }
        T* conv_rows = cc.conv_out.v.data() + size_t(r) * C * ck;
        detail::conv1d_same_core(emb_rows, params.conv_kernel.v.data(), params.conv_bias.v.data(),
                                 C, cd, cfg.conv_width, ck, conv_rows);
        T* feat = cc.concat.row(r);
        detail::maxpool1d_core(conv_rows, C, ck, C, C, feat,
                               cc.pool_argmax.data() + size_t(r) * ck);
        if (rate > 0) {
            T* mask_row = cc.drop2_mask.data() + size_t(r) * ck;
            for (int i = 0; i < ck; ++i) {
                const T m = rng->uniform() < rate ? T(0) : scale;
                mask_row[i] = m;
                feat[i] *= m;
            }
        }
        const T* wrow = params.word_embed.row(batch.word_at(s, t));
        std::copy(wrow, wrow + cfg.word_dim, feat + ck);
        const T* crow = params.casing_embed.row(batch.casing_at(s, t));
        std::copy(crow, crow + cfg.casing_dim, feat + ck + cfg.word_dim);
    }

    // Batch norm over the unmasked rows only.
    if (cfg.batch_norm) {
        cc.bn_rows.clear();
        for (int r = 0; r < N; ++r)
            if (batch.mask[size_t(r)]) cc.bn_rows.push_back(r);
        Tensor<T> gathered({int(cc.bn_rows.size()), F});
        for (size_t i = 0; i < cc.bn_rows.size(); ++i) {
            const T* src = cc.concat.row(cc.bn_rows[i]);
            std::copy(src, src + F, gathered.row(int(i)));
        }
        Tensor<T> normed = batch_norm_apply(gathered, params.bn_gamma, params.bn_beta,
                                            params.bn_mean, params.bn_var, mode,
                                            train ? &cc.bn_cache : nullptr);
        cc.features = cc.concat;
        for (size_t i = 0; i < cc.bn_rows.size(); ++i) {
            const T* src = normed.row(int(i));
            std::copy(src, src + F, cc.features.row(cc.bn_rows[i]));
        }
    } else {
        cc.features = cc.concat;
    }

    cc.blstm_out = Tensor<T>({N, 2 * H});
    cc.scans.assign(size_t(b), BiScanCache<T>{});
    for (int s = 0; s < b; ++s) {
        Tensor<T> seq({w, F});
        std::copy(cc.features.row(s * w), cc.features.row(s * w) + size_t(w) * F, seq.v.data());
        std::vector<uint8_t> mask(batch.mask.begin() + size_t(s) * w,
                                  batch.mask.begin() + size_t(s + 1) * w);
        Tensor<T> out =
            bidirectional_scan(seq, params.lstm_fwd, params.lstm_bwd, mask, &cc.scans[size_t(s)]);
        std::copy(out.v.begin(), out.v.end(), cc.blstm_out.v.begin() + size_t(s) * w * 2 * H);
    }

    cc.logits = Tensor<T>({N, cfg.n_tags});
    for (int r = 0; r < N; ++r) {
        const T* h = cc.blstm_out.row(r);
        T* lrow = cc.logits.row(r);
        std::copy(params.output_bias.v.begin(), params.output_bias.v.end(), lrow);
        for (int j = 0; j < 2 * H; ++j) {
            const T hj = h[j];
            if (hj == T(0)) continue;
            const T* krow = params.output_kernel.row(j);
            for (int k = 0; k < cfg.n_tags; ++k) lrow[k] += hj * krow[k];
        }
    }

    if (trace) {
        trace->char_embed_shape = {b, w, C, cd};
        trace->char_feature_shape = {b, w, ck};
        trace->concat_shape = {b, w, F};
        trace->blstm_shape = {b, w, 2 * H};
    }
    return cc.logits;
}

// Per-token tag probabilities (b, w, n_tags).
template <class T>
Tensor<T> forward(ModelParamsT<T>& params, const Batch& batch, RunMode mode, Rng* rng = nullptr,
                  ForwardTrace* trace = nullptr) {
    Tensor<T> logits =
        forward_logits(params, batch, mode, rng, static_cast<NetworkCache<T>*>(nullptr), trace);
    Tensor<T> probs = softmax_rows(logits);
    probs.shape = {batch.b, batch.w, params.config.n_tags};
    return probs;
}

// Softmax cross entropy over unmasked positions plus gradients for every
// trainable tensor, in manifest order. Frozen word embeddings get no entry.
template <class T>
std::pair<T, NamedTensors<T>> loss_and_grads(ModelParamsT<T>& params, const Batch& batch,
                                             Rng* rng) {
    const NetworkConfig& cfg = params.config;
    const int b = batch.b, w = batch.w, N = b * w;
    const int C = cfg.max_chars, cd = cfg.char_dim, ck = cfg.conv_kernels;
    const int F = cfg.concat_width();
    const int H = cfg.lstm_units;

    NetworkCache<T> cc;
    forward_logits(params, batch, RunMode::train, rng, &cc);

    auto [loss, d_logits] = softmax_xent(cc.logits, batch.tag_ids, batch.mask);

    NamedTensors<T> grads;
    for (const auto& name : params.trainable_names()) {
        for (auto& [k, t] : params.named_tensors()) {
            if (k == name) grads.emplace_back(name, Tensor<T>(t->shape));
        }
    }
    auto grad_of = [&](const char* name) -> Tensor<T>& {
        for (auto& [k, t] : grads) {
            if (k == name) return t;
        }
        fail(std::string("missing gradient entry: ") + name);
    };

    Tensor<T>& d_output_kernel = grad_of("output_kernel");
    Tensor<T>& d_output_bias = grad_of("output_bias");
    Tensor<T> d_blstm({N, 2 * H});
    for (int r = 0; r < N; ++r) {
        if (!batch.mask[size_t(r)]) continue;
        const T* dl = d_logits.row(r);
        const T* h = cc.blstm_out.row(r);
        T* dh = d_blstm.row(r);
        for (int k = 0; k < cfg.n_tags; ++k) d_output_bias.v[size_t(k)] += dl[k];
        for (int j = 0; j < 2 * H; ++j) {
            const T* krow = params.output_kernel.row(j);
            T* dkrow = d_output_kernel.row(j);
            T acc = T(0);
            for (int k = 0; k < cfg.n_tags; ++k) {
                acc += krow[k] * dl[k];
                dkrow[k] += h[j] * dl[k];
            }
            dh[j] = acc;
        }
    }

    // BLSTM backward per sentence.
    Tensor<T> d_features({N, F});
    LstmWeights<T> d_fwd = LstmWeights<T>::zeros(F, H);
    LstmWeights<T> d_bwd = LstmWeights<T>::zeros(F, H);
    for (int s = 0; s < b; ++s) {
        Tensor<T> seq({w, F});
        std::copy(cc.features.row(s * w), cc.features.row(s * w) + size_t(w) * F, seq.v.data());
        Tensor<T> d_out({w, 2 * H});
        std::copy(d_blstm.row(s * w), d_blstm.row(s * w) + size_t(w) * 2 * H, d_out.v.data());
        Tensor<T> d_seq({w, F});
        bidirectional_scan_backward(seq, params.lstm_fwd, params.lstm_bwd, cc.scans[size_t(s)],
                                    d_out, d_seq, d_fwd, d_bwd);
        std::copy(d_seq.v.begin(), d_seq.v.end(), d_features.v.begin() + size_t(s) * w * F);
    }
    grad_of("lstm_fwd_W") = std::move(d_fwd.W);
    grad_of("lstm_fwd_U") = std::move(d_fwd.U);
    grad_of("lstm_fwd_b") = std::move(d_fwd.b);
    grad_of("lstm_bwd_W") = std::move(d_bwd.W);
    grad_of("lstm_bwd_U") = std::move(d_bwd.U);
    grad_of("lstm_bwd_b") = std::move(d_bwd.b);

    // Batch-norm backward over the gathered unmasked rows.
    Tensor<T>* d_concat = &d_features;
    Tensor<T> d_concat_store;
    if (cfg.batch_norm) {
        const int nb = int(cc.bn_rows.size());
        Tensor<T> d_gathered({nb, F});
        for (int i = 0; i < nb; ++i) {
            const T* src = d_features.row(cc.bn_rows[size_t(i)]);
            std::copy(src, src + F, d_gathered.row(i));
        }
        Tensor<T> d_in({nb, F});
        batch_norm_backward(cc.bn_cache, params.bn_gamma, d_gathered, d_in, grad_of("bn_gamma"),
                            grad_of("bn_beta"));
        d_concat_store = Tensor<T>({N, F});
        for (int i = 0; i < nb; ++i) {
            const T* src = d_in.row(i);
            std::copy(src, src + F, d_concat_store.row(cc.bn_rows[size_t(i)]));
        }
        d_concat = &d_concat_store;
    }

    // Split the concat gradient: char features | word embedding | casing.
    Tensor<T>& d_char_embed = grad_of("char_embed");
    Tensor<T>& d_conv_kernel = grad_of("conv_kernel");
    Tensor<T>& d_conv_bias = grad_of("conv_bias");
    Tensor<T>* d_word_embed =
        cfg.trainable_embeddings ? &grad_of("word_embed") : nullptr;

    std::vector<T> d_pool(size_t(ck), T(0));
    Tensor<T> d_conv_out({C, ck});
    Tensor<T> d_char_rows({C, cd});
    for (int r = 0; r < N; ++r) {
        if (!batch.mask[size_t(r)]) continue;
        const int s = r / w, t = r % w;
        const T* dc = d_concat->row(r);

        if (d_word_embed) {
            T* dw = d_word_embed->row(batch.word_at(s, t));
            for (int j = 0; j < cfg.word_dim; ++j) dw[j] += dc[ck + j];
        }

        for (int i = 0; i < ck; ++i)
            d_pool[size_t(i)] =
                cc.drop2_mask.empty() ? dc[i] : dc[i] * cc.drop2_mask[size_t(r) * ck + i];
        d_conv_out.fill(T(0));
        const int* argmax = cc.pool_argmax.data() + size_t(r) * ck;
        for (int i = 0; i < ck; ++i) d_conv_out.at(argmax[i], i) += d_pool[size_t(i)];

        d_char_rows.fill(T(0));
        const T* emb_rows = cc.char_emb.v.data() + size_t(r) * C * cd;
        detail::conv1d_same_backward_core(emb_rows, params.conv_kernel.v.data(),
                                          d_conv_out.v.data(), C, cd, cfg.conv_width, ck,
                                          d_char_rows.v.data(), d_conv_kernel.v.data(),
                                          d_conv_bias.v.data());
        const int* chars = batch.chars_at(s, t);
        for (int c = 0; c < C; ++c) {
            T* dst = d_char_embed.row(chars[c]);
            const T* src = d_char_rows.row(c);
            if (cc.drop1_mask.empty()) {
                for (int j = 0; j < cd; ++j) dst[j] += src[j];
            } else {
                const T* m = cc.drop1_mask.data() + (size_t(r) * C + size_t(c)) * cd;
                for (int j = 0; j < cd; ++j) dst[j] += src[j] * m[j];
            }
        }
    }

    return {loss, std::move(grads)};
}

// Argmax decode (ties to the lowest tag id) followed by lenient BIO repair.
std::vector<std::vector<int>> predict_tags(ModelParams& params,
                                           const std::vector<std::vector<std::string>>& sentences,
                                           const Vocab& vocab, const EncodeOptions& enc);

// Convenience: predictions for every sentence of a corpus, in corpus order.
std::vector<std::vector<int>> predict_corpus(ModelParams& params, const TaggedCorpus& corpus,
                                             const Vocab& vocab, const EncodeOptions& enc);

}  // namespace fsner
