#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fsner/rng.hpp"
#include "fsner/tensor.hpp"

namespace fsner {

enum class RunMode { train, infer };

template <class T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------
// 1-d convolution, "same" zero padding. input (L x Cin), kernels (K x Cin x Cout),
// bias (Cout) -> (L x Cout). K must be odd.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void conv1d_same_core(const T* input, const T* kernels, const T* bias, int L, int cin, int K,
                      int cout, T* out) {
    const int off = K / 2;
    for (int l = 0; l < L; ++l) {
        T* orow = out + size_t(l) * cout;
        for (int co = 0; co < cout; ++co) orow[co] = bias[co];
        for (int k = 0; k < K; ++k) {
            const int src = l + k - off;
            if (src < 0 || src >= L) continue;
            const T* irow = input + size_t(src) * cin;
            for (int ci = 0; ci < cin; ++ci) {
                const T x = irow[ci];
                if (x == T(0)) continue;
                const T* krow = kernels + (size_t(k) * cin + ci) * cout;
                for (int co = 0; co < cout; ++co) orow[co] += x * krow[co];
            }
        }
    }
}

template <class T>
void conv1d_same_backward_core(const T* input, const T* kernels, const T* d_out, int L, int cin,
                               int K, int cout, T* d_input, T* d_kernels, T* d_bias) {
    const int off = K / 2;
    for (int l = 0; l < L; ++l) {
        const T* dor = d_out + size_t(l) * cout;
        for (int co = 0; co < cout; ++co) d_bias[co] += dor[co];
        for (int k = 0; k < K; ++k) {
            const int src = l + k - off;
            if (src < 0 || src >= L) continue;
            const T* irow = input + size_t(src) * cin;
            T* dirow = d_input + size_t(src) * cin;
            for (int ci = 0; ci < cin; ++ci) {
                const T* krow = kernels + (size_t(k) * cin + ci) * cout;
                T* dkrow = d_kernels + (size_t(k) * cin + ci) * cout;
                T acc = T(0);
                const T x = irow[ci];
                for (int co = 0; co < cout; ++co) {
                    const T g = dor[co];
                    dkrow[co] += x * g;
                    acc += krow[co] * g;
                }
                dirow[ci] += acc;
            }
        }
    }
}

template <class T>
void maxpool1d_core(const T* input, int L, int C, int window, int stride, T* out, int* argmax) {
    const int out_len = (L + stride - 1) / stride;
    for (int w = 0; w < out_len; ++w) {
        const int begin = w * stride;
        const int end = std::min(begin + window, L);
        for (int c = 0; c < C; ++c) {
            T best = input[size_t(begin) * C + c];
            int best_idx = begin;
            for (int l = begin + 1; l < end; ++l) {
                const T x = input[size_t(l) * C + c];
                if (x > best) {
                    best = x;
                    best_idx = l;
                }
            }
            out[size_t(w) * C + c] = best;
            if (argmax) argmax[size_t(w) * C + c] = best_idx;
        }
    }
}

}  // namespace detail

template <class T>
Tensor<T> conv1d_same(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias) {
    require(input.ndim() == 2 && kernels.ndim() == 3 && bias.ndim() == 1,
            "conv1d_same: input must be (L x Cin), kernels (K x Cin x Cout), bias (Cout)");
    const int L = input.dim(0), cin = input.dim(1);
    const int K = kernels.dim(0), cout = kernels.dim(2);
    require(K % 2 == 1, "conv1d_same: kernel width must be odd");
    require(kernels.dim(1) == cin, "conv1d_same: kernel Cin mismatch");
    require(bias.dim(0) == cout, "conv1d_same: bias Cout mismatch");

    Tensor<T> out({L, cout});
    detail::conv1d_same_core(input.v.data(), kernels.v.data(), bias.v.data(), L, cin, K, cout,
                             out.v.data());
    debug_check_finite(out, "conv1d_same");
    return out;
}

// Accumulates into d_input / d_kernels / d_bias (caller allocates, usually zeroed).
template <class T>
void conv1d_same_backward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& d_out,
                          Tensor<T>& d_input, Tensor<T>& d_kernels, Tensor<T>& d_bias) {
    const int L = input.dim(0), cin = input.dim(1);
    const int K = kernels.dim(0), cout = kernels.dim(2);
    require(d_out.shape == std::vector<int>({L, cout}), "conv1d_same_backward: d_out shape mismatch");
    detail::conv1d_same_backward_core(input.v.data(), kernels.v.data(), d_out.v.data(), L, cin, K,
                                      cout, d_input.v.data(), d_kernels.v.data(), d_bias.v.data());
}

// ---------------------------------------------------------------------------
// 1-d max pooling. input (L x C) -> (ceil(L/stride) x C), windows clipped at L.
// Gradient routes to the first maximal index per window.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> maxpool1d(const Tensor<T>& input, int window, int stride,
                    std::vector<int>* argmax = nullptr) {
    require(input.ndim() == 2, "maxpool1d: input must be (L x C)");
    require(window >= 1 && stride >= 1, "maxpool1d: window and stride must be >= 1");
    const int L = input.dim(0), C = input.dim(1);
    require(L >= 1, "maxpool1d: empty input");

    const int out_len = (L + stride - 1) / stride;
    Tensor<T> out({out_len, C});
    if (argmax) argmax->assign(size_t(out_len) * C, 0);
    detail::maxpool1d_core(input.v.data(), L, C, window, stride, out.v.data(),
                           argmax ? argmax->data() : nullptr);
    return out;
}

template <class T>
void maxpool1d_backward(const std::vector<int>& argmax, const Tensor<T>& d_out, Tensor<T>& d_input) {
    const int out_len = d_out.dim(0), C = d_out.dim(1);
    for (int w = 0; w < out_len; ++w)
        for (int c = 0; c < C; ++c) d_input.at(argmax[size_t(w) * C + c], c) += d_out.at(w, c);
}

// ---------------------------------------------------------------------------
// LSTM. Gate order i, f, c~, o. Input kernel W (Din x 4H), recurrent kernel
// U (H x 4H), bias b (4H).
// ---------------------------------------------------------------------------

template <class T>
struct LstmWeights {
    Tensor<T> W;  // (Din x 4H)
    Tensor<T> U;  // (H x 4H)
    Tensor<T> b;  // (4H)

    int input_dim() const { return W.dim(0); }
    int hidden() const { return U.dim(0); }

    static LstmWeights zeros(int din, int hidden) {
        LstmWeights w;
        w.W = Tensor<T>({din, 4 * hidden});
        w.U = Tensor<T>({hidden, 4 * hidden});
        w.b = Tensor<T>({4 * hidden});
        return w;
    }
};

namespace detail {

// One step on raw rows. gates/c/tanh_c are the per-step cache (each 4H / H / H).
template <class T>
void lstm_step_core(const LstmWeights<T>& w, const T* x, const T* h_prev, const T* c_prev,
                    T* h_out, T* c_out, T* gates, T* tanh_c) {
    const int din = w.input_dim(), H = w.hidden(), G = 4 * H;
    for (int j = 0; j < G; ++j) gates[j] = w.b.v[size_t(j)];
    for (int i = 0; i < din; ++i) {
        const T xi = x[i];
        if (xi == T(0)) continue;
        const T* wrow = w.W.row(i);
        for (int j = 0; j < G; ++j) gates[j] += xi * wrow[j];
    }
    for (int k = 0; k < H; ++k) {
        const T hk = h_prev[k];
        if (hk == T(0)) continue;
        const T* urow = w.U.row(k);
        for (int j = 0; j < G; ++j) gates[j] += hk * urow[j];
    }
    for (int j = 0; j < H; ++j) {
        const T ig = sigmoid(gates[j]);
        const T fg = sigmoid(gates[H + j]);
        const T gg = std::tanh(gates[2 * H + j]);
        const T og = sigmoid(gates[3 * H + j]);
        gates[j] = ig;
        gates[H + j] = fg;
        gates[2 * H + j] = gg;
        gates[3 * H + j] = og;
        const T c = fg * c_prev[j] + ig * gg;
        const T tc = std::tanh(c);
        c_out[j] = c;
        tanh_c[j] = tc;
        h_out[j] = og * tc;
    }
}

// Backward through one step. d_h/d_c are incoming gradients wrt h_out/c_out;
// writes d_c_prev, accumulates into d_x, d_h_prev and the weight gradients.
template <class T>
void lstm_step_backward_core(const LstmWeights<T>& w, const T* x, const T* h_prev, const T* c_prev,
                             const T* gates, const T* tanh_c, const T* d_h, const T* d_c_in,
                             T* d_x, T* d_h_prev, T* d_c_prev, LstmWeights<T>& d_w,
                             std::vector<T>& dz_scratch) {
    const int din = w.input_dim(), H = w.hidden(), G = 4 * H;
    dz_scratch.resize(size_t(G));
    T* dz = dz_scratch.data();
    for (int j = 0; j < H; ++j) {
        const T ig = gates[j], fg = gates[H + j], gg = gates[2 * H + j], og = gates[3 * H + j];
        const T tc = tanh_c[j];
        const T dh = d_h[j];
        const T dc = dh * og * (T(1) - tc * tc) + (d_c_in ? d_c_in[j] : T(0));
        dz[j] = dc * gg * ig * (T(1) - ig);
        dz[H + j] = dc * c_prev[j] * fg * (T(1) - fg);
        dz[2 * H + j] = dc * ig * (T(1) - gg * gg);
        dz[3 * H + j] = dh * tc * og * (T(1) - og);
        d_c_prev[j] = dc * fg;
    }
    for (int i = 0; i < din; ++i) {
        const T* wrow = w.W.row(i);
        T* dwrow = d_w.W.row(i);
        const T xi = x[i];
        T acc = T(0);
        for (int j = 0; j < G; ++j) {
            acc += wrow[j] * dz[j];
            dwrow[j] += xi * dz[j];
        }
        d_x[i] += acc;
    }
    for (int k = 0; k < H; ++k) {
        const T* urow = w.U.row(k);
        T* durow = d_w.U.row(k);
        const T hk = h_prev[k];
        T acc = T(0);
        for (int j = 0; j < G; ++j) {
            acc += urow[j] * dz[j];
            durow[j] += hk * dz[j];
        }
        d_h_prev[k] += acc;
    }
    for (int j = 0; j < G; ++j) d_w.b.v[size_t(j)] += dz[j];
}

}  // namespace detail

// Single-step tensor API: x (Din), h_prev (H), c_prev (H) -> (h, c).
template <class T>
std::pair<Tensor<T>, Tensor<T>> lstm_step(const Tensor<T>& x, const Tensor<T>& h_prev,
                                          const Tensor<T>& c_prev, const LstmWeights<T>& w) {
    const int H = w.hidden();
    require(x.shape == std::vector<int>({w.input_dim()}), "lstm_step: x dim mismatch");
    require(h_prev.shape == std::vector<int>({H}), "lstm_step: h_prev dim mismatch");
    require(c_prev.shape == std::vector<int>({H}), "lstm_step: c_prev dim mismatch");
    Tensor<T> h({H}), c({H});
    std::vector<T> gates(size_t(4) * H, T(0)), tanh_c(size_t(H), T(0));
    detail::lstm_step_core(w, x.v.data(), h_prev.v.data(), c_prev.v.data(), h.v.data(), c.v.data(),
                           gates.data(), tanh_c.data());
    debug_check_finite(h, "lstm_step");
    return {std::move(h), std::move(c)};
}

// Per-direction scan cache; rows are in processing order (step p), not
// sequence order.
template <class T>
struct LstmScanCache {
    Tensor<T> gates;   // (n x 4H), post-activation
    Tensor<T> c;       // (n x H)
    Tensor<T> h;       // (n x H)
    Tensor<T> tanh_c;  // (n x H)
    int n = 0;
    bool reverse = false;
};

// Runs an LSTM over positions 0..n-1 of seq (w x Din), in sequence order or
// reversed. h0 = c0 = 0.
template <class T>
LstmScanCache<T> lstm_scan(const LstmWeights<T>& w, const Tensor<T>& seq, int n, bool reverse) {
    const int H = w.hidden();
    LstmScanCache<T> cache;
    cache.n = n;
    cache.reverse = reverse;
    cache.gates = Tensor<T>({n, 4 * H});
    cache.c = Tensor<T>({n, H});
    cache.h = Tensor<T>({n, H});
    cache.tanh_c = Tensor<T>({n, H});
    std::vector<T> zero(size_t(H), T(0));
    for (int p = 0; p < n; ++p) {
        const int pos = reverse ? n - 1 - p : p;
        const T* h_prev = p == 0 ? zero.data() : cache.h.row(p - 1);
        const T* c_prev = p == 0 ? zero.data() : cache.c.row(p - 1);
        detail::lstm_step_core(w, seq.row(pos), h_prev, c_prev, cache.h.row(p), cache.c.row(p),
                               cache.gates.row(p), cache.tanh_c.row(p));
    }
    return cache;
}

// d_h_seq holds gradients wrt the emitted h at each *sequence position*
// (w x H); accumulates into d_seq and d_w.
template <class T>
void lstm_scan_backward(const LstmWeights<T>& w, const Tensor<T>& seq, const LstmScanCache<T>& cache,
                        const Tensor<T>& d_h_seq, Tensor<T>& d_seq, LstmWeights<T>& d_w) {
    const int H = w.hidden();
    const int n = cache.n;
    std::vector<T> zero(size_t(H), T(0));
    std::vector<T> d_h(size_t(H), T(0)), d_c(size_t(H), T(0)), d_h_prev(size_t(H), T(0)),
        d_c_prev(size_t(H), T(0));
    std::vector<T> dz_scratch;
    for (int p = n - 1; p >= 0; --p) {
        const int pos = cache.reverse ? n - 1 - p : p;
        for (int j = 0; j < H; ++j) d_h[size_t(j)] += d_h_seq.at(pos, j);
        const T* h_prev = p == 0 ? zero.data() : cache.h.row(p - 1);
        const T* c_prev = p == 0 ? zero.data() : cache.c.row(p - 1);
        std::fill(d_h_prev.begin(), d_h_prev.end(), T(0));
        detail::lstm_step_backward_core(w, seq.row(pos), h_prev, c_prev, cache.gates.row(p),
                                        cache.tanh_c.row(p), d_h.data(), d_c.data(), d_seq.row(pos),
                                        d_h_prev.data(), d_c_prev.data(), d_w, dz_scratch);
        d_h = d_h_prev;
        d_c = d_c_prev;
    }
}

template <class T>
struct BiScanCache {
    LstmScanCache<T> fwd;
    LstmScanCache<T> bwd;
    int valid = 0;
};

// seq (w x Din), mask marks the valid prefix -> (w x 2H); rows beyond the
// prefix are zero.
template <class T>
Tensor<T> bidirectional_scan(const Tensor<T>& seq, const LstmWeights<T>& fwd,
                             const LstmWeights<T>& bwd, const std::vector<uint8_t>& mask,
                             BiScanCache<T>* cache = nullptr) {
    require(seq.ndim() == 2, "bidirectional_scan: seq must be (w x Din)");
    require(fwd.input_dim() == seq.dim(1) && bwd.input_dim() == seq.dim(1),
            "bidirectional_scan: input dim mismatch");
    require(fwd.hidden() == bwd.hidden(), "bidirectional_scan: hidden size mismatch");
    const int w = seq.dim(0), H = fwd.hidden();
    require(int(mask.size()) == w, "bidirectional_scan: mask length mismatch");
    int n = 0;
    while (n < w && mask[size_t(n)]) ++n;

    auto fc = lstm_scan(fwd, seq, n, false);
    auto bc = lstm_scan(bwd, seq, n, true);
    Tensor<T> out({w, 2 * H});
    for (int t = 0; t < n; ++t) {
        const T* hf = fc.h.row(t);
        const T* hb = bc.h.row(n - 1 - t);  // processing step that emitted position t
        T* orow = out.row(t);
        std::copy(hf, hf + H, orow);
        std::copy(hb, hb + H, orow + H);
    }
    if (cache) {
        cache->fwd = std::move(fc);
        cache->bwd = std::move(bc);
        cache->valid = n;
    }
    debug_check_finite(out, "bidirectional_scan");
    return out;
}

template <class T>
void bidirectional_scan_backward(const Tensor<T>& seq, const LstmWeights<T>& fwd,
                                 const LstmWeights<T>& bwd, const BiScanCache<T>& cache,
                                 const Tensor<T>& d_out, Tensor<T>& d_seq, LstmWeights<T>& d_fwd,
                                 LstmWeights<T>& d_bwd) {
    const int w = seq.dim(0), H = fwd.hidden();
    const int n = cache.valid;
    Tensor<T> d_h_fwd({w, H}), d_h_bwd({w, H});
    for (int t = 0; t < n; ++t) {
        const T* dor = d_out.row(t);
        std::copy(dor, dor + H, d_h_fwd.row(t));
        std::copy(dor + H, dor + 2 * H, d_h_bwd.row(t));
    }
    // Truncate the scans to the valid prefix; padded rows contribute nothing.
    lstm_scan_backward(fwd, seq, cache.fwd, d_h_fwd, d_seq, d_fwd);
    lstm_scan_backward(bwd, seq, cache.bwd, d_h_bwd, d_seq, d_bwd);
}

// ---------------------------------------------------------------------------
// Softmax + cross entropy, mean over unmasked positions.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    Tensor<T> out = logits;
    const int rows = logits.dim(0), cols = logits.dim(1);
    for (int r = 0; r < rows; ++r) {
        T* row = out.row(r);
        T mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        T sum = T(0);
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < cols; ++c) row[c] /= sum;
    }
    return out;
}

// logits (w x K), targets/mask per row -> (loss, d_logits). Gradient is
// (softmax - onehot) / unmasked_count at unmasked rows, zero elsewhere.
template <class T>
std::pair<T, Tensor<T>> softmax_xent(const Tensor<T>& logits, const std::vector<int>& targets,
                                     const std::vector<uint8_t>& mask) {
    require(logits.ndim() == 2, "softmax_xent: logits must be (w x K)");
    const int rows = logits.dim(0), K = logits.dim(1);
    require(int(targets.size()) == rows && int(mask.size()) == rows,
            "softmax_xent: targets/mask length mismatch");
    int64_t unmasked = 0;
    for (uint8_t m : mask) unmasked += m ? 1 : 0;
    require(unmasked > 0, "softmax_xent: all positions masked");

    Tensor<T> grad({rows, K});
    T loss = T(0);
    const T inv_n = T(1) / T(unmasked);
    for (int r = 0; r < rows; ++r) {
        if (!mask[size_t(r)]) continue;
        const int y = targets[size_t(r)];
        require(y >= 0 && y < K, "softmax_xent: target id out of range");
        const T* lrow = logits.row(r);
        T mx = lrow[0];
        for (int c = 1; c < K; ++c) mx = std::max(mx, lrow[c]);
        T sum = T(0);
        T* grow = grad.row(r);
        for (int c = 0; c < K; ++c) {
            grow[c] = std::exp(lrow[c] - mx);
            sum += grow[c];
        }
        loss += -(lrow[y] - mx - std::log(sum)) * inv_n;
        for (int c = 0; c < K; ++c) {
            grow[c] = grow[c] / sum * inv_n;
        }
        grow[y] -= inv_n;
    }
    return {loss, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Inverted dropout. Train: zero with probability rate, survivors scaled by
// 1/(1-rate). Infer: identity, consumes no rng.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> dropout_apply(const Tensor<T>& input, double rate, RunMode mode, Rng* rng,
                        std::vector<T>* saved_mask = nullptr) {
    require(rate >= 0.0 && rate < 1.0, "dropout_apply: rate must be in [0, 1)");
    if (mode == RunMode::infer || rate == 0.0) {
        if (saved_mask) saved_mask->clear();
        return input;
    }
    require(rng != nullptr, "dropout_apply: train mode needs an rng");
    const T scale = T(1.0 / (1.0 - rate));
    Tensor<T> out = input;
    if (saved_mask) saved_mask->assign(out.v.size(), T(0));
    for (size_t i = 0; i < out.v.size(); ++i) {
        const T m = rng->uniform() < rate ? T(0) : scale;
        out.v[i] *= m;
        if (saved_mask) (*saved_mask)[i] = m;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over (N x F). Train normalizes by batch statistics and
// updates running stats with momentum 0.9; infer uses running stats.
// ---------------------------------------------------------------------------

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <class T>
struct BatchNormCache {
    Tensor<T> x_hat;    // (N x F)
    std::vector<T> inv_std;  // (F)
};

template <class T>
Tensor<T> batch_norm_apply(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                           Tensor<T>& running_mean, Tensor<T>& running_var, RunMode mode,
                           BatchNormCache<T>* cache = nullptr) {
    require(input.ndim() == 2, "batch_norm_apply: input must be (N x F)");
    const int N = input.dim(0), F = input.dim(1);
    require(gamma.shape == std::vector<int>({F}) && beta.shape == std::vector<int>({F}),
            "batch_norm_apply: gamma/beta feature size mismatch");
    require(running_mean.shape == std::vector<int>({F}) &&
                running_var.shape == std::vector<int>({F}),
            "batch_norm_apply: running stats feature size mismatch");

    Tensor<T> out({N, F});
    if (mode == RunMode::infer) {
        for (int f = 0; f < F; ++f) {
            const T inv = T(1) / std::sqrt(running_var.at(f) + T(kBatchNormEps));
            const T mu = running_mean.at(f);
            for (int i = 0; i < N; ++i)
                out.at(i, f) = gamma.at(f) * (input.at(i, f) - mu) * inv + beta.at(f);
        }
        return out;
    }

    require(N >= 1, "batch_norm_apply: train mode needs N >= 1");
    std::vector<T> mean(size_t(F), T(0)), var(size_t(F), T(0));
    for (int i = 0; i < N; ++i) {
        const T* row = input.row(i);
        for (int f = 0; f < F; ++f) mean[size_t(f)] += row[f];
    }
    for (int f = 0; f < F; ++f) mean[size_t(f)] /= T(N);
    for (int i = 0; i < N; ++i) {
        const T* row = input.row(i);
        for (int f = 0; f < F; ++f) {
            const T d = row[f] - mean[size_t(f)];
            var[size_t(f)] += d * d;
        }
    }
    for (int f = 0; f < F; ++f) var[size_t(f)] /= T(N);

    if (cache) {
        cache->x_hat = Tensor<T>({N, F});
        cache->inv_std.assign(size_t(F), T(0));
    }
    for (int f = 0; f < F; ++f) {
        const T inv = T(1) / std::sqrt(var[size_t(f)] + T(kBatchNormEps));
        if (cache) cache->inv_std[size_t(f)] = inv;
        for (int i = 0; i < N; ++i) {
            const T xh = (input.at(i, f) - mean[size_t(f)]) * inv;
            if (cache) cache->x_hat.at(i, f) = xh;
            out.at(i, f) = gamma.at(f) * xh + beta.at(f);
        }
        running_mean.at(f) = T(kBatchNormMomentum) * running_mean.at(f) +
                             T(1 - kBatchNormMomentum) * mean[size_t(f)];
        running_var.at(f) =
            T(kBatchNormMomentum) * running_var.at(f) + T(1 - kBatchNormMomentum) * var[size_t(f)];
    }
    return out;
}

template <class T>
void batch_norm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                         const Tensor<T>& d_out, Tensor<T>& d_input, Tensor<T>& d_gamma,
                         Tensor<T>& d_beta) {
    const int N = d_out.dim(0), F = d_out.dim(1);
    for (int f = 0; f < F; ++f) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (int i = 0; i < N; ++i) {
            const T dy = d_out.at(i, f);
            sum_dy += dy;
            sum_dy_xhat += dy * cache.x_hat.at(i, f);
        }
        d_gamma.at(f) += sum_dy_xhat;
        d_beta.at(f) += sum_dy;
        const T g = gamma.at(f);
        const T inv = cache.inv_std[size_t(f)];
        for (int i = 0; i < N; ++i) {
            const T dy = d_out.at(i, f);
            d_input.at(i, f) +=
                g * inv * (dy - sum_dy / T(N) - cache.x_hat.at(i, f) * sum_dy_xhat / T(N));
        }
    }
}

}  // namespace fsner
