#pragma once

// Finite-difference checks shared by the unit tests and the acceptance
// suite. Everything runs in double precision with dropout disabled.

#include <algorithm>
#include <functional>
#include <vector>

#include "fsner/grad_check.hpp"
#include "fsner/kernels.hpp"
#include "fsner/network.hpp"
#include "fsner/rng.hpp"

namespace fsner::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdStepAlt = 1e-4;

// Values spaced well apart so max-pool argmax choices survive the FD
// perturbation.
inline Tensor<double> spaced_random(Rng& rng, std::vector<int> shape) {
    Tensor<double> t(std::move(shape));
    std::vector<double> grid(t.v.size());
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = (double(i) - double(grid.size()) / 2) * 1e-2;
    rng.shuffle(grid);
    t.v = grid;
    return t;
}

inline Tensor<double> uniform_random(Rng& rng, std::vector<int> shape, double lo = -1.0,
                                     double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

inline double weighted_sum(const Tensor<double>& out, const Tensor<double>& weights) {
    double s = 0;
    for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * weights.v[i];
    return s;
}

inline double check_conv(uint64_t seed) {
    Rng rng(seed);
    const int L = 3 + int(rng.below(8));
    const int cin = 1 + int(rng.below(4));
    const int cout = 1 + int(rng.below(4));
    const int K = 1 + 2 * int(rng.below(2));  // 1 or 3
    Tensor<double> input = uniform_random(rng, {L, cin});
    Tensor<double> kernels = uniform_random(rng, {K, cin, cout});
    Tensor<double> bias = uniform_random(rng, {cout});
    Tensor<double> weights = uniform_random(rng, {L, cout});

    Tensor<double> d_input(input.shape), d_kernels(kernels.shape), d_bias(bias.shape);
    conv1d_same_backward(input, kernels, weights, d_input, d_kernels, d_bias);

    auto loss = [&]() { return weighted_sum(conv1d_same(input, kernels, bias), weights); };
    return grad_check<double>(loss, {&input, &kernels, &bias}, {&d_input, &d_kernels, &d_bias},
                              kFdStep, kFdStepAlt)
        .overall_max;
}

inline double check_maxpool(uint64_t seed) {
    Rng rng(seed);
    const int L = 4 + int(rng.below(10));
    const int C = 1 + int(rng.below(4));
    const int window = 1 + int(rng.below(uint64_t(L)));
    const int stride = 1 + int(rng.below(uint64_t(window)));
    Tensor<double> input = spaced_random(rng, {L, C});
    std::vector<int> argmax;
    Tensor<double> pooled = maxpool1d(input, window, stride, &argmax);
    Tensor<double> weights = uniform_random(rng, {pooled.dim(0), C});

    Tensor<double> d_input(input.shape);
    maxpool1d_backward(argmax, weights, d_input);
    auto loss = [&]() { return weighted_sum(maxpool1d(input, window, stride), weights); };
    return grad_check<double>(loss, {&input}, {&d_input}, kFdStep, kFdStepAlt).overall_max;
}

inline double check_lstm_step(uint64_t seed) {
    Rng rng(seed);
    const int din = 2 + int(rng.below(4));
    const int H = 2 + int(rng.below(4));
    LstmWeights<double> w;
    w.W = uniform_random(rng, {din, 4 * H});
    w.U = uniform_random(rng, {H, 4 * H});
    w.b = uniform_random(rng, {4 * H});
    Tensor<double> x = uniform_random(rng, {din});
    Tensor<double> h_prev = uniform_random(rng, {H});
    Tensor<double> c_prev = uniform_random(rng, {H});
    Tensor<double> rh = uniform_random(rng, {H});
    Tensor<double> rc = uniform_random(rng, {H});

    auto loss = [&]() {
        auto [h, c] = lstm_step(x, h_prev, c_prev, w);
        return weighted_sum(h, rh) + weighted_sum(c, rc);
    };

    Tensor<double> h({H}), c({H});
    std::vector<double> gates(size_t(4) * H, 0.0), tanh_c(size_t(H), 0.0);
    detail::lstm_step_core(w, x.v.data(), h_prev.v.data(), c_prev.v.data(), h.v.data(), c.v.data(),
                           gates.data(), tanh_c.data());
    Tensor<double> d_x(x.shape), d_h_prev(h_prev.shape), d_c_prev(c_prev.shape);
    LstmWeights<double> d_w = LstmWeights<double>::zeros(din, H);
    std::vector<double> scratch;
    detail::lstm_step_backward_core(w, x.v.data(), h_prev.v.data(), c_prev.v.data(), gates.data(),
                                    tanh_c.data(), rh.v.data(), rc.v.data(), d_x.v.data(),
                                    d_h_prev.v.data(), d_c_prev.v.data(), d_w, scratch);

    return grad_check<double>(loss, {&x, &h_prev, &c_prev, &w.W, &w.U, &w.b},
                              {&d_x, &d_h_prev, &d_c_prev, &d_w.W, &d_w.U, &d_w.b}, kFdStep, kFdStepAlt)
        .overall_max;
}

inline double check_bidirectional(uint64_t seed) {
    Rng rng(seed);
    const int w = 2 + int(rng.below(5));
    const int din = 2 + int(rng.below(3));
    const int H = 2 + int(rng.below(3));
    const int valid = 1 + int(rng.below(uint64_t(w)));
    std::vector<uint8_t> mask(size_t(w), 0);
    for (int i = 0; i < valid; ++i) mask[size_t(i)] = 1;

    LstmWeights<double> fwd, bwd;
    fwd.W = uniform_random(rng, {din, 4 * H});
    fwd.U = uniform_random(rng, {H, 4 * H});
    fwd.b = uniform_random(rng, {4 * H});
    bwd.W = uniform_random(rng, {din, 4 * H});
    bwd.U = uniform_random(rng, {H, 4 * H});
    bwd.b = uniform_random(rng, {4 * H});
    Tensor<double> seq = uniform_random(rng, {w, din});
    Tensor<double> weights = uniform_random(rng, {w, 2 * H});

    BiScanCache<double> cache;
    bidirectional_scan(seq, fwd, bwd, mask, &cache);
    Tensor<double> d_seq(seq.shape);
    LstmWeights<double> d_fwd = LstmWeights<double>::zeros(din, H);
    LstmWeights<double> d_bwd = LstmWeights<double>::zeros(din, H);
    bidirectional_scan_backward(seq, fwd, bwd, cache, weights, d_seq, d_fwd, d_bwd);

    auto loss = [&]() {
        return weighted_sum(bidirectional_scan(seq, fwd, bwd, mask), weights);
    };
    return grad_check<double>(
               loss, {&seq, &fwd.W, &fwd.U, &fwd.b, &bwd.W, &bwd.U, &bwd.b},
               {&d_seq, &d_fwd.W, &d_fwd.U, &d_fwd.b, &d_bwd.W, &d_bwd.U, &d_bwd.b}, kFdStep, kFdStepAlt)
        .overall_max;
}

inline double check_softmax_xent(uint64_t seed) {
    Rng rng(seed);
    const int rows = 2 + int(rng.below(5));
    const int K = 2 + int(rng.below(5));
    Tensor<double> logits = uniform_random(rng, {rows, K}, -2.0, 2.0);
    std::vector<int> targets(size_t(rows), 0);
    std::vector<uint8_t> mask(size_t(rows), 0);
    int valid = 0;
    for (int r = 0; r < rows; ++r) {
        targets[size_t(r)] = int(rng.below(uint64_t(K)));
        mask[size_t(r)] = rng.uniform() < 0.7 ? 1 : 0;
        valid += mask[size_t(r)];
    }
    if (valid == 0) mask[0] = 1;

    auto [loss_value, grad] = softmax_xent(logits, targets, mask);
    (void)loss_value;
    auto loss = [&]() { return softmax_xent(logits, targets, mask).first; };
    return grad_check<double>(loss, {&logits}, {&grad}, kFdStep, kFdStepAlt).overall_max;
}

inline double check_batch_norm(uint64_t seed) {
    Rng rng(seed);
    const int N = 3 + int(rng.below(6));
    const int F = 2 + int(rng.below(4));
    Tensor<double> input = uniform_random(rng, {N, F}, -2.0, 2.0);
    Tensor<double> gamma = uniform_random(rng, {F}, 0.5, 1.5);
    Tensor<double> beta = uniform_random(rng, {F});
    Tensor<double> weights = uniform_random(rng, {N, F});

    auto loss = [&]() {
        Tensor<double> mean({F}), var({F});
        var.fill(1.0);
        return weighted_sum(
            batch_norm_apply(input, gamma, beta, mean, var, RunMode::train), weights);
    };

    Tensor<double> mean({F}), var({F});
    var.fill(1.0);
    BatchNormCache<double> cache;
    batch_norm_apply(input, gamma, beta, mean, var, RunMode::train, &cache);
    Tensor<double> d_input(input.shape), d_gamma(gamma.shape), d_beta(beta.shape);
    batch_norm_backward(cache, gamma, weights, d_input, d_gamma, d_beta);

    return grad_check<double>(loss, {&input, &gamma, &beta}, {&d_input, &d_gamma, &d_beta}, kFdStep, kFdStepAlt)
        .overall_max;
}

// Max relative error over every kernel, `seeds` random shape/seed combos each.
inline double run_kernel_gradient_suite(int seeds, uint64_t base_seed = 0xFD) {
    double worst = 0;
    for (int s = 0; s < seeds; ++s) {
        const uint64_t seed = mix_seed(base_seed, uint64_t(s));
        worst = std::max(worst, check_conv(seed));
        worst = std::max(worst, check_maxpool(seed));
        worst = std::max(worst, check_lstm_step(seed));
        worst = std::max(worst, check_bidirectional(seed));
        worst = std::max(worst, check_softmax_xent(seed));
        worst = std::max(worst, check_batch_norm(seed));
    }
    return worst;
}

// Toy double-precision model + 2-sentence batch for composed-network checks.
struct ToyNetwork {
    EmbeddingMatrix emb;
    Vocab vocab;
    TaggedCorpus corpus;
    Batch batch;
    ModelParamsT<double> model;
};

inline ToyNetwork make_toy_network(uint64_t seed, bool batch_norm) {
    Rng rng(mix_seed(seed, 0x70F));
    ToyNetwork toy;
    toy.emb.d = 3;
    toy.emb.tokens = {"aspirin", "mg", "daily", "stop", "dose"};
    for (size_t i = 0; i < toy.emb.tokens.size() * 3; ++i)
        toy.emb.vectors.push_back(rng.uniform(-0.5, 0.5));
    toy.emb.rebuild_index();
    toy.vocab = build_vocab(toy.emb.tokens);

    toy.corpus.scheme = LabelScheme({"Med", "Dose"});
    Document doc;
    doc.id = "d0";
    doc.sentences.push_back({{"Aspirin", "81", "mg", "daily"}, {1, 3, 4, 0}});
    doc.sentences.push_back({{"stop", "dose", "now"}, {0, 3, 0}});
    toy.corpus.documents.push_back(doc);

    NetworkConfig cfg;
    cfg.char_dim = 4;
    cfg.max_chars = 8;
    cfg.conv_kernels = 3;
    cfg.conv_width = 3;
    cfg.dropout_rate = 0.0;
    cfg.word_dim = 3;
    cfg.lstm_units = 3;
    cfg.n_tags = toy.corpus.scheme.n_tags();
    cfg.batch_norm = batch_norm;
    cfg.trainable_embeddings = true;
    toy.model = init_model<double>(cfg, toy.emb, seed);

    BatchOptions opts;
    opts.batch_size = 2;
    opts.encode.max_chars = cfg.max_chars;
    auto batches = make_batches(toy.corpus, toy.vocab, opts);
    toy.batch = batches.at(0);
    return toy;
}

// Full composed network against finite differences (dropout off).
inline double check_network(uint64_t seed, bool batch_norm) {
    ToyNetwork toy = make_toy_network(seed, batch_norm);
    auto [loss_value, grads] = loss_and_grads(toy.model, toy.batch, nullptr);
    (void)loss_value;

    auto loss = [&]() {
        NetworkCache<double> cache;
        Tensor<double> logits = forward_logits(toy.model, toy.batch, RunMode::train,
                                               static_cast<Rng*>(nullptr), &cache);
        return softmax_xent(logits, toy.batch.tag_ids, toy.batch.mask).first;
    };

    std::vector<Tensor<double>*> inputs;
    std::vector<const Tensor<double>*> analytic;
    auto named = toy.model.named_tensors();
    for (auto& [name, grad] : grads) {
        for (auto& [k, ptr] : named) {
            if (k == name) {
                inputs.push_back(ptr);
                analytic.push_back(&grad);
            }
        }
    }
    return grad_check<double>(loss, inputs, analytic, kFdStep, kFdStepAlt).overall_max;
}

inline double run_network_gradient_suite(int seeds, uint64_t base_seed = 0x9E7) {
    double worst = 0;
    for (int s = 0; s < seeds; ++s) {
        const uint64_t seed = mix_seed(base_seed, uint64_t(s));
        worst = std::max(worst, check_network(seed, s % 2 == 1));
    }
    return worst;
}

}  // namespace fsner::testing
