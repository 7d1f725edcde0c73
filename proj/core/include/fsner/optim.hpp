#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/network.hpp"

namespace fsner {

struct NadamConfig {
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double schedule_decay = 0.004;  // psi
};

// First/second moments per trainable tensor plus the momentum-schedule
// product. Moments are keyed lazily from the first gradient map seen.
template <class T>
struct OptimizerStateT {
    NamedTensors<T> m;
    NamedTensors<T> v;
    int64_t t = 0;
    double mu_product = 1.0;
};

using OptimizerState = OptimizerStateT<float>;

template <class T>
using TensorRefs = std::vector<std::pair<std::string, Tensor<T>*>>;

// Nesterov-Adam update with the time-dependent momentum schedule
// mu_t = beta1 * (1 - 0.5 * 0.96^(t*psi)).
template <class T>
void nadam_step(OptimizerStateT<T>& state, const TensorRefs<T>& params,
                const NamedTensors<T>& grads, const NadamConfig& cfg) {
    if (state.t == 0 && state.m.empty()) {
        for (const auto& [name, g] : grads) {
            state.m.emplace_back(name, Tensor<T>(g.shape));
            state.v.emplace_back(name, Tensor<T>(g.shape));
        }
    }
    require(state.m.size() == grads.size(), "nadam_step: gradient map does not match state");

    state.t += 1;
    const double t = double(state.t);
    const double mu_t = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, t * cfg.schedule_decay));
    const double mu_next = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, (t + 1.0) * cfg.schedule_decay));
    const double mu_prod_t = state.mu_product * mu_t;
    const double mu_prod_next = mu_prod_t * mu_next;
    state.mu_product = mu_prod_t;
    const double v_correction = 1.0 - std::pow(cfg.beta2, t);

    for (size_t i = 0; i < grads.size(); ++i) {
        const auto& [name, g] = grads[i];
        require(state.m[i].first == name, "nadam_step: gradient order changed: " + name);
        Tensor<T>* p = nullptr;
        for (const auto& [k, ptr] : params) {
            if (k == name) p = ptr;
        }
        require(p != nullptr, "nadam_step: unknown tensor " + name);
        require(p->shape == g.shape, "nadam_step: gradient shape mismatch for " + name);

        Tensor<T>& m = state.m[i].second;
        Tensor<T>& v = state.v[i].second;
        for (size_t j = 0; j < g.v.size(); ++j) {
            const double gj = double(g.v[j]);
            const double mj = cfg.beta1 * double(m.v[j]) + (1.0 - cfg.beta1) * gj;
            const double vj = cfg.beta2 * double(v.v[j]) + (1.0 - cfg.beta2) * gj * gj;
            m.v[j] = T(mj);
            v.v[j] = T(vj);
            const double g_hat = gj / (1.0 - mu_prod_t);
            const double m_hat = mj / (1.0 - mu_prod_next);
            const double v_hat = vj / v_correction;
            const double m_bar = (1.0 - mu_t) * g_hat + mu_next * m_hat;
            p->v[j] = T(double(p->v[j]) - cfg.lr * m_bar / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

template <class T>
void nadam_step(OptimizerStateT<T>& state, ModelParamsT<T>& model, const NamedTensors<T>& grads,
                const NadamConfig& cfg) {
    nadam_step(state, model.named_tensors(), grads, cfg);
}

enum class OptimizerKind { nadam, sgd };
enum class DecayMode { constant, scheduled };

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::nadam;
    double sgd_lr = 0.04;  // 0.04 or 0.08 by convention
    DecayMode decay = DecayMode::constant;
    double decay_coeff = 0.05;  // kappa in lr0 / (1 + kappa * epoch)
    NadamConfig nadam;
    bool bucket_by_length = true;
    // Monitor option: stop once train token accuracy reaches the threshold.
    // Negative disables (the default; no early stopping).
    double stop_at_train_accuracy = -1.0;
};

inline double sgd_learning_rate(const TrainConfig& cfg, int epoch) {
    if (cfg.decay == DecayMode::constant) return cfg.sgd_lr;
    return cfg.sgd_lr / (1.0 + cfg.decay_coeff * double(epoch));
}

// p <- p - lr_e * g with lr_e constant or inverse-time scheduled.
template <class T>
void sgd_step(const TensorRefs<T>& params, const NamedTensors<T>& grads, int epoch,
              const TrainConfig& cfg) {
    const T lr = T(sgd_learning_rate(cfg, epoch));
    for (const auto& [name, g] : grads) {
        Tensor<T>* p = nullptr;
        for (const auto& [k, ptr] : params) {
            if (k == name) p = ptr;
        }
        require(p != nullptr, "sgd_step: unknown tensor " + name);
        require(p->shape == g.shape, "sgd_step: gradient shape mismatch for " + name);
        for (size_t j = 0; j < g.v.size(); ++j) p->v[j] -= lr * g.v[j];
    }
}

template <class T>
void sgd_step(ModelParamsT<T>& model, const NamedTensors<T>& grads, int epoch,
              const TrainConfig& cfg) {
    sgd_step(model.named_tensors(), grads, epoch, cfg);
}

struct EpochStats {
    double mean_loss = 0.0;                 // token-weighted over the epoch
    std::optional<double> dev_f1;           // entity-level micro F1
};

using TrainHistory = std::vector<EpochStats>;

// Epoch loop: seeded reshuffle, batch updates via the configured optimizer,
// optional per-epoch dev F1. Returns the model after the final epoch.
TrainHistory fit(ModelParams& model, const TaggedCorpus& train, const TaggedCorpus* dev,
                 const Vocab& vocab, const TrainConfig& cfg, const EncodeOptions& enc,
                 OptimizerState* opt_state = nullptr);

}  // namespace fsner
