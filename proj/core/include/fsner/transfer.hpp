#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/network.hpp"
#include "fsner/optim.hpp"

namespace fsner {

// Which layers receive pre-trained weights; everything else keeps its fresh
// random initialization.
enum class InitStrategy { All, BlstmOnly, AllButBlstm };

const char* init_strategy_name(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& s);

struct CheckpointMeta {
    int version = 1;
    NetworkConfig config;
    LabelScheme scheme;
    uint64_t vocab_fingerprint = 0;
    int64_t vocab_size = 0;
    bool has_optimizer = false;
    int64_t opt_t = 0;
    uint64_t opt_mu_product_bits = 0;  // raw double bits, bit-exact round trip
};

struct Checkpoint {
    CheckpointMeta meta;
    NamedTensors<float> tensors;  // parameters, then opt.m.* / opt.v.* when present

    const Tensor<float>* tensor(const std::string& name) const;
};

Checkpoint make_checkpoint(const ModelParams& model, const LabelScheme& scheme, const Vocab& vocab,
                           const OptimizerState* opt = nullptr);

// Binary format: magic "FSNER1", u32-le metadata length, UTF-8 key-value
// metadata (version, config, scheme, vocab fingerprint, tensor manifest of
// name/shape/offset), then raw row-major little-endian f32 payloads in
// manifest order. Writes are atomic (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
void save_checkpoint(const ModelParams& model, const LabelScheme& scheme, const Vocab& vocab,
                     const std::string& path, const OptimizerState* opt = nullptr);

// Fully validated: magic, manifest completeness against the embedded config,
// shape checks, payload bounds.
Checkpoint load_checkpoint(const std::string& path);

ModelParams checkpoint_to_model(const Checkpoint& ckpt);
OptimizerState checkpoint_optimizer_state(const Checkpoint& ckpt);

// Copies the checkpoint tensors selected by the strategy into `target`.
// The output layer is copied only under All/AllButBlstm with identical label
// schemes; word embeddings only when the vocab fingerprints match (otherwise
// the target keeps its embedding-file initialization).
void apply_init_strategy(ModelParams& target, const Checkpoint& ckpt, InitStrategy strategy,
                         const LabelScheme& target_scheme, uint64_t target_vocab_fingerprint);

// Tensor names a strategy copies, given whether the schemes agree. Exposed
// for the partition checks in tests.
std::vector<std::string> strategy_tensor_names(const ModelParams& target, InitStrategy strategy,
                                               bool schemes_match, bool fingerprints_match);

// Stage 1 trains from random init; each later stage continues from the
// previous stage's weights via strategy All (output layer reset whenever the
// label scheme changes). Optimizer state resets per stage.
Checkpoint sequential_pretrain(const std::vector<TaggedCorpus>& stages, const Vocab& vocab,
                               const EmbeddingMatrix& emb, const NetworkConfig& base_config,
                               const TrainConfig& train_config, const EncodeOptions& enc,
                               uint64_t seed, std::vector<TrainHistory>* histories = nullptr);

}  // namespace fsner
