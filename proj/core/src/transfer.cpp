#include "fsner/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsner/error.hpp"
#include "fsner/text_io.hpp"

namespace fsner {

namespace {

constexpr char kMagic[6] = {'F', 'S', 'N', 'E', 'R', '1'};

std::string hex_u64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t parse_hex_u64(const std::string& s) {
    uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= uint64_t(c - '0');
        else if (c >= 'a' && c <= 'f') v |= uint64_t(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= uint64_t(c - 'A' + 10);
        else fail("checkpoint: bad hex value '" + s + "'");
    }
    return v;
}

void append_u32_le(std::string& out, uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

void append_f32_le(std::string& out, float f) {
    const uint32_t bits = std::bit_cast<uint32_t>(f);
    append_u32_le(out, bits);
}

float read_f32_le(const unsigned char* p) {
    const uint32_t bits =
        uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

std::map<std::string, std::string> config_to_kv(const NetworkConfig& c) {
    std::map<std::string, std::string> kv;
    kv["config.char_vocab"] = std::to_string(c.char_vocab);
    kv["config.char_dim"] = std::to_string(c.char_dim);
    kv["config.max_chars"] = std::to_string(c.max_chars);
    kv["config.conv_kernels"] = std::to_string(c.conv_kernels);
    kv["config.conv_width"] = std::to_string(c.conv_width);
    kv["config.dropout_rate"] = format_double(c.dropout_rate);
    kv["config.word_dim"] = std::to_string(c.word_dim);
    kv["config.casing_dim"] = std::to_string(c.casing_dim);
    kv["config.lstm_units"] = std::to_string(c.lstm_units);
    kv["config.n_tags"] = std::to_string(c.n_tags);
    kv["config.batch_norm"] = c.batch_norm ? "1" : "0";
    kv["config.trainable_embeddings"] = c.trainable_embeddings ? "1" : "0";
    kv["config.char_init_range"] = format_double(c.char_init_range);
    return kv;
}

std::string kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    require(it != kv.end(), "checkpoint: missing metadata key '" + key + "'");
    return it->second;
}

int64_t kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    int64_t v = 0;
    require(parse_int64(kv_get(kv, key), v), "checkpoint: bad integer for key '" + key + "'");
    return v;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    double v = 0;
    require(parse_double(kv_get(kv, key), v), "checkpoint: bad number for key '" + key + "'");
    return v;
}

NetworkConfig config_from_kv(const std::map<std::string, std::string>& kv) {
    NetworkConfig c;
    c.char_vocab = int(kv_int(kv, "config.char_vocab"));
    c.char_dim = int(kv_int(kv, "config.char_dim"));
    c.max_chars = int(kv_int(kv, "config.max_chars"));
    c.conv_kernels = int(kv_int(kv, "config.conv_kernels"));
    c.conv_width = int(kv_int(kv, "config.conv_width"));
    c.dropout_rate = kv_double(kv, "config.dropout_rate");
    c.word_dim = int(kv_int(kv, "config.word_dim"));
    c.casing_dim = int(kv_int(kv, "config.casing_dim"));
    c.lstm_units = int(kv_int(kv, "config.lstm_units"));
    c.n_tags = int(kv_int(kv, "config.n_tags"));
    c.batch_norm = kv_int(kv, "config.batch_norm") != 0;
    c.trainable_embeddings = kv_int(kv, "config.trainable_embeddings") != 0;
    c.char_init_range = kv_double(kv, "config.char_init_range");
    return c;
}

// Expected parameter manifest (name, shape) for a config + vocab size.
std::vector<std::pair<std::string, std::vector<int>>> parameter_manifest(const NetworkConfig& c,
                                                                         int64_t vocab_size) {
    const int F = c.concat_width(), H = c.lstm_units;
    std::vector<std::pair<std::string, std::vector<int>>> m = {
        {"char_embed", {c.char_vocab, c.char_dim}},
        {"conv_kernel", {c.conv_width, c.char_dim, c.conv_kernels}},
        {"conv_bias", {c.conv_kernels}},
        {"word_embed", {int(vocab_size), c.word_dim}},
        {"casing_embed", {c.casing_dim, c.casing_dim}},
        {"lstm_fwd_W", {F, 4 * H}},
        {"lstm_fwd_U", {H, 4 * H}},
        {"lstm_fwd_b", {4 * H}},
        {"lstm_bwd_W", {F, 4 * H}},
        {"lstm_bwd_U", {H, 4 * H}},
        {"lstm_bwd_b", {4 * H}},
        {"output_kernel", {2 * H, c.n_tags}},
        {"output_bias", {c.n_tags}},
    };
    if (c.batch_norm) {
        m.push_back({"bn_gamma", {F}});
        m.push_back({"bn_beta", {F}});
        m.push_back({"bn_mean", {F}});
        m.push_back({"bn_var", {F}});
    }
    return m;
}

}  // namespace

const char* init_strategy_name(InitStrategy s) {
    switch (s) {
        case InitStrategy::All: return "all";
        case InitStrategy::BlstmOnly: return "blstm-only";
        case InitStrategy::AllButBlstm: return "all-but-blstm";
    }
    return "all";
}

InitStrategy parse_init_strategy(const std::string& s) {
    if (s == "all") return InitStrategy::All;
    if (s == "blstm-only") return InitStrategy::BlstmOnly;
    if (s == "all-but-blstm") return InitStrategy::AllButBlstm;
    fail("unknown init strategy '" + s + "' (expected all, blstm-only or all-but-blstm)");
}

const Tensor<float>* Checkpoint::tensor(const std::string& name) const {
    return find_tensor(tensors, name);
}

Checkpoint make_checkpoint(const ModelParams& model, const LabelScheme& scheme, const Vocab& vocab,
                           const OptimizerState* opt) {
    Checkpoint ckpt;
    ckpt.meta.config = model.config;
    ckpt.meta.scheme = scheme;
    ckpt.meta.vocab_fingerprint = vocab.fingerprint();
    ckpt.meta.vocab_size = vocab.size();
    for (const auto& [name, t] : model.named_tensors()) ckpt.tensors.emplace_back(name, *t);
    if (opt) {
        ckpt.meta.has_optimizer = true;
        ckpt.meta.opt_t = opt->t;
        ckpt.meta.opt_mu_product_bits = std::bit_cast<uint64_t>(opt->mu_product);
        for (const auto& [name, t] : opt->m) ckpt.tensors.emplace_back("opt.m." + name, t);
        for (const auto& [name, t] : opt->v) ckpt.tensors.emplace_back("opt.v." + name, t);
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::map<std::string, std::string> kv;
    kv["version"] = std::to_string(ckpt.meta.version);
    for (auto& [k, v] : config_to_kv(ckpt.meta.config)) kv[k] = v;
    std::string scheme_str;
    for (size_t i = 0; i < ckpt.meta.scheme.categories.size(); ++i) {
        if (i) scheme_str += ' ';
        scheme_str += ckpt.meta.scheme.categories[i];
    }
    kv["scheme"] = scheme_str;
    kv["vocab_fingerprint"] = hex_u64(ckpt.meta.vocab_fingerprint);
    kv["vocab_size"] = std::to_string(ckpt.meta.vocab_size);
    kv["optimizer.present"] = ckpt.meta.has_optimizer ? "1" : "0";
    if (ckpt.meta.has_optimizer) {
        kv["optimizer.t"] = std::to_string(ckpt.meta.opt_t);
        kv["optimizer.mu_product_bits"] = hex_u64(ckpt.meta.opt_mu_product_bits);
    }

    kv["tensor.count"] = std::to_string(ckpt.tensors.size());
    int64_t offset = 0;
    for (size_t i = 0; i < ckpt.tensors.size(); ++i) {
        const auto& [name, t] = ckpt.tensors[i];
        std::ostringstream entry;
        entry << name << ' ' << t.ndim();
        for (int d : t.shape) entry << ' ' << d;
        entry << ' ' << offset;
        char key[32];
        std::snprintf(key, sizeof(key), "tensor.%04zu", i);
        kv[key] = entry.str();
        offset += t.numel() * 4;
    }

    std::ostringstream meta_stream;
    write_kv_file(meta_stream, kv);
    const std::string metadata = meta_stream.str();

    std::string blob;
    blob.reserve(6 + 4 + metadata.size() + size_t(offset));
    blob.append(kMagic, sizeof(kMagic));
    append_u32_le(blob, uint32_t(metadata.size()));
    blob += metadata;
    for (const auto& [name, t] : ckpt.tensors) {
        for (float f : t.v) append_f32_le(blob, f);
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write checkpoint: " + tmp);
        out.write(blob.data(), std::streamsize(blob.size()));
        require(out.good(), "checkpoint write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, "checkpoint rename failed: " + path + " (" + ec.message() + ")");
}

void save_checkpoint(const ModelParams& model, const LabelScheme& scheme, const Vocab& vocab,
                     const std::string& path, const OptimizerState* opt) {
    save_checkpoint(make_checkpoint(model, scheme, vocab, opt), path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string blob = ss.str();

    require(blob.size() >= 10 && std::memcmp(blob.data(), kMagic, sizeof(kMagic)) == 0,
            "not a checkpoint file: " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + 6);
    const uint32_t meta_len =
        uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
    require(blob.size() >= 10 + size_t(meta_len), "truncated checkpoint metadata: " + path);

    std::istringstream meta_stream(blob.substr(10, meta_len));
    const auto kv = read_kv_file(meta_stream);

    Checkpoint ckpt;
    ckpt.meta.version = int(kv_int(kv, "version"));
    require(ckpt.meta.version == 1,
            "unsupported checkpoint version " + std::to_string(ckpt.meta.version));
    ckpt.meta.config = config_from_kv(kv);
    const std::string scheme_str = kv_get(kv, "scheme");
    if (!scheme_str.empty()) ckpt.meta.scheme = LabelScheme(split_whitespace(scheme_str));
    ckpt.meta.vocab_fingerprint = parse_hex_u64(kv_get(kv, "vocab_fingerprint"));
    ckpt.meta.vocab_size = kv_int(kv, "vocab_size");
    ckpt.meta.has_optimizer = kv_int(kv, "optimizer.present") != 0;
    if (ckpt.meta.has_optimizer) {
        ckpt.meta.opt_t = kv_int(kv, "optimizer.t");
        ckpt.meta.opt_mu_product_bits = parse_hex_u64(kv_get(kv, "optimizer.mu_product_bits"));
    }
    require(ckpt.meta.scheme.n_tags() == ckpt.meta.config.n_tags,
            "checkpoint: label scheme does not match config n_tags");

    const size_t payload_start = 10 + size_t(meta_len);
    const int64_t tensor_count = kv_int(kv, "tensor.count");
    for (int64_t i = 0; i < tensor_count; ++i) {
        char key[32];
        std::snprintf(key, sizeof(key), "tensor.%04lld", static_cast<long long>(i));
        const auto cols = split_whitespace(kv_get(kv, key));
        require(cols.size() >= 3, "checkpoint: malformed tensor entry " + std::string(key));
        const std::string& name = cols[0];
        int64_t ndim = 0;
        require(parse_int64(cols[1], ndim) && ndim >= 1 && cols.size() == size_t(3 + ndim),
                "checkpoint: malformed tensor entry for " + name);
        std::vector<int> shape;
        for (int64_t d = 0; d < ndim; ++d) {
            int64_t dim = 0;
            require(parse_int64(cols[size_t(2 + d)], dim) && dim >= 1,
                    "checkpoint: bad dimension in tensor " + name);
            shape.push_back(int(dim));
        }
        int64_t offset = 0;
        require(parse_int64(cols.back(), offset) && offset >= 0,
                "checkpoint: bad offset in tensor " + name);

        Tensor<float> t(shape);
        const size_t begin = payload_start + size_t(offset);
        const size_t bytes = size_t(t.numel()) * 4;
        require(begin + bytes <= blob.size(), "truncated checkpoint payload for tensor " + name);
        const auto* src = reinterpret_cast<const unsigned char*>(blob.data() + begin);
        for (int64_t j = 0; j < t.numel(); ++j) t.v[size_t(j)] = read_f32_le(src + size_t(j) * 4);
        ckpt.tensors.emplace_back(name, std::move(t));
    }

    // Manifest completeness and shape validation against the embedded config.
    for (const auto& [name, shape] : parameter_manifest(ckpt.meta.config, ckpt.meta.vocab_size)) {
        const Tensor<float>* t = ckpt.tensor(name);
        require(t != nullptr, "checkpoint is missing tensor '" + name + "'");
        require(t->shape == shape, "checkpoint tensor '" + name + "' has unexpected shape");
    }
    if (ckpt.meta.has_optimizer) {
        for (const auto& [name, t] : ckpt.tensors) {
            if (name.rfind("opt.m.", 0) == 0 || name.rfind("opt.v.", 0) == 0) {
                const std::string base = name.substr(6);
                const Tensor<float>* bt = ckpt.tensor(base);
                require(bt != nullptr && bt->shape == t.shape,
                        "checkpoint optimizer moment '" + name + "' does not match its tensor");
            }
        }
    }
    return ckpt;
}

ModelParams checkpoint_to_model(const Checkpoint& ckpt) {
    ModelParams m;
    m.config = ckpt.meta.config;
    for (auto& [name, dst] : m.named_tensors()) {
        const Tensor<float>* src = ckpt.tensor(name);
        require(src != nullptr, "checkpoint is missing tensor '" + name + "'");
        *dst = *src;
    }
    return m;
}

OptimizerState checkpoint_optimizer_state(const Checkpoint& ckpt) {
    require(ckpt.meta.has_optimizer, "checkpoint has no optimizer state");
    OptimizerState state;
    state.t = ckpt.meta.opt_t;
    state.mu_product = std::bit_cast<double>(ckpt.meta.opt_mu_product_bits);
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.rfind("opt.m.", 0) == 0) state.m.emplace_back(name.substr(6), t);
    }
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.rfind("opt.v.", 0) == 0) state.v.emplace_back(name.substr(6), t);
    }
    return state;
}

std::vector<std::string> strategy_tensor_names(const ModelParams& target, InitStrategy strategy,
                                               bool schemes_match, bool fingerprints_match) {
    const auto& lstm = lstm_tensor_names();
    const auto& output = output_tensor_names();
    auto is_lstm = [&](const std::string& n) {
        return std::find(lstm.begin(), lstm.end(), n) != lstm.end();
    };
    auto is_output = [&](const std::string& n) {
        return std::find(output.begin(), output.end(), n) != output.end();
    };

    std::vector<std::string> names;
    for (const auto& [name, t] : target.named_tensors()) {
        (void)t;
        if (strategy == InitStrategy::BlstmOnly) {
            if (is_lstm(name)) names.push_back(name);
            continue;
        }
        if (strategy == InitStrategy::AllButBlstm && is_lstm(name)) continue;
        if (is_output(name) && !schemes_match) continue;
        if (name == "word_embed" && !fingerprints_match) continue;
        names.push_back(name);
    }
    return names;
}

void apply_init_strategy(ModelParams& target, const Checkpoint& ckpt, InitStrategy strategy,
                         const LabelScheme& target_scheme, uint64_t target_vocab_fingerprint) {
    const NetworkConfig& a = target.config;
    const NetworkConfig& b = ckpt.meta.config;
    require(a.char_vocab == b.char_vocab && a.char_dim == b.char_dim &&
                a.max_chars == b.max_chars && a.conv_kernels == b.conv_kernels &&
                a.conv_width == b.conv_width && a.word_dim == b.word_dim &&
                a.casing_dim == b.casing_dim && a.lstm_units == b.lstm_units &&
                a.concat_width() == b.concat_width(),
            "apply_init_strategy: checkpoint dimensions are incompatible with the target model");

    const bool schemes_match = target_scheme == ckpt.meta.scheme;
    const bool fingerprints_match = target_vocab_fingerprint == ckpt.meta.vocab_fingerprint;
    const auto names = strategy_tensor_names(target, strategy, schemes_match, fingerprints_match);

    std::vector<std::string> mismatched;
    auto named = target.named_tensors();
    for (const auto& name : names) {
        const Tensor<float>* src = ckpt.tensor(name);
        if (src == nullptr) continue;  // e.g. bn tensors absent from the checkpoint
        Tensor<float>* dst = nullptr;
        for (auto& [k, ptr] : named) {
            if (k == name) dst = ptr;
        }
        if (dst == nullptr) continue;
        if (dst->shape != src->shape) {
            mismatched.push_back(name);
            continue;
        }
        *dst = *src;
    }
    if (!mismatched.empty()) {
        std::string msg = "apply_init_strategy: shape mismatch for tensors:";
        for (const auto& n : mismatched) msg += " " + n;
        fail(msg);
    }
}

Checkpoint sequential_pretrain(const std::vector<TaggedCorpus>& stages, const Vocab& vocab,
                               const EmbeddingMatrix& emb, const NetworkConfig& base_config,
                               const TrainConfig& train_config, const EncodeOptions& enc,
                               uint64_t seed, std::vector<TrainHistory>* histories) {
    require(!stages.empty(), "sequential_pretrain: needs at least one dataset");
    if (histories) histories->clear();

    Checkpoint previous;
    for (size_t i = 0; i < stages.size(); ++i) {
        const TaggedCorpus& stage = stages[i];
        NetworkConfig cfg = base_config;
        cfg.n_tags = stage.scheme.n_tags();
        ModelParams model = init_model<float>(cfg, emb, mix_seed(seed, 0x111 + i));
        if (i > 0) {
            apply_init_strategy(model, previous, InitStrategy::All, stage.scheme,
                                vocab.fingerprint());
        }
        TrainConfig tc = train_config;
        tc.seed = mix_seed(seed, 0x222 + i);
        TrainHistory history = fit(model, stage, nullptr, vocab, tc, enc);
        if (histories) histories->push_back(std::move(history));
        previous = make_checkpoint(model, stage.scheme, vocab);
    }
    return previous;
}

}  // namespace fsner
