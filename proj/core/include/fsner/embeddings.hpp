#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsner/corpus.hpp"

namespace fsner {

struct EmbeddingMatrix {
    std::vector<std::string> tokens;
    std::vector<double> vectors;  // row-major (|tokens| x d)
    int d = 0;

    int64_t size() const { return int64_t(tokens.size()); }
    const double* row(int64_t i) const { return vectors.data() + i * d; }
    double* row(int64_t i) { return vectors.data() + i * d; }
    std::optional<int64_t> find(const std::string& token) const;

    void rebuild_index();

private:
    std::unordered_map<std::string, int64_t> index_;
};

struct LoadStats {
    int64_t duplicates_skipped = 0;
    bool header_skipped = false;
};

// "token v1 ... vd" per line; an optional first line of exactly two integers
// is a (count, dim) header. Duplicate tokens keep the first occurrence.
EmbeddingMatrix load_embeddings(std::istream& in, LoadStats* stats = nullptr);
void save_embeddings(const EmbeddingMatrix& emb, std::ostream& out);

struct SkipgramConfig {
    int d = 50;
    int window = 5;
    int min_count = 5;
    double lr0 = 0.05;
    int negatives = 5;
    int epochs = 5;
    // Character n-gram span (min_n, max_n); subword off when absent.
    std::optional<std::pair<int, int>> subword_range;
    int subword_buckets = 1 << 21;
    uint64_t seed = 0;
};

// Skip-gram with negative sampling; learning rate decays linearly from lr0
// to lr0/100 over the total pair budget. With subwords, a token vector is
// the mean of its own vector and its hashed n-gram vectors.
EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                               const SkipgramConfig& config);

// Single-pair negative-sampling objective, exposed for gradient testing.
// target/context/negatives are rows of the given matrices.
double sgns_pair_loss(const std::vector<double>& target, const std::vector<double>& context,
                      const std::vector<std::vector<double>>& negatives);
void sgns_pair_grad(const std::vector<double>& target, const std::vector<double>& context,
                    const std::vector<std::vector<double>>& negatives,
                    std::vector<double>& d_target, std::vector<double>& d_context,
                    std::vector<std::vector<double>>& d_negatives);

// fastText-style n-gram enumeration of "<token>" and FNV-32 bucket hashing.
std::vector<std::string> char_ngrams(const std::string& token, int min_n, int max_n);
uint32_t ngram_bucket(const std::string& ngram, int buckets);

struct OovReport {
    int64_t corpus_word_types = 0;
    int64_t oov_raw = 0;
    int64_t oov_normalized = 0;
    double reduction_percent = 0.0;
};

// Distinct lowercased corpus word types absent from the embedding
// vocabulary, before and after normalize_token.
OovReport oov_report(const TaggedCorpus& corpus, const EmbeddingMatrix& emb);

std::string oov_report_kv(const OovReport& report);

}  // namespace fsner
