#include "fsner/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"
#include "fsner/text_io.hpp"

namespace fsner {

std::optional<int64_t> EmbeddingMatrix::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingMatrix::rebuild_index() {
    index_.clear();
    index_.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) index_.emplace(tokens[i], int64_t(i));
}

EmbeddingMatrix load_embeddings(std::istream& in, LoadStats* stats) {
    EmbeddingMatrix emb;
    LoadStats local;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> cols = split_whitespace(line);
        if (cols.empty()) continue;

        if (first_content_line && cols.size() == 2) {
            int64_t a = 0, b = 0;
            if (parse_int64(cols[0], a) && parse_int64(cols[1], b)) {
                local.header_skipped = true;
                first_content_line = false;
                continue;
            }
        }
        first_content_line = false;

        require(cols.size() >= 2,
                "embeddings line " + std::to_string(lineno) + ": token without values");
        const int d = int(cols.size()) - 1;
        if (emb.d == 0) {
            emb.d = d;
        } else if (d != emb.d) {
            fail("embeddings line " + std::to_string(lineno) + ": expected " +
                 std::to_string(emb.d) + " values, found " + std::to_string(d));
        }
        if (!seen.insert(cols[0]).second) {
            ++local.duplicates_skipped;
            continue;
        }
        emb.tokens.push_back(cols[0]);
        for (int i = 0; i < d; ++i) {
            double v = 0;
            if (!parse_double(cols[size_t(i) + 1], v)) {
                fail("embeddings line " + std::to_string(lineno) + ": non-numeric value '" +
                     cols[size_t(i) + 1] + "'");
            }
            emb.vectors.push_back(v);
        }
    }
    require(!emb.tokens.empty(), "empty embeddings input");
    emb.rebuild_index();
    if (stats) *stats = local;
    return emb;
}

void save_embeddings(const EmbeddingMatrix& emb, std::ostream& out) {
    for (int64_t i = 0; i < emb.size(); ++i) {
        out << emb.tokens[size_t(i)];
        const double* row = emb.row(i);
        for (int j = 0; j < emb.d; ++j) out << ' ' << format_double(row[j]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling
// ---------------------------------------------------------------------------

namespace {

inline double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dot(const double* a, const double* b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

struct SgVocab {
    std::vector<std::string> tokens;
    std::vector<int64_t> counts;
    std::unordered_map<std::string, int> index;
};

SgVocab build_sg_vocab(const std::vector<std::vector<std::string>>& sentences, int min_count) {
    std::map<std::string, int64_t> counts;
    for (const auto& s : sentences)
        for (const auto& t : s) ++counts[t];

    std::vector<std::pair<std::string, int64_t>> kept;
    for (const auto& [tok, n] : counts) {
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    require(!kept.empty(), "skip-gram vocabulary empty after min_count filtering");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    SgVocab v;
    for (const auto& [tok, n] : kept) {
        v.index.emplace(tok, int(v.tokens.size()));
        v.tokens.push_back(tok);
        v.counts.push_back(n);
    }
    return v;
}

// word2vec unigram^0.75 table.
std::vector<int> build_negative_table(const SgVocab& vocab, int size) {
    std::vector<int> table(size_t(size), 0);
    double total = 0;
    for (int64_t c : vocab.counts) total += std::pow(double(c), 0.75);
    size_t i = 0;
    double cum = std::pow(double(vocab.counts[0]), 0.75) / total;
    for (int t = 0; t < size; ++t) {
        table[size_t(t)] = int(i);
        if (double(t) / size > cum && i + 1 < vocab.tokens.size()) {
            ++i;
            cum += std::pow(double(vocab.counts[i]), 0.75) / total;
        }
    }
    return table;
}

}  // namespace

std::vector<std::string> char_ngrams(const std::string& token, int min_n, int max_n) {
    const std::string padded = "<" + token + ">";
    std::vector<std::string> out;
    const int n = int(padded.size());
    for (int len = min_n; len <= max_n; ++len) {
        for (int start = 0; start + len <= n; ++start) {
            if (len == n) continue;  // skip the whole padded token itself
            out.push_back(padded.substr(size_t(start), size_t(len)));
        }
    }
    return out;
}

uint32_t ngram_bucket(const std::string& ngram, int buckets) {
    uint32_t h = 2166136261u;
    for (unsigned char c : ngram) {
        h ^= c;
        h *= 16777619u;
    }
    return h % uint32_t(buckets);
}

double sgns_pair_loss(const std::vector<double>& target, const std::vector<double>& context,
                      const std::vector<std::vector<double>>& negatives) {
    const int d = int(target.size());
    double loss = -std::log(sigmoid_d(dot(target.data(), context.data(), d)));
    for (const auto& neg : negatives)
        loss += -std::log(sigmoid_d(-dot(target.data(), neg.data(), d)));
    return loss;
}

void sgns_pair_grad(const std::vector<double>& target, const std::vector<double>& context,
                    const std::vector<std::vector<double>>& negatives,
                    std::vector<double>& d_target, std::vector<double>& d_context,
                    std::vector<std::vector<double>>& d_negatives) {
    const int d = int(target.size());
    d_target.assign(size_t(d), 0.0);
    d_context.assign(size_t(d), 0.0);
    d_negatives.assign(negatives.size(), std::vector<double>(size_t(d), 0.0));

    const double sc = sigmoid_d(dot(target.data(), context.data(), d));
    for (int i = 0; i < d; ++i) {
        d_target[size_t(i)] += (sc - 1.0) * context[size_t(i)];
        d_context[size_t(i)] += (sc - 1.0) * target[size_t(i)];
    }
    for (size_t n = 0; n < negatives.size(); ++n) {
        const double sn = sigmoid_d(dot(target.data(), negatives[n].data(), d));
        for (int i = 0; i < d; ++i) {
            d_target[size_t(i)] += sn * negatives[n][size_t(i)];
            d_negatives[n][size_t(i)] += sn * target[size_t(i)];
        }
    }
}

EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                               const SkipgramConfig& config) {
    require(!sentences.empty(), "train_skipgram: empty corpus");
    require(config.d >= 1 && config.window >= 1 && config.min_count >= 1 && config.lr0 > 0 &&
                config.negatives >= 1 && config.epochs >= 1,
            "train_skipgram: invalid config");

    const SgVocab vocab = build_sg_vocab(sentences, config.min_count);
    const int V = int(vocab.tokens.size());
    const int d = config.d;

    // Sentences as id sequences; out-of-vocabulary tokens dropped.
    std::vector<std::vector<int>> ids;
    ids.reserve(sentences.size());
    for (const auto& s : sentences) {
        std::vector<int> row;
        for (const auto& t : s) {
            auto it = vocab.index.find(t);
            if (it != vocab.index.end()) row.push_back(it->second);
        }
        if (!row.empty()) ids.push_back(std::move(row));
    }

    // Subword setup: per vocab word, the bucket ids of its n-grams.
    const bool subword = config.subword_range.has_value();
    std::vector<std::vector<int>> word_buckets;
    int buckets = 0;
    if (subword) {
        const auto [min_n, max_n] = *config.subword_range;
        require(min_n >= 1 && max_n >= min_n, "train_skipgram: invalid subword range");
        buckets = config.subword_buckets;
        word_buckets.resize(size_t(V));
        for (int w = 0; w < V; ++w) {
            for (const auto& g : char_ngrams(vocab.tokens[size_t(w)], min_n, max_n))
                word_buckets[size_t(w)].push_back(int(ngram_bucket(g, buckets)));
        }
    }

    Rng rng(mix_seed(config.seed, 0x5697));
    std::vector<double> input(size_t(V) * d);
    for (double& x : input) x = rng.uniform(-0.5, 0.5) / d;
    std::vector<double> output(size_t(V) * d, 0.0);
    std::unordered_map<int, std::vector<double>> bucket_vecs;  // lazily initialized
    auto bucket_row = [&](int b) -> std::vector<double>& {
        auto it = bucket_vecs.find(b);
        if (it != bucket_vecs.end()) return it->second;
        // Deterministic per-bucket init independent of access order.
        Rng brng(mix_seed(config.seed, 0xB0C4E7 + uint64_t(b)));
        std::vector<double> v(size_t(d), 0.0);
        for (double& x : v) x = brng.uniform(-0.5, 0.5) / d;
        return bucket_vecs.emplace(b, std::move(v)).first->second;
    };

    const std::vector<int> neg_table = build_negative_table(vocab, 1 << 20);

    // Pair budget for the linear decay.
    int64_t pairs_per_epoch = 0;
    for (const auto& row : ids) {
        const int n = int(row.size());
        for (int i = 0; i < n; ++i) {
            const int lo = std::max(0, i - config.window);
            const int hi = std::min(n - 1, i + config.window);
            pairs_per_epoch += hi - lo;  // excludes the center itself
        }
    }
    const int64_t total_pairs = pairs_per_epoch * config.epochs;
    require(total_pairs > 0, "train_skipgram: no training pairs");
    const double lr_end = config.lr0 / 100.0;

    std::vector<double> hidden(size_t(d), 0.0), d_hidden(size_t(d), 0.0);
    int64_t processed = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& row : ids) {
            const int n = int(row.size());
            for (int i = 0; i < n; ++i) {
                const int target = row[size_t(i)];
                const int lo = std::max(0, i - config.window);
                const int hi = std::min(n - 1, i + config.window);

                double* v_word = input.data() + size_t(target) * d;
                const std::vector<int>* grams = subword ? &word_buckets[size_t(target)] : nullptr;
                const double denom = 1.0 + (grams ? double(grams->size()) : 0.0);

                for (int j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const double lr =
                        config.lr0 + (lr_end - config.lr0) * double(processed) / double(total_pairs);
                    ++processed;
                    const int context = row[size_t(j)];

                    // Input representation: word vector, or subword mean.
                    if (grams) {
                        for (int k = 0; k < d; ++k) hidden[size_t(k)] = v_word[k];
                        for (int b : *grams) {
                            const auto& z = bucket_row(b);
                            for (int k = 0; k < d; ++k) hidden[size_t(k)] += z[size_t(k)];
                        }
                        for (int k = 0; k < d; ++k) hidden[size_t(k)] /= denom;
                    } else {
                        for (int k = 0; k < d; ++k) hidden[size_t(k)] = v_word[k];
                    }

                    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
                    // Positive context.
                    {
                        double* u = output.data() + size_t(context) * d;
                        const double s = sigmoid_d(dot(hidden.data(), u, d));
                        const double g = s - 1.0;
                        for (int k = 0; k < d; ++k) {
                            d_hidden[size_t(k)] += g * u[k];
                            u[k] -= lr * g * hidden[size_t(k)];
                        }
                    }
                    // Negative samples; draws equal to the context are skipped.
                    for (int neg = 0; neg < config.negatives; ++neg) {
                        const int sample = neg_table[size_t(rng.below(neg_table.size()))];
                        if (sample == context) continue;
                        double* u = output.data() + size_t(sample) * d;
                        const double s = sigmoid_d(dot(hidden.data(), u, d));
                        for (int k = 0; k < d; ++k) {
                            d_hidden[size_t(k)] += s * u[k];
                            u[k] -= lr * s * hidden[size_t(k)];
                        }
                    }
                    // Input-side update, distributed over the subword set.
                    if (grams) {
                        for (int k = 0; k < d; ++k) d_hidden[size_t(k)] /= denom;
                        for (int b : *grams) {
                            auto& z = bucket_row(b);
                            for (int k = 0; k < d; ++k) z[size_t(k)] -= lr * d_hidden[size_t(k)];
                        }
                    }
                    for (int k = 0; k < d; ++k) v_word[k] -= lr * d_hidden[size_t(k)];
                }
            }
        }
    }

    EmbeddingMatrix emb;
    emb.d = d;
    emb.tokens = vocab.tokens;
    emb.vectors.resize(size_t(V) * d);
    for (int w = 0; w < V; ++w) {
        double* out_row = emb.vectors.data() + size_t(w) * d;
        const double* v_word = input.data() + size_t(w) * d;
        if (subword) {
            const auto& grams = word_buckets[size_t(w)];
            const double denom = 1.0 + double(grams.size());
            for (int k = 0; k < d; ++k) out_row[k] = v_word[k];
            for (int b : grams) {
                const auto& z = bucket_row(b);
                for (int k = 0; k < d; ++k) out_row[k] += z[size_t(k)];
            }
            for (int k = 0; k < d; ++k) out_row[k] /= denom;
        } else {
            for (int k = 0; k < d; ++k) out_row[k] = v_word[k];
        }
    }
    emb.rebuild_index();
    return emb;
}

// ---------------------------------------------------------------------------
// OOV accounting
// ---------------------------------------------------------------------------

OovReport oov_report(const TaggedCorpus& corpus, const EmbeddingMatrix& emb) {
    std::set<std::string> types;
    for (const auto& doc : corpus.documents)
        for (const auto& sentence : doc.sentences)
            for (const auto& token : sentence.tokens) types.insert(lowercase_ascii(token));

    std::unordered_set<std::string> known(emb.tokens.begin(), emb.tokens.end());
    OovReport report;
    report.corpus_word_types = int64_t(types.size());
    for (const auto& t : types) {
        if (known.count(t)) continue;
        ++report.oov_raw;
        if (!known.count(normalize_token(t))) ++report.oov_normalized;
    }
    if (report.oov_raw > 0) {
        report.reduction_percent =
            100.0 * double(report.oov_raw - report.oov_normalized) / double(report.oov_raw);
    }
    return report;
}

std::string oov_report_kv(const OovReport& report) {
    std::ostringstream out;
    out << "corpus_word_types = " << report.corpus_word_types << "\n";
    out << "oov_raw = " << report.oov_raw << "\n";
    out << "oov_normalized = " << report.oov_normalized << "\n";
    out << "reduction_percent = " << format_double(report.reduction_percent) << "\n";
    return out.str();
}

}  // namespace fsner
