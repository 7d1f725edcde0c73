#include "fsner/network.hpp"

#include <algorithm>

#include "fsner/error.hpp"

namespace fsner {

std::vector<std::vector<int>> predict_tags(ModelParams& params,
                                           const std::vector<std::vector<std::string>>& sentences,
                                           const Vocab& vocab, const EncodeOptions& enc) {
    std::vector<std::vector<int>> out;
    out.reserve(sentences.size());
    if (sentences.empty()) return out;

    // Order-preserving batches: padding only, no reordering.
    TaggedCorpus tmp;
    tmp.documents.push_back({"p0", {}});
    for (const auto& s : sentences) {
        require(!s.empty(), "predict_tags: empty sentence");
        TaggedSentence ts;
        ts.tokens = s;
        ts.tags.assign(s.size(), 0);
        tmp.documents[0].sentences.push_back(std::move(ts));
    }
    BatchOptions opts;
    opts.batch_size = 64;
    opts.shuffle = false;
    opts.bucket_by_length = false;
    opts.encode = enc;

    const int n_tags = params.config.n_tags;
    for (const Batch& batch : make_batches(tmp, vocab, opts)) {
        Tensor<float> probs = forward(params, batch, RunMode::infer);
        for (int s = 0; s < batch.b; ++s) {
            std::vector<int> tags;
            const int len = batch.sentence_length(s);
            tags.reserve(size_t(len));
            for (int t = 0; t < len; ++t) {
                const float* row =
                    probs.v.data() + (size_t(s) * batch.w + size_t(t)) * n_tags;
                int best = 0;
                for (int k = 1; k < n_tags; ++k) {
                    if (row[k] > row[best]) best = k;
                }
                tags.push_back(best);
            }
            repair_bio(tags);
            out.push_back(std::move(tags));
        }
    }
    return out;
}

std::vector<std::vector<int>> predict_corpus(ModelParams& params, const TaggedCorpus& corpus,
                                             const Vocab& vocab, const EncodeOptions& enc) {
    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(size_t(corpus.sentence_count()));
    for (const auto* s : corpus.all_sentences()) sentences.push_back(s->tokens);
    return predict_tags(params, sentences, vocab, enc);
}

}  // namespace fsner
