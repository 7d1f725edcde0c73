#include "fsner/optim.hpp"

#include "fsner/error.hpp"
#include "fsner/eval.hpp"

namespace fsner {

namespace {

double train_token_accuracy(ModelParams& model, const TaggedCorpus& corpus, const Vocab& vocab,
                            const EncodeOptions& enc) {
    const auto predictions = predict_corpus(model, corpus, vocab, enc);
    const auto sentences = corpus.all_sentences();
    int64_t correct = 0, total = 0;
    for (size_t s = 0; s < sentences.size(); ++s) {
        for (size_t t = 0; t < sentences[s]->tags.size(); ++t) {
            ++total;
            if (predictions[s][t] == sentences[s]->tags[t]) ++correct;
        }
    }
    return total == 0 ? 0.0 : double(correct) / double(total);
}

}  // namespace

TrainHistory fit(ModelParams& model, const TaggedCorpus& train, const TaggedCorpus* dev,
                 const Vocab& vocab, const TrainConfig& cfg, const EncodeOptions& enc,
                 OptimizerState* opt_state) {
    require(cfg.epochs >= 1, "fit: epochs must be >= 1");
    require(train.scheme.n_tags() == model.config.n_tags,
            "fit: training corpus label scheme does not match the model");
    if (dev) {
        require(dev->scheme == train.scheme,
                "fit: dev corpus label scheme does not match the training corpus");
    }

    OptimizerState local_state;
    OptimizerState& state = opt_state ? *opt_state : local_state;
    Rng dropout_rng(mix_seed(cfg.seed, 0xD201));

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        BatchOptions opts;
        opts.batch_size = cfg.batch_size;
        opts.seed = mix_seed(cfg.seed, uint64_t(epoch));
        opts.shuffle = true;
        opts.bucket_by_length = cfg.bucket_by_length;
        opts.encode = enc;

        double loss_sum = 0;
        int64_t token_sum = 0;
        for (const Batch& batch : make_batches(train, vocab, opts)) {
            auto [loss, grads] = loss_and_grads(model, batch, &dropout_rng);
            if (cfg.optimizer == OptimizerKind::nadam) {
                nadam_step(state, model, grads, cfg.nadam);
            } else {
                sgd_step(model, grads, epoch, cfg);
            }
            const int64_t tokens = batch.unmasked_count();
            loss_sum += double(loss) * double(tokens);
            token_sum += tokens;
        }

        EpochStats stats;
        stats.mean_loss = token_sum == 0 ? 0.0 : loss_sum / double(token_sum);
        if (dev) {
            const auto predictions = predict_corpus(model, *dev, vocab, enc);
            stats.dev_f1 = score(*dev, predictions).micro.f1();
        }
        history.push_back(stats);

        if (cfg.stop_at_train_accuracy >= 0.0 &&
            train_token_accuracy(model, train, vocab, enc) >= cfg.stop_at_train_accuracy) {
            break;
        }
    }
    return history;
}

}  // namespace fsner
