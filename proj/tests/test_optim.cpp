#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corpus_fixtures.hpp"
#include "fsner/optim.hpp"

using namespace fsner;

namespace {

// Scalar transcription of the pinned update equations, written directly from
// the formulas; the acceptance authority for nadam_step.
struct ScalarNadam {
    double m = 0, v = 0, mu_product = 1;
    long t = 0;
};

double scalar_nadam_update(ScalarNadam& s, double p, double g, const NadamConfig& cfg) {
    s.t += 1;
    const double t = double(s.t);
    const double mu_t = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, t * cfg.schedule_decay));
    const double mu_t1 = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, (t + 1) * cfg.schedule_decay));
    const double prod_t = s.mu_product * mu_t;
    const double prod_t1 = prod_t * mu_t1;
    s.mu_product = prod_t;
    s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * g * g;
    const double g_hat = g / (1.0 - prod_t);
    const double m_hat = s.m / (1.0 - prod_t1);
    const double v_hat = s.v / (1.0 - std::pow(cfg.beta2, t));
    const double m_bar = (1.0 - mu_t) * g_hat + mu_t1 * m_hat;
    return p - cfg.lr * m_bar / (std::sqrt(v_hat) + cfg.eps);
}

}  // namespace

TEST_CASE("nadam matches the scalar oracle over 10 steps on a quadratic") {
    NadamConfig cfg;  // lr 0.002, beta1 0.9, beta2 0.999, eps 1e-7, psi 0.004
    Tensor<double> p({1}, {1.0});
    OptimizerStateT<double> state;
    ScalarNadam oracle;
    double p_ref = 1.0;
    for (int step = 0; step < 10; ++step) {
        NamedTensors<double> grads;
        grads.emplace_back("p", Tensor<double>({1}, {2.0 * p.at(0)}));  // d/dp p^2
        nadam_step<double>(state, {{"p", &p}}, grads, cfg);
        p_ref = scalar_nadam_update(oracle, p_ref, 2.0 * p_ref, cfg);
        CHECK(std::fabs(p.at(0) - p_ref) < 1e-10);
    }
    CHECK(p.at(0) < 1.0);  // it is actually minimizing
}

TEST_CASE("nadam with zero gradients and zero moments leaves parameters unchanged") {
    NadamConfig cfg;
    Tensor<double> p({3}, {1.0, -2.0, 0.5});
    Tensor<double> before = p;
    OptimizerStateT<double> state;
    NamedTensors<double> grads;
    grads.emplace_back("p", Tensor<double>({3}));
    nadam_step<double>(state, {{"p", &p}}, grads, cfg);
    CHECK(bit_equal(p, before));
}

TEST_CASE("nadam step counter increases by exactly 1 per call") {
    NadamConfig cfg;
    Tensor<double> p({1}, {1.0});
    OptimizerStateT<double> state;
    for (int i = 1; i <= 5; ++i) {
        NamedTensors<double> grads;
        grads.emplace_back("p", Tensor<double>({1}, {0.1}));
        nadam_step<double>(state, {{"p", &p}}, grads, cfg);
        CHECK(state.t == i);
    }
}

TEST_CASE("nadam with beta1=0 and psi=0 reduces to Adam without the Nesterov term") {
    NadamConfig cfg;
    cfg.beta1 = 0.0;
    cfg.schedule_decay = 0.0;
    Tensor<double> p({1}, {0.7});
    OptimizerStateT<double> state;
    double p_ref = 0.7, v_ref = 0.0;
    for (int step = 1; step <= 6; ++step) {
        const double g = 2.0 * p.at(0);
        NamedTensors<double> grads;
        grads.emplace_back("p", Tensor<double>({1}, {g}));
        nadam_step<double>(state, {{"p", &p}}, grads, cfg);

        const double g_ref = 2.0 * p_ref;
        v_ref = cfg.beta2 * v_ref + (1.0 - cfg.beta2) * g_ref * g_ref;
        const double v_hat = v_ref / (1.0 - std::pow(cfg.beta2, double(step)));
        p_ref -= cfg.lr * g_ref / (std::sqrt(v_hat) + cfg.eps);
        CHECK(p.at(0) == doctest::Approx(p_ref).epsilon(1e-14));
    }
}

TEST_CASE("sgd step definition") {
    TrainConfig cfg;
    cfg.sgd_lr = 0.04;
    Tensor<float> p({1}, {1.0f});
    NamedTensors<float> grads;
    grads.emplace_back("p", Tensor<float>({1}, {0.5f}));
    sgd_step<float>({{"p", &p}}, grads, 0, cfg);
    CHECK(p.at(0) == doctest::Approx(0.98).epsilon(1e-7));
}

TEST_CASE("sgd scheduled decay starts at lr0 and decays inverse-time") {
    TrainConfig cfg;
    cfg.sgd_lr = 0.08;
    cfg.decay = DecayMode::scheduled;
    cfg.decay_coeff = 0.05;
    CHECK(sgd_learning_rate(cfg, 0) == doctest::Approx(0.08));
    CHECK(sgd_learning_rate(cfg, 10) == doctest::Approx(0.08 / 1.5));
    cfg.decay = DecayMode::constant;
    CHECK(sgd_learning_rate(cfg, 10) == doctest::Approx(0.08));
}

TEST_CASE("both conventional sgd learning rates are accepted") {
    for (double lr : {0.04, 0.08}) {
        TrainConfig cfg;
        cfg.sgd_lr = lr;
        Tensor<float> p({1}, {1.0f});
        NamedTensors<float> grads;
        grads.emplace_back("p", Tensor<float>({1}, {1.0f}));
        sgd_step<float>({{"p", &p}}, grads, 0, cfg);
        CHECK(p.at(0) == doctest::Approx(1.0 - lr));
    }
}

TEST_CASE("fit produces identical loss traces for identical seeds") {
    auto fx = testing::make_fixture(20, 5);
    fx.train_cfg.epochs = 3;

    ModelParams m1 = init_model<float>(fx.net, fx.emb, 1);
    TrainHistory h1 = fit(m1, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    ModelParams m2 = init_model<float>(fx.net, fx.emb, 1);
    TrainHistory h2 = fit(m2, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);

    REQUIRE(h1.size() == h2.size());
    for (size_t e = 0; e < h1.size(); ++e) CHECK(h1[e].mean_loss == h2[e].mean_loss);
    for (const auto& [name, t] : m1.named_tensors())
        CHECK(bit_equal(*t, *find_tensor_ptr(m2, name)));
}

TEST_CASE("fit history length equals the epochs run") {
    auto fx = testing::make_fixture(10, 6);
    fx.train_cfg.epochs = 4;
    ModelParams m = init_model<float>(fx.net, fx.emb, 2);
    TrainHistory h = fit(m, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    CHECK(h.size() == 4);
    for (const auto& e : h) CHECK_FALSE(e.dev_f1.has_value());
}

TEST_CASE("fit records dev micro F1 when a dev corpus is given") {
    auto fx = testing::make_fixture(16, 7);
    fx.train_cfg.epochs = 2;
    TaggedCorpus dev = generate_from_domain(fx.domain, SyntheticSpec{.sentences = 8, .seed = 99},
                                            99);
    ModelParams m = init_model<float>(fx.net, fx.emb, 3);
    TrainHistory h = fit(m, fx.corpus, &dev, fx.vocab, fx.train_cfg, fx.enc);
    REQUIRE(h.size() == 2);
    for (const auto& e : h) {
        REQUIRE(e.dev_f1.has_value());
        CHECK(*e.dev_f1 >= 0.0);
        CHECK(*e.dev_f1 <= 1.0);
    }
}

TEST_CASE("fit never touches frozen word embeddings") {
    auto fx = testing::make_fixture(12, 8);
    fx.net.trainable_embeddings = false;
    fx.train_cfg.epochs = 3;
    ModelParams m = init_model<float>(fx.net, fx.emb, 4);
    Tensor<float> before = m.word_embed;
    fit(m, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    CHECK(bit_equal(m.word_embed, before));
    CHECK(bit_equal(m.casing_embed, init_model<float>(fx.net, fx.emb, 4).casing_embed));
}

TEST_CASE("trainable word embeddings do change under fit") {
    auto fx = testing::make_fixture(12, 9);
    fx.net.trainable_embeddings = true;
    fx.train_cfg.epochs = 2;
    ModelParams m = init_model<float>(fx.net, fx.emb, 4);
    Tensor<float> before = m.word_embed;
    fit(m, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    CHECK_FALSE(bit_equal(m.word_embed, before));
}

TEST_CASE("fit rejects a label-scheme mismatch") {
    auto fx = testing::make_fixture(10, 10);
    ModelParams m = init_model<float>(fx.net, fx.emb, 5);
    TaggedCorpus wrong = fx.corpus;
    wrong.scheme = LabelScheme({"Different"});
    CHECK_THROWS_AS(fit(m, wrong, nullptr, fx.vocab, fx.train_cfg, fx.enc), Error);

    TaggedCorpus dev = fx.corpus;
    dev.scheme = LabelScheme({"Other", "Scheme"});
    CHECK_THROWS_AS(fit(m, fx.corpus, &dev, fx.vocab, fx.train_cfg, fx.enc), Error);
}

TEST_CASE("sgd training also reduces the loss") {
    auto fx = testing::make_fixture(24, 11);
    fx.train_cfg.epochs = 8;
    fx.train_cfg.optimizer = OptimizerKind::sgd;
    fx.train_cfg.sgd_lr = 0.08;
    fx.net.dropout_rate = 0.0;
    ModelParams m = init_model<float>(fx.net, fx.emb, 6);
    TrainHistory h = fit(m, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    CHECK(h.back().mean_loss < h.front().mean_loss);
}

TEST_CASE("nadam training reduces the loss on a small synthetic corpus") {
    auto fx = testing::make_fixture(24, 12);
    fx.train_cfg.epochs = 6;
    fx.net.dropout_rate = 0.0;
    ModelParams m = init_model<float>(fx.net, fx.emb, 7);
    TrainHistory h = fit(m, fx.corpus, nullptr, fx.vocab, fx.train_cfg, fx.enc);
    CHECK(h.back().mean_loss < h.front().mean_loss);
}
