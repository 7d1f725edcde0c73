#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "fsner/error.hpp"
#include "fsner/eval.hpp"
#include "fsner/rng.hpp"

using namespace fsner;

namespace {

std::vector<int> tags_of(const LabelScheme& scheme, const std::vector<std::string>& names) {
    std::vector<int> out;
    for (const auto& n : names) out.push_back(scheme.tag_id(n));
    return out;
}

// Independent span matcher working on tag-name strings; deliberately not
// sharing code with eval.cpp.
struct BruteCounts {
    std::map<std::string, int64_t> tp, fp, fn;
};

std::vector<std::tuple<std::string, int, int>> brute_spans(const LabelScheme& scheme,
                                                           const std::vector<int>& tags) {
    std::vector<std::tuple<std::string, int, int>> spans;
    int i = 0;
    const int n = int(tags.size());
    while (i < n) {
        const std::string name = scheme.tag_name(tags[size_t(i)]);
        if (name[0] != 'B') {
            ++i;
            continue;
        }
        const std::string cat = name.substr(2);
        int j = i + 1;
        while (j < n && scheme.tag_name(tags[size_t(j)]) == "I-" + cat) ++j;
        spans.emplace_back(cat, i, j - 1);
        i = j;
    }
    return spans;
}

BruteCounts brute_score(const LabelScheme& scheme,
                        const std::vector<std::vector<int>>& gold,
                        const std::vector<std::vector<int>>& pred) {
    BruteCounts counts;
    for (size_t s = 0; s < gold.size(); ++s) {
        auto g = brute_spans(scheme, gold[s]);
        auto p = brute_spans(scheme, pred[s]);
        std::vector<bool> used(g.size(), false);
        for (const auto& span : p) {
            bool hit = false;
            for (size_t k = 0; k < g.size(); ++k) {
                if (!used[k] && g[k] == span) {
                    used[k] = true;
                    hit = true;
                    break;
                }
            }
            if (hit) ++counts.tp[std::get<0>(span)];
            else ++counts.fp[std::get<0>(span)];
        }
        for (size_t k = 0; k < g.size(); ++k) {
            if (!used[k]) ++counts.fn[std::get<0>(g[k])];
        }
    }
    return counts;
}

std::vector<int> random_bio(Rng& rng, const LabelScheme& scheme, int len) {
    std::vector<int> tags;
    int i = 0;
    while (i < len) {
        if (rng.uniform() < 0.4) {
            const int cat = int(rng.below(scheme.categories.size()));
            const int span = 1 + int(rng.below(3));
            tags.push_back(1 + 2 * cat);
            for (int j = 1; j < span && int(tags.size()) < len; ++j) tags.push_back(2 + 2 * cat);
            i = int(tags.size());
        } else {
            tags.push_back(0);
            ++i;
        }
    }
    tags.resize(size_t(len));
    return tags;
}

TaggedCorpus corpus_of(const LabelScheme& scheme, const std::vector<std::vector<int>>& tag_rows) {
    TaggedCorpus c;
    c.scheme = scheme;
    Document d;
    d.id = "d0";
    for (const auto& tags : tag_rows) {
        TaggedSentence s;
        for (size_t i = 0; i < tags.size(); ++i) s.tokens.push_back("t" + std::to_string(i));
        s.tags = tags;
        d.sentences.push_back(s);
    }
    c.documents.push_back(d);
    return c;
}

}  // namespace

TEST_CASE("extract_spans reads maximal B/I runs") {
    LabelScheme scheme({"Tests", "Problems"});
    auto tags = tags_of(scheme, {"B-Tests", "I-Tests", "O", "B-Problems"});
    auto spans = extract_spans(tags, scheme);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == EntitySpan{"Tests", 0, 1});
    CHECK(spans[1] == EntitySpan{"Problems", 3, 3});
}

TEST_CASE("extract_spans on all-O is empty") {
    LabelScheme scheme({"X"});
    CHECK(extract_spans({0, 0, 0}, scheme).empty());
}

TEST_CASE("adjacent B tags start separate spans") {
    LabelScheme scheme({"Tests"});
    auto spans = extract_spans(tags_of(scheme, {"B-Tests", "B-Tests"}), scheme);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == EntitySpan{"Tests", 0, 0});
    CHECK(spans[1] == EntitySpan{"Tests", 1, 1});
}

TEST_CASE("perfect prediction scores 1 everywhere") {
    LabelScheme scheme({"A", "B"});
    std::vector<std::vector<int>> rows = {tags_of(scheme, {"B-A", "I-A", "O", "B-B"}),
                                          tags_of(scheme, {"O", "B-A", "O"})};
    TaggedCorpus gold = corpus_of(scheme, rows);
    EvalReport r = score(gold, rows);
    CHECK(r.micro.precision() == doctest::Approx(1.0));
    CHECK(r.micro.recall() == doctest::Approx(1.0));
    CHECK(r.micro.f1() == doctest::Approx(1.0));
    CHECK(r.token_accuracy == doctest::Approx(1.0));
    for (const auto& cat : r.categories) {
        CHECK(r.per_category.at(cat).f1() == doctest::Approx(1.0));
    }
}

TEST_CASE("one hit plus one spurious span gives P = R = F1 = 0.5") {
    LabelScheme scheme({"A"});
    TaggedCorpus gold =
        corpus_of(scheme, {tags_of(scheme, {"B-A", "O", "B-A", "I-A", "O"})});
    std::vector<std::vector<int>> pred = {tags_of(scheme, {"B-A", "O", "O", "O", "B-A"})};
    EvalReport r = score(gold, pred);
    CHECK(r.micro.tp == 1);
    CHECK(r.micro.fp == 1);
    CHECK(r.micro.fn == 1);
    CHECK(r.micro.precision() == doctest::Approx(0.5));
    CHECK(r.micro.recall() == doctest::Approx(0.5));
    CHECK(r.micro.f1() == doctest::Approx(0.5));
}

TEST_CASE("score equals the brute-force matcher on 1000 random pairs") {
    LabelScheme scheme({"A", "B", "C"});
    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = 1 + int(rng.below(12));
        std::vector<std::vector<int>> gold_rows = {random_bio(rng, scheme, len)};
        std::vector<std::vector<int>> pred_rows = {random_bio(rng, scheme, len)};
        TaggedCorpus gold = corpus_of(scheme, gold_rows);
        EvalReport r = score(gold, pred_rows);
        BruteCounts brute = brute_score(scheme, gold_rows, pred_rows);
        for (const auto& cat : scheme.categories) {
            CHECK(r.per_category.at(cat).tp == brute.tp[cat]);
            CHECK(r.per_category.at(cat).fp == brute.fp[cat]);
            CHECK(r.per_category.at(cat).fn == brute.fn[cat]);
        }
    }
}

TEST_CASE("TP is symmetric when gold and prediction swap") {
    LabelScheme scheme({"A", "B"});
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int len = 1 + int(rng.below(10));
        std::vector<std::vector<int>> a = {random_bio(rng, scheme, len)};
        std::vector<std::vector<int>> b = {random_bio(rng, scheme, len)};
        EvalReport ab = score(corpus_of(scheme, a), b);
        EvalReport ba = score(corpus_of(scheme, b), a);
        CHECK(ab.micro.tp == ba.micro.tp);
    }
}

TEST_CASE("micro F1 is invariant under sentence reordering") {
    LabelScheme scheme({"A"});
    Rng rng(8);
    std::vector<std::vector<int>> gold_rows, pred_rows;
    for (int i = 0; i < 10; ++i) {
        const int len = 2 + int(rng.below(8));
        gold_rows.push_back(random_bio(rng, scheme, len));
        pred_rows.push_back(random_bio(rng, scheme, len));
    }
    EvalReport before = score(corpus_of(scheme, gold_rows), pred_rows);
    std::vector<size_t> order(gold_rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(9);
    shuffle_rng.shuffle(order);
    std::vector<std::vector<int>> gold2, pred2;
    for (size_t i : order) {
        gold2.push_back(gold_rows[i]);
        pred2.push_back(pred_rows[i]);
    }
    EvalReport after = score(corpus_of(scheme, gold2), pred2);
    CHECK(before.micro.f1() == doctest::Approx(after.micro.f1()));
    CHECK(before.micro.tp == after.micro.tp);
}

TEST_CASE("token accuracy is 1 exactly when sequences are identical") {
    LabelScheme scheme({"A"});
    std::vector<std::vector<int>> rows = {tags_of(scheme, {"B-A", "O", "I-A"})};
    TaggedCorpus gold = corpus_of(scheme, rows);
    CHECK(score(gold, rows).token_accuracy == doctest::Approx(1.0));
    std::vector<std::vector<int>> off = rows;
    off[0][1] = 1;
    CHECK(score(gold, off).token_accuracy < 1.0);
}

TEST_CASE("0/0 ratios collapse to 0") {
    LabelScheme scheme({"A", "Unused"});
    std::vector<std::vector<int>> rows = {tags_of(scheme, {"O", "O"})};
    TaggedCorpus gold = corpus_of(scheme, rows);
    EvalReport r = score(gold, rows);
    CHECK(r.per_category.at("Unused").precision() == 0.0);
    CHECK(r.per_category.at("Unused").recall() == 0.0);
    CHECK(r.per_category.at("Unused").f1() == 0.0);
    CHECK(r.micro.f1() == 0.0);
}

TEST_CASE("length mismatches name the offending sentence") {
    LabelScheme scheme({"A"});
    TaggedCorpus gold = corpus_of(scheme, {{0, 1}, {0, 0, 1}});
    std::vector<std::vector<int>> pred = {{0, 1}, {0, 0}};
    try {
        score(gold, pred);
        FAIL("expected length error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("sentence 1") != std::string::npos);
    }
    CHECK_THROWS_AS(score(gold, {{0, 1}}), Error);
}

TEST_CASE("report serializations carry the expected fields") {
    LabelScheme scheme({"A"});
    std::vector<std::vector<int>> rows = {tags_of(scheme, {"B-A", "O"})};
    TaggedCorpus gold = corpus_of(scheme, rows);
    EvalReport r = score(gold, rows);
    const std::string kv = report_to_kv(r);
    CHECK(kv.find("micro.f1 = 1") != std::string::npos);
    CHECK(kv.find("category.A.tp = 1") != std::string::npos);
    CHECK(kv.find("token_accuracy = 1") != std::string::npos);
    const std::string csv = report_to_csv(r);
    CHECK(csv.rfind("category,tp,fp,fn,precision,recall,f1\n", 0) == 0);
    CHECK(csv.find("\nmicro,") != std::string::npos);
}
