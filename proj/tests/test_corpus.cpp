#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "fsner/corpus.hpp"
#include "fsner/error.hpp"
#include "fsner/rng.hpp"
#include "fsner/synthetic.hpp"

using namespace fsner;

namespace {

TaggedCorpus parse_text(const std::string& text, ParseStats* stats = nullptr) {
    std::istringstream in(text);
    return parse_conll(in, stats);
}

Vocab tiny_vocab() {
    return build_vocab({"aspirin", "mg", "daily", "take", "week"});
}

}  // namespace

TEST_CASE("parse_conll minimal well-formed input") {
    TaggedCorpus c = parse_text("Aspirin B-Medication\n81mg B-Dosage\n\n");
    CHECK(c.documents.size() == 1);
    CHECK(c.documents[0].sentences.size() == 1);
    CHECK(c.documents[0].sentences[0].tokens.size() == 2);
    CHECK(c.scheme.categories == std::vector<std::string>{"Medication", "Dosage"});
    CHECK(c.documents[0].sentences[0].tags == std::vector<int>{1, 3});
}

TEST_CASE("parse_conll -DOCSTART- opens a new document") {
    TaggedCorpus c = parse_text(
        "-DOCSTART- O\n\na O\n\n-DOCSTART- O\n\nb O\nc O\n\n");
    CHECK(c.documents.size() == 2);
    CHECK(c.documents[0].sentences.size() == 1);
    CHECK(c.documents[1].sentences.size() == 1);
    CHECK(c.documents[0].id == "doc0");
    CHECK(c.documents[1].id == "doc1");
}

TEST_CASE("parse_conll wrong column count names the line") {
    try {
        parse_text("good O\ntoken\n");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("parse_conll rejects malformed tags") {
    CHECK_THROWS_AS(parse_text("token NOTATAG\n"), Error);
    CHECK_THROWS_AS(parse_text("token B\n"), Error);
    CHECK_THROWS_AS(parse_text("token X-Thing\n"), Error);
}

TEST_CASE("parse_conll rejects empty input") {
    CHECK_THROWS_AS(parse_text(""), Error);
    CHECK_THROWS_AS(parse_text("\n\n\n"), Error);
}

TEST_CASE("parse_conll accepts the 4-column CoNLL-2003 layout") {
    TaggedCorpus c = parse_text("EU NNP I-NP B-ORG\nrejects VBZ B-VP O\n\n");
    CHECK(c.documents[0].sentences[0].tokens == std::vector<std::string>{"EU", "rejects"});
    CHECK(c.scheme.categories == std::vector<std::string>{"ORG"});
}

TEST_CASE("parse_conll repairs invalid I- continuations and counts them") {
    ParseStats stats;
    TaggedCorpus c = parse_text("a I-Med\nb O\nc I-Med\nd I-Dose\n\n", &stats);
    CHECK(stats.repaired_continuations == 3);  // a, c and d all start spans
    const auto& tags = c.documents[0].sentences[0].tags;
    CHECK(tags[0] == c.scheme.tag_id("B-Med"));
    CHECK(tags[2] == c.scheme.tag_id("B-Med"));
    CHECK(tags[3] == c.scheme.tag_id("B-Dose"));
}

TEST_CASE("parse_conll handles CRLF input") {
    TaggedCorpus c = parse_text("a O\r\nb B-X\r\n\r\n");
    CHECK(c.documents[0].sentences[0].tokens == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse -> serialize -> parse round-trips to an equal corpus") {
    const std::string text =
        "-DOCSTART- O\n\nAspirin B-Med\n81 B-Dose\nmg I-Dose\ndaily O\n\nstop O\n\n"
        "-DOCSTART- O\n\nnew B-Treat\ncourse I-Treat\n\n";
    TaggedCorpus first = parse_text(text);
    std::ostringstream out;
    write_conll(first, out);
    TaggedCorpus second = parse_text(out.str());
    CHECK(first == second);
}

TEST_CASE("casing_of paper examples") {
    CHECK(casing_of("81") == CasingClass::numeric);
    CHECK(casing_of("A1234") == CasingClass::mainly_numeric);
    CHECK(casing_of("A1") == CasingClass::contains_digit);  // exactly 50% is not "more than 50%"
}

TEST_CASE("casing_of covers all eight classes") {
    CHECK(casing_of("aspirin") == CasingClass::allLower);
    CHECK(casing_of("NSAID") == CasingClass::allUpper);
    CHECK(casing_of("Aspirin") == CasingClass::initialUpper);
    CHECK(casing_of("mg/day") == CasingClass::other);
    CHECK(casing_of("b12x") == CasingClass::contains_digit);
    CHECK(casing_of("1,000") == CasingClass::mainly_numeric);
}

TEST_CASE("casing_of partitions any token set") {
    Rng rng(42);
    const std::string alphabet = "aZ097.%-";
    std::map<CasingClass, int> counts;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        std::string token;
        const int len = 1 + int(rng.below(6));
        for (int j = 0; j < len; ++j) token += alphabet[rng.below(alphabet.size())];
        ++counts[casing_of(token)];
    }
    int total = 0;
    for (const auto& [cls, count] : counts) total += count;
    CHECK(total == n);
    CHECK(counts.count(CasingClass::padding) == 0);  // never produced for real tokens
}

TEST_CASE("normalize_token paper rules") {
    CHECK(normalize_token("week.") == "week");
    CHECK(normalize_token("+20") == "20");
    CHECK(normalize_token("mg") == "mg");
    CHECK(normalize_token("dose:") == "dose");
    CHECK(normalize_token("x;-") == "x");
    CHECK(normalize_token("\"quoted\"") == "quoted");
    CHECK(normalize_token("'single'") == "single");
    CHECK(normalize_token("do\"not\"strip") == "do\"not\"strip");  // inner quotes untouched
    CHECK(normalize_token("\xe2\x80\x9c" "curly" "\xe2\x80\x9d") == "curly");
    CHECK(normalize_token("\xe2\x80\x98" "single" "\xe2\x80\x99") == "single");
}

TEST_CASE("normalize_token never returns empty") {
    CHECK(normalize_token("...") == "...");
    CHECK(normalize_token("+") == "+");
    CHECK(normalize_token("\"\"") == "\"\"");
    CHECK(normalize_token("+.") == "+.");
}

TEST_CASE("normalize_token is idempotent on fuzzed tokens") {
    Rng rng(7);
    const std::string alphabet = "ab1.+:;-\"'";
    for (int i = 0; i < 10000; ++i) {
        std::string token;
        const int len = 1 + int(rng.below(8));
        for (int j = 0; j < len; ++j) token += alphabet[rng.below(alphabet.size())];
        const std::string once = normalize_token(token);
        CHECK(normalize_token(once) == once);
        CHECK(!once.empty());
    }
}

TEST_CASE("encode_token lowercases the word lookup") {
    Vocab v = tiny_vocab();
    EncodeOptions opts;
    EncodedToken enc = encode_token("Aspirin", v, opts);
    CHECK(enc.word_id == v.word_id("aspirin"));
    CHECK(enc.word_id != Vocab::word_unk);
    CHECK(enc.casing_id == int(CasingClass::initialUpper));
}

TEST_CASE("encode_token pads the char sequence to 52") {
    Vocab v = tiny_vocab();
    EncodedToken enc = encode_token("aspirin", v, {});
    CHECK(enc.char_ids.size() == 52);
    for (int i = 0; i < 7; ++i) CHECK(enc.char_ids[size_t(i)] != Vocab::char_pad);
    for (int i = 7; i < 52; ++i) CHECK(enc.char_ids[size_t(i)] == Vocab::char_pad);
}

TEST_CASE("encode_token truncates at 52 characters") {
    Vocab v = tiny_vocab();
    const std::string long_token(60, 'x');
    EncodedToken enc = encode_token(long_token, v, {});
    CHECK(enc.char_ids.size() == 52);
    for (int i = 0; i < 52; ++i) CHECK(enc.char_ids[size_t(i)] == Vocab::char_id('x'));
}

TEST_CASE("encode_token normalization modes") {
    Vocab v = tiny_vocab();
    EncodeOptions lookup{NormalizeMode::lookup, 52};
    EncodedToken enc = encode_token("week.", v, lookup);
    CHECK(enc.word_id == v.word_id("week"));          // lookup key normalized
    CHECK(enc.char_ids[4] == Vocab::char_id('.'));    // chars see the raw surface
    EncodeOptions global{NormalizeMode::global, 52};
    EncodedToken genc = encode_token("week.", v, global);
    CHECK(genc.char_ids[4] == Vocab::char_pad);       // chars see the normalized surface
    EncodeOptions off{NormalizeMode::off, 52};
    CHECK(encode_token("week.", v, off).word_id == Vocab::word_unk);
}

TEST_CASE("vocab char index has 97 entries and UNK fallback") {
    CHECK(Vocab::char_vocab_size == 97);
    std::set<int> ids;
    ids.insert(Vocab::char_pad);
    ids.insert(Vocab::char_id(' '));
    for (int c = 0x21; c <= 0x7e; ++c) ids.insert(Vocab::char_id((unsigned char)(c)));
    CHECK(int(ids.size()) == 96);  // everything except UNK
    CHECK(Vocab::char_id(0xc3) == Vocab::char_unk);
    CHECK(Vocab::char_id('\t') == Vocab::char_unk);
}

TEST_CASE("unknown words map to UNK") {
    Vocab v = tiny_vocab();
    CHECK(v.word_id("nosuchtoken") == Vocab::word_unk);
    CHECK(v.word_id("aspirin") == 2);  // first embedding token
}

namespace {
TaggedCorpus numbered_docs(int n) {
    TaggedCorpus c;
    c.scheme = LabelScheme({"X"});
    for (int i = 0; i < n; ++i) {
        Document d;
        d.id = "doc" + std::to_string(i);
        d.sentences.push_back({{"tok" + std::to_string(i)}, {0}});
        c.documents.push_back(d);
    }
    return c;
}
}  // namespace

TEST_CASE("sample_few_shot draws k distinct documents") {
    TaggedCorpus c = numbered_docs(57);
    TaggedCorpus s = sample_few_shot(c, 10, 3);
    CHECK(s.documents.size() == 10);
    std::set<std::string> ids;
    for (const auto& d : s.documents) ids.insert(d.id);
    CHECK(ids.size() == 10);
}

TEST_CASE("sample_few_shot saturates at the corpus size") {
    TaggedCorpus c = numbered_docs(57);
    CHECK(sample_few_shot(c, 100, 3).documents.size() == 57);
}

TEST_CASE("sample_few_shot is deterministic and seed-sensitive") {
    TaggedCorpus c = numbered_docs(40);
    CHECK(sample_few_shot(c, 10, 5) == sample_few_shot(c, 10, 5));
    CHECK(sample_few_shot(c, 10, 5).documents != sample_few_shot(c, 10, 6).documents);
}

TEST_CASE("sample_few_shot selection is permutation-stable") {
    TaggedCorpus c = numbered_docs(30);
    TaggedCorpus reversed = c;
    std::reverse(reversed.documents.begin(), reversed.documents.end());
    auto ids_of = [](const TaggedCorpus& s) {
        std::set<std::string> ids;
        for (const auto& d : s.documents) ids.insert(d.id);
        return ids;
    };
    CHECK(ids_of(sample_few_shot(c, 7, 11)) == ids_of(sample_few_shot(reversed, 7, 11)));
}

TEST_CASE("sample_few_shot rejects an empty corpus") {
    TaggedCorpus empty;
    CHECK_THROWS_AS(sample_few_shot(empty, 1, 0), Error);
}

namespace {
TaggedCorpus sentence_corpus(int sentences) {
    TaggedCorpus c;
    c.scheme = LabelScheme({"X"});
    Document d;
    d.id = "d0";
    Rng rng(1);
    for (int i = 0; i < sentences; ++i) {
        TaggedSentence s;
        const int len = 1 + int(rng.below(9));
        for (int t = 0; t < len; ++t) {
            s.tokens.push_back("tok" + std::to_string(t));
            s.tags.push_back(0);
        }
        d.sentences.push_back(s);
    }
    c.documents.push_back(d);
    return c;
}
}  // namespace

TEST_CASE("make_batches slices 130 sentences into 64/64/2") {
    TaggedCorpus c = sentence_corpus(130);
    Vocab v = tiny_vocab();
    BatchOptions opts;
    auto batches = make_batches(c, v, opts);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].b == 64);
    CHECK(batches[1].b == 64);
    CHECK(batches[2].b == 2);
}

TEST_CASE("make_batches mask row sums equal sentence lengths") {
    TaggedCorpus c = sentence_corpus(50);
    Vocab v = tiny_vocab();
    BatchOptions opts;
    opts.batch_size = 16;
    opts.shuffle = true;
    opts.seed = 9;
    int64_t masked_total = 0;
    for (const auto& batch : make_batches(c, v, opts)) {
        for (int s = 0; s < batch.b; ++s) {
            int sum = 0;
            for (int t = 0; t < batch.w; ++t) sum += batch.masked_on(s, t) ? 1 : 0;
            CHECK(sum == batch.sentence_length(s));
        }
        masked_total += batch.unmasked_count();
    }
    CHECK(masked_total == c.token_count());
}

TEST_CASE("make_batches grid shapes are (b,w) and (b,w,52)") {
    TaggedCorpus c = sentence_corpus(10);
    Vocab v = tiny_vocab();
    auto batches = make_batches(c, v, {});
    for (const auto& b : batches) {
        CHECK(int(b.word_ids.size()) == b.b * b.w);
        CHECK(int(b.char_ids.size()) == b.b * b.w * 52);
        CHECK(int(b.casing_ids.size()) == b.b * b.w);
        CHECK(int(b.tag_ids.size()) == b.b * b.w);
        CHECK(int(b.mask.size()) == b.b * b.w);
    }
}

TEST_CASE("unmasked batch positions reproduce encode_token exactly") {
    TaggedCorpus c = parse_text("Aspirin B-Med\n81 B-Dose\nmg I-Dose\n\ntake O\ndaily O\n\n");
    Vocab v = tiny_vocab();
    BatchOptions opts;
    opts.shuffle = true;
    opts.seed = 4;
    auto batches = make_batches(c, v, opts);
    auto sentences = c.all_sentences();
    // Locate each sentence inside the batches by its token encoding.
    for (const auto& batch : batches) {
        for (int s = 0; s < batch.b; ++s) {
            const int len = batch.sentence_length(s);
            const TaggedSentence* match = nullptr;
            for (const auto* sent : sentences) {
                if (int(sent->tokens.size()) != len) continue;
                bool all = true;
                for (int t = 0; t < len && all; ++t) {
                    EncodedToken enc = encode_token(sent->tokens[size_t(t)], v, opts.encode);
                    if (enc.word_id != batch.word_at(s, t) ||
                        enc.casing_id != batch.casing_at(s, t))
                        all = false;
                    const int* chars = batch.chars_at(s, t);
                    for (int k = 0; k < 52 && all; ++k)
                        if (enc.char_ids[size_t(k)] != chars[k]) all = false;
                }
                if (all) match = sent;
            }
            CHECK(match != nullptr);
        }
    }
}

TEST_CASE("make_batches padding uses the padding casing class and PAD ids") {
    TaggedCorpus c = parse_text("a O\n\nlonger O\nsentence O\nhere O\n\n");
    Vocab v = tiny_vocab();
    BatchOptions opts;
    opts.bucket_by_length = false;
    auto batches = make_batches(c, v, opts);
    REQUIRE(batches.size() == 1);
    const Batch& b = batches[0];
    REQUIRE(b.w == 3);
    CHECK(b.word_at(0, 1) == Vocab::word_pad);
    CHECK(b.casing_at(0, 1) == int(CasingClass::padding));
    CHECK(b.tag_at(0, 1) == 0);
    CHECK_FALSE(b.masked_on(0, 1));
}

TEST_CASE("generate_synthetic_corpus is deterministic") {
    SyntheticSpec spec;
    spec.categories = 2;
    spec.sentences = 100;
    spec.seed = 7;
    CHECK(generate_synthetic_corpus(spec) == generate_synthetic_corpus(spec));
    SyntheticSpec other = spec;
    other.seed = 8;
    CHECK(generate_synthetic_corpus(spec).documents != generate_synthetic_corpus(other).documents);
}

TEST_CASE("synthetic sentences carry valid BIO tags") {
    SyntheticSpec spec;
    spec.categories = 3;
    spec.sentences = 200;
    spec.entity_density = 0.5;
    spec.max_entity_len = 3;
    TaggedCorpus c = generate_synthetic_corpus(spec);
    for (const auto& doc : c.documents) {
        for (const auto& s : doc.sentences) {
            std::vector<int> tags = s.tags;
            CHECK(repair_bio(tags) == 0);  // nothing to repair
        }
    }
}

TEST_CASE("entity density 0 produces an all-O corpus") {
    SyntheticSpec spec;
    spec.entity_density = 0.0;
    spec.sentences = 50;
    TaggedCorpus c = generate_synthetic_corpus(spec);
    for (const auto& doc : c.documents)
        for (const auto& s : doc.sentences)
            for (int tag : s.tags) CHECK(tag == 0);
}

TEST_CASE("related domains share context and overlap entity vocabulary") {
    SyntheticSpec spec;
    spec.categories = 2;
    spec.entity_vocab = 10;
    SyntheticDomain a = make_domain(spec);
    SyntheticDomain b = make_related_domain(a, spec, 0.5, "B", 99);
    CHECK(a.context == b.context);
    CHECK(b.categories != a.categories);
    for (size_t c = 0; c < a.entities.size(); ++c) {
        std::set<std::string> sa(a.entities[c].begin(), a.entities[c].end());
        int shared = 0;
        for (const auto& e : b.entities[c]) shared += sa.count(e) ? 1 : 0;
        CHECK(shared == 5);
        CHECK(b.entities[c].size() == a.entities[c].size());
    }
}
