#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsner/rng.hpp"

namespace fsner {

// ---------------------------------------------------------------------------
// Label scheme: categories induce the tag set {O} u {B-cat, I-cat}.
// Tag ids: O = 0, B-cat_i = 1 + 2i, I-cat_i = 2 + 2i.
// ---------------------------------------------------------------------------

struct LabelScheme {
    std::vector<std::string> categories;

    LabelScheme() = default;
    explicit LabelScheme(std::vector<std::string> cats);

    int n_tags() const { return 1 + 2 * int(categories.size()); }
    std::string tag_name(int id) const;
    // -1 when the tag is not part of the scheme.
    int tag_id(const std::string& name) const;
    static bool is_begin(int id) { return id > 0 && id % 2 == 1; }
    static bool is_inside(int id) { return id > 0 && id % 2 == 0; }
    // Category index of a non-O tag.
    static int category_of(int id) { return (id - 1) / 2; }

    bool operator==(const LabelScheme&) const = default;
};

struct TaggedSentence {
    std::vector<std::string> tokens;
    std::vector<int> tags;

    bool operator==(const TaggedSentence&) const = default;
};

struct Document {
    std::string id;
    std::vector<TaggedSentence> sentences;

    bool operator==(const Document&) const = default;
};

struct TaggedCorpus {
    std::vector<Document> documents;
    LabelScheme scheme;

    int64_t sentence_count() const;
    int64_t token_count() const;
    // Sentences in document order.
    std::vector<const TaggedSentence*> all_sentences() const;

    bool operator==(const TaggedCorpus&) const = default;
};

// ---------------------------------------------------------------------------
// Casing classes (V_ca = 8). Ids follow the declaration order.
// ---------------------------------------------------------------------------

enum class CasingClass : int {
    numeric = 0,
    allLower = 1,
    allUpper = 2,
    mainly_numeric = 3,
    initialUpper = 4,
    contains_digit = 5,
    padding = 6,
    other = 7,
};

inline constexpr int kCasingCount = 8;

const char* casing_name(CasingClass c);

// First matching rule wins: numeric -> mainly_numeric (> 50% digits) ->
// allLower -> allUpper -> initialUpper -> contains_digit -> other.
// Exactly 50% digits falls through to contains_digit.
CasingClass casing_of(const std::string& token);

// Strips trailing {':', ';', '.', '-'}, leading/trailing straight and curly
// quotes, and leading '+', iterated to a fixed point. Never returns empty:
// if stripping would consume the whole token the original is returned.
std::string normalize_token(const std::string& token);

enum class NormalizeMode { off, lookup, global };

// ---------------------------------------------------------------------------
// Vocab: word index with reserved PAD/UNK, the fixed 97-entry character
// index, and the casing index.
// ---------------------------------------------------------------------------

struct Vocab {
    static constexpr int word_pad = 0;
    static constexpr int word_unk = 1;
    static constexpr int char_pad = 0;
    static constexpr int char_unk = 1;
    static constexpr int char_vocab_size = 97;  // 94 printable non-space ASCII + PAD + UNK + space

    std::vector<std::string> words;  // id -> surface, ids 0/1 are <pad>/<unk>
    std::unordered_map<std::string, int> word_index;

    int64_t size() const { return int64_t(words.size()); }
    // Lookup of an already lowercased key; unknown words map to UNK.
    int word_id(const std::string& key) const;
    static int char_id(unsigned char c);
    static int casing_id(CasingClass c) { return int(c); }
    // Order-sensitive hash of the word list (the checkpoint fingerprint).
    uint64_t fingerprint() const;
};

// Word ids follow the embedding token order, offset by the two reserved ids.
Vocab build_vocab(const std::vector<std::string>& embedding_tokens);

struct EncodedToken {
    int word_id = Vocab::word_pad;
    std::vector<int> char_ids;  // length max_chars
    int casing_id = int(CasingClass::padding);
};

struct EncodeOptions {
    NormalizeMode normalize = NormalizeMode::off;
    int max_chars = 52;
};

// Word lookup uses the lowercased (optionally normalized) surface; character
// and casing channels see the raw surface unless normalization is global.
EncodedToken encode_token(const std::string& token, const Vocab& vocab, const EncodeOptions& opts);

// ---------------------------------------------------------------------------
// Padded batches.
// ---------------------------------------------------------------------------

struct Batch {
    int b = 0;  // sentences
    int w = 0;  // max sentence length in batch
    int max_chars = 52;
    std::vector<int> word_ids;             // (b x w)
    std::vector<int> char_ids;             // (b x w x max_chars)
    std::vector<int> casing_ids;           // (b x w)
    std::vector<int> tag_ids;              // (b x w)
    std::vector<uint8_t> mask;             // (b x w)

    int word_at(int s, int t) const { return word_ids[size_t(s) * w + t]; }
    int tag_at(int s, int t) const { return tag_ids[size_t(s) * w + t]; }
    int casing_at(int s, int t) const { return casing_ids[size_t(s) * w + t]; }
    const int* chars_at(int s, int t) const {
        return char_ids.data() + (size_t(s) * w + t) * max_chars;
    }
    bool masked_on(int s, int t) const { return mask[size_t(s) * w + t] != 0; }
    int sentence_length(int s) const;
    int64_t unmasked_count() const;
};

struct BatchOptions {
    int batch_size = 64;
    uint64_t seed = 0;
    bool shuffle = false;
    // Sort by length before slicing batches to reduce padding; a strict
    // shuffle disables it.
    bool bucket_by_length = true;
    EncodeOptions encode;
};

std::vector<Batch> make_batches(const TaggedCorpus& corpus, const Vocab& vocab,
                                const BatchOptions& opts);

// ---------------------------------------------------------------------------
// Column-format parsing / serialization.
// ---------------------------------------------------------------------------

struct ParseStats {
    int64_t repaired_continuations = 0;
    int64_t docstart_lines = 0;
};

// token<TAB-or-space>tag lines, blank line between sentences, "-DOCSTART-"
// first column opens a new document. 4-column CoNLL-2003 layout accepted
// (first and last columns used). Invalid I- continuations are repaired to B-.
TaggedCorpus parse_conll(std::istream& in, ParseStats* stats = nullptr);

// Two-column serialization; parse(write(c)) == c.
void write_conll(const TaggedCorpus& corpus, std::ostream& out);

// In-place lenient BIO repair: I-x after O, start, or a different category
// becomes B-x. Returns the number of repairs.
int64_t repair_bio(std::vector<int>& tags);

// Uniform document sample without replacement; the selected id set depends
// only on (doc id set, k, seed). k >= |docs| returns the whole corpus.
TaggedCorpus sample_few_shot(const TaggedCorpus& corpus, int64_t k, uint64_t seed);

}  // namespace fsner
