#include "fsner/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "fsner/error.hpp"
#include "fsner/text_io.hpp"

namespace fsner {

LabelScheme::LabelScheme(std::vector<std::string> cats) : categories(std::move(cats)) {
    require(!categories.empty(), "label scheme needs at least one category");
    std::set<std::string> seen;
    for (const auto& c : categories) {
        require(!c.empty(), "label scheme has an empty category name");
        require(seen.insert(c).second, "duplicate category in label scheme: " + c);
    }
}

std::string LabelScheme::tag_name(int id) const {
    if (id == 0) return "O";
    require(id >= 1 && id < n_tags(), "tag id out of range: " + std::to_string(id));
    const std::string& cat = categories[size_t(category_of(id))];
    return (is_begin(id) ? "B-" : "I-") + cat;
}

int LabelScheme::tag_id(const std::string& name) const {
    if (name == "O") return 0;
    if (name.size() < 3 || name[1] != '-' || (name[0] != 'B' && name[0] != 'I')) return -1;
    const std::string cat = name.substr(2);
    for (size_t i = 0; i < categories.size(); ++i) {
        if (categories[i] == cat) return int(1 + 2 * i + (name[0] == 'I' ? 1 : 0));
    }
    return -1;
}

int64_t TaggedCorpus::sentence_count() const {
    int64_t n = 0;
    for (const auto& d : documents) n += int64_t(d.sentences.size());
    return n;
}

int64_t TaggedCorpus::token_count() const {
    int64_t n = 0;
    for (const auto& d : documents)
        for (const auto& s : d.sentences) n += int64_t(s.tokens.size());
    return n;
}

std::vector<const TaggedSentence*> TaggedCorpus::all_sentences() const {
    std::vector<const TaggedSentence*> out;
    out.reserve(size_t(sentence_count()));
    for (const auto& d : documents)
        for (const auto& s : d.sentences) out.push_back(&s);
    return out;
}

// ---------------------------------------------------------------------------
// Casing
// ---------------------------------------------------------------------------

const char* casing_name(CasingClass c) {
    switch (c) {
        case CasingClass::numeric: return "numeric";
        case CasingClass::allLower: return "allLower";
        case CasingClass::allUpper: return "allUpper";
        case CasingClass::mainly_numeric: return "mainly_numeric";
        case CasingClass::initialUpper: return "initialUpper";
        case CasingClass::contains_digit: return "contains_digit";
        case CasingClass::padding: return "padding";
        case CasingClass::other: return "other";
    }
    return "other";
}

CasingClass casing_of(const std::string& token) {
    require(!token.empty(), "casing_of: empty token");
    size_t digits = 0, lowers = 0, uppers = 0;
    for (unsigned char c : token) {
        if (c >= '0' && c <= '9') ++digits;
        else if (c >= 'a' && c <= 'z') ++lowers;
        else if (c >= 'A' && c <= 'Z') ++uppers;
    }
    const size_t n = token.size();
    if (digits == n) return CasingClass::numeric;
    if (2 * digits > n) return CasingClass::mainly_numeric;
    if (lowers == n) return CasingClass::allLower;
    if (uppers == n) return CasingClass::allUpper;
    const unsigned char first = static_cast<unsigned char>(token[0]);
    if (first >= 'A' && first <= 'Z' && lowers == n - 1) return CasingClass::initialUpper;
    if (digits > 0) return CasingClass::contains_digit;
    return CasingClass::other;
}

// ---------------------------------------------------------------------------
// Token normalization
// ---------------------------------------------------------------------------

namespace {

bool strip_trailing_punct(std::string& s) {
    bool changed = false;
    while (!s.empty()) {
        const char c = s.back();
        if (c == ':' || c == ';' || c == '.' || c == '-') {
            s.pop_back();
            changed = true;
        } else {
            break;
        }
    }
    return changed;
}

// Straight quotes plus the UTF-8 curly pairs.
const char* kQuotes[] = {"\"", "'", "\xe2\x80\x9c", "\xe2\x80\x9d", "\xe2\x80\x98", "\xe2\x80\x99"};

bool strip_quotes(std::string& s) {
    bool changed = false;
    bool again = true;
    while (again && !s.empty()) {
        again = false;
        for (const char* q : kQuotes) {
            const size_t qn = std::char_traits<char>::length(q);
            if (s.size() >= qn && s.compare(0, qn, q) == 0) {
                s.erase(0, qn);
                changed = again = true;
            }
            if (s.size() >= qn && s.compare(s.size() - qn, qn, q) == 0) {
                s.erase(s.size() - qn);
                changed = again = true;
            }
        }
    }
    return changed;
}

bool strip_leading_plus(std::string& s) {
    bool changed = false;
    while (!s.empty() && s.front() == '+') {
        s.erase(0, 1);
        changed = true;
    }
    return changed;
}

}  // namespace

std::string normalize_token(const std::string& token) {
    std::string s = token;
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        changed |= strip_trailing_punct(s);
        changed |= strip_quotes(s);
        changed |= strip_leading_plus(s);
    }
    if (s.empty()) return token;
    return s;
}

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

int Vocab::word_id(const std::string& key) const {
    auto it = word_index.find(key);
    return it == word_index.end() ? word_unk : it->second;
}

int Vocab::char_id(unsigned char c) {
    if (c == ' ') return 2;
    if (c >= 0x21 && c <= 0x7e) return 3 + (c - 0x21);
    return char_unk;
}

uint64_t Vocab::fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& w : words) {
        h = fnv1a64(w, h);
        h = fnv1a64_bytes("\n", 1, h);
    }
    return h;
}

Vocab build_vocab(const std::vector<std::string>& embedding_tokens) {
    Vocab v;
    v.words.reserve(embedding_tokens.size() + 2);
    v.words.push_back("<pad>");
    v.words.push_back("<unk>");
    for (const auto& tok : embedding_tokens) {
        auto [it, inserted] = v.word_index.emplace(tok, int(v.words.size()));
        require(inserted, "duplicate token in embedding vocabulary: " + tok);
        v.words.push_back(tok);
    }
    return v;
}

EncodedToken encode_token(const std::string& token, const Vocab& vocab, const EncodeOptions& opts) {
    require(!token.empty(), "encode_token: empty token");
    const std::string normalized =
        opts.normalize == NormalizeMode::off ? token : normalize_token(token);
    const std::string& surface = opts.normalize == NormalizeMode::global ? normalized : token;
    const std::string& lookup_key =
        opts.normalize == NormalizeMode::off ? token : normalized;

    EncodedToken out;
    out.word_id = vocab.word_id(lowercase_ascii(lookup_key));
    out.char_ids.assign(size_t(opts.max_chars), Vocab::char_pad);
    const size_t n = std::min(surface.size(), size_t(opts.max_chars));
    for (size_t i = 0; i < n; ++i)
        out.char_ids[i] = Vocab::char_id(static_cast<unsigned char>(surface[i]));
    out.casing_id = Vocab::casing_id(casing_of(surface));
    return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

int Batch::sentence_length(int s) const {
    int n = 0;
    while (n < w && mask[size_t(s) * w + n]) ++n;
    return n;
}

int64_t Batch::unmasked_count() const {
    int64_t n = 0;
    for (uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

std::vector<Batch> make_batches(const TaggedCorpus& corpus, const Vocab& vocab,
                                const BatchOptions& opts) {
    require(opts.batch_size >= 1, "make_batches: batch_size must be >= 1");
    std::vector<const TaggedSentence*> sentences = corpus.all_sentences();
    if (sentences.empty()) return {};

    if (opts.shuffle) {
        Rng rng(mix_seed(opts.seed, 0x5e11));
        rng.shuffle(sentences);
    }
    if (opts.bucket_by_length) {
        std::stable_sort(sentences.begin(), sentences.end(),
                         [](const TaggedSentence* a, const TaggedSentence* b) {
                             return a->tokens.size() < b->tokens.size();
                         });
    }

    std::vector<std::vector<const TaggedSentence*>> groups;
    for (size_t i = 0; i < sentences.size(); i += size_t(opts.batch_size)) {
        const size_t end = std::min(sentences.size(), i + size_t(opts.batch_size));
        groups.emplace_back(sentences.begin() + long(i), sentences.begin() + long(end));
    }
    if (opts.shuffle) {
        Rng rng(mix_seed(opts.seed, 0x0bde));
        rng.shuffle(groups);
    }

    std::vector<Batch> batches;
    batches.reserve(groups.size());
    for (const auto& group : groups) {
        Batch batch;
        batch.b = int(group.size());
        batch.max_chars = opts.encode.max_chars;
        int w = 0;
        for (const auto* s : group) w = std::max(w, int(s->tokens.size()));
        batch.w = w;
        const size_t cells = size_t(batch.b) * size_t(w);
        batch.word_ids.assign(cells, Vocab::word_pad);
        batch.char_ids.assign(cells * size_t(batch.max_chars), Vocab::char_pad);
        batch.casing_ids.assign(cells, int(CasingClass::padding));
        batch.tag_ids.assign(cells, 0);
        batch.mask.assign(cells, 0);
        for (int s = 0; s < batch.b; ++s) {
            const TaggedSentence& sent = *group[size_t(s)];
            for (int t = 0; t < int(sent.tokens.size()); ++t) {
                const EncodedToken enc = encode_token(sent.tokens[size_t(t)], vocab, opts.encode);
                const size_t cell = size_t(s) * size_t(w) + size_t(t);
                batch.word_ids[cell] = enc.word_id;
                std::copy(enc.char_ids.begin(), enc.char_ids.end(),
                          batch.char_ids.begin() + long(cell * size_t(batch.max_chars)));
                batch.casing_ids[cell] = enc.casing_id;
                batch.tag_ids[cell] = sent.tags[size_t(t)];
                batch.mask[cell] = 1;
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

// ---------------------------------------------------------------------------
// Parsing / serialization
// ---------------------------------------------------------------------------

namespace {

struct RawTag {
    char kind = 'O';          // 'O', 'B' or 'I'
    std::string category;     // empty for O
};

RawTag parse_tag(const std::string& s, int lineno) {
    if (s == "O") return {};
    if (s.size() >= 3 && (s[0] == 'B' || s[0] == 'I') && s[1] == '-')
        return {s[0], s.substr(2)};
    fail("line " + std::to_string(lineno) + ": invalid tag '" + s + "'");
}

}  // namespace

int64_t repair_bio(std::vector<int>& tags) {
    int64_t repaired = 0;
    int prev = 0;
    for (int& tag : tags) {
        if (LabelScheme::is_inside(tag)) {
            const bool valid_prev =
                prev != 0 && LabelScheme::category_of(prev) == LabelScheme::category_of(tag);
            if (!valid_prev) {
                tag -= 1;  // I-x -> B-x
                ++repaired;
            }
        }
        prev = tag;
    }
    return repaired;
}

TaggedCorpus parse_conll(std::istream& in, ParseStats* stats) {
    TaggedCorpus corpus;
    std::vector<std::string> categories;
    std::unordered_map<std::string, int> category_index;
    auto category_id = [&](const std::string& cat) {
        auto it = category_index.find(cat);
        if (it != category_index.end()) return it->second;
        const int id = int(categories.size());
        categories.push_back(cat);
        category_index.emplace(cat, id);
        return id;
    };

    ParseStats local;
    Document doc;
    TaggedSentence sentence;
    bool saw_any_line = false;

    auto flush_sentence = [&]() {
        if (sentence.tokens.empty()) return;
        local.repaired_continuations += repair_bio(sentence.tags);
        doc.sentences.push_back(std::move(sentence));
        sentence = {};
    };
    auto flush_document = [&]() {
        flush_sentence();
        if (!doc.sentences.empty()) {
            doc.id = "doc" + std::to_string(corpus.documents.size());
            corpus.documents.push_back(std::move(doc));
        }
        doc = {};
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> cols = split_whitespace(line);
        if (cols.empty()) {
            saw_any_line = saw_any_line || !line.empty();
            flush_sentence();
            continue;
        }
        saw_any_line = true;
        if (cols[0] == "-DOCSTART-") {
            ++local.docstart_lines;
            flush_document();
            continue;
        }
        if (cols.size() != 2 && cols.size() != 4) {
            fail("line " + std::to_string(lineno) + ": expected 2 or 4 columns, found " +
                 std::to_string(cols.size()));
        }
        const std::string& token = cols.front();
        const RawTag tag = parse_tag(cols.back(), lineno);
        sentence.tokens.push_back(token);
        if (tag.kind == 'O') {
            sentence.tags.push_back(0);
        } else {
            const int cat = category_id(tag.category);
            sentence.tags.push_back(1 + 2 * cat + (tag.kind == 'I' ? 1 : 0));
        }
    }
    flush_document();

    require(saw_any_line, "empty corpus input");
    require(!corpus.documents.empty(), "corpus has no sentences");
    if (!categories.empty()) corpus.scheme = LabelScheme(categories);
    if (stats) *stats = local;
    return corpus;
}

void write_conll(const TaggedCorpus& corpus, std::ostream& out) {
    for (const auto& doc : corpus.documents) {
        out << "-DOCSTART- O\n\n";
        for (const auto& sentence : doc.sentences) {
            for (size_t t = 0; t < sentence.tokens.size(); ++t) {
                out << sentence.tokens[t] << ' ' << corpus.scheme.tag_name(sentence.tags[t])
                    << '\n';
            }
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Few-shot sampling
// ---------------------------------------------------------------------------

TaggedCorpus sample_few_shot(const TaggedCorpus& corpus, int64_t k, uint64_t seed) {
    require(!corpus.documents.empty(), "sample_few_shot: empty corpus");
    require(k >= 1, "sample_few_shot: k must be >= 1");
    if (k >= int64_t(corpus.documents.size())) return corpus;

    // Rank documents by a per-id key so the selection is independent of
    // document order.
    std::vector<std::pair<uint64_t, const Document*>> keyed;
    keyed.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents)
        keyed.emplace_back(mix_seed(seed, fnv1a64(doc.id)), &doc);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->id < b.second->id;
    });

    std::set<const Document*> chosen;
    for (int64_t i = 0; i < k; ++i) chosen.insert(keyed[size_t(i)].second);

    TaggedCorpus out;
    out.scheme = corpus.scheme;
    for (const auto& doc : corpus.documents) {
        if (chosen.count(&doc)) out.documents.push_back(doc);
    }
    return out;
}

}  // namespace fsner
