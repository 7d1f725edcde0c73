#include "fsner/synthetic.hpp"

#include <algorithm>
#include <set>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

namespace {

const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                         "br", "cl", "dr", "gr", "pl", "st", "tr"};
const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "io", "ou"};

std::string pseudo_word(Rng& rng, int syllables) {
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += kOnsets[rng.below(std::size(kOnsets))];
        w += kVowels[rng.below(std::size(kVowels))];
    }
    return w;
}

// Category suffixes give each category a recognizable character pattern.
std::string category_suffix_form(int category) {
    static const char* kSuffixes[] = {"ine", "ol", "ax", "um", "ide", "ase", "ith", "orn"};
    const int n = int(std::size(kSuffixes));
    std::string s = kSuffixes[category % n];
    for (int i = 0; i < category / n; ++i) s += "x";
    return s;
}

std::vector<std::string> fresh_words(Rng& rng, int count, int syllables, const std::string& suffix,
                                     std::set<std::string>& taken) {
    std::vector<std::string> out;
    out.reserve(size_t(count));
    while (int(out.size()) < count) {
        std::string w = pseudo_word(rng, syllables) + suffix;
        if (taken.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

SyntheticDomain make_domain(const SyntheticSpec& spec) {
    require(spec.categories >= 1 && spec.context_vocab >= 1 && spec.entity_vocab >= 1,
            "synthetic spec values must be positive");
    Rng rng(mix_seed(spec.vocab_seed, 0xD0A11));
    SyntheticDomain domain;
    std::set<std::string> taken;
    domain.context = fresh_words(rng, spec.context_vocab, 1 + int(rng.below(2)), "", taken);
    for (int c = 0; c < spec.categories; ++c) {
        domain.categories.push_back("Cat" + std::to_string(c));
        domain.entities.push_back(
            fresh_words(rng, spec.entity_vocab, 2, category_suffix_form(c), taken));
    }
    return domain;
}

SyntheticDomain make_related_domain(const SyntheticDomain& base, const SyntheticSpec& spec,
                                    double overlap, const std::string& category_suffix,
                                    uint64_t seed) {
    require(overlap >= 0.0 && overlap <= 1.0, "overlap must be in [0, 1]");
    Rng rng(mix_seed(seed, 0xD0B22));
    SyntheticDomain out;
    out.context = base.context;
    std::set<std::string> taken(base.context.begin(), base.context.end());
    for (const auto& ents : base.entities)
        for (const auto& e : ents) taken.insert(e);

    for (size_t c = 0; c < base.categories.size(); ++c) {
        out.categories.push_back(base.categories[c] + category_suffix);
        const auto& src = base.entities[c];
        const int keep = int(double(src.size()) * overlap + 0.5);
        std::vector<std::string> ents(src.begin(), src.begin() + keep);
        auto fresh = fresh_words(rng, int(src.size()) - keep, 2, category_suffix_form(int(c)), taken);
        ents.insert(ents.end(), fresh.begin(), fresh.end());
        out.entities.push_back(std::move(ents));
    }
    (void)spec;
    return out;
}

TaggedCorpus generate_from_domain(const SyntheticDomain& domain, const SyntheticSpec& spec,
                                  uint64_t seed) {
    require(spec.sentences >= 1 && spec.min_len >= 1 && spec.max_len >= spec.min_len,
            "synthetic spec values must be positive");
    require(spec.entity_density >= 0.0 && spec.entity_density <= 1.0,
            "entity density must be in [0, 1]");
    Rng rng(mix_seed(seed, 0xC0495));

    TaggedCorpus corpus;
    corpus.scheme = LabelScheme(domain.categories);
    Document doc;
    const int per_doc = std::max(1, spec.sentences_per_doc);

    auto context_token = [&]() { return domain.context[rng.below(domain.context.size())]; };

    for (int s = 0; s < spec.sentences; ++s) {
        TaggedSentence sentence;
        const int len = spec.min_len + int(rng.below(uint64_t(spec.max_len - spec.min_len + 1)));
        int t = 0;
        while (t < len) {
            if (rng.uniform() < spec.entity_density) {
                const int cat = int(rng.below(uint64_t(domain.categories.size())));
                const auto& ents = domain.entities[size_t(cat)];
                int span = 1 + int(rng.below(uint64_t(std::max(1, spec.max_entity_len))));
                span = std::min(span, len - t);
                for (int j = 0; j < span; ++j) {
                    const bool confusable = rng.uniform() < spec.ambiguity;
                    sentence.tokens.push_back(confusable ? context_token()
                                                         : ents[rng.below(ents.size())]);
                    sentence.tags.push_back(1 + 2 * cat + (j > 0 ? 1 : 0));
                }
                t += span;
            } else {
                sentence.tokens.push_back(context_token());
                sentence.tags.push_back(0);
                ++t;
            }
        }
        doc.sentences.push_back(std::move(sentence));
        if (int(doc.sentences.size()) == per_doc || s + 1 == spec.sentences) {
            doc.id = "d" + std::to_string(corpus.documents.size());
            corpus.documents.push_back(std::move(doc));
            doc = {};
        }
    }
    return corpus;
}

TaggedCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    return generate_from_domain(make_domain(spec), spec, spec.seed);
}

std::vector<std::string> domain_token_inventory(const SyntheticDomain& domain) {
    std::set<std::string> seen;
    std::vector<std::string> out;
    auto add = [&](const std::string& w) {
        if (seen.insert(w).second) out.push_back(w);
    };
    for (const auto& w : domain.context) add(w);
    for (const auto& ents : domain.entities)
        for (const auto& w : ents) add(w);
    return out;
}

}  // namespace fsner
