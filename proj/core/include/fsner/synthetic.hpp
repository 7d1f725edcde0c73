#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"

namespace fsner {

// Vocabulary of one synthetic "domain": shared context tokens plus a
// distinct sub-vocabulary per entity category. Entity surfaces of a category
// share a suffix so the character path carries signal too.
struct SyntheticDomain {
    std::vector<std::string> categories;
    std::vector<std::string> context;                 // O-tagged tokens
    std::vector<std::vector<std::string>> entities;   // per category
};

struct SyntheticSpec {
    int categories = 2;
    int sentences = 100;
    int context_vocab = 40;       // shared context token count
    int entity_vocab = 10;        // per-category entity token count
    double entity_density = 0.35; // probability a slot opens an entity span
    int min_len = 4;
    int max_len = 10;
    int max_entity_len = 2;
    // Probability an entity-internal token is drawn from the context
    // vocabulary instead, so labels are not purely lexical.
    double ambiguity = 0.0;
    int sentences_per_doc = 5;
    uint64_t vocab_seed = 1;  // vocabulary identity
    uint64_t seed = 0;        // sentence sampling
};

SyntheticDomain make_domain(const SyntheticSpec& spec);

// Derives a related domain: contexts are shared, each category keeps
// `overlap` of its entity vocabulary and the rest is replaced by fresh
// surfaces with the same category suffix. Categories are renamed when
// `category_suffix` is non-empty (a different task over related text).
SyntheticDomain make_related_domain(const SyntheticDomain& base, const SyntheticSpec& spec,
                                    double overlap, const std::string& category_suffix,
                                    uint64_t seed);

TaggedCorpus generate_from_domain(const SyntheticDomain& domain, const SyntheticSpec& spec,
                                  uint64_t seed);

TaggedCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

// Every surface form a domain can emit, deduplicated; feeds embedding /
// vocabulary construction for experiments.
std::vector<std::string> domain_token_inventory(const SyntheticDomain& domain);

}  // namespace fsner
