#pragma once

#include <map>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"

namespace fsner {

struct EntitySpan {
    std::string category;
    int start = 0;  // token index
    int end = 0;    // inclusive

    bool operator==(const EntitySpan&) const = default;
};

struct PrfCounts {
    int64_t tp = 0, fp = 0, fn = 0;

    double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

struct EvalReport {
    std::map<std::string, PrfCounts> per_category;  // scheme order via categories list
    std::vector<std::string> categories;
    PrfCounts micro;
    double token_accuracy = 0.0;
};

// Maximal B-x (I-x)* runs, ordered by start index. Tags must be valid BIO.
std::vector<EntitySpan> extract_spans(const std::vector<int>& tags, const LabelScheme& scheme);

// Exact-span, exact-type matching per sentence: a predicted span is a true
// positive iff an identical (category, start, end) span exists in the gold
// sentence; each gold span matches at most one prediction.
EvalReport score(const TaggedCorpus& gold, const std::vector<std::vector<int>>& predicted);

std::string report_to_kv(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace fsner
