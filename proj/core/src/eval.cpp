#include "fsner/eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fsner/error.hpp"
#include "fsner/text_io.hpp"

namespace fsner {

std::vector<EntitySpan> extract_spans(const std::vector<int>& tags, const LabelScheme& scheme) {
    std::vector<EntitySpan> spans;
    for (size_t i = 0; i < tags.size();) {
        const int tag = tags[i];
        if (!LabelScheme::is_begin(tag)) {
            ++i;
            continue;
        }
        const int cat = LabelScheme::category_of(tag);
        size_t j = i + 1;
        while (j < tags.size() && LabelScheme::is_inside(tags[j]) &&
               LabelScheme::category_of(tags[j]) == cat)
            ++j;
        spans.push_back({scheme.categories[size_t(cat)], int(i), int(j) - 1});
        i = j;
    }
    return spans;
}

EvalReport score(const TaggedCorpus& gold, const std::vector<std::vector<int>>& predicted) {
    const auto sentences = gold.all_sentences();
    require(sentences.size() == predicted.size(),
            "score: prediction count " + std::to_string(predicted.size()) +
                " does not match gold sentence count " + std::to_string(sentences.size()));

    EvalReport report;
    report.categories = gold.scheme.categories;
    for (const auto& cat : report.categories) report.per_category[cat];

    int64_t correct_tokens = 0, total_tokens = 0;
    for (size_t s = 0; s < sentences.size(); ++s) {
        const TaggedSentence& sent = *sentences[s];
        const std::vector<int>& pred = predicted[s];
        require(pred.size() == sent.tags.size(),
                "score: sentence " + std::to_string(s) + " has " + std::to_string(pred.size()) +
                    " predicted tags for " + std::to_string(sent.tags.size()) + " tokens");
        for (size_t t = 0; t < pred.size(); ++t) {
            ++total_tokens;
            if (pred[t] == sent.tags[t]) ++correct_tokens;
        }

        const auto gold_spans = extract_spans(sent.tags, gold.scheme);
        const auto pred_spans = extract_spans(pred, gold.scheme);
        std::vector<bool> gold_used(gold_spans.size(), false);
        for (const auto& p : pred_spans) {
            bool matched = false;
            for (size_t g = 0; g < gold_spans.size(); ++g) {
                if (!gold_used[g] && gold_spans[g] == p) {
                    gold_used[g] = true;
                    matched = true;
                    break;
                }
            }
            auto& counts = report.per_category[p.category];
            if (matched) ++counts.tp;
            else ++counts.fp;
        }
        for (size_t g = 0; g < gold_spans.size(); ++g) {
            if (!gold_used[g]) ++report.per_category[gold_spans[g].category].fn;
        }
    }

    for (const auto& [cat, counts] : report.per_category) {
        report.micro.tp += counts.tp;
        report.micro.fp += counts.fp;
        report.micro.fn += counts.fn;
    }
    report.token_accuracy = total_tokens == 0 ? 0.0 : double(correct_tokens) / double(total_tokens);
    return report;
}

std::string report_to_kv(const EvalReport& report) {
    std::ostringstream out;
    auto emit = [&](const std::string& prefix, const PrfCounts& c) {
        out << prefix << ".tp = " << c.tp << "\n";
        out << prefix << ".fp = " << c.fp << "\n";
        out << prefix << ".fn = " << c.fn << "\n";
        out << prefix << ".precision = " << format_double(c.precision()) << "\n";
        out << prefix << ".recall = " << format_double(c.recall()) << "\n";
        out << prefix << ".f1 = " << format_double(c.f1()) << "\n";
    };
    for (const auto& cat : report.categories) emit("category." + cat, report.per_category.at(cat));
    emit("micro", report.micro);
    out << "token_accuracy = " << format_double(report.token_accuracy) << "\n";
    return out.str();
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "category,tp,fp,fn,precision,recall,f1\n";
    auto emit = [&](const std::string& name, const PrfCounts& c) {
        out << csv_field(name) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
            << format_double(c.precision()) << ',' << format_double(c.recall()) << ','
            << format_double(c.f1()) << "\n";
    };
    for (const auto& cat : report.categories) emit(cat, report.per_category.at(cat));
    emit("micro", report.micro);
    return out.str();
}

}  // namespace fsner
