#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/embeddings.hpp"
#include "fsner/optim.hpp"
#include "fsner/transfer.hpp"

namespace fsner {

// Grid axes; an empty vector means the axis is absent and the base config
// value applies. Trial count is the product of the present axis sizes.
struct GridAxes {
    std::vector<OptimizerKind> optimizers;
    std::vector<std::string> checkpoints;  // checkpoint paths, "none" = random init
    std::vector<double> sgd_lrs;
    std::vector<int> batch_norm;            // 0 / 1
    std::vector<int> trainable_embeddings;  // 0 / 1
    std::vector<DecayMode> decays;

    int64_t trial_count() const;
    std::vector<std::string> present_axis_names() const;
};

struct ExperimentRecord {
    std::string label;
    // Resolved axis values, in axis order; the grid CSV columns.
    std::vector<std::pair<std::string, std::string>> config;
    uint64_t seed = 0;
    double final_f1 = 0.0;
    TrainHistory history;
    double wall_seconds = 0.0;  // never written to output files
    bool failed = false;
    std::string error;
    int trial_index = 0;
};

struct GridContext {
    NetworkConfig net;
    TrainConfig train;
    EncodeOptions enc;
    InitStrategy strategy = InitStrategy::All;  // applied to checkpoint cells
    const TaggedCorpus* train_corpus = nullptr;
    const TaggedCorpus* dev_corpus = nullptr;  // required; ranks the cells
    const Vocab* vocab = nullptr;
    const EmbeddingMatrix* emb = nullptr;
    uint64_t master_seed = 0;
    int jobs = 1;
    int repeats = 1;  // fits per cell; final F1 is the mean
};

// Every cell of the cartesian product as an independent fit with a derived
// seed. Trial failures are recorded and the remaining trials continue.
// Results sorted by final micro F1, descending; deterministic per master
// seed and independent of the job count.
std::vector<ExperimentRecord> run_grid(const GridAxes& axes, const GridContext& ctx);

// Figure 2 analog: (label, epoch, loss, dev F1) rows plus a simple SVG line
// chart of the dev-F1 curves.
void emit_curves_csv(const std::vector<ExperimentRecord>& records, std::ostream& out);
void emit_curves_svg(const std::vector<ExperimentRecord>& records, std::ostream& out);

// Figure 3 analog: one row per trial, columns = present axis names + f1.
void emit_grid_csv(const GridAxes& axes, const std::vector<ExperimentRecord>& records,
                   std::ostream& out);

// Figure 4 analog: sequential deltas between labeled F1 points.
void emit_waterfall_csv(const std::vector<std::pair<std::string, double>>& points,
                        std::ostream& out);

}  // namespace fsner
