#include "fsner/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include "fsner/error.hpp"
#include "fsner/eval.hpp"
#include "fsner/text_io.hpp"

namespace fsner {

namespace {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::nadam ? "nadam" : "sgd"; }
const char* decay_name(DecayMode d) { return d == DecayMode::constant ? "constant" : "scheduled"; }

struct Cell {
    OptimizerKind optimizer;
    std::string checkpoint;
    double sgd_lr;
    int batch_norm;
    int trainable_embeddings;
    DecayMode decay;
    // Which axes were present, mirrored from GridAxes.
    bool has_optimizer, has_checkpoint, has_sgd_lr, has_bn, has_te, has_decay;
};

std::vector<Cell> enumerate_cells(const GridAxes& axes, const GridContext& ctx) {
    auto opts = axes.optimizers.empty() ? std::vector<OptimizerKind>{ctx.train.optimizer}
                                        : axes.optimizers;
    auto ckpts = axes.checkpoints.empty() ? std::vector<std::string>{"none"} : axes.checkpoints;
    auto lrs = axes.sgd_lrs.empty() ? std::vector<double>{ctx.train.sgd_lr} : axes.sgd_lrs;
    auto bns = axes.batch_norm.empty() ? std::vector<int>{ctx.net.batch_norm ? 1 : 0}
                                       : axes.batch_norm;
    auto tes = axes.trainable_embeddings.empty()
                   ? std::vector<int>{ctx.net.trainable_embeddings ? 1 : 0}
                   : axes.trainable_embeddings;
    auto decays = axes.decays.empty() ? std::vector<DecayMode>{ctx.train.decay} : axes.decays;

    std::vector<Cell> cells;
    for (auto opt : opts)
        for (const auto& ck : ckpts)
            for (double lr : lrs)
                for (int bn : bns)
                    for (int te : tes)
                        for (auto decay : decays) {
                            Cell c{opt, ck, lr, bn, te, decay,
                                   !axes.optimizers.empty(), !axes.checkpoints.empty(),
                                   !axes.sgd_lrs.empty(), !axes.batch_norm.empty(),
                                   !axes.trainable_embeddings.empty(), !axes.decays.empty()};
                            cells.push_back(c);
                        }
    return cells;
}

ExperimentRecord run_cell(const Cell& cell, int index, const GridContext& ctx) {
    ExperimentRecord record;
    record.trial_index = index;
    record.seed = mix_seed(ctx.master_seed, uint64_t(index) + 1);

    if (cell.has_optimizer) record.config.emplace_back("optimizer", optimizer_name(cell.optimizer));
    if (cell.has_checkpoint) record.config.emplace_back("checkpoint", cell.checkpoint);
    if (cell.has_sgd_lr) record.config.emplace_back("sgd_lr", format_double(cell.sgd_lr));
    if (cell.has_bn) record.config.emplace_back("batch_norm", cell.batch_norm ? "on" : "off");
    if (cell.has_te)
        record.config.emplace_back("trainable_embeddings", cell.trainable_embeddings ? "on" : "off");
    if (cell.has_decay) record.config.emplace_back("decay", decay_name(cell.decay));
    for (size_t i = 0; i < record.config.size(); ++i) {
        if (i) record.label += "|";
        record.label += record.config[i].first + "=" + record.config[i].second;
    }
    if (record.label.empty()) record.label = "trial" + std::to_string(index);

    const auto start = std::chrono::steady_clock::now();
    try {
        NetworkConfig net = ctx.net;
        net.n_tags = ctx.train_corpus->scheme.n_tags();
        net.batch_norm = cell.batch_norm != 0;
        net.trainable_embeddings = cell.trainable_embeddings != 0;
        TrainConfig train = ctx.train;
        train.optimizer = cell.optimizer;
        train.sgd_lr = cell.sgd_lr;
        train.decay = cell.decay;

        double f1_sum = 0;
        for (int rep = 0; rep < std::max(1, ctx.repeats); ++rep) {
            const uint64_t seed = mix_seed(record.seed, uint64_t(rep));
            ModelParams model = init_model<float>(net, *ctx.emb, seed);
            if (cell.checkpoint != "none" && !cell.checkpoint.empty()) {
                const Checkpoint ckpt = load_checkpoint(cell.checkpoint);
                apply_init_strategy(model, ckpt, ctx.strategy, ctx.train_corpus->scheme,
                                    ctx.vocab->fingerprint());
            }
            TrainConfig tc = train;
            tc.seed = seed;
            TrainHistory history = fit(model, *ctx.train_corpus, ctx.dev_corpus, *ctx.vocab, tc,
                                       ctx.enc);
            require(!history.empty() && history.back().dev_f1.has_value(),
                    "grid trial produced no dev F1");
            f1_sum += *history.back().dev_f1;
            if (rep == 0) record.history = std::move(history);
        }
        record.final_f1 = f1_sum / double(std::max(1, ctx.repeats));
    } catch (const std::exception& e) {
        record.failed = true;
        record.error = e.what();
        record.final_f1 = -1.0;
    }
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

}  // namespace

int64_t GridAxes::trial_count() const {
    int64_t n = 1;
    for (size_t s : {optimizers.size(), checkpoints.size(), sgd_lrs.size(), batch_norm.size(),
                     trainable_embeddings.size(), decays.size()}) {
        if (s > 0) n *= int64_t(s);
    }
    return n;
}

std::vector<std::string> GridAxes::present_axis_names() const {
    std::vector<std::string> names;
    if (!optimizers.empty()) names.push_back("optimizer");
    if (!checkpoints.empty()) names.push_back("checkpoint");
    if (!sgd_lrs.empty()) names.push_back("sgd_lr");
    if (!batch_norm.empty()) names.push_back("batch_norm");
    if (!trainable_embeddings.empty()) names.push_back("trainable_embeddings");
    if (!decays.empty()) names.push_back("decay");
    return names;
}

std::vector<ExperimentRecord> run_grid(const GridAxes& axes, const GridContext& ctx) {
    require(ctx.train_corpus && ctx.dev_corpus && ctx.vocab && ctx.emb,
            "run_grid: train corpus, dev corpus, vocab and embeddings are required");
    const std::vector<Cell> cells = enumerate_cells(axes, ctx);
    std::vector<ExperimentRecord> records(cells.size());

    const int jobs = std::max(1, ctx.jobs);
    if (jobs == 1 || cells.size() <= 1) {
        for (size_t i = 0; i < cells.size(); ++i) records[i] = run_cell(cells[i], int(i), ctx);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                records[i] = run_cell(cells[i], int(i), ctx);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < std::min<int>(jobs, int(cells.size())); ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::sort(records.begin(), records.end(), [](const ExperimentRecord& a,
                                                 const ExperimentRecord& b) {
        if (a.failed != b.failed) return b.failed;
        if (a.final_f1 != b.final_f1) return a.final_f1 > b.final_f1;
        return a.trial_index < b.trial_index;
    });
    return records;
}

void emit_curves_csv(const std::vector<ExperimentRecord>& records, std::ostream& out) {
    require(!records.empty(), "emit_report: empty record set");
    out << "label,epoch,loss,dev_f1\n";
    for (const auto& r : records) {
        for (size_t e = 0; e < r.history.size(); ++e) {
            out << csv_field(r.label) << ',' << e << ',' << format_double(r.history[e].mean_loss)
                << ',';
            if (r.history[e].dev_f1) out << format_double(*r.history[e].dev_f1);
            out << "\n";
        }
    }
}

void emit_curves_svg(const std::vector<ExperimentRecord>& records, std::ostream& out) {
    require(!records.empty(), "emit_report: empty record set");
    const int width = 640, height = 400, margin = 40;
    size_t max_epochs = 1;
    for (const auto& r : records) max_epochs = std::max(max_epochs, r.history.size());

    const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";

    size_t color = 0;
    for (const auto& r : records) {
        if (r.history.empty()) continue;
        const bool use_f1 = r.history[0].dev_f1.has_value();
        double lo = 0.0, hi = 1.0;
        if (!use_f1) {
            hi = 0.0;
            for (const auto& e : r.history) hi = std::max(hi, e.mean_loss);
            if (hi == 0.0) hi = 1.0;
        }
        out << "<polyline fill=\"none\" stroke=\"" << palette[color % std::size(palette)]
            << "\" points=\"";
        for (size_t e = 0; e < r.history.size(); ++e) {
            const double value = use_f1 ? *r.history[e].dev_f1 : r.history[e].mean_loss;
            const double x = margin + double(e) / double(std::max<size_t>(1, max_epochs - 1)) *
                                           (width - 2 * margin);
            const double y =
                height - margin - (value - lo) / (hi - lo) * (height - 2 * margin);
            out << format_double(x) << ',' << format_double(y) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << width - margin + 2 << "\" y=\"" << margin + 14 * int(color)
            << "\" font-size=\"10\" fill=\"" << palette[color % std::size(palette)] << "\">"
            << int(color) << "</text>\n";
        ++color;
    }
    out << "</svg>\n";
}

void emit_grid_csv(const GridAxes& axes, const std::vector<ExperimentRecord>& records,
                   std::ostream& out) {
    require(!records.empty(), "emit_report: empty record set");
    const auto names = axes.present_axis_names();
    for (const auto& n : names) out << n << ',';
    out << "f1\n";
    for (const auto& r : records) {
        for (const auto& name : names) {
            std::string value;
            for (const auto& [k, v] : r.config) {
                if (k == name) value = v;
            }
            out << csv_field(value) << ',';
        }
        if (!r.failed) out << format_double(r.final_f1);
        out << "\n";
    }
}

void emit_waterfall_csv(const std::vector<std::pair<std::string, double>>& points,
                        std::ostream& out) {
    require(points.size() >= 2, "emit_report: waterfall needs at least two points");
    out << "label,prev_label,prev_f1,f1,delta\n";
    for (size_t i = 1; i < points.size(); ++i) {
        out << csv_field(points[i].first) << ',' << csv_field(points[i - 1].first) << ','
            << format_double(points[i - 1].second) << ',' << format_double(points[i].second) << ','
            << format_double(points[i].second - points[i - 1].second) << "\n";
    }
}

}  // namespace fsner
