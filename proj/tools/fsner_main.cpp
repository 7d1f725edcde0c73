// Command-line surface: ingestion, embedding training, OOV reports,
// pre-training, few-shot fine-tuning, grid search, evaluation and report
// emission. One subcommand per pipeline stage.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fsner/corpus.hpp"
#include "fsner/embeddings.hpp"
#include "fsner/error.hpp"
#include "fsner/eval.hpp"
#include "fsner/experiment.hpp"
#include "fsner/network.hpp"
#include "fsner/optim.hpp"
#include "fsner/synthetic.hpp"
#include "fsner/text_io.hpp"
#include "fsner/transfer.hpp"

namespace fs = std::filesystem;
using namespace fsner;

namespace {

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct CommonOpts {
    uint64_t seed = 0;
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "Master random seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->fallthrough();  // lets `fsner <cmd> --config F` reach the app-level option
}

struct TrainFlags {
    int epochs = 50;
    int batch_size = 64;
    std::string optimizer = "nadam";
    double lr = 0.04;  // SGD learning rate; Nadam uses its pinned defaults
    std::string decay = "constant";
    double decay_coeff = 0.05;
    bool batch_norm = false;
    bool trainable_embeddings = false;
    int hidden = 200;
    int char_dim = 30;
    int conv_kernels = 30;
    int max_chars = 52;
    double dropout = 0.5;
    std::string normalize = "off";
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--batch-size", f.batch_size, "Sentences per mini-batch");
    cmd->add_option("--optimizer", f.optimizer, "Optimizer")
        ->check(CLI::IsMember({"nadam", "sgd"}));
    cmd->add_option("--lr", f.lr, "SGD learning rate (0.04 or 0.08 by convention)");
    cmd->add_option("--decay", f.decay, "SGD learning-rate decay")
        ->check(CLI::IsMember({"constant", "scheduled"}));
    cmd->add_option("--decay-coeff", f.decay_coeff, "Inverse-time decay coefficient");
    cmd->add_flag("--batch-norm", f.batch_norm, "Batch-normalize the concatenated features");
    cmd->add_flag("--trainable-embeddings", f.trainable_embeddings,
                  "Unfreeze the word embedding layer");
    cmd->add_option("--hidden", f.hidden, "LSTM units per direction");
    cmd->add_option("--char-dim", f.char_dim, "Character embedding dimension");
    cmd->add_option("--conv-kernels", f.conv_kernels, "Convolution kernel count");
    cmd->add_option("--max-chars", f.max_chars, "Characters per word");
    cmd->add_option("--dropout", f.dropout, "Dropout rate on the character path");
    cmd->add_option("--normalize", f.normalize, "Token normalization")
        ->check(CLI::IsMember({"off", "lookup", "global"}));
}

NetworkConfig to_network_config(const TrainFlags& f, int word_dim, int n_tags) {
    NetworkConfig cfg;
    cfg.char_dim = f.char_dim;
    cfg.max_chars = f.max_chars;
    cfg.conv_kernels = f.conv_kernels;
    cfg.dropout_rate = f.dropout;
    cfg.word_dim = word_dim;
    cfg.lstm_units = f.hidden;
    cfg.n_tags = n_tags;
    cfg.batch_norm = f.batch_norm;
    cfg.trainable_embeddings = f.trainable_embeddings;
    return cfg;
}

TrainConfig to_train_config(const TrainFlags& f, uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch_size;
    cfg.seed = seed;
    cfg.optimizer = f.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::nadam;
    cfg.sgd_lr = f.lr;
    cfg.decay = f.decay == "scheduled" ? DecayMode::scheduled : DecayMode::constant;
    cfg.decay_coeff = f.decay_coeff;
    return cfg;
}

NormalizeMode to_normalize_mode(const std::string& s) {
    if (s == "lookup") return NormalizeMode::lookup;
    if (s == "global") return NormalizeMode::global;
    return NormalizeMode::off;
}

EncodeOptions to_encode_options(const TrainFlags& f) {
    EncodeOptions enc;
    enc.normalize = to_normalize_mode(f.normalize);
    enc.max_chars = f.max_chars;
    return enc;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

TaggedCorpus read_corpus(const std::string& path, ParseStats* stats = nullptr) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open corpus file: " + path);
    return parse_conll(in, stats);
}

EmbeddingMatrix read_embeddings(const std::string& path, LoadStats* stats = nullptr) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open embeddings file: " + path);
    return load_embeddings(in, stats);
}

void ensure_out_dir(const std::string& out) { fs::create_directories(out); }

std::string out_path(const CommonOpts& o, const std::string& name) {
    return (fs::path(o.out) / name).string();
}

// Resolved configuration: everything needed to reproduce the command, minus
// the output location.
void write_resolved_config(const CLI::App* cmd, const CommonOpts& o) {
    std::istringstream all(cmd->config_to_str(true, false));
    std::ostringstream kept;
    kept << "# fsner " << cmd->get_name() << " resolved configuration\n";
    kept << "# reproduce with: fsner --config <this file> " << cmd->get_name() << "\n";
    kept << "[" << cmd->get_name() << "]\n";
    std::string line;
    while (std::getline(all, line)) {
        if (line.rfind("out=", 0) == 0 || line.rfind("config=", 0) == 0) continue;
        kept << line << "\n";
    }
    write_text_file(out_path(o, "resolved_config.txt"), kept.str());
}

ExperimentRecord history_record(const std::string& label, TrainHistory history) {
    ExperimentRecord record;
    record.label = label;
    record.history = std::move(history);
    if (!record.history.empty() && record.history.back().dev_f1)
        record.final_f1 = *record.history.back().dev_f1;
    return record;
}

void write_curves(const CommonOpts& o, const std::vector<ExperimentRecord>& records,
                  const std::string& stem = "history") {
    std::ostringstream csv;
    emit_curves_csv(records, csv);
    write_text_file(out_path(o, stem + ".csv"), csv.str());
    std::ostringstream svg;
    emit_curves_svg(records, svg);
    write_text_file(out_path(o, stem + ".svg"), svg.str());
}

Vocab vocab_for_checkpoint(const EmbeddingMatrix& emb, const Checkpoint& ckpt) {
    Vocab vocab = build_vocab(emb.tokens);
    require(vocab.fingerprint() == ckpt.meta.vocab_fingerprint,
            "embeddings file does not match the checkpoint vocabulary fingerprint");
    return vocab;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : split_on(s, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    CommonOpts common;
    std::vector<std::string> corpora;
};

int run_ingest(const CLI::App* cmd, const IngestOpts& o) {
    ensure_out_dir(o.common.out);
    std::map<std::string, std::string> stats_kv;
    for (size_t i = 0; i < o.corpora.size(); ++i) {
        ParseStats stats;
        TaggedCorpus corpus = read_corpus(o.corpora[i], &stats);
        const std::string prefix = "corpus." + std::to_string(i);
        stats_kv[prefix + ".path"] = o.corpora[i];
        stats_kv[prefix + ".documents"] = std::to_string(corpus.documents.size());
        stats_kv[prefix + ".sentences"] = std::to_string(corpus.sentence_count());
        stats_kv[prefix + ".tokens"] = std::to_string(corpus.token_count());
        stats_kv[prefix + ".repaired_continuations"] = std::to_string(stats.repaired_continuations);
        // Span counts per category (the dataset tables' "label count").
        std::map<std::string, int64_t> span_counts;
        for (const auto* s : corpus.all_sentences())
            for (const auto& span : extract_spans(s->tags, corpus.scheme))
                ++span_counts[span.category];
        for (const auto& [cat, count] : span_counts)
            stats_kv[prefix + ".spans." + cat] = std::to_string(count);

        std::ostringstream serialized;
        write_conll(corpus, serialized);
        write_text_file(out_path(o.common, "ingest_" + std::to_string(i) + ".conll"),
                        serialized.str());
    }
    std::ostringstream kv;
    write_kv_file(kv, stats_kv);
    write_text_file(out_path(o.common, "ingest_stats.txt"), kv.str());
    std::cout << kv.str();
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// embed-train
// ---------------------------------------------------------------------------

struct EmbedTrainOpts {
    CommonOpts common;
    std::string input;
    std::string format = "conll";
    int dim = 50;
    int window = 5;
    int min_count = 5;
    double lr = 0.05;
    int negatives = 5;
    int epochs = 5;
    std::string subword;  // "min,max" enables subword n-grams
    bool keep_case = false;
};

int run_embed_train(const CLI::App* cmd, const EmbedTrainOpts& o) {
    ensure_out_dir(o.common.out);
    std::vector<std::vector<std::string>> sentences;
    if (o.format == "conll") {
        TaggedCorpus corpus = read_corpus(o.input);
        for (const auto* s : corpus.all_sentences()) sentences.push_back(s->tokens);
    } else {
        std::ifstream in(o.input, std::ios::binary);
        require(in.good(), "cannot open input file: " + o.input);
        std::string line;
        while (std::getline(in, line)) {
            auto tokens = split_whitespace(line);
            if (!tokens.empty()) sentences.push_back(std::move(tokens));
        }
    }
    if (!o.keep_case) {
        for (auto& s : sentences)
            for (auto& t : s) t = lowercase_ascii(t);
    }

    SkipgramConfig cfg;
    cfg.d = o.dim;
    cfg.window = o.window;
    cfg.min_count = o.min_count;
    cfg.lr0 = o.lr;
    cfg.negatives = o.negatives;
    cfg.epochs = o.epochs;
    cfg.seed = o.common.seed;
    if (!o.subword.empty()) {
        const auto parts = split_csv_list(o.subword);
        int64_t lo = 0, hi = 0;
        require(parts.size() == 2 && parse_int64(parts[0], lo) && parse_int64(parts[1], hi),
                "--subword expects 'min,max' (e.g. 3,6)");
        cfg.subword_range = {{int(lo), int(hi)}};
    }

    EmbeddingMatrix emb = train_skipgram(sentences, cfg);
    std::ostringstream text;
    save_embeddings(emb, text);
    write_text_file(out_path(o.common, "embeddings.txt"), text.str());
    std::cout << "trained " << emb.size() << " vectors of dimension " << emb.d << "\n";
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// oov-report
// ---------------------------------------------------------------------------

struct OovOpts {
    CommonOpts common;
    std::string corpus;
    std::string embeddings;
};

int run_oov_report(const CLI::App* cmd, const OovOpts& o) {
    ensure_out_dir(o.common.out);
    TaggedCorpus corpus = read_corpus(o.corpus);
    EmbeddingMatrix emb = read_embeddings(o.embeddings);
    OovReport report = oov_report(corpus, emb);
    const std::string kv = oov_report_kv(report);
    write_text_file(out_path(o.common, "oov_report.txt"), kv);
    std::cout << kv;
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainOpts {
    CommonOpts common;
    std::vector<std::string> corpora;
    std::string dev;
    std::string embeddings;
    TrainFlags train;
};

int run_pretrain(const CLI::App* cmd, const PretrainOpts& o) {
    ensure_out_dir(o.common.out);
    EmbeddingMatrix emb = read_embeddings(o.embeddings);
    Vocab vocab = build_vocab(emb.tokens);
    const EncodeOptions enc = to_encode_options(o.train);

    std::vector<ExperimentRecord> records;
    Checkpoint ckpt;
    if (o.corpora.size() == 1) {
        TaggedCorpus corpus = read_corpus(o.corpora[0]);
        TaggedCorpus dev;
        if (!o.dev.empty()) dev = read_corpus(o.dev);
        NetworkConfig net = to_network_config(o.train, emb.d, corpus.scheme.n_tags());
        ModelParams model = init_model<float>(net, emb, mix_seed(o.common.seed, 0x111));
        TrainConfig tc = to_train_config(o.train, mix_seed(o.common.seed, 0x222));
        TrainHistory history =
            fit(model, corpus, o.dev.empty() ? nullptr : &dev, vocab, tc, enc);
        records.push_back(history_record("pretrain", std::move(history)));
        ckpt = make_checkpoint(model, corpus.scheme, vocab);
    } else {
        require(o.dev.empty(), "--dev is only supported for single-corpus pretraining");
        std::vector<TaggedCorpus> stages;
        for (const auto& path : o.corpora) stages.push_back(read_corpus(path));
        NetworkConfig net = to_network_config(o.train, emb.d, 1);
        std::vector<TrainHistory> histories;
        ckpt = sequential_pretrain(stages, vocab, emb, net, to_train_config(o.train, 0), enc,
                                   o.common.seed, &histories);
        for (size_t i = 0; i < histories.size(); ++i)
            records.push_back(history_record("stage" + std::to_string(i), histories[i]));
    }

    save_checkpoint(ckpt, out_path(o.common, "pretrain.ckpt"));
    write_curves(o.common, records);
    std::cout << "checkpoint written to " << out_path(o.common, "pretrain.ckpt") << "\n";
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------

struct FinetuneOpts {
    CommonOpts common;
    std::string corpus;
    std::string dev;
    std::string test;
    std::string embeddings;
    std::string checkpoint;
    std::string init_strategy = "all";
    int64_t few_shot = 0;  // 0 = use the whole corpus
    TrainFlags train;
};

int run_finetune(const CLI::App* cmd, const FinetuneOpts& o) {
    ensure_out_dir(o.common.out);
    EmbeddingMatrix emb = read_embeddings(o.embeddings);
    Vocab vocab = build_vocab(emb.tokens);
    const EncodeOptions enc = to_encode_options(o.train);

    TaggedCorpus corpus = read_corpus(o.corpus);
    if (o.few_shot > 0) corpus = sample_few_shot(corpus, o.few_shot, mix_seed(o.common.seed, 0xF5));
    TaggedCorpus dev;
    if (!o.dev.empty()) dev = read_corpus(o.dev);

    NetworkConfig net = to_network_config(o.train, emb.d, corpus.scheme.n_tags());
    ModelParams model = init_model<float>(net, emb, mix_seed(o.common.seed, 0x111));
    if (!o.checkpoint.empty()) {
        Checkpoint pre = load_checkpoint(o.checkpoint);
        apply_init_strategy(model, pre, parse_init_strategy(o.init_strategy), corpus.scheme,
                            vocab.fingerprint());
    }

    TrainConfig tc = to_train_config(o.train, mix_seed(o.common.seed, 0x222));
    OptimizerState opt;
    TrainHistory history = fit(model, corpus, o.dev.empty() ? nullptr : &dev, vocab, tc, enc,
                               tc.optimizer == OptimizerKind::nadam ? &opt : nullptr);
    save_checkpoint(model, corpus.scheme, vocab, out_path(o.common, "model.ckpt"),
                    tc.optimizer == OptimizerKind::nadam ? &opt : nullptr);
    write_curves(o.common, {history_record("finetune", history)});

    if (!o.test.empty()) {
        TaggedCorpus test = read_corpus(o.test);
        require(test.scheme == corpus.scheme,
                "test corpus label scheme does not match the training corpus");
        const auto predictions = predict_corpus(model, test, vocab, enc);
        EvalReport report = score(test, predictions);
        write_text_file(out_path(o.common, "eval_report.txt"), report_to_kv(report));
        write_text_file(out_path(o.common, "eval_report.csv"), report_to_csv(report));
        std::cout << "test micro F1 = " << format_double(report.micro.f1()) << "\n";
    }
    std::cout << "model written to " << out_path(o.common, "model.ckpt") << "\n";
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridOpts {
    CommonOpts common;
    std::string corpus;
    std::string dev;
    std::string embeddings;
    std::string init_strategy = "all";
    int64_t few_shot = 0;
    int jobs = 1;
    int repeats = 1;
    std::string axis_optimizer;
    std::string axis_checkpoint;
    std::string axis_sgd_lr;
    std::string axis_batch_norm;
    std::string axis_trainable_embeddings;
    std::string axis_decay;
    TrainFlags train;
};

GridAxes parse_axes(const GridOpts& o) {
    GridAxes axes;
    for (const auto& v : split_csv_list(o.axis_optimizer)) {
        require(v == "nadam" || v == "sgd", "unknown optimizer in grid axis: " + v);
        axes.optimizers.push_back(v == "sgd" ? OptimizerKind::sgd : OptimizerKind::nadam);
    }
    axes.checkpoints = split_csv_list(o.axis_checkpoint);
    for (const auto& v : split_csv_list(o.axis_sgd_lr)) {
        double lr = 0;
        require(parse_double(v, lr), "bad learning rate in grid axis: " + v);
        axes.sgd_lrs.push_back(lr);
    }
    for (const auto& v : split_csv_list(o.axis_batch_norm)) {
        require(v == "on" || v == "off", "batch-norm axis values must be on/off");
        axes.batch_norm.push_back(v == "on" ? 1 : 0);
    }
    for (const auto& v : split_csv_list(o.axis_trainable_embeddings)) {
        require(v == "on" || v == "off", "trainable-embeddings axis values must be on/off");
        axes.trainable_embeddings.push_back(v == "on" ? 1 : 0);
    }
    for (const auto& v : split_csv_list(o.axis_decay)) {
        require(v == "constant" || v == "scheduled", "decay axis values must be constant/scheduled");
        axes.decays.push_back(v == "scheduled" ? DecayMode::scheduled : DecayMode::constant);
    }
    return axes;
}

int run_grid_cmd(const CLI::App* cmd, const GridOpts& o) {
    ensure_out_dir(o.common.out);
    EmbeddingMatrix emb = read_embeddings(o.embeddings);
    Vocab vocab = build_vocab(emb.tokens);

    TaggedCorpus corpus = read_corpus(o.corpus);
    if (o.few_shot > 0) corpus = sample_few_shot(corpus, o.few_shot, mix_seed(o.common.seed, 0xF5));
    TaggedCorpus dev = read_corpus(o.dev);

    GridAxes axes = parse_axes(o);
    GridContext ctx;
    ctx.net = to_network_config(o.train, emb.d, corpus.scheme.n_tags());
    ctx.train = to_train_config(o.train, 0);
    ctx.enc = to_encode_options(o.train);
    ctx.strategy = parse_init_strategy(o.init_strategy);
    ctx.train_corpus = &corpus;
    ctx.dev_corpus = &dev;
    ctx.vocab = &vocab;
    ctx.emb = &emb;
    ctx.master_seed = o.common.seed;
    ctx.jobs = o.jobs;
    ctx.repeats = o.repeats;

    const auto records = run_grid(axes, ctx);
    std::ostringstream grid_csv;
    emit_grid_csv(axes, records, grid_csv);
    write_text_file(out_path(o.common, "grid.csv"), grid_csv.str());
    write_curves(o.common, records, "curves");
    std::cout << grid_csv.str();
    for (const auto& r : records) {
        if (r.failed) std::cerr << "trial failed: " << r.label << ": " << r.error << "\n";
    }
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string corpus;
    std::string checkpoint;
    std::string embeddings;
    std::string normalize = "off";
};

int run_eval(const CLI::App* cmd, const EvalOpts& o) {
    ensure_out_dir(o.common.out);
    Checkpoint ckpt = load_checkpoint(o.checkpoint);
    EmbeddingMatrix emb = read_embeddings(o.embeddings);
    Vocab vocab = vocab_for_checkpoint(emb, ckpt);
    ModelParams model = checkpoint_to_model(ckpt);

    TaggedCorpus gold = read_corpus(o.corpus);
    require(gold.scheme == ckpt.meta.scheme,
            "corpus label scheme does not match the checkpoint");
    EncodeOptions enc;
    enc.normalize = to_normalize_mode(o.normalize);
    enc.max_chars = model.config.max_chars;

    const auto predictions = predict_corpus(model, gold, vocab, enc);
    EvalReport report = score(gold, predictions);
    write_text_file(out_path(o.common, "eval_report.txt"), report_to_kv(report));
    write_text_file(out_path(o.common, "eval_report.csv"), report_to_csv(report));
    std::cout << report_to_kv(report);
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOpts {
    CommonOpts common;
    std::string kind;
    std::vector<std::string> inputs;
};

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open report input: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_on(line, ','));  // emitted CSVs quote only when needed
    }
    return rows;
}

int run_report(const CLI::App* cmd, const ReportOpts& o) {
    ensure_out_dir(o.common.out);
    require(!o.inputs.empty(), "report needs at least one --input");

    if (o.kind == "waterfall") {
        std::vector<std::pair<std::string, double>> points;
        for (const auto& path : o.inputs) {
            for (const auto& row : read_csv_rows(path)) {
                if (row.size() < 2) continue;
                double f1 = 0;
                if (!parse_double(row[1], f1)) continue;  // header or junk
                points.emplace_back(row[0], f1);
            }
        }
        std::ostringstream csv;
        emit_waterfall_csv(points, csv);
        write_text_file(out_path(o.common, "waterfall.csv"), csv.str());
        std::cout << csv.str();
    } else if (o.kind == "curves") {
        // Input rows: label,epoch,loss,dev_f1 (as written by pretrain/finetune).
        std::vector<ExperimentRecord> records;
        for (const auto& path : o.inputs) {
            std::map<std::string, TrainHistory> by_label;
            std::vector<std::string> order;
            for (const auto& row : read_csv_rows(path)) {
                if (row.size() < 3) continue;
                double loss = 0;
                if (!parse_double(row[2], loss)) continue;  // header
                if (!by_label.count(row[0])) order.push_back(row[0]);
                EpochStats stats;
                stats.mean_loss = loss;
                double f1 = 0;
                if (row.size() >= 4 && parse_double(row[3], f1)) stats.dev_f1 = f1;
                by_label[row[0]].push_back(stats);
            }
            for (const auto& label : order)
                records.push_back(history_record(label, by_label[label]));
        }
        write_curves(o.common, records, "curves");
        std::cout << "curves written for " << records.size() << " runs\n";
    } else if (o.kind == "grid") {
        // Re-rank a previously emitted grid CSV by F1, descending.
        require(o.inputs.size() == 1, "grid report takes exactly one --input");
        auto rows = read_csv_rows(o.inputs[0]);
        require(rows.size() >= 2, "grid input has no data rows");
        const auto header = rows.front();
        std::vector<std::pair<double, std::vector<std::string>>> data;
        for (size_t i = 1; i < rows.size(); ++i) {
            double f1 = -1;
            if (!rows[i].empty()) parse_double(rows[i].back(), f1);
            data.emplace_back(f1, rows[i]);
        }
        std::stable_sort(data.begin(), data.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::ostringstream csv;
        for (size_t c = 0; c < header.size(); ++c) csv << (c ? "," : "") << header[c];
        csv << "\n";
        for (const auto& [f1, row] : data) {
            for (size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << row[c];
            csv << "\n";
        }
        write_text_file(out_path(o.common, "grid.csv"), csv.str());
        std::cout << csv.str();
    } else {
        fail("unknown report kind '" + o.kind + "' (expected curves, grid or waterfall)");
    }
    write_resolved_config(cmd, o.common);
    return 0;
}

// ---------------------------------------------------------------------------
// synth: deterministic synthetic corpora for demos and pipeline checks
// ---------------------------------------------------------------------------

struct SynthOpts {
    CommonOpts common;
    int categories = 2;
    int sentences = 200;
    int context_vocab = 40;
    int entity_vocab = 10;
    double density = 0.35;
    double overlap = 0.5;
    bool related_pair = false;
    int embedding_dim = 50;
};

int run_synth(const CLI::App* cmd, const SynthOpts& o) {
    ensure_out_dir(o.common.out);
    SyntheticSpec spec;
    spec.categories = o.categories;
    spec.sentences = o.sentences;
    spec.context_vocab = o.context_vocab;
    spec.entity_vocab = o.entity_vocab;
    spec.entity_density = o.density;
    spec.seed = o.common.seed;
    spec.vocab_seed = mix_seed(o.common.seed, 0xD0);

    SyntheticDomain domain = make_domain(spec);
    TaggedCorpus corpus = generate_from_domain(domain, spec, spec.seed);
    std::ostringstream text;
    write_conll(corpus, text);
    write_text_file(out_path(o.common, "synthetic_a.conll"), text.str());

    std::vector<std::string> tokens = domain_token_inventory(domain);
    if (o.related_pair) {
        SyntheticDomain related = make_related_domain(domain, spec, o.overlap, "B",
                                                      mix_seed(o.common.seed, 0xD1));
        TaggedCorpus corpus_b = generate_from_domain(related, spec, mix_seed(o.common.seed, 0xD2));
        std::ostringstream text_b;
        write_conll(corpus_b, text_b);
        write_text_file(out_path(o.common, "synthetic_b.conll"), text_b.str());
        for (const auto& t : domain_token_inventory(related)) {
            if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
        }
    }

    // Deterministic per-token embedding table covering the inventory.
    EmbeddingMatrix emb;
    emb.d = o.embedding_dim;
    for (const auto& tok : tokens) {
        emb.tokens.push_back(tok);
        Rng rng(mix_seed(0xE4B, fnv1a64(tok)));
        for (int j = 0; j < emb.d; ++j) emb.vectors.push_back(rng.uniform(-0.4, 0.4));
    }
    emb.rebuild_index();
    std::ostringstream emb_text;
    save_embeddings(emb, emb_text);
    write_text_file(out_path(o.common, "embeddings.txt"), emb_text.str());

    std::cout << "wrote " << corpus.sentence_count() << " sentences"
              << (o.related_pair ? " per domain" : "") << " and " << emb.size() << " vectors\n";
    write_resolved_config(cmd, o.common);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot NER: BLSTM-CNN training, transfer and evaluation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(true);
    app.set_config("--config", "", "Key-value config file (defaults < config < flags)");

    IngestOpts ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate and convert corpora");
    ingest_cmd->add_option("--corpus", ingest.corpora, "Corpus file(s)")->required();
    add_common(ingest_cmd, ingest.common);

    EmbedTrainOpts embed;
    auto* embed_cmd = app.add_subcommand("embed-train", "Train skip-gram word embeddings");
    embed_cmd->add_option("--input", embed.input, "Training text")->required();
    embed_cmd->add_option("--format", embed.format, "Input format")
        ->check(CLI::IsMember({"conll", "text"}));
    embed_cmd->add_option("--dim", embed.dim, "Vector dimension");
    embed_cmd->add_option("--window", embed.window, "Context window radius");
    embed_cmd->add_option("--min-count", embed.min_count, "Minimum word count");
    embed_cmd->add_option("--lr", embed.lr, "Initial learning rate");
    embed_cmd->add_option("--negatives", embed.negatives, "Negative samples per pair");
    embed_cmd->add_option("--epochs", embed.epochs, "Training passes");
    embed_cmd->add_option("--subword", embed.subword, "Character n-gram range 'min,max'");
    embed_cmd->add_flag("--keep-case", embed.keep_case, "Skip lowercasing the input");
    add_common(embed_cmd, embed.common);

    OovOpts oov;
    auto* oov_cmd = app.add_subcommand("oov-report", "Out-of-vocabulary accounting");
    oov_cmd->add_option("--corpus", oov.corpus, "Corpus file")->required();
    oov_cmd->add_option("--embeddings", oov.embeddings, "Embeddings file")->required();
    add_common(oov_cmd, oov.common);

    PretrainOpts pretrain;
    auto* pretrain_cmd =
        app.add_subcommand("pretrain", "Pre-train on one corpus, or sequentially on several");
    pretrain_cmd->add_option("--corpus", pretrain.corpora, "Corpus file(s), trained in order")
        ->required();
    pretrain_cmd->add_option("--dev", pretrain.dev, "Dev corpus (single-corpus mode)");
    pretrain_cmd->add_option("--embeddings", pretrain.embeddings, "Embeddings file")->required();
    add_train_flags(pretrain_cmd, pretrain.train);
    add_common(pretrain_cmd, pretrain.common);

    FinetuneOpts finetune;
    auto* finetune_cmd = app.add_subcommand("finetune", "Train the target task, few-shot");
    finetune_cmd->add_option("--corpus", finetune.corpus, "Target training corpus")->required();
    finetune_cmd->add_option("--dev", finetune.dev, "Dev corpus monitored per epoch");
    finetune_cmd->add_option("--test", finetune.test, "Held-out corpus scored after training");
    finetune_cmd->add_option("--embeddings", finetune.embeddings, "Embeddings file")->required();
    finetune_cmd->add_option("--checkpoint", finetune.checkpoint, "Pre-trained checkpoint");
    finetune_cmd->add_option("--init-strategy", finetune.init_strategy,
                             "Layers to initialize from the checkpoint")
        ->check(CLI::IsMember({"all", "blstm-only", "all-but-blstm"}));
    finetune_cmd->add_option("--few-shot", finetune.few_shot,
                             "Sample this many documents for training");
    add_train_flags(finetune_cmd, finetune.train);
    add_common(finetune_cmd, finetune.common);

    GridOpts grid;
    auto* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid search");
    grid_cmd->add_option("--corpus", grid.corpus, "Training corpus")->required();
    grid_cmd->add_option("--dev", grid.dev, "Dev corpus ranking the cells")->required();
    grid_cmd->add_option("--embeddings", grid.embeddings, "Embeddings file")->required();
    grid_cmd->add_option("--few-shot", grid.few_shot, "Sample this many documents for training");
    grid_cmd->add_option("--init-strategy", grid.init_strategy,
                         "Strategy applied to checkpoint cells")
        ->check(CLI::IsMember({"all", "blstm-only", "all-but-blstm"}));
    grid_cmd->add_option("--grid-optimizer", grid.axis_optimizer, "Axis: nadam,sgd");
    grid_cmd->add_option("--grid-checkpoint", grid.axis_checkpoint,
                         "Axis: checkpoint paths or 'none'");
    grid_cmd->add_option("--grid-sgd-lr", grid.axis_sgd_lr, "Axis: 0.04,0.08");
    grid_cmd->add_option("--grid-batch-norm", grid.axis_batch_norm, "Axis: on,off");
    grid_cmd->add_option("--grid-trainable-embeddings", grid.axis_trainable_embeddings,
                         "Axis: on,off");
    grid_cmd->add_option("--grid-decay", grid.axis_decay, "Axis: constant,scheduled");
    grid_cmd->add_option("--jobs", grid.jobs, "Concurrent trials");
    grid_cmd->add_option("--repeats", grid.repeats, "Fits per cell, F1 averaged");
    add_train_flags(grid_cmd, grid.train);
    add_common(grid_cmd, grid.common);

    EvalOpts eval;
    auto* eval_cmd = app.add_subcommand("eval", "Entity-level scoring of a checkpoint");
    eval_cmd->add_option("--corpus", eval.corpus, "Gold corpus")->required();
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
    eval_cmd->add_option("--embeddings", eval.embeddings, "Embeddings file")->required();
    eval_cmd->add_option("--normalize", eval.normalize, "Token normalization")
        ->check(CLI::IsMember({"off", "lookup", "global"}));
    add_common(eval_cmd, eval.common);

    ReportOpts report;
    auto* report_cmd = app.add_subcommand("report", "Emit curves/grid/waterfall reports");
    report_cmd->add_option("--kind", report.kind, "Report kind")
        ->required()
        ->check(CLI::IsMember({"curves", "grid", "waterfall"}));
    report_cmd->add_option("--input", report.inputs, "Input CSV file(s)")->required();
    add_common(report_cmd, report.common);

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus and embeddings");
    synth_cmd->add_option("--categories", synth.categories, "Entity categories");
    synth_cmd->add_option("--sentences", synth.sentences, "Sentences per corpus");
    synth_cmd->add_option("--context-vocab", synth.context_vocab, "Context token count");
    synth_cmd->add_option("--entity-vocab", synth.entity_vocab, "Entity tokens per category");
    synth_cmd->add_option("--density", synth.density, "Entity density");
    synth_cmd->add_flag("--related-pair", synth.related_pair,
                        "Also generate a related domain B");
    synth_cmd->add_option("--overlap", synth.overlap, "Entity vocabulary overlap for domain B");
    synth_cmd->add_option("--embedding-dim", synth.embedding_dim, "Embedding dimension");
    add_common(synth_cmd, synth.common);

    try {
        app.parse(argc, argv);
        if (ingest_cmd->parsed()) return run_ingest(ingest_cmd, ingest);
        if (embed_cmd->parsed()) return run_embed_train(embed_cmd, embed);
        if (oov_cmd->parsed()) return run_oov_report(oov_cmd, oov);
        if (pretrain_cmd->parsed()) return run_pretrain(pretrain_cmd, pretrain);
        if (finetune_cmd->parsed()) return run_finetune(finetune_cmd, finetune);
        if (grid_cmd->parsed()) return run_grid_cmd(grid_cmd, grid);
        if (eval_cmd->parsed()) return run_eval(eval_cmd, eval);
        if (report_cmd->parsed()) return run_report(report_cmd, report);
        if (synth_cmd->parsed()) return run_synth(synth_cmd, synth);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
