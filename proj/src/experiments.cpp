#include "drnn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drnn/flatten.hpp"

namespace fs = std::filesystem;

namespace drnn {

// ---------------------------------------------------------------------------
// Architectures
// ---------------------------------------------------------------------------

ArchId parse_arch(const std::string& name) {
    if (name == "rnn") return ArchId::rnn;
    if (name == "lstm") return ArchId::lstm;
    if (name == "d_rnn") return ArchId::d_rnn;
    if (name == "d_lstm") return ArchId::d_lstm;
    if (name == "bi_rnn") return ArchId::bi_rnn;
    if (name == "bi_lstm") return ArchId::bi_lstm;
    if (name == "stacked_rnn") return ArchId::stacked_rnn;
    if (name == "stacked_lstm") return ArchId::stacked_lstm;
    throw ConfigError("unknown architecture: '" + name + "'");
}

const char* arch_name(ArchId a) {
    switch (a) {
        case ArchId::rnn: return "rnn";
        case ArchId::lstm: return "lstm";
        case ArchId::d_rnn: return "d_rnn";
        case ArchId::d_lstm: return "d_lstm";
        case ArchId::bi_rnn: return "bi_rnn";
        case ArchId::bi_lstm: return "bi_lstm";
        case ArchId::stacked_rnn: return "stacked_rnn";
        case ArchId::stacked_lstm: return "stacked_lstm";
    }
    return "?";
}

namespace {

bool arch_is_lstm(ArchId a) {
    return a == ArchId::lstm || a == ArchId::d_lstm || a == ArchId::bi_lstm ||
           a == ArchId::stacked_lstm;
}

bool arch_is_delayed(ArchId a) { return a == ArchId::d_rnn || a == ArchId::d_lstm; }
bool arch_is_bidirectional(ArchId a) { return a == ArchId::bi_rnn || a == ArchId::bi_lstm; }
bool arch_is_stacked(ArchId a) { return a == ArchId::stacked_rnn || a == ArchId::stacked_lstm; }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        std::size_t b = 0, e = s.size();
        while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
        while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
        s = s.substr(b, e - b);
    }
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
}

std::vector<std::size_t> parse_count_list(const std::string& text, const std::string& key) {
    std::vector<std::size_t> out;
    for (const auto& tok : split_list(text)) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': not a count: '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::string join_counts(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    if (is.bad()) throw IoError("failed reading: " + path);
    return ss.str();
}

std::size_t default_seq_len(TaskKind task) {
    switch (task) {
        case TaskKind::reversal: return 20;
        case TaskKind::sine: return 50;
        case TaskKind::masked_lm: return 180;
    }
    return 20;
}

constexpr std::uint64_t kModelSeedSalt = 0x9E3779B97F4A7C15ULL;

} // namespace

// ---------------------------------------------------------------------------
// Config resolution
// ---------------------------------------------------------------------------

ExperimentConfig experiment_config_from(const KvConfig& kv, Command command) {
    ExperimentConfig cfg;
    cfg.command = command;

    const bool needs_seed = command == Command::train || command == Command::gen_data;
    cfg.seed = needs_seed ? kv.require_uint("seed") : kv.get_uint("seed", 0);
    cfg.out_dir = kv.get_string("out_dir", "runs");
    cfg.run_id = kv.get_string("run_id", "");

    if (command == Command::gen_data || command == Command::train) {
        cfg.task = parse_task(kv.get_string("dataset.task", "reversal"));
        cfg.dataset_path = kv.get_string("dataset.path", "");
        cfg.train_sequences =
            static_cast<std::size_t>(kv.get_uint("dataset.train_sequences", 10000));
        cfg.val_sequences = static_cast<std::size_t>(kv.get_uint("dataset.val_sequences", 2000));
        cfg.test_sequences = static_cast<std::size_t>(kv.get_uint("dataset.test_sequences", 2000));
        cfg.seq_len =
            static_cast<std::size_t>(kv.get_uint("dataset.seq_len", default_seq_len(cfg.task)));
        cfg.vocab = static_cast<std::size_t>(kv.get_uint("dataset.vocab", 4));
        cfg.gamma = kv.get_real("dataset.gamma", 2.0);
        cfg.acausal = static_cast<std::size_t>(kv.get_uint("dataset.acausal", 8));
        cfg.causal = static_cast<std::size_t>(kv.get_uint("dataset.causal", 12));
        cfg.corpus_path = kv.get_string("dataset.corpus_path", "");
        cfg.corpus_chars = static_cast<std::size_t>(kv.get_uint("dataset.corpus_chars", 1000000));
        cfg.mask_prob = kv.get_real("dataset.mask_prob", 0.2);
        if (cfg.seq_len == 0) throw ConfigError("dataset.seq_len must be positive");
        if (cfg.mask_prob < 0.0 || cfg.mask_prob > 1.0)
            throw ConfigError("dataset.mask_prob must lie in [0,1]");
    }

    if (command == Command::train) {
        cfg.arch = parse_arch(kv.get_string("model.arch", "lstm"));
        cfg.layers = static_cast<std::size_t>(kv.get_uint("model.layers", 1));
        cfg.hidden = static_cast<std::size_t>(kv.get_uint("model.hidden", 64));
        cfg.delay = static_cast<int>(kv.get_int("model.delay", 0));
        cfg.activation = kv.get_string("model.activation", "tanh");
        if (cfg.hidden == 0) throw ConfigError("model.hidden must be positive");
        if (arch_is_delayed(cfg.arch)) {
            if (cfg.delay < 1)
                throw ConfigError(std::string("architecture ") + arch_name(cfg.arch) +
                                  " requires model.delay >= 1");
        } else if (cfg.delay != 0) {
            throw ConfigError(std::string("architecture ") + arch_name(cfg.arch) +
                              " does not take a delay");
        }
        if (arch_is_stacked(cfg.arch)) {
            if (cfg.layers < 2)
                throw ConfigError(std::string("architecture ") + arch_name(cfg.arch) +
                                  " requires model.layers >= 2");
        } else if (cfg.layers != 1) {
            throw ConfigError(std::string("architecture ") + arch_name(cfg.arch) +
                              " requires model.layers = 1");
        }
        Activation::parse(cfg.activation); // validates the name

        cfg.train.learning_rate = kv.get_real("train.learning_rate", 1e-3);
        cfg.train.beta1 = kv.get_real("train.beta1", 0.9);
        cfg.train.beta2 = kv.get_real("train.beta2", 0.999);
        cfg.train.epsilon = kv.get_real("train.epsilon", 1e-8);
        cfg.train.clip_norm = kv.get_real("train.clip_norm", 1.0);
        cfg.train.batch_size = static_cast<std::size_t>(kv.get_uint("train.batch_size", 100));
        cfg.train.max_epochs = static_cast<std::size_t>(kv.get_uint("train.max_epochs", 1000));
        cfg.train.early_stop_patience =
            static_cast<std::size_t>(kv.get_uint("train.patience", 10));
        cfg.train.early_stop_delta = kv.get_real("train.delta", 1e-3);
        if (kv.has("train.stop_below_val_loss"))
            cfg.train.stop_below_val_loss = kv.get_real("train.stop_below_val_loss", 0.0);
        cfg.train.seed = cfg.seed;
        validate_train_config(cfg.train);
    }

    if (command == Command::flatten_verify) {
        cfg.grid_cell = kv.get_string("grid.cell", "rnn");
        if (cfg.grid_cell != "rnn" && cfg.grid_cell != "lstm")
            throw ConfigError("grid.cell must be rnn or lstm");
        if (kv.has("grid.layers"))
            cfg.grid_layers = parse_count_list(kv.get_string("grid.layers", ""), "grid.layers");
        else if (cfg.grid_cell == "lstm")
            cfg.grid_layers = {1, 2, 3};
        if (kv.has("grid.hidden"))
            cfg.grid_hidden = parse_count_list(kv.get_string("grid.hidden", ""), "grid.hidden");
        if (kv.has("grid.steps"))
            cfg.grid_steps = parse_count_list(kv.get_string("grid.steps", ""), "grid.steps");
        if (kv.has("grid.activations"))
            cfg.grid_activations = split_list(kv.get_string("grid.activations", ""));
        for (const auto& a : cfg.grid_activations) Activation::parse(a);
        cfg.grid_seeds = static_cast<std::size_t>(kv.get_uint("grid.seeds", 10));
        cfg.grid_tolerance = kv.get_real("grid.tolerance", 1e-10);
        cfg.grid_init_route = kv.get_string("grid.init_route", "forward");
        if (cfg.grid_init_route != "forward" && cfg.grid_init_route != "lift")
            throw ConfigError("grid.init_route must be forward or lift");
        if (cfg.grid_init_route == "lift" && cfg.grid_cell == "lstm")
            throw ConfigError("grid.init_route = lift applies to rnn cells only");
        cfg.report_name = kv.get_string("grid.report", "flatten_report.csv");
        if (cfg.grid_seeds == 0) throw ConfigError("grid.seeds must be positive");
        for (std::size_t k : cfg.grid_layers)
            if (k == 0) throw ConfigError("grid.layers entries must be positive");
        for (std::size_t n : cfg.grid_hidden)
            if (n == 0) throw ConfigError("grid.hidden entries must be positive");
    }

    if (command == Command::benchmark) {
        cfg.bench_archs = split_list(kv.require_string("benchmark.archs"));
        if (cfg.bench_archs.size() < 1) throw ConfigError("benchmark.archs: empty list");
        cfg.bench_input_width =
            static_cast<std::size_t>(kv.get_uint("benchmark.input_width", 28));
        cfg.bench_output_width =
            static_cast<std::size_t>(kv.get_uint("benchmark.output_width", 27));
        cfg.bench_seq_len = static_cast<std::size_t>(kv.get_uint("benchmark.seq_len", 180));
        cfg.bench_batch_size = static_cast<std::size_t>(kv.get_uint("benchmark.batch_size", 16));
        cfg.bench_warmup_batches =
            static_cast<std::size_t>(kv.get_uint("benchmark.warmup_batches", 5));
        cfg.bench_timed_batches =
            static_cast<std::size_t>(kv.get_uint("benchmark.timed_batches", 50));
        cfg.bench_match_pct = kv.get_real("benchmark.match_pct", 2.0);
        cfg.bench_report_name = kv.get_string("benchmark.report", "benchmark.csv");
        if (cfg.bench_timed_batches == 0)
            throw ConfigError("benchmark.timed_batches must be positive");
        for (const auto& s : cfg.bench_archs) parse_bench_spec(s);
    }

    const auto unused = kv.unused_keys();
    if (!unused.empty()) {
        std::string msg = "unknown configuration key(s):";
        for (const auto& k : unused) msg += " '" + k + "'";
        throw ConfigError(msg);
    }

    if (cfg.run_id.empty()) {
        if (command == Command::train || command == Command::gen_data)
            cfg.run_id = std::string(task_name(cfg.task)) + "-" + arch_name(cfg.arch) + "-s" +
                         std::to_string(cfg.seed);
        else if (command == Command::flatten_verify)
            cfg.run_id = "flatten-" + cfg.grid_cell + "-" + cfg.grid_init_route;
        else
            cfg.run_id = "benchmark";
    }
    return cfg;
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    const char* command = cfg.command == Command::gen_data        ? "gen-data"
                          : cfg.command == Command::train         ? "train"
                          : cfg.command == Command::flatten_verify ? "flatten-verify"
                                                                   : "benchmark";
    os << "# resolved configuration (" << command << ")\n";
    os << "seed = " << cfg.seed << '\n';
    os << "out_dir = " << cfg.out_dir << '\n';
    os << "run_id = " << cfg.run_id << '\n';
    if (cfg.command == Command::gen_data || cfg.command == Command::train) {
        os << "\n[dataset]\n";
        os << "task = " << task_name(cfg.task) << '\n';
        os << "path = " << cfg.dataset_path << '\n';
        os << "train_sequences = " << cfg.train_sequences << '\n';
        os << "val_sequences = " << cfg.val_sequences << '\n';
        os << "test_sequences = " << cfg.test_sequences << '\n';
        os << "seq_len = " << cfg.seq_len << '\n';
        if (cfg.task == TaskKind::reversal) os << "vocab = " << cfg.vocab << '\n';
        if (cfg.task == TaskKind::sine) {
            os << "gamma = " << format_double(cfg.gamma) << '\n';
            os << "acausal = " << cfg.acausal << '\n';
            os << "causal = " << cfg.causal << '\n';
        }
        if (cfg.task == TaskKind::masked_lm) {
            os << "corpus_path = " << cfg.corpus_path << '\n';
            os << "corpus_chars = " << cfg.corpus_chars << '\n';
            os << "mask_prob = " << format_double(cfg.mask_prob) << '\n';
        }
    }
    if (cfg.command == Command::train) {
        os << "\n[model]\n";
        os << "arch = " << arch_name(cfg.arch) << '\n';
        os << "layers = " << cfg.layers << '\n';
        os << "hidden = " << cfg.hidden << '\n';
        os << "delay = " << cfg.delay << '\n';
        os << "activation = " << cfg.activation << '\n';
        os << "\n[train]\n";
        os << "learning_rate = " << format_double(cfg.train.learning_rate) << '\n';
        os << "beta1 = " << format_double(cfg.train.beta1) << '\n';
        os << "beta2 = " << format_double(cfg.train.beta2) << '\n';
        os << "epsilon = " << format_double(cfg.train.epsilon) << '\n';
        os << "clip_norm = " << format_double(cfg.train.clip_norm) << '\n';
        os << "batch_size = " << cfg.train.batch_size << '\n';
        os << "max_epochs = " << cfg.train.max_epochs << '\n';
        os << "patience = " << cfg.train.early_stop_patience << '\n';
        os << "delta = " << format_double(cfg.train.early_stop_delta) << '\n';
        if (cfg.train.stop_below_val_loss)
            os << "stop_below_val_loss = " << format_double(*cfg.train.stop_below_val_loss)
               << '\n';
    }
    if (cfg.command == Command::flatten_verify) {
        os << "\n[grid]\n";
        os << "cell = " << cfg.grid_cell << '\n';
        os << "layers = " << join_counts(cfg.grid_layers) << '\n';
        os << "hidden = " << join_counts(cfg.grid_hidden) << '\n';
        os << "steps = " << join_counts(cfg.grid_steps) << '\n';
        os << "activations = " << join_strings(cfg.grid_activations) << '\n';
        os << "seeds = " << cfg.grid_seeds << '\n';
        os << "tolerance = " << format_double(cfg.grid_tolerance) << '\n';
        os << "init_route = " << cfg.grid_init_route << '\n';
        os << "report = " << cfg.report_name << '\n';
    }
    if (cfg.command == Command::benchmark) {
        os << "\n[benchmark]\n";
        os << "archs = " << join_strings(cfg.bench_archs) << '\n';
        os << "input_width = " << cfg.bench_input_width << '\n';
        os << "output_width = " << cfg.bench_output_width << '\n';
        os << "seq_len = " << cfg.bench_seq_len << '\n';
        os << "batch_size = " << cfg.bench_batch_size << '\n';
        os << "warmup_batches = " << cfg.bench_warmup_batches << '\n';
        os << "timed_batches = " << cfg.bench_timed_batches << '\n';
        os << "match_pct = " << format_double(cfg.bench_match_pct) << '\n';
        os << "report = " << cfg.bench_report_name << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

TaskDataset generate_dataset(const ExperimentConfig& cfg) {
    Rng rng(cfg.seed);
    switch (cfg.task) {
        case TaskKind::reversal:
            return gen_reversal(rng, cfg.train_sequences, cfg.val_sequences, cfg.test_sequences,
                                cfg.seq_len, cfg.vocab);
        case TaskKind::sine: {
            SineTaskSpec spec;
            spec.gamma = cfg.gamma;
            spec.acausal = cfg.acausal;
            spec.causal = cfg.causal;
            spec.seq_len = cfg.seq_len;
            return gen_sine(rng, spec, cfg.train_sequences, cfg.val_sequences,
                            cfg.test_sequences);
        }
        case TaskKind::masked_lm: {
            const std::string corpus = cfg.corpus_path.empty()
                                           ? synthesize_corpus(rng, cfg.corpus_chars)
                                           : normalize_corpus(read_text_file(cfg.corpus_path));
            return gen_masked_corpus(rng, corpus, cfg.mask_prob, cfg.seq_len,
                                     {0.9, 0.05, 0.05});
        }
    }
    throw ConfigError("unhandled task");
}

TaskDataset resolve_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_path.empty() && fs::exists(cfg.dataset_path)) {
        TaskDataset data = load_dataset_file(cfg.dataset_path);
        if (data.task != cfg.task)
            throw ConfigError(std::string("dataset file holds task '") + task_name(data.task) +
                              "' but the configuration says '" + task_name(cfg.task) + "'");
        return data;
    }
    return generate_dataset(cfg);
}

Model build_model(const ExperimentConfig& cfg, const TaskDataset& data) {
    const std::size_t q = data.input_width;
    const std::size_t m = data.class_labels ? data.num_classes : data.label_width;
    if (q == 0 || m == 0) throw ConfigError("dataset does not define model widths");
    const Activation f = Activation::parse(cfg.activation);
    const Activation g{data.class_labels ? Act::softmax : Act::identity};
    Rng rng(cfg.seed ^ kModelSeedSalt);

    Model model;
    model.delay = cfg.delay;
    const bool lstm = arch_is_lstm(cfg.arch);
    if (arch_is_bidirectional(cfg.arch)) {
        model.kind = ModelKind::bidirectional;
        for (int dir = 0; dir < 2; ++dir) {
            if (lstm)
                model.layers.emplace_back(LstmParams::init(cfg.hidden, q, rng));
            else
                model.layers.emplace_back(RnnParams::init(cfg.hidden, q, f, rng));
        }
        model.output = OutputParams::init(m, 2 * cfg.hidden, g, rng);
    } else {
        model.kind = ModelKind::recurrent;
        for (std::size_t i = 0; i < cfg.layers; ++i) {
            const std::size_t in_w = i == 0 ? q : cfg.hidden;
            if (lstm)
                model.layers.emplace_back(LstmParams::init(cfg.hidden, in_w, rng));
            else
                model.layers.emplace_back(RnnParams::init(cfg.hidden, in_w, f, rng));
        }
        model.output = OutputParams::init(m, cfg.hidden, g, rng);
    }
    validate_model(model);
    return model;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const ExperimentConfig& cfg) {
    if (cfg.dataset_path.empty())
        throw ConfigError("gen-data needs dataset.path (where to write the dataset)");
    const TaskDataset data = generate_dataset(cfg);
    const fs::path path(cfg.dataset_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_dataset_file(data, cfg.dataset_path);
    std::cout << "wrote " << cfg.dataset_path << ": task " << task_name(data.task) << ", "
              << data.train.size() << "/" << data.val.size() << "/" << data.test.size()
              << " train/val/test sequences of length " << data.seq_len << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

void write_metrics_row(std::ostream& os, const std::string& run_id, std::size_t epoch,
                       const std::string& split, double loss, const std::string& metric_name,
                       double metric_value, double wall_ms, std::uint64_t seed) {
    os << run_id << ',' << epoch << ',' << split << ',' << format_double(loss) << ','
       << metric_name << ',' << format_double(metric_value) << ',' << format_double(wall_ms)
       << ',' << seed << '\n';
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << content;
    os.flush();
    if (!os) throw IoError("failed writing: " + path);
}

} // namespace

int cmd_train(const ExperimentConfig& cfg) {
    const TaskDataset data = resolve_dataset(cfg);
    const Model init = build_model(cfg, data);
    const LossKind loss = loss_for_task(data.task);

    const fs::path run_dir = fs::path(cfg.out_dir) / cfg.run_id;
    fs::create_directories(run_dir);
    write_file((run_dir / "config.resolved").string(), resolved_config_text(cfg));

    std::ofstream metrics((run_dir / "metrics.csv").string(), std::ios::binary);
    if (!metrics) throw IoError("cannot open for writing: " + (run_dir / "metrics.csv").string());
    metrics << "run_id,epoch,split,loss,metric_name,metric_value,wall_ms,seed\n";

    std::cout << "training " << cfg.run_id << ": " << param_count(init) << " parameters, "
              << data.train.size() << " train sequences\n";
    const auto on_row = [&](const EpochRow& row) {
        write_metrics_row(metrics, cfg.run_id, row.epoch, split_name(row.split), row.loss,
                          row.metric_name, row.metric_value, row.wall_ms, cfg.seed);
        metrics.flush();
        if (row.split == Split::val)
            std::cout << "epoch " << row.epoch << ": val loss " << format_double(row.loss) << ", "
                      << row.metric_name << " " << format_double(row.metric_value) << "\n";
    };
    const TrainResult result = train_loop(init, data, cfg.train, loss, on_row);

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const EvalResult test = evaluate_split(result.best_model, data, Split::test, loss);
    const double test_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    write_metrics_row(metrics, cfg.run_id, result.epochs_run, "test", test.loss, test.metric_name,
                      test.metric_value, test_ms, cfg.seed);
    metrics.flush();
    if (!metrics) throw IoError("failed writing metrics.csv");

    save_checkpoint_file(result.best_model, (run_dir / "checkpoint_best.txt").string());
    save_checkpoint_file(result.final_model, (run_dir / "checkpoint_final.txt").string());

    std::cout << "done after " << result.epochs_run << " epoch(s); best val loss "
              << format_double(result.best_val_loss) << " at epoch " << result.best_epoch
              << "; test " << test.metric_name << " " << format_double(test.metric_value) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// flatten-verify
// ---------------------------------------------------------------------------

namespace {

StackedParams make_random_stack(bool lstm_cells, std::size_t k, std::size_t n, std::size_t q,
                                std::size_t m, Activation f, Rng& rng) {
    StackedParams p;
    p.layers.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t in_w = i == 0 ? q : n;
        if (lstm_cells)
            p.layers.emplace_back(LstmParams::init(n, in_w, rng));
        else
            p.layers.emplace_back(RnnParams::init(n, in_w, f, rng));
    }
    p.output = OutputParams::init(m, n, Activation{Act::identity}, rng);
    return p;
}

std::string sanitize_csv(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

} // namespace

int cmd_flatten_verify(const ExperimentConfig& cfg) {
    const bool lstm_cells = cfg.grid_cell == "lstm";
    const std::vector<std::string> acts =
        lstm_cells ? std::vector<std::string>{"-"} : cfg.grid_activations;

    fs::create_directories(cfg.out_dir);
    const std::string report_path = (fs::path(cfg.out_dir) / cfg.report_name).string();
    std::ofstream report(report_path, std::ios::binary);
    if (!report) throw IoError("cannot open for writing: " + report_path);
    report << "cell,k,n,T,activation,seed,init_route,max_output_diff,max_hidden_diff,"
              "max_cell_diff,pass,error\n";

    std::size_t cells = 0, failures = 0;
    for (std::size_t k : cfg.grid_layers) {
        for (std::size_t n : cfg.grid_hidden) {
            for (std::size_t T : cfg.grid_steps) {
                for (std::size_t ai = 0; ai < acts.size(); ++ai) {
                    for (std::size_t si = 0; si < cfg.grid_seeds; ++si) {
                        const std::uint64_t cell_seed =
                            cfg.seed + (((k * 131 + n) * 131 + T) * 131 + ai) * 1009 + si;
                        Rng rng(cell_seed);
                        const std::size_t q = n + 1, m = 3;
                        const Activation f =
                            lstm_cells ? Activation{Act::tanh} : Activation::parse(acts[ai]);
                        const StackedParams stacked =
                            make_random_stack(lstm_cells, k, n, q, m, f, rng);
                        const FlattenedNet flat =
                            lstm_cells ? flatten_stacked_lstm(stacked) : flatten_stacked_rnn(stacked);
                        std::vector<Tensor1> xs(T);
                        for (auto& x : xs) {
                            x.resize(q);
                            uniform_fill(rng, -1.0, 1.0, x);
                        }
                        Tensor1 h0_hat(k * n), c0_hat;
                        uniform_fill(rng, -1.0, 1.0, h0_hat);
                        if (lstm_cells) {
                            c0_hat.resize(k * n);
                            uniform_fill(rng, -1.0, 1.0, c0_hat);
                        }
                        ++cells;
                        std::string error;
                        EquivalenceReport rep;
                        bool ran = false;
                        try {
                            const DerivedInit di = forward_derived_init(flat, xs, h0_hat, c0_hat);
                            if (cfg.grid_init_route == "forward") {
                                rep = verify_equivalence(stacked, di.stacked, flat, di.h0_hat,
                                                         di.c0_hat, xs, cfg.grid_tolerance);
                            } else {
                                // Targets produced by the forward route are
                                // reachable, so lifting them is well-posed
                                // whenever the activation allows it.
                                const Tensor1 lifted = lift_initial_state(flat, di.stacked);
                                rep = verify_equivalence(stacked, di.stacked, flat, lifted,
                                                         Tensor1(), xs, cfg.grid_tolerance);
                            }
                            ran = true;
                        } catch (const LiftError& e) {
                            error = sanitize_csv(std::string("lift: block ") +
                                                 std::to_string(e.block) + " step " +
                                                 std::to_string(e.step) + ": " + e.what());
                        } catch (const std::exception& e) {
                            error = sanitize_csv(e.what());
                        }
                        const bool pass = ran && rep.pass;
                        if (!pass) ++failures;
                        report << cfg.grid_cell << ',' << k << ',' << n << ',' << T << ','
                               << acts[ai] << ',' << cell_seed << ',' << cfg.grid_init_route
                               << ',';
                        if (ran)
                            report << format_double(rep.max_output_diff) << ','
                                   << format_double(rep.max_hidden_diff) << ','
                                   << format_double(rep.max_cell_diff);
                        else
                            report << ",,";
                        report << ',' << (pass ? 1 : 0) << ',' << error << '\n';
                        if (!pass && ran)
                            std::cout << "FAIL " << cfg.grid_cell << " k=" << k << " n=" << n
                                      << " T=" << T << " act=" << acts[ai]
                                      << " seed=" << cell_seed << " max diffs "
                                      << format_double(rep.max_output_diff) << "/"
                                      << format_double(rep.max_hidden_diff) << "/"
                                      << format_double(rep.max_cell_diff) << "\n";
                        else if (!pass)
                            std::cout << "FAIL " << cfg.grid_cell << " k=" << k << " n=" << n
                                      << " T=" << T << " act=" << acts[ai]
                                      << " seed=" << cell_seed << " error: " << error << "\n";
                    }
                }
            }
        }
    }
    report.flush();
    if (!report) throw IoError("failed writing " + report_path);
    std::cout << cells << " grid cell(s), " << failures << " failure(s); report: " << report_path
              << "\n";
    return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

BenchSpec parse_bench_spec(const std::string& text) {
    BenchSpec spec;
    spec.text = text;
    std::vector<std::string> parts;
    {
        std::string cur;
        for (char c : text) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        parts.push_back(cur);
    }
    if (parts.empty() || parts[0].empty())
        throw ConfigError("benchmark spec '" + text + "': missing architecture name");
    spec.arch = parse_arch(parts[0]);
    bool have_hidden = false;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos)
            throw ConfigError("benchmark spec '" + text + "': expected key=value, got '" +
                              parts[i] + "'");
        const std::string key = parts[i].substr(0, eq);
        const std::string value = parts[i].substr(eq + 1);
        std::size_t parsed = 0;
        try {
            parsed = static_cast<std::size_t>(std::stoull(value));
        } catch (const std::exception&) {
            throw ConfigError("benchmark spec '" + text + "': bad value '" + value + "'");
        }
        if (key == "n")
            (spec.hidden = parsed), (have_hidden = true);
        else if (key == "d")
            spec.delay = static_cast<int>(parsed);
        else if (key == "k")
            spec.layers = parsed;
        else
            throw ConfigError("benchmark spec '" + text + "': unknown key '" + key + "'");
    }
    if (!have_hidden)
        throw ConfigError("benchmark spec '" + text + "': n=<hidden width> is required");
    if (spec.layers == 0) throw ConfigError("benchmark spec '" + text + "': k must be positive");
    if (arch_is_delayed(spec.arch)) {
        if (spec.delay < 1)
            throw ConfigError("benchmark spec '" + text + "': delayed architectures need d >= 1");
        if (spec.layers != 1)
            throw ConfigError("benchmark spec '" + text + "': delayed architectures take k = 1");
    } else if (spec.delay != 0) {
        throw ConfigError("benchmark spec '" + text + "': only delayed architectures take d");
    }
    if (arch_is_stacked(spec.arch) && spec.layers < 2)
        throw ConfigError("benchmark spec '" + text + "': stacked architectures need k >= 2");
    return spec;
}

namespace {

struct BuiltBench {
    bool bidirectional = false;
    StackedParams stacked;                                  // recurrent path
    std::vector<std::pair<CellParams, CellParams>> levels;  // bidirectional path
    OutputParams bi_output;                                 // bidirectional readout
    int delay = 0;
    std::size_t params = 0;
};

BuiltBench build_bench(const BenchSpec& spec, std::size_t q, std::size_t m, Rng& rng) {
    BuiltBench b;
    const bool lstm = arch_is_lstm(spec.arch);
    const Activation f{Act::tanh};
    auto make_cell = [&](std::size_t in_w) -> CellParams {
        if (lstm) return LstmParams::init(spec.hidden, in_w, rng);
        return RnnParams::init(spec.hidden, in_w, f, rng);
    };
    if (arch_is_bidirectional(spec.arch)) {
        b.bidirectional = true;
        for (std::size_t l = 0; l < spec.layers; ++l) {
            const std::size_t in_w = l == 0 ? q : 2 * spec.hidden;
            b.levels.emplace_back(make_cell(in_w), make_cell(in_w));
        }
        b.bi_output = OutputParams::init(m, 2 * spec.hidden, Activation{Act::identity}, rng);
        for (const auto& [fc, bc] : b.levels) b.params += param_count(fc) + param_count(bc);
        b.params += param_count(b.bi_output);
    } else {
        b.delay = spec.delay;
        for (std::size_t l = 0; l < spec.layers; ++l) {
            const std::size_t in_w = l == 0 ? q : spec.hidden;
            b.stacked.layers.push_back(make_cell(in_w));
        }
        b.stacked.output = OutputParams::init(m, spec.hidden, Activation{Act::identity}, rng);
        b.params = param_count(b.stacked);
    }
    return b;
}

double run_bench_batch(const BuiltBench& b, const std::vector<std::vector<Tensor1>>& batch,
                       double& sink) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    for (const auto& xs : batch) {
        std::vector<Tensor1> ys;
        if (b.bidirectional) {
            ys = stacked_bidirectional_forward(b.levels, b.bi_output, xs);
        } else if (b.stacked.layers.size() == 1) {
            ys = delayed_forward(b.stacked.layers[0], b.stacked.output, DelaySpec{b.delay},
                                 zero_state(b.stacked.layers[0]), xs);
        } else {
            ys = stacked_forward(b.stacked, zero_state(b.stacked.layers), xs).outputs;
        }
        sink += ys.back()[0];
    }
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
}

} // namespace

std::vector<BenchRow> run_benchmark(const ExperimentConfig& cfg) {
    std::vector<BenchSpec> specs;
    specs.reserve(cfg.bench_archs.size());
    for (const auto& s : cfg.bench_archs) specs.push_back(parse_bench_spec(s));

    Rng rng(cfg.seed + 17);
    std::vector<std::vector<Tensor1>> batch(cfg.bench_batch_size);
    for (auto& xs : batch) {
        xs.resize(cfg.bench_seq_len);
        for (auto& x : xs) {
            x.resize(cfg.bench_input_width);
            uniform_fill(rng, -1.0, 1.0, x);
        }
    }

    std::vector<BuiltBench> built;
    built.reserve(specs.size());
    for (const auto& spec : specs) {
        Rng arch_rng(cfg.seed + 101);
        built.push_back(build_bench(spec, cfg.bench_input_width, cfg.bench_output_width,
                                    arch_rng));
    }
    for (std::size_t i = 1; i < built.size(); ++i) {
        const double ref = static_cast<double>(built[0].params);
        const double dev = 100.0 * std::abs(static_cast<double>(built[i].params) - ref) / ref;
        if (dev > cfg.bench_match_pct)
            throw ConfigError("benchmark: '" + specs[i].text + "' has " +
                              std::to_string(built[i].params) + " parameters vs " +
                              std::to_string(built[0].params) + " for '" + specs[0].text +
                              "' (" + format_double(dev) + "% > " +
                              format_double(cfg.bench_match_pct) + "%)");
    }

    std::vector<BenchRow> rows;
    rows.reserve(specs.size());
    double sink = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (std::size_t w = 0; w < cfg.bench_warmup_batches; ++w)
            run_bench_batch(built[i], batch, sink);
        std::vector<double> ms(cfg.bench_timed_batches);
        for (std::size_t t = 0; t < cfg.bench_timed_batches; ++t)
            ms[t] = run_bench_batch(built[i], batch, sink);
        std::vector<double> sorted = ms;
        std::sort(sorted.begin(), sorted.end());
        BenchRow row;
        row.spec = specs[i].text;
        row.params = built[i].params;
        row.min_ms = sorted.front();
        row.max_ms = sorted.back();
        row.median_ms = sorted.size() % 2 == 1
                            ? sorted[sorted.size() / 2]
                            : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
        double mean = 0.0;
        for (double v : ms) mean += v;
        mean /= static_cast<double>(ms.size());
        row.mean_ms = mean;
        double var = 0.0;
        for (double v : ms) var += (v - mean) * (v - mean);
        row.std_ms = std::sqrt(var / static_cast<double>(ms.size()));
        rows.push_back(row);
    }
    volatile double keep = sink; // the forward passes must not be optimized away
    (void)keep;
    return rows;
}

int cmd_benchmark(const ExperimentConfig& cfg) {
    const std::vector<BenchRow> rows = run_benchmark(cfg);
    fs::create_directories(cfg.out_dir);
    const std::string report_path = (fs::path(cfg.out_dir) / cfg.bench_report_name).string();
    std::ofstream report(report_path, std::ios::binary);
    if (!report) throw IoError("cannot open for writing: " + report_path);
    report << "spec,params,median_ms,mean_ms,std_ms,min_ms,max_ms\n";
    for (const auto& r : rows) {
        report << r.spec << ',' << r.params << ',' << format_double(r.median_ms) << ','
               << format_double(r.mean_ms) << ',' << format_double(r.std_ms) << ','
               << format_double(r.min_ms) << ',' << format_double(r.max_ms) << '\n';
        std::cout << r.spec << ": " << r.params << " params, median "
                  << format_double(r.median_ms) << " ms/batch (std "
                  << format_double(r.std_ms) << ")\n";
    }
    report.flush();
    if (!report) throw IoError("failed writing " + report_path);
    return 0;
}

} // namespace drnn
