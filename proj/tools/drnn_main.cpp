// drnn: a laboratory for delayed, stacked, and bidirectional recurrent
// networks. Subcommands generate datasets, train models, verify that stacked
// networks and their flattened delayed counterparts compute the same function,
// and benchmark forward-pass latency at matched parameter counts.

#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "drnn/experiments.hpp"

namespace {

// One subcommand plus the mapping from its flags to configuration keys.
// Precedence: built-in defaults < --config file < explicit flags.
struct SubSpec {
    CLI::App* app = nullptr;
    drnn::Command command = drnn::Command::train;
    std::string config_path;
    std::vector<std::tuple<CLI::Option*, std::string, std::shared_ptr<std::string>>> overrides;
};

void add_kv_option(SubSpec& spec, const std::string& flag, const std::string& key,
                   const std::string& description) {
    auto storage = std::make_shared<std::string>();
    CLI::Option* opt = spec.app->add_option(flag, *storage, description);
    spec.overrides.emplace_back(opt, key, storage);
}

void add_common_options(SubSpec& spec, bool seed_mandatory) {
    spec.app->add_option("--config", spec.config_path,
                         "configuration file (key = value lines with [sections])");
    add_kv_option(spec, "--seed", "seed",
                  seed_mandatory ? "random seed (required; fixes all draws)"
                                 : "random seed for the generated grid/batches");
    add_kv_option(spec, "--out-dir", "out_dir", "output directory (default: runs)");
    add_kv_option(spec, "--run-id", "run_id", "run identifier (default derived from config)");
}

void add_dataset_options(SubSpec& spec) {
    add_kv_option(spec, "--task", "dataset.task", "task: reversal | sine | masked_lm");
    add_kv_option(spec, "--dataset", "dataset.path", "dataset file to write (gen-data) or load");
    add_kv_option(spec, "--train-sequences", "dataset.train_sequences",
                  "training sequences to generate (default 10000)");
    add_kv_option(spec, "--val-sequences", "dataset.val_sequences",
                  "validation sequences (default 2000)");
    add_kv_option(spec, "--test-sequences", "dataset.test_sequences",
                  "test sequences (default 2000)");
    add_kv_option(spec, "--seq-len", "dataset.seq_len",
                  "sequence length (defaults: reversal 20, sine 50, masked_lm 180)");
    add_kv_option(spec, "--vocab", "dataset.vocab", "reversal: symbol count (default 4)");
    add_kv_option(spec, "--gamma", "dataset.gamma", "sine: frequency factor (default 2.0)");
    add_kv_option(spec, "--acausal", "dataset.acausal", "sine: future taps (default 8)");
    add_kv_option(spec, "--causal", "dataset.causal",
                  "sine: past taps including current (default 12)");
    add_kv_option(spec, "--corpus", "dataset.corpus_path",
                  "masked_lm: text file (default: built-in synthetic corpus)");
    add_kv_option(spec, "--corpus-chars", "dataset.corpus_chars",
                  "masked_lm: synthetic corpus size (default 1000000)");
    add_kv_option(spec, "--mask-prob", "dataset.mask_prob",
                  "masked_lm: masking probability (default 0.2)");
}

void add_model_train_options(SubSpec& spec) {
    add_kv_option(spec, "--arch", "model.arch",
                  "rnn | lstm | d_rnn | d_lstm | bi_rnn | bi_lstm | stacked_rnn | stacked_lstm");
    add_kv_option(spec, "--layers", "model.layers", "stacked architectures: layer count");
    add_kv_option(spec, "--hidden", "model.hidden", "hidden width per cell (default 64)");
    add_kv_option(spec, "--delay", "model.delay", "delayed architectures: delay in steps");
    add_kv_option(spec, "--activation", "model.activation",
                  "RNN cell activation: tanh | relu | identity | sigmoid (default tanh)");
    add_kv_option(spec, "--learning-rate", "train.learning_rate", "Adam step size (default 1e-3)");
    add_kv_option(spec, "--beta1", "train.beta1", "Adam beta1 (default 0.9)");
    add_kv_option(spec, "--beta2", "train.beta2", "Adam beta2 (default 0.999)");
    add_kv_option(spec, "--epsilon", "train.epsilon", "Adam epsilon (default 1e-8)");
    add_kv_option(spec, "--clip-norm", "train.clip_norm",
                  "global gradient-norm clip (default 1.0)");
    add_kv_option(spec, "--batch-size", "train.batch_size", "sequences per batch (default 100)");
    add_kv_option(spec, "--max-epochs", "train.max_epochs", "epoch cap (default 1000)");
    add_kv_option(spec, "--patience", "train.patience",
                  "early-stop patience in epochs (default 10)");
    add_kv_option(spec, "--delta", "train.delta",
                  "minimum val-loss improvement that resets patience (default 1e-3)");
    add_kv_option(spec, "--stop-below-val-loss", "train.stop_below_val_loss",
                  "stop as soon as val loss drops below this value");
}

void add_grid_options(SubSpec& spec) {
    add_kv_option(spec, "--cell", "grid.cell", "cell type of the grid: rnn | lstm");
    add_kv_option(spec, "--grid-layers", "grid.layers",
                  "comma list of stack depths k (default 1,2,3,4; lstm default 1,2,3)");
    add_kv_option(spec, "--grid-hidden", "grid.hidden",
                  "comma list of hidden widths n (default 1,2,4,8)");
    add_kv_option(spec, "--grid-steps", "grid.steps",
                  "comma list of sequence lengths T (default 1,5,20)");
    add_kv_option(spec, "--grid-activations", "grid.activations",
                  "comma list of activations (default tanh,relu,identity; rnn only)");
    add_kv_option(spec, "--grid-seeds", "grid.seeds", "seeds per grid cell (default 10)");
    add_kv_option(spec, "--tolerance", "grid.tolerance",
                  "max allowed trajectory discrepancy (default 1e-10)");
    add_kv_option(spec, "--init-route", "grid.init_route",
                  "initial-state construction: forward | lift (lift: rnn only)");
    add_kv_option(spec, "--report", "grid.report",
                  "report file name inside out_dir (default flatten_report.csv)");
}

void add_benchmark_options(SubSpec& spec) {
    add_kv_option(spec, "--archs", "benchmark.archs",
                  "comma list of specs, e.g. d_lstm:n=64:d=8,bi_lstm:k=2:n=24");
    add_kv_option(spec, "--input-width", "benchmark.input_width", "input width (default 28)");
    add_kv_option(spec, "--output-width", "benchmark.output_width", "output width (default 27)");
    add_kv_option(spec, "--seq-len", "benchmark.seq_len", "sequence length (default 180)");
    add_kv_option(spec, "--batch-size", "benchmark.batch_size",
                  "sequences per timed batch (default 16)");
    add_kv_option(spec, "--warmup-batches", "benchmark.warmup_batches",
                  "untimed warmup batches (default 5)");
    add_kv_option(spec, "--timed-batches", "benchmark.timed_batches",
                  "timed batches per architecture (default 50)");
    add_kv_option(spec, "--match-pct", "benchmark.match_pct",
                  "max parameter-count deviation between architectures, percent (default 2)");
    add_kv_option(spec, "--report", "benchmark.report",
                  "report file name inside out_dir (default benchmark.csv)");
}

int run_command(const SubSpec& spec) {
    drnn::KvConfig kv;
    if (!spec.config_path.empty()) kv = drnn::KvConfig::load_file(spec.config_path);
    for (const auto& [opt, key, storage] : spec.overrides)
        if (opt->count() > 0) kv.set(key, *storage);
    const drnn::ExperimentConfig cfg = drnn::experiment_config_from(kv, spec.command);
    switch (spec.command) {
        case drnn::Command::gen_data: return drnn::cmd_gen_data(cfg);
        case drnn::Command::train: return drnn::cmd_train(cfg);
        case drnn::Command::flatten_verify: return drnn::cmd_flatten_verify(cfg);
        case drnn::Command::benchmark: return drnn::cmd_benchmark(cfg);
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"recurrent-network laboratory: delayed, stacked, and bidirectional cells"};
    app.require_subcommand(1);

    std::vector<SubSpec> subs(4);

    subs[0].command = drnn::Command::gen_data;
    subs[0].app = app.add_subcommand("gen-data", "generate a dataset file from a seed");
    add_common_options(subs[0], true);
    add_dataset_options(subs[0]);

    subs[1].command = drnn::Command::train;
    subs[1].app = app.add_subcommand("train", "train a model; writes metrics and checkpoints");
    add_common_options(subs[1], true);
    add_dataset_options(subs[1]);
    add_model_train_options(subs[1]);

    subs[2].command = drnn::Command::flatten_verify;
    subs[2].app = app.add_subcommand(
        "flatten-verify",
        "flatten random stacked networks and verify trajectory equivalence over a grid");
    add_common_options(subs[2], false);
    add_grid_options(subs[2]);

    subs[3].command = drnn::Command::benchmark;
    subs[3].app = app.add_subcommand(
        "benchmark", "measure forward latency of architectures at matched parameter counts");
    add_common_options(subs[3], false);
    add_benchmark_options(subs[3]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e); // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (const auto& spec : subs) {
        if (!app.got_subcommand(spec.app)) continue;
        try {
            return run_command(spec);
        } catch (const drnn::ConfigError& e) {
            std::cerr << "configuration error: " << e.what() << "\n";
            return 2;
        } catch (const drnn::IoError& e) {
            std::cerr << "i/o error: " << e.what() << "\n";
            return 3;
        } catch (const std::filesystem::filesystem_error& e) {
            std::cerr << "i/o error: " << e.what() << "\n";
            return 3;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
