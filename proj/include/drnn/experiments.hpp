#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drnn/config.hpp"
#include "drnn/serialize.hpp"
#include "drnn/tasks.hpp"
#include "drnn/train.hpp"

namespace drnn {

// ---------------------------------------------------------------------------
// Architectures
// ---------------------------------------------------------------------------

enum class ArchId { rnn, lstm, d_rnn, d_lstm, bi_rnn, bi_lstm, stacked_rnn, stacked_lstm };

ArchId parse_arch(const std::string& name);
const char* arch_name(ArchId a);

// ---------------------------------------------------------------------------
// Experiment configuration (one struct covering all commands; each command
// consumes the sections relevant to it and rejects leftovers)
// ---------------------------------------------------------------------------

enum class Command { gen_data, train, flatten_verify, benchmark };

struct ExperimentConfig {
    Command command = Command::train;
    std::uint64_t seed = 0;
    std::string out_dir = "runs";
    std::string run_id; // defaults to <task>-<arch>-s<seed>

    // [dataset]
    TaskKind task = TaskKind::reversal;
    std::string dataset_path;      // optional: load (train) / write (gen-data)
    std::size_t train_sequences = 10000;
    std::size_t val_sequences = 2000;
    std::size_t test_sequences = 2000;
    std::size_t seq_len = 20;      // reversal / sine / masked_lm window length
    std::size_t vocab = 4;         // reversal
    double gamma = 2.0;            // sine
    std::size_t acausal = 8;       // sine: future taps
    std::size_t causal = 12;       // sine: past taps (incl. current)
    std::string corpus_path;       // masked_lm: empty → built-in synthetic text
    std::size_t corpus_chars = 1000000; // masked_lm synthetic corpus size
    double mask_prob = 0.2;        // masked_lm

    // [model]
    ArchId arch = ArchId::lstm;
    std::size_t layers = 1;
    std::size_t hidden = 64;
    int delay = 0;
    std::string activation = "tanh"; // recurrent activation of RNN cells

    // [train]
    TrainConfig train;

    // [grid] (flatten-verify)
    std::string grid_cell = "rnn"; // rnn | lstm
    std::vector<std::size_t> grid_layers = {1, 2, 3, 4};
    std::vector<std::size_t> grid_hidden = {1, 2, 4, 8};
    std::vector<std::size_t> grid_steps = {1, 5, 20};
    std::vector<std::string> grid_activations = {"tanh", "relu", "identity"};
    std::size_t grid_seeds = 10;
    double grid_tolerance = 1e-10;
    std::string grid_init_route = "forward"; // forward | lift
    std::string report_name = "flatten_report.csv";

    // [benchmark]
    std::vector<std::string> bench_archs; // e.g. "d_lstm:n=64:d=1", "bi_lstm:k=2:n=24"
    std::size_t bench_input_width = 28;
    std::size_t bench_output_width = 27;
    std::size_t bench_seq_len = 180;
    std::size_t bench_batch_size = 16;
    std::size_t bench_warmup_batches = 5;
    std::size_t bench_timed_batches = 50;
    double bench_match_pct = 2.0; // max parameter-count deviation, percent
    std::string bench_report_name = "benchmark.csv";
};

// Reads the keys a command understands, validates them, and rejects any key
// the command does not know (typo safety). Throws ConfigError.
ExperimentConfig experiment_config_from(const KvConfig& kv, Command command);

// The fully-resolved configuration as config-file text (defaults
// materialized), written next to every run's outputs for provenance.
std::string resolved_config_text(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

// Generates the configured dataset from cfg.seed (pure function of config).
TaskDataset generate_dataset(const ExperimentConfig& cfg);

// Loads cfg.dataset_path when it names an existing file, else generates.
TaskDataset resolve_dataset(const ExperimentConfig& cfg);

// Builds the configured model with dataset-derived widths; parameters drawn
// from a seed derived from cfg.seed.
Model build_model(const ExperimentConfig& cfg, const TaskDataset& data);

// ---------------------------------------------------------------------------
// Commands (return process exit codes: 0 ok, 1 verification failure;
// configuration and I/O problems throw ConfigError / IoError)
// ---------------------------------------------------------------------------

int cmd_gen_data(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_flatten_verify(const ExperimentConfig& cfg);
int cmd_benchmark(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Benchmark internals (exposed so the acceptance suite can call them)
// ---------------------------------------------------------------------------

struct BenchSpec {
    std::string text;   // the original spec string
    ArchId arch = ArchId::lstm;
    std::size_t layers = 1;
    std::size_t hidden = 1;
    int delay = 0;
};

BenchSpec parse_bench_spec(const std::string& text);

struct BenchRow {
    std::string spec;
    std::size_t params = 0;
    double median_ms = 0.0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
};

std::vector<BenchRow> run_benchmark(const ExperimentConfig& cfg);

} // namespace drnn
