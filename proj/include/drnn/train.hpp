#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "drnn/cells.hpp"
#include "drnn/nets.hpp"
#include "drnn/rng.hpp"
#include "drnn/tasks.hpp"
#include "drnn/tensor.hpp"

namespace drnn {

// ---------------------------------------------------------------------------
// Losses and metrics
// ---------------------------------------------------------------------------

enum class LossKind { softmax_cross_entropy, mean_squared_error };

// −ln probs[label]; probs must sum to 1 within 1e-8. (Training uses the fused
// logits path below for stability; this form scores externally-given
// probability vectors.)
double cross_entropy(const Tensor1& probs, int label);

// Mean of squared entry differences.
double mse(const Tensor1& pred, const Tensor1& target);

// (total_ce_nats / n_positions) / ln 2.
double bits_per_character(double total_ce_nats, std::size_t n_positions);

// ---------------------------------------------------------------------------
// Trainable model
// ---------------------------------------------------------------------------

enum class ModelKind {
    recurrent,     // stack of layers, optional output delay (zero-padded inputs)
    bidirectional, // exactly two cells {forward, backward}, concatenated readout
};

struct Model {
    ModelKind kind = ModelKind::recurrent;
    std::vector<CellParams> layers;
    OutputParams output;
    int delay = 0; // recurrent only; prediction for x_t is read at step t+delay

    std::size_t input_width() const;
    std::size_t output_width() const;
};

// Shape/kind consistency: layer chaining, readout width (concat width for
// bidirectional), delay ≥ 0 and only on recurrent models. Throws
// std::invalid_argument with a description of the first violation.
void validate_model(const Model& m);

using CellGrads = std::variant<RnnGrads, LstmGrads>;

struct ModelGrads {
    std::vector<CellGrads> layers;
    OutputGrads output;

    static ModelGrads zeros_like(const Model& m);
    void zero();
};

void collect_views(Model& m, std::vector<TensorView>& out);
void collect_views(ModelGrads& g, std::vector<TensorView>& out);
std::size_t param_count(const Model& m);

// ---------------------------------------------------------------------------
// BPTT
// ---------------------------------------------------------------------------

// Per-sequence targets: `classes` for softmax_cross_entropy (one label per
// output step), `reals` for mean_squared_error (row-major [T x output_width]).
struct SeqTargets {
    std::vector<int> classes;
    std::vector<double> reals;
};

// Running totals used to derive split-level metrics (micro-averaged).
struct MetricAccum {
    double ce_nats = 0.0;
    std::size_t positions = 0;
    std::size_t correct = 0;
    double squared_error = 0.0;
    std::size_t error_entries = 0;
};

// Unrolls the model over xs (plus delay padding for recurrent models), scores
// the masked output positions, and accumulates `scale` times the gradient of
// the per-sequence loss (mean over masked positions) into `grads`. Returns
// that per-sequence loss. mask must have at least one true position.
double bptt(const Model& m, const std::vector<Tensor1>& xs, const SeqTargets& targets,
            const std::vector<std::uint8_t>& mask, LossKind loss, double scale, ModelGrads& grads,
            MetricAccum* metrics = nullptr);

// Forward only: the aligned per-step outputs with the readout activation
// applied (length = xs.size()).
std::vector<Tensor1> model_forward(const Model& m, const std::vector<Tensor1>& xs);

// Scales every gradient by clip_norm/‖g‖ when the global L2 norm ‖g‖ exceeds
// clip_norm. Returns the pre-clip norm.
double clip_gradients(ModelGrads& grads, double clip_norm);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 1.0;
    std::size_t batch_size = 100;
    std::size_t max_epochs = 1000;
    std::size_t early_stop_patience = 10;
    double early_stop_delta = 1e-3;
    std::optional<double> stop_below_val_loss;
    std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& cfg);

struct AdamState {
    ModelGrads m; // first-moment accumulators
    ModelGrads v; // second-moment accumulators
    std::uint64_t step = 0;

    static AdamState zeros_like(const Model& model);
};

// Standard bias-corrected Adam update in place (advances state.step).
void adam_step(Model& params, ModelGrads& grads, AdamState& state, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation and the training loop
// ---------------------------------------------------------------------------

struct EvalResult {
    double loss = 0.0;        // mean per-sequence loss over scored sequences
    std::string metric_name;  // accuracy | mse | bpc (picked from the task)
    double metric_value = 0.0;
    std::size_t sequences = 0; // sequences with at least one masked position
    std::size_t positions = 0; // masked positions scored
};

LossKind loss_for_task(TaskKind task);

EvalResult evaluate_split(const Model& m, const TaskDataset& data, Split split, LossKind loss);

struct EpochRow {
    std::size_t epoch = 0;
    Split split = Split::train;
    double loss = 0.0;
    std::string metric_name;
    double metric_value = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    Model final_model;
    Model best_model;     // lowest validation loss seen
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<EpochRow> history; // train and val rows per epoch
};

// Invoked as soon as each history row exists, so metrics can stream to disk
// while training runs.
using EpochCallback = std::function<void(const EpochRow&)>;

// Mini-batch Adam training with seeded shuffling, per-epoch validation,
// patience-based early stopping on validation loss (absolute improvement
// threshold early_stop_delta), and an optional hard stop once validation loss
// falls below stop_below_val_loss. Sequences whose mask is all-false are
// skipped and do not count toward batch averaging.
TrainResult train_loop(const Model& init, const TaskDataset& data, const TrainConfig& cfg,
                       LossKind loss, const EpochCallback& on_row = {});

} // namespace drnn
