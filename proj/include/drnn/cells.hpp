#pragma once

#include <cstdint>
#include <vector>

#include "drnn/activation.hpp"
#include "drnn/rng.hpp"
#include "drnn/tensor.hpp"

namespace drnn {

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

// Simple recurrence h_t = f(w_x x_t + w_h h_{t-1} + b_h).
struct RnnParams {
    Tensor2 w_x; // [n x q] input weights
    Tensor2 w_h; // [n x n] recurrent weights
    Tensor1 b_h; // [n]
    Activation f{Act::tanh};

    std::size_t hidden() const { return w_h.rows; }
    std::size_t input() const { return w_x.cols; }

    // Uniform(-1/sqrt(n), +1/sqrt(n)) initialization of all entries.
    static RnnParams init(std::size_t n, std::size_t q, Activation f, Rng& rng);
};

// Readout y_t = g(w_o h_t + b_o).
struct OutputParams {
    Tensor2 w_o; // [m x n]
    Tensor1 b_o; // [m]
    Activation g{Act::identity};

    std::size_t out() const { return w_o.rows; }
    std::size_t in() const { return w_o.cols; }

    static OutputParams init(std::size_t m, std::size_t n, Activation g, Rng& rng);
};

struct LstmGate {
    Tensor2 w_x; // [n x q]
    Tensor2 w_h; // [n x n]
    Tensor1 b;   // [n]
};

// Four-gate LSTM: input gate e, forget gate f, output gate o (sigmoid) and
// cell gate g (tanh); c_t = f ⊙ c_{t-1} + e ⊙ g, h_t = o ⊙ tanh(c_t).
struct LstmParams {
    LstmGate input_gate;
    LstmGate forget_gate;
    LstmGate output_gate;
    LstmGate cell_gate;

    std::size_t hidden() const { return input_gate.w_h.rows; }
    std::size_t input() const { return input_gate.w_x.cols; }

    static LstmParams init(std::size_t n, std::size_t q, Rng& rng);
};

// ---------------------------------------------------------------------------
// Forward steps
// ---------------------------------------------------------------------------

// Per-step values kept for the backward pass.
struct RnnCache {
    Tensor1 pre; // [n] pre-activation
    Tensor1 h;   // [n] f(pre)
};

struct LstmCache {
    Tensor1 e, f, o, g; // [n] post-activation gate values
    Tensor1 c;          // [n] new cell state
    Tensor1 tanh_c;     // [n]
    Tensor1 h;          // [n] new hidden state
};

void rnn_step_into(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev, RnnCache& cache);
Tensor1 rnn_step(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev);

void lstm_step_into(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                    const Tensor1& c_prev, LstmCache& cache);
// Returns (h_t, c_t).
std::pair<Tensor1, Tensor1> lstm_step(const LstmParams& p, const Tensor1& x,
                                      const Tensor1& h_prev, const Tensor1& c_prev);

// y_t = g(w_o h + b_o). output_logits_into skips g (used by the fused
// softmax/cross-entropy path).
Tensor1 output_step(const OutputParams& p, const Tensor1& h);
void output_logits_into(const OutputParams& p, const Tensor1& h, Tensor1& logits);

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

struct RnnGrads {
    Tensor2 w_x, w_h;
    Tensor1 b_h;
    static RnnGrads zeros_like(const RnnParams& p);
};

struct OutputGrads {
    Tensor2 w_o;
    Tensor1 b_o;
    static OutputGrads zeros_like(const OutputParams& p);
};

struct LstmGateGrads {
    Tensor2 w_x, w_h;
    Tensor1 b;
};

struct LstmGrads {
    LstmGateGrads input_gate, forget_gate, output_gate, cell_gate;
    static LstmGrads zeros_like(const LstmParams& p);
};

// Single-step reverse mode: parameter gradients plus gradients w.r.t. the
// step's inputs, for an upstream dL/dh_t (and dL/dc_t for LSTM).
struct RnnCellGrad {
    RnnGrads params;
    Tensor1 d_x;
    Tensor1 d_h_prev;
};

struct LstmCellGrad {
    LstmGrads params;
    Tensor1 d_x;
    Tensor1 d_h_prev;
    Tensor1 d_c_prev;
};

RnnCellGrad rnn_step_backward(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev,
                              const Tensor1& upstream);
LstmCellGrad lstm_step_backward(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                                const Tensor1& c_prev, const Tensor1& upstream_h,
                                const Tensor1& upstream_c);

// Accumulating variants used by BPTT: add into `acc` / `d_h_prev` (which the
// caller zeroes), optionally skip d_x (pass nullptr for the bottom layer).
void rnn_step_backward_acc(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev,
                           const RnnCache& cache, const Tensor1& upstream, RnnGrads& acc,
                           Tensor1* d_x, Tensor1& d_h_prev);
void lstm_step_backward_acc(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                            const Tensor1& c_prev, const LstmCache& cache,
                            const Tensor1& upstream_h, const Tensor1& upstream_c,
                            LstmGrads& acc, Tensor1* d_x, Tensor1& d_h_prev, Tensor1& d_c_prev);

// d_logits = dL/d(w_o h + b_o); accumulates parameter grads and dL/dh.
void output_backward_acc(const OutputParams& p, const Tensor1& h, const Tensor1& d_logits,
                         OutputGrads& acc, Tensor1& d_h);

// ---------------------------------------------------------------------------
// Flat views over parameter/gradient tensors (fixed traversal order, shared
// by the optimizer, gradient clipping and serialization).
// ---------------------------------------------------------------------------

struct TensorView {
    double* data;
    std::size_t size;
};

void collect_views(RnnParams& p, std::vector<TensorView>& out);
void collect_views(LstmParams& p, std::vector<TensorView>& out);
void collect_views(OutputParams& p, std::vector<TensorView>& out);
void collect_views(RnnGrads& g, std::vector<TensorView>& out);
void collect_views(LstmGrads& g, std::vector<TensorView>& out);
void collect_views(OutputGrads& g, std::vector<TensorView>& out);

namespace detail {
// Per-thread count of recurrent cell steps executed; lets tests assert how
// often a forward pass touches each layer.
std::uint64_t cell_step_count();
void reset_cell_step_count();
} // namespace detail

} // namespace drnn
