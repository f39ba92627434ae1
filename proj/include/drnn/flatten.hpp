#pragma once

#include <stdexcept>
#include <string>

#include "drnn/nets.hpp"

namespace drnn {

// A single wide recurrent layer equivalent to a k-layer stack. The hidden
// vector of width k·n is partitioned into k blocks of width n; block i plays
// the role of stack layer i, reproducing its states with delay i−1.
//
// Structure: the recurrent matrix (each gate's recurrent matrix for LSTM) is
// block lower-bidiagonal — block (i,i) holds the stack's recurrent weights
// Wh^(i), block (i,i−1) holds the stack's inter-layer input weights Wx^(i),
// everything else is zero. The input matrix feeds only block 1 and the
// readout reads only block k. Delay is k−1.
struct FlattenedNet {
    CellParams params;       // wide cell of width k·n
    OutputParams output;     // readout over width k·n
    DelaySpec delay;         // d = k−1
    std::size_t layer_count; // k
    std::size_t block_width; // n
};

// Requires uniform hidden width across layers (and, for RNN, one shared
// activation); layers 2..k must take width-n inputs.
FlattenedNet flatten_stacked_rnn(const StackedParams& p);
FlattenedNet flatten_stacked_lstm(const StackedParams& p);

// Runs the flattened net k−1 steps from h0_hat (and c0_hat for LSTM) and
// reads block i at time i−1, defining the stacked initial state h₀^(i) that
// makes the equivalence hypothesis hold exactly. Block i at time i−1 cannot
// be influenced by any input at time ≥ 1, so the result does not depend on
// xs; the sequence is accepted and used to drive the run all the same.
struct DerivedInit {
    InitialState stacked;
    Tensor1 h0_hat;
    Tensor1 c0_hat; // empty for RNN
};
DerivedInit forward_derived_init(const FlattenedNet& flat, const std::vector<Tensor1>& xs,
                                 const Tensor1& h0_hat, const Tensor1& c0_hat = Tensor1());

struct LiftError : std::runtime_error {
    std::size_t block; // 1-based block that failed
    std::size_t step;  // timestep within the backward recursion / replay
    LiftError(std::size_t b, std::size_t s, const std::string& what)
        : std::runtime_error(what), block(b), step(s) {}
};

// Initial-state lifting: inverts the recurrence backwards from
// the stacked initial states to a flattened ĥ₀ whose forward replay
// reproduces h₀^(i) at time i−1 (verified to 1e-8 before returning; the
// replay is input-independent, see forward_derived_init). RNN cells only;
// requires a right-invertible activation and full-rank recurrent blocks.
Tensor1 lift_initial_state(const FlattenedNet& flat, const InitialState& stacked_init,
                           double replay_tol = 1e-8);

struct EquivalenceReport {
    double max_output_diff = 0.0;
    double max_hidden_diff = 0.0;
    double max_cell_diff = 0.0;              // LSTM only; 0 for RNN
    std::vector<double> per_layer_state_diff; // max hidden/cell diff per layer
    double tolerance = 0.0;
    bool pass = false;
    std::size_t worst_layer = 0; // 1-based, location of the largest state diff
    std::size_t worst_step = 0;  // 1-based stacked timestep of that diff
};

// Simulates both networks on xs and compares trajectories under the delay
// alignment: outputs ŷ_{t+k−1} vs y_t, states ĥ^{[i]}_{t+i−1} vs h^(i)_t
// (and cell states for LSTM).
EquivalenceReport verify_equivalence(const StackedParams& stacked, const InitialState& stacked_init,
                                     const FlattenedNet& flat, const Tensor1& flat_h0,
                                     const Tensor1& flat_c0, const std::vector<Tensor1>& xs,
                                     double tolerance = 1e-10);

} // namespace drnn
