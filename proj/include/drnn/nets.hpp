#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "drnn/cells.hpp"

namespace drnn {

using CellParams = std::variant<RnnParams, LstmParams>;

bool is_lstm(const CellParams& c);
std::size_t cell_hidden(const CellParams& c);
std::size_t cell_input(const CellParams& c);

// k recurrent layers plus a readout. Layer 1 consumes the input sequence,
// layer i>1 consumes layer i-1's hidden state at the same timestep.
struct StackedParams {
    std::vector<CellParams> layers;
    OutputParams output;
};

struct DelaySpec {
    int d = 0; // nonnegative delay in timesteps
};

// Per-layer h0 (and c0 for LSTM layers; left empty for RNN layers).
struct InitialState {
    std::vector<Tensor1> h;
    std::vector<Tensor1> c;
};

InitialState zero_state(const std::vector<CellParams>& layers);
InitialState zero_state(const CellParams& cell);

// Full record of a stacked run: hidden[t][i] is layer i's state after
// consuming x_{t+1} (0-based t), cell[t][i] likewise for LSTM layers,
// outputs[t] the readout of the top layer.
struct Trajectory {
    std::vector<std::vector<Tensor1>> hidden;
    std::vector<std::vector<Tensor1>> cell;
    std::vector<Tensor1> outputs;
};

Trajectory stacked_forward(const StackedParams& p, const InitialState& init,
                           const std::vector<Tensor1>& xs);

// Delayed protocol: run T+d steps on xs padded with d zero vectors, discard
// the first d outputs; returned[t] is the prediction for x_t (read at t+d).
std::vector<Tensor1> delayed_forward(const CellParams& cell, const OutputParams& out,
                                     DelaySpec spec, const InitialState& init,
                                     const std::vector<Tensor1>& xs);

// Same run keeping every internal state: hidden[t] is the wide state after
// step t+1 (t = 0..T+d-1); outputs are the T aligned readouts.
struct DelayedRun {
    std::vector<Tensor1> hidden;
    std::vector<Tensor1> cell;
    std::vector<Tensor1> outputs;
};

DelayedRun delayed_forward_run(const CellParams& cell, const OutputParams& out, DelaySpec spec,
                               const InitialState& init, const std::vector<Tensor1>& xs);

// y_t = g(w_o · concat(h_t^fwd, h_{T-t+1}^bwd) + b_o).
std::vector<Tensor1> bidirectional_forward(const CellParams& fwd, const CellParams& bwd,
                                           const OutputParams& out, const InitialState& init_fwd,
                                           const InitialState& init_bwd,
                                           const std::vector<Tensor1>& xs);

// Stacked bidirectional forward (zero initial states): each level runs both
// directions over its input sequence and emits per-step concatenations; the
// readout applies to the top level. Used by the runtime benchmark.
std::vector<Tensor1>
stacked_bidirectional_forward(const std::vector<std::pair<CellParams, CellParams>>& levels,
                              const OutputParams& out, const std::vector<Tensor1>& xs);

// How many recurrent nonlinearities separate input x_{t0} from the output
// for position t_out, as a function of offset = t0 - t_out (positive offset
// means the input lies in the output position's future, i.e. lookahead).
// Only recurrent activations f are counted, not the readout g.
enum class ArchKind { rnn, bi_rnn, d_rnn };
int nonlinearity_depth(ArchKind arch, int delay, int offset);

std::size_t param_count(const RnnParams& p);
std::size_t param_count(const LstmParams& p);
std::size_t param_count(const OutputParams& p);
std::size_t param_count(const CellParams& p);
std::size_t param_count(const StackedParams& p);

} // namespace drnn
