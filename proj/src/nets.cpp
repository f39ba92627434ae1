#include "drnn/nets.hpp"

#include <cstdlib>
#include <stdexcept>

namespace drnn {

bool is_lstm(const CellParams& c) {
    return std::holds_alternative<LstmParams>(c);
}

std::size_t cell_hidden(const CellParams& c) {
    return std::visit([](const auto& p) { return p.hidden(); }, c);
}

std::size_t cell_input(const CellParams& c) {
    return std::visit([](const auto& p) { return p.input(); }, c);
}

InitialState zero_state(const std::vector<CellParams>& layers) {
    InitialState init;
    for (const auto& layer : layers) {
        init.h.emplace_back(cell_hidden(layer));
        init.c.emplace_back(is_lstm(layer) ? cell_hidden(layer) : 0);
    }
    return init;
}

InitialState zero_state(const CellParams& cell) {
    return zero_state(std::vector<CellParams>{cell});
}

namespace {

void check_init(const std::vector<CellParams>& layers, const InitialState& init) {
    if (init.h.size() != layers.size() || init.c.size() != layers.size())
        throw std::invalid_argument("initial state: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (init.h[i].size() != cell_hidden(layers[i]))
            throw std::invalid_argument("initial state: hidden width mismatch");
        if (is_lstm(layers[i]) && init.c[i].size() != cell_hidden(layers[i]))
            throw std::invalid_argument("initial state: cell width mismatch");
    }
}

// One step of a (possibly heterogeneous) stack of cells; states updated in place.
void stack_step(const std::vector<CellParams>& layers, const Tensor1& x,
                std::vector<Tensor1>& h, std::vector<Tensor1>& c) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tensor1& in = i == 0 ? x : h[i - 1];
        if (const auto* rnn = std::get_if<RnnParams>(&layers[i])) {
            h[i] = rnn_step(*rnn, in, h[i]);
        } else {
            const auto& lstm = std::get<LstmParams>(layers[i]);
            auto [nh, nc] = lstm_step(lstm, in, h[i], c[i]);
            h[i] = std::move(nh);
            c[i] = std::move(nc);
        }
    }
}

} // namespace

Trajectory stacked_forward(const StackedParams& p, const InitialState& init,
                           const std::vector<Tensor1>& xs) {
    if (p.layers.empty())
        throw std::invalid_argument("stacked_forward: at least one layer required");
    check_init(p.layers, init);
    std::vector<Tensor1> h = init.h;
    std::vector<Tensor1> c = init.c;
    Trajectory traj;
    traj.hidden.reserve(xs.size());
    traj.cell.reserve(xs.size());
    traj.outputs.reserve(xs.size());
    for (const auto& x : xs) {
        stack_step(p.layers, x, h, c);
        traj.hidden.push_back(h);
        traj.cell.push_back(c);
        traj.outputs.push_back(output_step(p.output, h.back()));
    }
    return traj;
}

DelayedRun delayed_forward_run(const CellParams& cell, const OutputParams& out, DelaySpec spec,
                               const InitialState& init, const std::vector<Tensor1>& xs) {
    if (spec.d < 0)
        throw std::invalid_argument("delayed_forward: delay must be nonnegative");
    std::vector<CellParams> layers{cell};
    check_init(layers, init);
    const std::size_t total = xs.size() + static_cast<std::size_t>(spec.d);
    const Tensor1 pad(cell_input(cell));
    std::vector<Tensor1> h{init.h[0]};
    std::vector<Tensor1> c{init.c[0]};
    DelayedRun run;
    run.hidden.reserve(total);
    run.cell.reserve(total);
    run.outputs.reserve(xs.size());
    for (std::size_t t = 0; t < total; ++t) {
        const Tensor1& x = t < xs.size() ? xs[t] : pad;
        stack_step(layers, x, h, c);
        run.hidden.push_back(h[0]);
        run.cell.push_back(c[0]);
        if (t + 1 > static_cast<std::size_t>(spec.d))
            run.outputs.push_back(output_step(out, h[0]));
    }
    return run;
}

// Streaming form: a single-layer delayed network needs only the current
// state, so the loop ping-pongs two step caches and materializes nothing but
// the aligned outputs. (Contrast stacked_bidirectional_forward, which must
// store whole per-level state sequences before the next level can start.)
std::vector<Tensor1> delayed_forward(const CellParams& cell, const OutputParams& out,
                                     DelaySpec spec, const InitialState& init,
                                     const std::vector<Tensor1>& xs) {
    if (spec.d < 0)
        throw std::invalid_argument("delayed_forward: delay must be nonnegative");
    check_init({cell}, init);
    const std::size_t total = xs.size() + static_cast<std::size_t>(spec.d);
    const Tensor1 pad(cell_input(cell));
    std::vector<Tensor1> ys;
    ys.reserve(xs.size());
    if (const auto* rnn = std::get_if<RnnParams>(&cell)) {
        RnnCache caches[2];
        const Tensor1* hp = &init.h[0];
        for (std::size_t t = 0; t < total; ++t) {
            RnnCache& cache = caches[t & 1];
            rnn_step_into(*rnn, t < xs.size() ? xs[t] : pad, *hp, cache);
            hp = &cache.h;
            if (t + 1 > static_cast<std::size_t>(spec.d))
                ys.push_back(output_step(out, cache.h));
        }
    } else {
        const auto& lstm = std::get<LstmParams>(cell);
        LstmCache caches[2];
        const Tensor1* hp = &init.h[0];
        const Tensor1* cp = &init.c[0];
        for (std::size_t t = 0; t < total; ++t) {
            LstmCache& cache = caches[t & 1];
            lstm_step_into(lstm, t < xs.size() ? xs[t] : pad, *hp, *cp, cache);
            hp = &cache.h;
            cp = &cache.c;
            if (t + 1 > static_cast<std::size_t>(spec.d))
                ys.push_back(output_step(out, cache.h));
        }
    }
    return ys;
}

namespace {

// Hidden trajectory of one direction (input order as given).
std::vector<Tensor1> run_direction(const CellParams& cell, const InitialState& init,
                                   const std::vector<Tensor1>& xs, bool reversed) {
    std::vector<CellParams> layers{cell};
    std::vector<Tensor1> h{init.h[0]};
    std::vector<Tensor1> c{init.c[0]};
    std::vector<Tensor1> states(xs.size());
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const std::size_t t = reversed ? xs.size() - 1 - s : s;
        stack_step(layers, xs[t], h, c);
        states[t] = h[0];
    }
    return states;
}

} // namespace

std::vector<Tensor1> bidirectional_forward(const CellParams& fwd, const CellParams& bwd,
                                           const OutputParams& out, const InitialState& init_fwd,
                                           const InitialState& init_bwd,
                                           const std::vector<Tensor1>& xs) {
    const std::size_t n = cell_hidden(fwd);
    if (cell_hidden(bwd) != n)
        throw std::invalid_argument("bidirectional_forward: direction widths differ");
    if (out.in() != 2 * n)
        throw std::invalid_argument("bidirectional_forward: readout expects 2n columns");
    check_init({fwd}, init_fwd);
    check_init({bwd}, init_bwd);
    const auto hf = run_direction(fwd, init_fwd, xs, false);
    const auto hb = run_direction(bwd, init_bwd, xs, true);
    std::vector<Tensor1> ys;
    ys.reserve(xs.size());
    Tensor1 cat(2 * n);
    for (std::size_t t = 0; t < xs.size(); ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            cat[i] = hf[t][i];
            cat[n + i] = hb[t][i];
        }
        ys.push_back(output_step(out, cat));
    }
    return ys;
}

std::vector<Tensor1>
stacked_bidirectional_forward(const std::vector<std::pair<CellParams, CellParams>>& levels,
                              const OutputParams& out, const std::vector<Tensor1>& xs) {
    if (levels.empty())
        throw std::invalid_argument("stacked_bidirectional_forward: at least one level");
    std::vector<Tensor1> seq = xs;
    for (const auto& [fwd, bwd] : levels) {
        const std::size_t n = cell_hidden(fwd);
        if (cell_hidden(bwd) != n)
            throw std::invalid_argument("stacked_bidirectional_forward: direction widths differ");
        const auto hf = run_direction(fwd, zero_state(fwd), seq, false);
        const auto hb = run_direction(bwd, zero_state(bwd), seq, true);
        std::vector<Tensor1> cat(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) {
            cat[t].resize(2 * n);
            for (std::size_t i = 0; i < n; ++i) {
                cat[t][i] = hf[t][i];
                cat[t][n + i] = hb[t][i];
            }
        }
        seq = std::move(cat);
    }
    std::vector<Tensor1> ys;
    ys.reserve(seq.size());
    for (const auto& h : seq)
        ys.push_back(output_step(out, h));
    return ys;
}

int nonlinearity_depth(ArchKind arch, int delay, int offset) {
    switch (arch) {
        case ArchKind::rnn:
            return offset <= 0 ? 1 + std::abs(offset) : 0;
        case ArchKind::bi_rnn:
            return 1 + std::abs(offset);
        case ArchKind::d_rnn:
            if (delay < 0)
                throw std::invalid_argument("nonlinearity_depth: negative delay");
            return offset <= delay ? delay - offset + 1 : 0;
    }
    return 0;
}

namespace {
void reject_zero_width(std::size_t n, std::size_t q) {
    if (n == 0 || q == 0)
        throw std::invalid_argument("param_count: zero-width bundle");
}
} // namespace

std::size_t param_count(const RnnParams& p) {
    reject_zero_width(p.hidden(), p.input());
    return p.w_x.data.size() + p.w_h.data.size() + p.b_h.size();
}

std::size_t param_count(const LstmParams& p) {
    reject_zero_width(p.hidden(), p.input());
    std::size_t total = 0;
    for (const LstmGate* g : {&p.input_gate, &p.forget_gate, &p.output_gate, &p.cell_gate})
        total += g->w_x.data.size() + g->w_h.data.size() + g->b.size();
    return total;
}

std::size_t param_count(const OutputParams& p) {
    reject_zero_width(p.out(), p.in());
    return p.w_o.data.size() + p.b_o.size();
}

std::size_t param_count(const CellParams& p) {
    return std::visit([](const auto& v) { return param_count(v); }, p);
}

std::size_t param_count(const StackedParams& p) {
    std::size_t total = param_count(p.output);
    for (const auto& layer : p.layers)
        total += param_count(layer);
    return total;
}

} // namespace drnn
