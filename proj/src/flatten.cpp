#include "drnn/flatten.hpp"

#include <cmath>
#include <sstream>

#include "drnn/linalg.hpp"

namespace drnn {

namespace {

// Copies src into dst at block position (bi, bj) of an n-blocked matrix.
void place_block(Tensor2& dst, const Tensor2& src, std::size_t bi, std::size_t bj, std::size_t n) {
    for (std::size_t i = 0; i < src.rows; ++i)
        for (std::size_t j = 0; j < src.cols; ++j)
            dst(bi * n + i, bj * n + j) = src(i, j);
}

void check_uniform_stack(const StackedParams& p, bool want_lstm, std::size_t& n_out,
                         std::size_t& q_out) {
    if (p.layers.empty())
        throw std::invalid_argument("flatten: stack must have at least one layer");
    const std::size_t n = cell_hidden(p.layers[0]);
    const std::size_t q = cell_input(p.layers[0]);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        if (is_lstm(p.layers[i]) != want_lstm)
            throw std::invalid_argument("flatten: cell kind mismatch");
        if (cell_hidden(p.layers[i]) != n)
            throw std::invalid_argument("flatten: non-uniform layer widths");
        if (i > 0 && cell_input(p.layers[i]) != n)
            throw std::invalid_argument("flatten: layer input width must chain to n");
    }
    if (p.output.in() != n)
        throw std::invalid_argument("flatten: readout width mismatch");
    n_out = n;
    q_out = q;
}

// Shared readout/bias assembly once the wide recurrent weights are built.
OutputParams widen_output(const OutputParams& out, std::size_t k, std::size_t n) {
    OutputParams wide;
    wide.w_o = Tensor2(out.w_o.rows, k * n);
    wide.b_o = out.b_o;
    wide.g = out.g;
    for (std::size_t i = 0; i < out.w_o.rows; ++i)
        for (std::size_t j = 0; j < n; ++j)
            wide.w_o(i, (k - 1) * n + j) = out.w_o(i, j);
    return wide;
}

} // namespace

FlattenedNet flatten_stacked_rnn(const StackedParams& p) {
    std::size_t n = 0, q = 0;
    check_uniform_stack(p, /*want_lstm=*/false, n, q);
    const std::size_t k = p.layers.size();
    const Activation f = std::get<RnnParams>(p.layers[0]).f;
    for (const auto& layer : p.layers)
        if (std::get<RnnParams>(layer).f.kind != f.kind)
            throw std::invalid_argument("flatten: layers must share one activation");

    RnnParams wide;
    wide.f = f;
    wide.w_x = Tensor2(k * n, q);
    wide.w_h = Tensor2(k * n, k * n);
    wide.b_h = Tensor1(k * n);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& layer = std::get<RnnParams>(p.layers[i]);
        place_block(wide.w_h, layer.w_h, i, i, n);
        if (i == 0) {
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < q; ++c)
                    wide.w_x(r, c) = layer.w_x(r, c);
        } else {
            place_block(wide.w_h, layer.w_x, i, i - 1, n);
        }
        for (std::size_t r = 0; r < n; ++r)
            wide.b_h[i * n + r] = layer.b_h[r];
    }

    FlattenedNet flat;
    flat.params = std::move(wide);
    flat.output = widen_output(p.output, k, n);
    flat.delay = DelaySpec{static_cast<int>(k) - 1};
    flat.layer_count = k;
    flat.block_width = n;
    return flat;
}

FlattenedNet flatten_stacked_lstm(const StackedParams& p) {
    std::size_t n = 0, q = 0;
    check_uniform_stack(p, /*want_lstm=*/true, n, q);
    const std::size_t k = p.layers.size();

    LstmParams wide;
    auto widen_gate = [&](auto member) {
        LstmGate g;
        g.w_x = Tensor2(k * n, q);
        g.w_h = Tensor2(k * n, k * n);
        g.b = Tensor1(k * n);
        for (std::size_t i = 0; i < k; ++i) {
            const LstmGate& src = std::get<LstmParams>(p.layers[i]).*member;
            place_block(g.w_h, src.w_h, i, i, n);
            if (i == 0) {
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < q; ++c)
                        g.w_x(r, c) = src.w_x(r, c);
            } else {
                place_block(g.w_h, src.w_x, i, i - 1, n);
            }
            for (std::size_t r = 0; r < n; ++r)
                g.b[i * n + r] = src.b[r];
        }
        return g;
    };
    wide.input_gate = widen_gate(&LstmParams::input_gate);
    wide.forget_gate = widen_gate(&LstmParams::forget_gate);
    wide.output_gate = widen_gate(&LstmParams::output_gate);
    wide.cell_gate = widen_gate(&LstmParams::cell_gate);

    FlattenedNet flat;
    flat.params = std::move(wide);
    flat.output = widen_output(p.output, k, n);
    flat.delay = DelaySpec{static_cast<int>(k) - 1};
    flat.layer_count = k;
    flat.block_width = n;
    return flat;
}

namespace {

Tensor1 block_of(const Tensor1& wide, std::size_t bi, std::size_t n) {
    Tensor1 out(n);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = wide[bi * n + j];
    return out;
}

} // namespace

DerivedInit forward_derived_init(const FlattenedNet& flat, const std::vector<Tensor1>& xs,
                                 const Tensor1& h0_hat, const Tensor1& c0_hat) {
    const std::size_t k = flat.layer_count;
    const std::size_t n = flat.block_width;
    const bool lstm = is_lstm(flat.params);
    if (h0_hat.size() != k * n)
        throw std::invalid_argument("forward_derived_init: h0_hat width must be k*n");
    if (lstm && c0_hat.size() != k * n)
        throw std::invalid_argument("forward_derived_init: c0_hat width must be k*n");

    // States at times 0..k-1; time 0 is the given wide state.
    std::vector<Tensor1> hs{h0_hat};
    std::vector<Tensor1> cs{lstm ? c0_hat : Tensor1()};
    const Tensor1 pad(cell_input(flat.params));
    for (std::size_t t = 1; t + 1 <= k; ++t) {
        const Tensor1& x = t - 1 < xs.size() ? xs[t - 1] : pad;
        if (lstm) {
            auto [h, c] = lstm_step(std::get<LstmParams>(flat.params), x, hs.back(), cs.back());
            hs.push_back(std::move(h));
            cs.push_back(std::move(c));
        } else {
            hs.push_back(rnn_step(std::get<RnnParams>(flat.params), x, hs.back()));
        }
    }

    DerivedInit out;
    out.h0_hat = h0_hat;
    out.c0_hat = lstm ? c0_hat : Tensor1();
    for (std::size_t i = 0; i < k; ++i) {
        out.stacked.h.push_back(block_of(hs[i], i, n));
        out.stacked.c.push_back(lstm ? block_of(cs[i], i, n) : Tensor1());
    }
    return out;
}

Tensor1 lift_initial_state(const FlattenedNet& flat, const InitialState& stacked_init,
                           double replay_tol) {
    if (is_lstm(flat.params))
        throw std::invalid_argument(
            "lift_initial_state: defined for simple recurrences only; use forward_derived_init "
            "for LSTM nets");
    const auto& wide = std::get<RnnParams>(flat.params);
    const std::size_t k = flat.layer_count;
    const std::size_t n = flat.block_width;
    if (!wide.f.right_invertible())
        throw std::invalid_argument("lift_initial_state: activation has no right-inverse");
    if (stacked_init.h.size() != k)
        throw std::invalid_argument("lift_initial_state: initial state layer count mismatch");

    auto diag_block = [&](std::size_t bi) {
        Tensor2 b(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                b(i, j) = wide.w_h(bi * n + i, bi * n + j);
        return b;
    };
    auto sub_block = [&](std::size_t bi) { // block (bi, bi-1)
        Tensor2 b(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                b(i, j) = wide.w_h(bi * n + i, (bi - 1) * n + j);
        return b;
    };

    // states[bi][t] is block bi+1's reconstructed state at time t (t ≤ bi).
    std::vector<std::vector<Tensor1>> states(k);
    for (std::size_t bi = 0; bi < k; ++bi) {
        if (stacked_init.h[bi].size() != n)
            throw std::invalid_argument("lift_initial_state: initial state width mismatch");
        states[bi].assign(bi + 1, Tensor1());
        states[bi][bi] = stacked_init.h[bi];
        if (bi == 0)
            continue;
        const Tensor2 wh = diag_block(bi);
        const Tensor2 wx = sub_block(bi);
        const Tensor1 bias = block_of(wide.b_h, bi, n);
        for (std::size_t t = bi; t >= 1; --t) {
            Tensor1 rhs;
            try {
                rhs = wide.f.right_inverse(states[bi][t]);
            } catch (const ActivationRangeError& e) {
                std::ostringstream os;
                os << "lift_initial_state: block " << bi + 1 << ", step " << t
                   << ": state entry " << e.index << " = " << e.value
                   << " outside the activation range (" << e.what() << ")";
                throw LiftError(bi + 1, t, os.str());
            }
            // rhs := r(h) − Wx·(previous block at t−1) − b
            Tensor1 lower = matvec(wx, states[bi - 1][t - 1]);
            for (std::size_t j = 0; j < n; ++j)
                rhs[j] -= lower[j] + bias[j];
            LstsqResult sol = least_squares_solve(wh, rhs);
            if (sol.rank < n) {
                std::ostringstream os;
                os << "lift_initial_state: block " << bi + 1
                   << ": recurrent block is rank-deficient (rank " << sol.rank << " of " << n
                   << ")";
                throw LiftError(bi + 1, t, os.str());
            }
            states[bi][t - 1] = std::move(sol.x);
        }
    }

    Tensor1 h0_hat(k * n);
    for (std::size_t bi = 0; bi < k; ++bi)
        for (std::size_t j = 0; j < n; ++j)
            h0_hat[bi * n + j] = states[bi][0][j];

    // Mandatory replay: run k−1 steps (inputs cannot reach the checked blocks,
    // so zero inputs suffice) and compare block i at time i−1 to the target.
    Tensor1 h = h0_hat;
    const Tensor1 pad(wide.input());
    for (std::size_t t = 0; t + 1 < k; ++t) {
        h = rnn_step(wide, pad, h);
        const std::size_t bi = t + 1; // block bi+1 is checked at time bi
        const double diff = max_abs_diff(block_of(h, bi, n), stacked_init.h[bi]);
        if (diff > replay_tol) {
            std::ostringstream os;
            os << "lift_initial_state: replay residual " << diff << " at block " << bi + 1
               << ", time " << bi << " exceeds " << replay_tol;
            throw LiftError(bi + 1, bi, os.str());
        }
    }
    return h0_hat;
}

EquivalenceReport verify_equivalence(const StackedParams& stacked, const InitialState& stacked_init,
                                     const FlattenedNet& flat, const Tensor1& flat_h0,
                                     const Tensor1& flat_c0, const std::vector<Tensor1>& xs,
                                     double tolerance) {
    const std::size_t k = flat.layer_count;
    const std::size_t n = flat.block_width;
    if (stacked.layers.size() != k)
        throw std::invalid_argument("verify_equivalence: layer count mismatch");
    for (const auto& layer : stacked.layers)
        if (cell_hidden(layer) != n || is_lstm(layer) != is_lstm(flat.params))
            throw std::invalid_argument("verify_equivalence: stack does not match block layout");
    const bool lstm = is_lstm(flat.params);

    const Trajectory ref = stacked_forward(stacked, stacked_init, xs);

    InitialState flat_init;
    flat_init.h.push_back(flat_h0);
    flat_init.c.push_back(lstm ? flat_c0 : Tensor1());
    const DelayedRun run = delayed_forward_run(flat.params, flat.output, flat.delay, flat_init, xs);

    EquivalenceReport rep;
    rep.tolerance = tolerance;
    rep.per_layer_state_diff.assign(k, 0.0);
    const std::size_t T = xs.size();
    for (std::size_t tt = 0; tt < T; ++tt) {
        for (std::size_t bi = 0; bi < k; ++bi) {
            // ĥ_{t+i−1} lives at run index tt+bi (run.hidden[s] is ĥ_{s+1}).
            const Tensor1& wide_h = run.hidden[tt + bi];
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                d = std::max(d, std::fabs(wide_h[bi * n + j] - ref.hidden[tt][bi][j]));
            rep.max_hidden_diff = std::max(rep.max_hidden_diff, d);
            if (lstm) {
                const Tensor1& wide_c = run.cell[tt + bi];
                double dc = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    dc = std::max(dc, std::fabs(wide_c[bi * n + j] - ref.cell[tt][bi][j]));
                rep.max_cell_diff = std::max(rep.max_cell_diff, dc);
                d = std::max(d, dc);
            }
            if (d > rep.per_layer_state_diff[bi])
                rep.per_layer_state_diff[bi] = d;
        }
        rep.max_output_diff =
            std::max(rep.max_output_diff, max_abs_diff(run.outputs[tt], ref.outputs[tt]));
    }

    // Locate the worst per-layer state diff for failure reporting.
    double worst = -1.0;
    for (std::size_t bi = 0; bi < k; ++bi) {
        if (rep.per_layer_state_diff[bi] > worst) {
            worst = rep.per_layer_state_diff[bi];
            rep.worst_layer = bi + 1;
        }
    }
    for (std::size_t tt = 0; tt < T && rep.worst_layer > 0; ++tt) {
        const std::size_t bi = rep.worst_layer - 1;
        double d = 0.0;
        const Tensor1& wide_h = run.hidden[tt + bi];
        for (std::size_t j = 0; j < n; ++j)
            d = std::max(d, std::fabs(wide_h[bi * n + j] - ref.hidden[tt][bi][j]));
        if (lstm) {
            const Tensor1& wide_c = run.cell[tt + bi];
            for (std::size_t j = 0; j < n; ++j)
                d = std::max(d, std::fabs(wide_c[bi * n + j] - ref.cell[tt][bi][j]));
        }
        if (d == rep.per_layer_state_diff[bi]) {
            rep.worst_step = tt + 1;
            break;
        }
    }

    rep.pass = rep.max_output_diff <= tolerance && rep.max_hidden_diff <= tolerance &&
               rep.max_cell_diff <= tolerance;
    return rep;
}

} // namespace drnn
