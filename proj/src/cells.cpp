#include "drnn/cells.hpp"

#include <cmath>
#include <stdexcept>

namespace drnn {

namespace {

thread_local std::uint64_t g_cell_steps = 0;

// out[i] = Σ_j wa[i,j]·a[j] + Σ_j wb[i,j]·b[j] + bias[i], accumulated in that
// exact order. The stacked and flattened forward passes both funnel through
// this helper, which is what makes their trajectories agree deterministically.
void affine2_into(const Tensor2& wa, const Tensor1& a, const Tensor2& wb, const Tensor1& b,
                  const Tensor1& bias, Tensor1& out) {
    const std::size_t n = wa.rows;
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ra = wa.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < wa.cols; ++j)
            s += ra[j] * a[j];
        const double* rb = wb.row(i);
        for (std::size_t j = 0; j < wb.cols; ++j)
            s += rb[j] * b[j];
        out[i] = s + bias[i];
    }
}

void check_rnn_shapes(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev) {
    if (p.w_x.rows != p.w_h.rows || p.w_h.rows != p.w_h.cols || p.b_h.size() != p.w_h.rows)
        throw std::invalid_argument("rnn_step: inconsistent parameter shapes");
    if (x.size() != p.w_x.cols || h_prev.size() != p.w_h.cols)
        throw std::invalid_argument("rnn_step: input shape mismatch");
    if (p.f.kind == Act::softmax)
        throw std::invalid_argument("rnn_step: softmax is output-only");
}

void check_gate_shapes(const LstmGate& g, std::size_t n, std::size_t q, const char* where) {
    if (g.w_x.rows != n || g.w_x.cols != q || g.w_h.rows != n || g.w_h.cols != n ||
        g.b.size() != n)
        throw std::invalid_argument(std::string(where) + ": inconsistent gate shapes");
}

void init_gate(LstmGate& g, std::size_t n, std::size_t q, double bound, Rng& rng) {
    g.w_x = Tensor2(n, q);
    g.w_h = Tensor2(n, n);
    g.b = Tensor1(n);
    uniform_fill(rng, -bound, bound, g.w_x);
    uniform_fill(rng, -bound, bound, g.w_h);
    uniform_fill(rng, -bound, bound, g.b);
}

} // namespace

RnnParams RnnParams::init(std::size_t n, std::size_t q, Activation f, Rng& rng) {
    if (n == 0 || q == 0)
        throw std::invalid_argument("RnnParams::init: zero width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    RnnParams p;
    p.w_x = Tensor2(n, q);
    p.w_h = Tensor2(n, n);
    p.b_h = Tensor1(n);
    p.f = f;
    uniform_fill(rng, -bound, bound, p.w_x);
    uniform_fill(rng, -bound, bound, p.w_h);
    uniform_fill(rng, -bound, bound, p.b_h);
    return p;
}

OutputParams OutputParams::init(std::size_t m, std::size_t n, Activation g, Rng& rng) {
    if (m == 0 || n == 0)
        throw std::invalid_argument("OutputParams::init: zero width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    OutputParams p;
    p.w_o = Tensor2(m, n);
    p.b_o = Tensor1(m);
    p.g = g;
    uniform_fill(rng, -bound, bound, p.w_o);
    uniform_fill(rng, -bound, bound, p.b_o);
    return p;
}

LstmParams LstmParams::init(std::size_t n, std::size_t q, Rng& rng) {
    if (n == 0 || q == 0)
        throw std::invalid_argument("LstmParams::init: zero width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    LstmParams p;
    init_gate(p.input_gate, n, q, bound, rng);
    init_gate(p.forget_gate, n, q, bound, rng);
    init_gate(p.output_gate, n, q, bound, rng);
    init_gate(p.cell_gate, n, q, bound, rng);
    return p;
}

void rnn_step_into(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev, RnnCache& cache) {
    check_rnn_shapes(p, x, h_prev);
    ++g_cell_steps;
    affine2_into(p.w_x, x, p.w_h, h_prev, p.b_h, cache.pre);
    cache.h = cache.pre;
    p.f.apply(cache.h);
}

Tensor1 rnn_step(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev) {
    RnnCache cache;
    rnn_step_into(p, x, h_prev, cache);
    return cache.h;
}

void lstm_step_into(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                    const Tensor1& c_prev, LstmCache& cache) {
    const std::size_t n = p.hidden();
    const std::size_t q = p.input();
    check_gate_shapes(p.input_gate, n, q, "lstm_step(e)");
    check_gate_shapes(p.forget_gate, n, q, "lstm_step(f)");
    check_gate_shapes(p.output_gate, n, q, "lstm_step(o)");
    check_gate_shapes(p.cell_gate, n, q, "lstm_step(g)");
    if (x.size() != q || h_prev.size() != n || c_prev.size() != n)
        throw std::invalid_argument("lstm_step: input shape mismatch");
    ++g_cell_steps;

    const Activation sig{Act::sigmoid};
    const Activation th{Act::tanh};
    affine2_into(p.input_gate.w_x, x, p.input_gate.w_h, h_prev, p.input_gate.b, cache.e);
    sig.apply(cache.e);
    affine2_into(p.forget_gate.w_x, x, p.forget_gate.w_h, h_prev, p.forget_gate.b, cache.f);
    sig.apply(cache.f);
    affine2_into(p.output_gate.w_x, x, p.output_gate.w_h, h_prev, p.output_gate.b, cache.o);
    sig.apply(cache.o);
    affine2_into(p.cell_gate.w_x, x, p.cell_gate.w_h, h_prev, p.cell_gate.b, cache.g);
    th.apply(cache.g);

    cache.c.resize(n);
    cache.tanh_c.resize(n);
    cache.h.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cache.c[i] = cache.f[i] * c_prev[i] + cache.e[i] * cache.g[i];
        cache.tanh_c[i] = std::tanh(cache.c[i]);
        cache.h[i] = cache.o[i] * cache.tanh_c[i];
    }
}

std::pair<Tensor1, Tensor1> lstm_step(const LstmParams& p, const Tensor1& x,
                                      const Tensor1& h_prev, const Tensor1& c_prev) {
    LstmCache cache;
    lstm_step_into(p, x, h_prev, c_prev, cache);
    return {cache.h, cache.c};
}

void output_logits_into(const OutputParams& p, const Tensor1& h, Tensor1& logits) {
    if (h.size() != p.w_o.cols || p.b_o.size() != p.w_o.rows)
        throw std::invalid_argument("output_step: shape mismatch");
    logits.resize(p.w_o.rows);
    for (std::size_t i = 0; i < p.w_o.rows; ++i) {
        const double* r = p.w_o.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < p.w_o.cols; ++j)
            s += r[j] * h[j];
        logits[i] = s + p.b_o[i];
    }
}

Tensor1 output_step(const OutputParams& p, const Tensor1& h) {
    Tensor1 y;
    output_logits_into(p, h, y);
    p.g.apply(y);
    return y;
}

RnnGrads RnnGrads::zeros_like(const RnnParams& p) {
    RnnGrads g;
    g.w_x = Tensor2(p.w_x.rows, p.w_x.cols);
    g.w_h = Tensor2(p.w_h.rows, p.w_h.cols);
    g.b_h = Tensor1(p.b_h.size());
    return g;
}

OutputGrads OutputGrads::zeros_like(const OutputParams& p) {
    OutputGrads g;
    g.w_o = Tensor2(p.w_o.rows, p.w_o.cols);
    g.b_o = Tensor1(p.b_o.size());
    return g;
}

LstmGrads LstmGrads::zeros_like(const LstmParams& p) {
    auto zero_gate = [](const LstmGate& g) {
        LstmGateGrads z;
        z.w_x = Tensor2(g.w_x.rows, g.w_x.cols);
        z.w_h = Tensor2(g.w_h.rows, g.w_h.cols);
        z.b = Tensor1(g.b.size());
        return z;
    };
    LstmGrads g;
    g.input_gate = zero_gate(p.input_gate);
    g.forget_gate = zero_gate(p.forget_gate);
    g.output_gate = zero_gate(p.output_gate);
    g.cell_gate = zero_gate(p.cell_gate);
    return g;
}

void rnn_step_backward_acc(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev,
                           const RnnCache& cache, const Tensor1& upstream, RnnGrads& acc,
                           Tensor1* d_x, Tensor1& d_h_prev) {
    if (upstream.size() != p.hidden())
        throw std::invalid_argument("rnn_step_backward: upstream shape mismatch");
    thread_local Tensor1 dpre;
    dpre.resize(p.hidden());
    for (std::size_t i = 0; i < dpre.size(); ++i)
        dpre[i] = upstream[i] * p.f.derivative(cache.pre[i], cache.h[i]);
    axpy(1.0, dpre, acc.b_h);
    add_outer(acc.w_x, dpre, x);
    add_outer(acc.w_h, dpre, h_prev);
    if (d_x)
        matvec_transpose_add(p.w_x, dpre, *d_x);
    matvec_transpose_add(p.w_h, dpre, d_h_prev);
}

RnnCellGrad rnn_step_backward(const RnnParams& p, const Tensor1& x, const Tensor1& h_prev,
                              const Tensor1& upstream) {
    RnnCache cache;
    rnn_step_into(p, x, h_prev, cache);
    RnnCellGrad out;
    out.params = RnnGrads::zeros_like(p);
    out.d_x = Tensor1(x.size());
    out.d_h_prev = Tensor1(h_prev.size());
    rnn_step_backward_acc(p, x, h_prev, cache, upstream, out.params, &out.d_x, out.d_h_prev);
    return out;
}

void lstm_step_backward_acc(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                            const Tensor1& c_prev, const LstmCache& cache,
                            const Tensor1& upstream_h, const Tensor1& upstream_c,
                            LstmGrads& acc, Tensor1* d_x, Tensor1& d_h_prev, Tensor1& d_c_prev) {
    const std::size_t n = p.hidden();
    if (upstream_h.size() != n || upstream_c.size() != n)
        throw std::invalid_argument("lstm_step_backward: upstream shape mismatch");
    thread_local Tensor1 dc, dpre;
    dc.resize(n);
    dpre.resize(n);

    // dL/dc_t combines the direct cell-state path and the h_t = o ⊙ tanh(c_t) path.
    for (std::size_t i = 0; i < n; ++i)
        dc[i] = upstream_c[i] + upstream_h[i] * cache.o[i] * (1.0 - cache.tanh_c[i] * cache.tanh_c[i]);
    for (std::size_t i = 0; i < n; ++i)
        d_c_prev[i] += dc[i] * cache.f[i];

    auto gate_backward = [&](const LstmGate& gate, LstmGateGrads& gacc) {
        axpy(1.0, dpre, gacc.b);
        add_outer(gacc.w_x, dpre, x);
        add_outer(gacc.w_h, dpre, h_prev);
        if (d_x)
            matvec_transpose_add(gate.w_x, dpre, *d_x);
        matvec_transpose_add(gate.w_h, dpre, d_h_prev);
    };

    // input gate e: dL/de = dc ⊙ g, through sigmoid
    for (std::size_t i = 0; i < n; ++i)
        dpre[i] = dc[i] * cache.g[i] * cache.e[i] * (1.0 - cache.e[i]);
    gate_backward(p.input_gate, acc.input_gate);
    // forget gate f: dL/df = dc ⊙ c_prev
    for (std::size_t i = 0; i < n; ++i)
        dpre[i] = dc[i] * c_prev[i] * cache.f[i] * (1.0 - cache.f[i]);
    gate_backward(p.forget_gate, acc.forget_gate);
    // output gate o: dL/do = upstream_h ⊙ tanh(c)
    for (std::size_t i = 0; i < n; ++i)
        dpre[i] = upstream_h[i] * cache.tanh_c[i] * cache.o[i] * (1.0 - cache.o[i]);
    gate_backward(p.output_gate, acc.output_gate);
    // cell gate g: dL/dg = dc ⊙ e, through tanh
    for (std::size_t i = 0; i < n; ++i)
        dpre[i] = dc[i] * cache.e[i] * (1.0 - cache.g[i] * cache.g[i]);
    gate_backward(p.cell_gate, acc.cell_gate);
}

LstmCellGrad lstm_step_backward(const LstmParams& p, const Tensor1& x, const Tensor1& h_prev,
                                const Tensor1& c_prev, const Tensor1& upstream_h,
                                const Tensor1& upstream_c) {
    LstmCache cache;
    lstm_step_into(p, x, h_prev, c_prev, cache);
    LstmCellGrad out;
    out.params = LstmGrads::zeros_like(p);
    out.d_x = Tensor1(x.size());
    out.d_h_prev = Tensor1(h_prev.size());
    out.d_c_prev = Tensor1(c_prev.size());
    lstm_step_backward_acc(p, x, h_prev, c_prev, cache, upstream_h, upstream_c, out.params,
                           &out.d_x, out.d_h_prev, out.d_c_prev);
    return out;
}

void output_backward_acc(const OutputParams& p, const Tensor1& h, const Tensor1& d_logits,
                         OutputGrads& acc, Tensor1& d_h) {
    if (d_logits.size() != p.w_o.rows)
        throw std::invalid_argument("output_backward: shape mismatch");
    axpy(1.0, d_logits, acc.b_o);
    add_outer(acc.w_o, d_logits, h);
    matvec_transpose_add(p.w_o, d_logits, d_h);
}

void collect_views(RnnParams& p, std::vector<TensorView>& out) {
    out.push_back({p.w_x.data.data(), p.w_x.data.size()});
    out.push_back({p.w_h.data.data(), p.w_h.data.size()});
    out.push_back({p.b_h.data.data(), p.b_h.data.size()});
}

void collect_views(LstmParams& p, std::vector<TensorView>& out) {
    for (LstmGate* g : {&p.input_gate, &p.forget_gate, &p.output_gate, &p.cell_gate}) {
        out.push_back({g->w_x.data.data(), g->w_x.data.size()});
        out.push_back({g->w_h.data.data(), g->w_h.data.size()});
        out.push_back({g->b.data.data(), g->b.data.size()});
    }
}

void collect_views(OutputParams& p, std::vector<TensorView>& out) {
    out.push_back({p.w_o.data.data(), p.w_o.data.size()});
    out.push_back({p.b_o.data.data(), p.b_o.data.size()});
}

void collect_views(RnnGrads& g, std::vector<TensorView>& out) {
    out.push_back({g.w_x.data.data(), g.w_x.data.size()});
    out.push_back({g.w_h.data.data(), g.w_h.data.size()});
    out.push_back({g.b_h.data.data(), g.b_h.data.size()});
}

void collect_views(LstmGrads& g, std::vector<TensorView>& out) {
    for (LstmGateGrads* gg : {&g.input_gate, &g.forget_gate, &g.output_gate, &g.cell_gate}) {
        out.push_back({gg->w_x.data.data(), gg->w_x.data.size()});
        out.push_back({gg->w_h.data.data(), gg->w_h.data.size()});
        out.push_back({gg->b.data.data(), gg->b.data.size()});
    }
}

void collect_views(OutputGrads& g, std::vector<TensorView>& out) {
    out.push_back({g.w_o.data.data(), g.w_o.data.size()});
    out.push_back({g.b_o.data.data(), g.b_o.data.size()});
}

namespace detail {
std::uint64_t cell_step_count() { return g_cell_steps; }
void reset_cell_step_count() { g_cell_steps = 0; }
} // namespace detail

} // namespace drnn
