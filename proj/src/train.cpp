#include "drnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace drnn {

// ---------------------------------------------------------------------------
// Losses and metrics
// ---------------------------------------------------------------------------

double cross_entropy(const Tensor1& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw std::out_of_range("cross_entropy: label outside class range");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) sum += probs[i];
    if (std::abs(sum - 1.0) > 1e-8)
        throw std::invalid_argument("cross_entropy: probabilities must sum to 1");
    return -std::log(probs[static_cast<std::size_t>(label)]);
}

double mse(const Tensor1& pred, const Tensor1& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mse: length mismatch");
    if (pred.size() == 0) throw std::invalid_argument("mse: empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double bits_per_character(double total_ce_nats, std::size_t n_positions) {
    if (n_positions == 0) throw std::invalid_argument("bits_per_character: no positions");
    return (total_ce_nats / static_cast<double>(n_positions)) / std::log(2.0);
}

// ---------------------------------------------------------------------------
// Model plumbing
// ---------------------------------------------------------------------------

std::size_t Model::input_width() const {
    if (layers.empty()) return 0;
    return cell_input(layers.front());
}

std::size_t Model::output_width() const { return output.out(); }

void validate_model(const Model& m) {
    if (m.layers.empty()) throw std::invalid_argument("model: needs at least one layer");
    if (m.delay < 0) throw std::invalid_argument("model: delay must be nonnegative");
    if (m.kind == ModelKind::bidirectional) {
        if (m.layers.size() != 2)
            throw std::invalid_argument("model: bidirectional takes exactly two cells");
        if (m.delay != 0) throw std::invalid_argument("model: bidirectional has no delay");
        if (cell_input(m.layers[0]) != cell_input(m.layers[1]))
            throw std::invalid_argument("model: direction cells must share the input width");
        const std::size_t concat = cell_hidden(m.layers[0]) + cell_hidden(m.layers[1]);
        if (m.output.in() != concat)
            throw std::invalid_argument("model: readout width must match the concatenation");
        return;
    }
    for (std::size_t i = 1; i < m.layers.size(); ++i) {
        if (cell_input(m.layers[i]) != cell_hidden(m.layers[i - 1]))
            throw std::invalid_argument("model: layer input widths must chain");
    }
    if (m.output.in() != cell_hidden(m.layers.back()))
        throw std::invalid_argument("model: readout width must match the top layer");
}

namespace {

CellGrads cell_zeros_like(const CellParams& c) {
    if (std::holds_alternative<RnnParams>(c))
        return RnnGrads::zeros_like(std::get<RnnParams>(c));
    return LstmGrads::zeros_like(std::get<LstmParams>(c));
}

void zero_views(std::vector<TensorView>& views) {
    for (auto& v : views) std::fill(v.data, v.data + v.size, 0.0);
}

} // namespace

ModelGrads ModelGrads::zeros_like(const Model& m) {
    ModelGrads g;
    g.layers.reserve(m.layers.size());
    for (const auto& c : m.layers) g.layers.push_back(cell_zeros_like(c));
    g.output = OutputGrads::zeros_like(m.output);
    return g;
}

void ModelGrads::zero() {
    std::vector<TensorView> views;
    collect_views(*this, views);
    zero_views(views);
}

void collect_views(Model& m, std::vector<TensorView>& out) {
    for (auto& c : m.layers) {
        if (std::holds_alternative<RnnParams>(c))
            collect_views(std::get<RnnParams>(c), out);
        else
            collect_views(std::get<LstmParams>(c), out);
    }
    collect_views(m.output, out);
}

void collect_views(ModelGrads& g, std::vector<TensorView>& out) {
    for (auto& c : g.layers) {
        if (std::holds_alternative<RnnGrads>(c))
            collect_views(std::get<RnnGrads>(c), out);
        else
            collect_views(std::get<LstmGrads>(c), out);
    }
    collect_views(g.output, out);
}

std::size_t param_count(const Model& m) {
    std::size_t total = 0;
    for (const auto& c : m.layers) total += param_count(c);
    total += param_count(m.output);
    return total;
}

// ---------------------------------------------------------------------------
// BPTT
// ---------------------------------------------------------------------------

namespace {

// Reused across calls so the per-sequence hot path does not reallocate.
struct BpttWorkspace {
    std::vector<std::vector<RnnCache>> rnn;   // [layer][step]
    std::vector<std::vector<LstmCache>> lstm; // [layer][step]
    std::vector<Tensor1> d_logits;            // [T], filled at masked steps, pre-scaled
    std::vector<Tensor1> cur_dh, nxt_dh, cur_dc, nxt_dc;
    std::vector<Tensor1> zero_h; // one zero vector per layer width
    Tensor1 zero_in;
    Tensor1 logits;
    Tensor1 d_out;     // bidirectional: gradient w.r.t. the readout pre-activation
    Tensor1 concat;    // bidirectional readout input
    Tensor1 d_concat;  // bidirectional readout gradient
    std::vector<Tensor1> d_store; // bidirectional: per-original-step d_concat copies
};

thread_local BpttWorkspace tls_ws;

// Scores one masked output position: returns the position loss, optionally
// fills d_logits (unscaled gradient w.r.t. the readout pre-activation), and
// updates metrics. For mean_squared_error the readout activation must be the
// identity, which validate-at-entry guarantees.
double score_position(const OutputParams& out, const Tensor1& h, LossKind loss,
                      const SeqTargets& targets, std::size_t t, Tensor1& logits,
                      Tensor1* d_logits, MetricAccum* metrics) {
    output_logits_into(out, h, logits);
    const std::size_t mw = logits.size();
    if (loss == LossKind::softmax_cross_entropy) {
        if (t >= targets.classes.size())
            throw std::invalid_argument("bptt: class targets shorter than the mask");
        const int label = targets.classes[t];
        if (label < 0 || static_cast<std::size_t>(label) >= mw)
            throw std::out_of_range("bptt: label outside class range");
        double mx = logits[0];
        for (std::size_t j = 1; j < mw; ++j) mx = std::max(mx, logits[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < mw; ++j) sum += std::exp(logits[j] - mx);
        const double lse = mx + std::log(sum);
        const double position_loss = lse - logits[static_cast<std::size_t>(label)];
        if (d_logits) {
            d_logits->resize(mw);
            for (std::size_t j = 0; j < mw; ++j)
                (*d_logits)[j] = std::exp(logits[j] - mx) / sum;
            (*d_logits)[static_cast<std::size_t>(label)] -= 1.0;
        }
        if (metrics) {
            metrics->ce_nats += position_loss;
            metrics->positions += 1;
            if (argmax(logits) == static_cast<std::size_t>(label)) metrics->correct += 1;
        }
        return position_loss;
    }
    // mean_squared_error
    const std::size_t base = t * mw;
    if (base + mw > targets.reals.size())
        throw std::invalid_argument("bptt: real targets shorter than the mask");
    double acc = 0.0;
    if (d_logits) d_logits->resize(mw);
    for (std::size_t j = 0; j < mw; ++j) {
        const double diff = logits[j] - targets.reals[base + j];
        acc += diff * diff;
        if (d_logits) (*d_logits)[j] = 2.0 * diff / static_cast<double>(mw);
    }
    if (metrics) {
        metrics->squared_error += acc;
        metrics->error_entries += mw;
        metrics->positions += 1;
    }
    return acc / static_cast<double>(mw);
}

std::size_t count_mask(const std::vector<std::uint8_t>& mask) {
    std::size_t n = 0;
    for (auto b : mask)
        if (b) ++n;
    return n;
}

void check_bptt_args(const Model& m, const std::vector<Tensor1>& xs,
                     const std::vector<std::uint8_t>& mask, LossKind loss) {
    validate_model(m);
    if (xs.empty()) throw std::invalid_argument("bptt: empty input sequence");
    if (mask.size() != xs.size())
        throw std::invalid_argument("bptt: mask length must equal the sequence length");
    for (const auto& x : xs)
        if (x.size() != m.input_width())
            throw std::invalid_argument("bptt: input width mismatch");
    if (loss == LossKind::mean_squared_error && m.output.g.kind != Act::identity)
        throw std::invalid_argument("bptt: squared-error training needs an identity readout");
}

double bptt_recurrent(const Model& m, const std::vector<Tensor1>& xs, const SeqTargets& targets,
                      const std::vector<std::uint8_t>& mask, LossKind loss, double scale,
                      ModelGrads& grads, MetricAccum* metrics) {
    BpttWorkspace& ws = tls_ws;
    const std::size_t T = xs.size();
    const std::size_t L = m.layers.size();
    const std::size_t d = static_cast<std::size_t>(m.delay);
    const std::size_t S = T + d;
    const std::size_t M = count_mask(mask);
    if (M == 0) throw std::invalid_argument("bptt: loss mask has no active positions");
    const double grad_scale = scale / static_cast<double>(M);

    ws.rnn.resize(L);
    ws.lstm.resize(L);
    ws.zero_h.resize(L);
    ws.cur_dh.resize(L);
    ws.nxt_dh.resize(L);
    ws.cur_dc.resize(L);
    ws.nxt_dc.resize(L);
    ws.zero_in.resize(m.input_width());
    ws.d_logits.resize(T);
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t n = cell_hidden(m.layers[i]);
        ws.zero_h[i].resize(n);
        if (std::holds_alternative<RnnParams>(m.layers[i]))
            ws.rnn[i].resize(S);
        else
            ws.lstm[i].resize(S);
    }

    // Forward, scoring aligned masked outputs on the fly.
    double seq_loss = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t i = 0; i < L; ++i) {
            const Tensor1& in =
                (i == 0) ? (s < T ? xs[s] : ws.zero_in) : [&]() -> const Tensor1& {
                    const auto& below = m.layers[i - 1];
                    return std::holds_alternative<RnnParams>(below) ? ws.rnn[i - 1][s].h
                                                                    : ws.lstm[i - 1][s].h;
                }();
            if (std::holds_alternative<RnnParams>(m.layers[i])) {
                const Tensor1& h_prev = s > 0 ? ws.rnn[i][s - 1].h : ws.zero_h[i];
                rnn_step_into(std::get<RnnParams>(m.layers[i]), in, h_prev, ws.rnn[i][s]);
            } else {
                const Tensor1& h_prev = s > 0 ? ws.lstm[i][s - 1].h : ws.zero_h[i];
                const Tensor1& c_prev = s > 0 ? ws.lstm[i][s - 1].c : ws.zero_h[i];
                lstm_step_into(std::get<LstmParams>(m.layers[i]), in, h_prev, c_prev,
                               ws.lstm[i][s]);
            }
        }
        if (s >= d && mask[s - d]) {
            const std::size_t t = s - d;
            const Tensor1& h_top = std::holds_alternative<RnnParams>(m.layers[L - 1])
                                       ? ws.rnn[L - 1][s].h
                                       : ws.lstm[L - 1][s].h;
            seq_loss += score_position(m.output, h_top, loss, targets, t, ws.logits,
                                       &ws.d_logits[t], metrics);
            for (std::size_t j = 0; j < ws.d_logits[t].size(); ++j)
                ws.d_logits[t][j] *= grad_scale;
        }
    }
    seq_loss /= static_cast<double>(M);

    // Backward, top layer first within each step so a layer's input gradient
    // lands in the layer below before that layer runs.
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t n = cell_hidden(m.layers[i]);
        ws.cur_dh[i].resize(n);
        ws.nxt_dh[i].resize(n);
        ws.cur_dc[i].resize(n);
        ws.nxt_dc[i].resize(n);
    }
    for (std::size_t sp = S; sp-- > 0;) {
        const std::size_t s = sp;
        for (std::size_t i = 0; i < L; ++i) {
            std::swap(ws.cur_dh[i].data, ws.nxt_dh[i].data);
            ws.nxt_dh[i].fill(0.0);
            std::swap(ws.cur_dc[i].data, ws.nxt_dc[i].data);
            ws.nxt_dc[i].fill(0.0);
        }
        if (s >= d && mask[s - d]) {
            const Tensor1& h_top = std::holds_alternative<RnnParams>(m.layers[L - 1])
                                       ? ws.rnn[L - 1][s].h
                                       : ws.lstm[L - 1][s].h;
            output_backward_acc(m.output, h_top, ws.d_logits[s - d], grads.output,
                                ws.cur_dh[L - 1]);
        }
        for (std::size_t ip = L; ip-- > 0;) {
            const std::size_t i = ip;
            const Tensor1& in =
                (i == 0) ? (s < T ? xs[s] : ws.zero_in) : [&]() -> const Tensor1& {
                    const auto& below = m.layers[i - 1];
                    return std::holds_alternative<RnnParams>(below) ? ws.rnn[i - 1][s].h
                                                                    : ws.lstm[i - 1][s].h;
                }();
            Tensor1* d_x = (i > 0) ? &ws.cur_dh[i - 1] : nullptr;
            if (std::holds_alternative<RnnParams>(m.layers[i])) {
                const Tensor1& h_prev = s > 0 ? ws.rnn[i][s - 1].h : ws.zero_h[i];
                rnn_step_backward_acc(std::get<RnnParams>(m.layers[i]), in, h_prev, ws.rnn[i][s],
                                      ws.cur_dh[i], std::get<RnnGrads>(grads.layers[i]), d_x,
                                      ws.nxt_dh[i]);
            } else {
                const Tensor1& h_prev = s > 0 ? ws.lstm[i][s - 1].h : ws.zero_h[i];
                const Tensor1& c_prev = s > 0 ? ws.lstm[i][s - 1].c : ws.zero_h[i];
                lstm_step_backward_acc(std::get<LstmParams>(m.layers[i]), in, h_prev, c_prev,
                                       ws.lstm[i][s], ws.cur_dh[i], ws.cur_dc[i],
                                       std::get<LstmGrads>(grads.layers[i]), d_x, ws.nxt_dh[i],
                                       ws.nxt_dc[i]);
            }
        }
    }
    return seq_loss;
}

double bptt_bidirectional(const Model& m, const std::vector<Tensor1>& xs,
                          const SeqTargets& targets, const std::vector<std::uint8_t>& mask,
                          LossKind loss, double scale, ModelGrads& grads, MetricAccum* metrics) {
    BpttWorkspace& ws = tls_ws;
    const std::size_t T = xs.size();
    const std::size_t M = count_mask(mask);
    if (M == 0) throw std::invalid_argument("bptt: loss mask has no active positions");
    const double grad_scale = scale / static_cast<double>(M);
    const std::size_t nf = cell_hidden(m.layers[0]);
    const std::size_t nb = cell_hidden(m.layers[1]);

    ws.rnn.resize(2);
    ws.lstm.resize(2);
    ws.zero_h.resize(2);
    for (std::size_t dir = 0; dir < 2; ++dir) {
        ws.zero_h[dir].resize(cell_hidden(m.layers[dir]));
        if (std::holds_alternative<RnnParams>(m.layers[dir]))
            ws.rnn[dir].resize(T);
        else
            ws.lstm[dir].resize(T);
    }

    // Direction forward passes: direction 0 reads xs in order, direction 1
    // reads xs reversed; cache index is the direction's own step.
    for (std::size_t dir = 0; dir < 2; ++dir) {
        for (std::size_t s = 0; s < T; ++s) {
            const Tensor1& in = dir == 0 ? xs[s] : xs[T - 1 - s];
            if (std::holds_alternative<RnnParams>(m.layers[dir])) {
                const Tensor1& h_prev = s > 0 ? ws.rnn[dir][s - 1].h : ws.zero_h[dir];
                rnn_step_into(std::get<RnnParams>(m.layers[dir]), in, h_prev, ws.rnn[dir][s]);
            } else {
                const Tensor1& h_prev = s > 0 ? ws.lstm[dir][s - 1].h : ws.zero_h[dir];
                const Tensor1& c_prev = s > 0 ? ws.lstm[dir][s - 1].c : ws.zero_h[dir];
                lstm_step_into(std::get<LstmParams>(m.layers[dir]), in, h_prev, c_prev,
                               ws.lstm[dir][s]);
            }
        }
    }

    auto dir_h = [&](std::size_t dir, std::size_t step) -> const Tensor1& {
        return std::holds_alternative<RnnParams>(m.layers[dir]) ? ws.rnn[dir][step].h
                                                                : ws.lstm[dir][step].h;
    };

    // Readout + per-position readout gradients, stored per original step.
    ws.concat.resize(nf + nb);
    ws.d_store.resize(T);
    double seq_loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!mask[t]) continue;
        const Tensor1& hf = dir_h(0, t);
        const Tensor1& hb = dir_h(1, T - 1 - t);
        for (std::size_t j = 0; j < nf; ++j) ws.concat[j] = hf[j];
        for (std::size_t j = 0; j < nb; ++j) ws.concat[nf + j] = hb[j];
        seq_loss +=
            score_position(m.output, ws.concat, loss, targets, t, ws.logits, &ws.d_out, metrics);
        for (std::size_t j = 0; j < ws.d_out.size(); ++j) ws.d_out[j] *= grad_scale;
        ws.d_concat.resize(nf + nb);
        output_backward_acc(m.output, ws.concat, ws.d_out, grads.output, ws.d_concat);
        ws.d_store[t].resize(nf + nb);
        for (std::size_t j = 0; j < nf + nb; ++j) ws.d_store[t][j] = ws.d_concat[j];
    }
    seq_loss /= static_cast<double>(M);

    // One backward sweep per direction.
    ws.cur_dh.resize(2);
    ws.nxt_dh.resize(2);
    ws.cur_dc.resize(2);
    ws.nxt_dc.resize(2);
    for (std::size_t dir = 0; dir < 2; ++dir) {
        const std::size_t n = cell_hidden(m.layers[dir]);
        const std::size_t off = dir == 0 ? 0 : nf;
        ws.cur_dh[dir].resize(n);
        ws.nxt_dh[dir].resize(n);
        ws.cur_dc[dir].resize(n);
        ws.nxt_dc[dir].resize(n);
        for (std::size_t sp = T; sp-- > 0;) {
            const std::size_t s = sp;
            const std::size_t t = dir == 0 ? s : T - 1 - s; // original position of this step
            std::swap(ws.cur_dh[dir].data, ws.nxt_dh[dir].data);
            ws.nxt_dh[dir].fill(0.0);
            std::swap(ws.cur_dc[dir].data, ws.nxt_dc[dir].data);
            ws.nxt_dc[dir].fill(0.0);
            if (mask[t])
                for (std::size_t j = 0; j < n; ++j) ws.cur_dh[dir][j] += ws.d_store[t][off + j];
            const Tensor1& in = dir == 0 ? xs[s] : xs[T - 1 - s];
            if (std::holds_alternative<RnnParams>(m.layers[dir])) {
                const Tensor1& h_prev = s > 0 ? ws.rnn[dir][s - 1].h : ws.zero_h[dir];
                rnn_step_backward_acc(std::get<RnnParams>(m.layers[dir]), in, h_prev,
                                      ws.rnn[dir][s], ws.cur_dh[dir],
                                      std::get<RnnGrads>(grads.layers[dir]), nullptr,
                                      ws.nxt_dh[dir]);
            } else {
                const Tensor1& h_prev = s > 0 ? ws.lstm[dir][s - 1].h : ws.zero_h[dir];
                const Tensor1& c_prev = s > 0 ? ws.lstm[dir][s - 1].c : ws.zero_h[dir];
                lstm_step_backward_acc(std::get<LstmParams>(m.layers[dir]), in, h_prev, c_prev,
                                       ws.lstm[dir][s], ws.cur_dh[dir], ws.cur_dc[dir],
                                       std::get<LstmGrads>(grads.layers[dir]), nullptr,
                                       ws.nxt_dh[dir], ws.nxt_dc[dir]);
            }
        }
    }
    return seq_loss;
}

} // namespace

double bptt(const Model& m, const std::vector<Tensor1>& xs, const SeqTargets& targets,
            const std::vector<std::uint8_t>& mask, LossKind loss, double scale, ModelGrads& grads,
            MetricAccum* metrics) {
    check_bptt_args(m, xs, mask, loss);
    if (grads.layers.size() != m.layers.size())
        throw std::invalid_argument("bptt: gradient accumulator shape mismatch");
    if (m.kind == ModelKind::bidirectional)
        return bptt_bidirectional(m, xs, targets, mask, loss, scale, grads, metrics);
    return bptt_recurrent(m, xs, targets, mask, loss, scale, grads, metrics);
}

std::vector<Tensor1> model_forward(const Model& m, const std::vector<Tensor1>& xs) {
    validate_model(m);
    const std::size_t T = xs.size();
    std::vector<Tensor1> outputs(T);
    if (m.kind == ModelKind::bidirectional) {
        std::vector<Tensor1> hf(T), hb(T); // hb indexed by the backward cell's own step
        for (std::size_t dir = 0; dir < 2; ++dir) {
            Tensor1 h(cell_hidden(m.layers[dir]));
            Tensor1 c(cell_hidden(m.layers[dir]));
            for (std::size_t s = 0; s < T; ++s) {
                const Tensor1& in = dir == 0 ? xs[s] : xs[T - 1 - s];
                if (std::holds_alternative<RnnParams>(m.layers[dir])) {
                    h = rnn_step(std::get<RnnParams>(m.layers[dir]), in, h);
                } else {
                    auto hc = lstm_step(std::get<LstmParams>(m.layers[dir]), in, h, c);
                    h = std::move(hc.first);
                    c = std::move(hc.second);
                }
                (dir == 0 ? hf : hb)[s] = h;
            }
        }
        const std::size_t nf = cell_hidden(m.layers[0]);
        const std::size_t nb = cell_hidden(m.layers[1]);
        Tensor1 concat(nf + nb);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < nf; ++j) concat[j] = hf[t][j];
            for (std::size_t j = 0; j < nb; ++j) concat[nf + j] = hb[T - 1 - t][j];
            outputs[t] = output_step(m.output, concat);
        }
        return outputs;
    }
    const std::size_t L = m.layers.size();
    const std::size_t d = static_cast<std::size_t>(m.delay);
    std::vector<Tensor1> h(L), c(L);
    for (std::size_t i = 0; i < L; ++i) {
        h[i].resize(cell_hidden(m.layers[i]));
        c[i].resize(cell_hidden(m.layers[i]));
    }
    Tensor1 zero_in(m.input_width());
    for (std::size_t s = 0; s < T + d; ++s) {
        for (std::size_t i = 0; i < L; ++i) {
            const Tensor1& in = i == 0 ? (s < T ? xs[s] : zero_in) : h[i - 1];
            if (std::holds_alternative<RnnParams>(m.layers[i])) {
                h[i] = rnn_step(std::get<RnnParams>(m.layers[i]), in, h[i]);
            } else {
                auto hc = lstm_step(std::get<LstmParams>(m.layers[i]), in, h[i], c[i]);
                h[i] = std::move(hc.first);
                c[i] = std::move(hc.second);
            }
        }
        if (s >= d) outputs[s - d] = output_step(m.output, h[L - 1]);
    }
    return outputs;
}

double clip_gradients(ModelGrads& grads, double clip_norm) {
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_gradients: clip_norm must be > 0");
    std::vector<TensorView> views;
    collect_views(grads, views);
    double sq = 0.0;
    for (const auto& v : views)
        for (std::size_t i = 0; i < v.size; ++i) sq += v.data[i] * v.data[i];
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
        const double f = clip_norm / norm;
        for (auto& v : views)
            for (std::size_t i = 0; i < v.size; ++i) v.data[i] *= f;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train config: learning_rate must be > 0");
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0))
        throw std::invalid_argument("train config: beta1 must lie in (0,1)");
    if (!(cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
        throw std::invalid_argument("train config: beta2 must lie in (0,1)");
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be > 0");
    if (!(cfg.clip_norm > 0.0)) throw std::invalid_argument("train config: clip_norm must be > 0");
    if (cfg.batch_size == 0) throw std::invalid_argument("train config: batch_size must be ≥ 1");
}

AdamState AdamState::zeros_like(const Model& model) {
    AdamState st;
    st.m = ModelGrads::zeros_like(model);
    st.v = ModelGrads::zeros_like(model);
    st.step = 0;
    return st;
}

void adam_step(Model& params, ModelGrads& grads, AdamState& state, const TrainConfig& cfg) {
    validate_train_config(cfg);
    std::vector<TensorView> pv, gv, mv, vv;
    collect_views(params, pv);
    collect_views(grads, gv);
    collect_views(state.m, mv);
    collect_views(state.v, vv);
    if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size())
        throw std::invalid_argument("adam_step: mismatched parameter/state shapes");
    state.step += 1;
    const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < pv.size(); ++k) {
        if (pv[k].size != gv[k].size || pv[k].size != mv[k].size || pv[k].size != vv[k].size)
            throw std::invalid_argument("adam_step: mismatched tensor sizes");
        double* th = pv[k].data;
        const double* g = gv[k].data;
        double* mo = mv[k].data;
        double* ve = vv[k].data;
        for (std::size_t i = 0; i < pv[k].size; ++i) {
            mo[i] = cfg.beta1 * mo[i] + (1.0 - cfg.beta1) * g[i];
            ve[i] = cfg.beta2 * ve[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mo[i] / b1t;
            const double vhat = ve[i] / b2t;
            th[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation and the training loop
// ---------------------------------------------------------------------------

LossKind loss_for_task(TaskKind task) {
    return task == TaskKind::sine ? LossKind::mean_squared_error
                                  : LossKind::softmax_cross_entropy;
}

namespace {

const char* metric_name_for(TaskKind task) {
    switch (task) {
        case TaskKind::reversal: return "accuracy";
        case TaskKind::sine: return "mse";
        case TaskKind::masked_lm: return "bpc";
    }
    return "?";
}

double metric_value_from(TaskKind task, const MetricAccum& acc) {
    switch (task) {
        case TaskKind::reversal:
            return acc.positions == 0
                       ? 0.0
                       : static_cast<double>(acc.correct) / static_cast<double>(acc.positions);
        case TaskKind::sine:
            return acc.error_entries == 0
                       ? 0.0
                       : acc.squared_error / static_cast<double>(acc.error_entries);
        case TaskKind::masked_lm:
            return acc.positions == 0 ? 0.0 : bits_per_character(acc.ce_nats, acc.positions);
    }
    return 0.0;
}

SeqTargets targets_of(const Sequence& seq) {
    SeqTargets t;
    t.classes = seq.label_ids;
    t.reals = seq.label_reals;
    return t;
}

void materialize_inputs(const TaskDataset& data, const Sequence& seq, std::vector<Tensor1>& xs) {
    const std::size_t T = seq.length();
    xs.resize(T);
    for (std::size_t t = 0; t < T; ++t) input_vector_into(data, seq, t, xs[t]);
}

// Forward-only scoring of one sequence (mean loss over masked positions).
// Returns false when nothing is masked.
bool score_sequence(const Model& m, const TaskDataset& data, const Sequence& seq, LossKind loss,
                    double& seq_loss, MetricAccum& acc, std::vector<Tensor1>& xs_buf) {
    const std::size_t M = count_mask(seq.mask);
    if (M == 0) return false;
    materialize_inputs(data, seq, xs_buf);
    const std::size_t T = xs_buf.size();
    const SeqTargets targets = targets_of(seq);
    Tensor1 logits;
    double total = 0.0;

    if (m.kind == ModelKind::bidirectional) {
        const std::size_t nf = cell_hidden(m.layers[0]);
        const std::size_t nb = cell_hidden(m.layers[1]);
        std::vector<Tensor1> hf(T), hb(T);
        for (std::size_t dir = 0; dir < 2; ++dir) {
            Tensor1 h(cell_hidden(m.layers[dir])), c(cell_hidden(m.layers[dir]));
            for (std::size_t s = 0; s < T; ++s) {
                const Tensor1& in = dir == 0 ? xs_buf[s] : xs_buf[T - 1 - s];
                if (std::holds_alternative<RnnParams>(m.layers[dir])) {
                    h = rnn_step(std::get<RnnParams>(m.layers[dir]), in, h);
                } else {
                    auto hc = lstm_step(std::get<LstmParams>(m.layers[dir]), in, h, c);
                    h = std::move(hc.first);
                    c = std::move(hc.second);
                }
                (dir == 0 ? hf : hb)[s] = h;
            }
        }
        Tensor1 concat(nf + nb);
        for (std::size_t t = 0; t < T; ++t) {
            if (!seq.mask[t]) continue;
            for (std::size_t j = 0; j < nf; ++j) concat[j] = hf[t][j];
            for (std::size_t j = 0; j < nb; ++j) concat[nf + j] = hb[T - 1 - t][j];
            total += score_position(m.output, concat, loss, targets, t, logits, nullptr, &acc);
        }
    } else {
        const std::size_t L = m.layers.size();
        const std::size_t d = static_cast<std::size_t>(m.delay);
        std::vector<Tensor1> h(L), c(L);
        for (std::size_t i = 0; i < L; ++i) {
            h[i].resize(cell_hidden(m.layers[i]));
            c[i].resize(cell_hidden(m.layers[i]));
        }
        Tensor1 zero_in(m.input_width());
        thread_local RnnCache rnn_cache;
        thread_local LstmCache lstm_cache;
        for (std::size_t s = 0; s < T + d; ++s) {
            for (std::size_t i = 0; i < L; ++i) {
                const Tensor1& in = i == 0 ? (s < T ? xs_buf[s] : zero_in) : h[i - 1];
                if (std::holds_alternative<RnnParams>(m.layers[i])) {
                    rnn_step_into(std::get<RnnParams>(m.layers[i]), in, h[i], rnn_cache);
                    std::swap(h[i].data, rnn_cache.h.data);
                } else {
                    lstm_step_into(std::get<LstmParams>(m.layers[i]), in, h[i], c[i], lstm_cache);
                    std::swap(h[i].data, lstm_cache.h.data);
                    std::swap(c[i].data, lstm_cache.c.data);
                }
            }
            if (s >= d && seq.mask[s - d])
                total +=
                    score_position(m.output, h[L - 1], loss, targets, s - d, logits, nullptr, &acc);
        }
    }
    seq_loss = total / static_cast<double>(M);
    return true;
}

} // namespace

EvalResult evaluate_split(const Model& m, const TaskDataset& data, Split split, LossKind loss) {
    validate_model(m);
    const auto& seqs = data.split(split);
    EvalResult res;
    res.metric_name = metric_name_for(data.task);
    MetricAccum acc;
    double loss_sum = 0.0;
    std::vector<Tensor1> xs_buf;
    for (const auto& seq : seqs) {
        double seq_loss = 0.0;
        if (!score_sequence(m, data, seq, loss, seq_loss, acc, xs_buf)) continue;
        loss_sum += seq_loss;
        res.sequences += 1;
    }
    if (res.sequences == 0) throw std::invalid_argument("evaluate_split: nothing to score");
    res.loss = loss_sum / static_cast<double>(res.sequences);
    res.positions = acc.positions;
    res.metric_value = metric_value_from(data.task, acc);
    return res;
}

TrainResult train_loop(const Model& init, const TaskDataset& data, const TrainConfig& cfg,
                       LossKind loss, const EpochCallback& on_row) {
    validate_model(init);
    validate_train_config(cfg);
    if (data.train.empty()) throw std::invalid_argument("train_loop: empty training split");
    if (data.val.empty()) throw std::invalid_argument("train_loop: empty validation split");

    TrainResult result;
    result.final_model = init;
    result.best_model = init;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    result.best_epoch = 0;

    Model model = init;
    ModelGrads grads = ModelGrads::zeros_like(model);
    AdamState adam = AdamState::zeros_like(model);
    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Tensor1> xs_buf;
    std::size_t epochs_without_improvement = 0;
    double patience_reference = std::numeric_limits<double>::infinity();

    using clock = std::chrono::steady_clock;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto train_start = clock::now();
        shuffle_indices(shuffle_rng, order);
        MetricAccum train_acc;
        double train_loss_sum = 0.0;
        std::size_t train_scored = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::size_t contributors = 0;
            for (std::size_t k = begin; k < end; ++k)
                if (count_mask(data.train[order[k]].mask) > 0) ++contributors;
            if (contributors == 0) continue;
            const double scale = 1.0 / static_cast<double>(contributors);
            grads.zero();
            for (std::size_t k = begin; k < end; ++k) {
                const Sequence& seq = data.train[order[k]];
                if (count_mask(seq.mask) == 0) continue;
                materialize_inputs(data, seq, xs_buf);
                const double seq_loss =
                    bptt(model, xs_buf, targets_of(seq), seq.mask, loss, scale, grads, &train_acc);
                train_loss_sum += seq_loss;
                train_scored += 1;
            }
            clip_gradients(grads, cfg.clip_norm);
            adam_step(model, grads, adam, cfg);
        }
        const double train_ms =
            std::chrono::duration<double, std::milli>(clock::now() - train_start).count();
        if (train_scored == 0)
            throw std::invalid_argument("train_loop: no sequence has a scored position");

        EpochRow train_row;
        train_row.epoch = epoch;
        train_row.split = Split::train;
        train_row.loss = train_loss_sum / static_cast<double>(train_scored);
        train_row.metric_name = metric_name_for(data.task);
        train_row.metric_value = metric_value_from(data.task, train_acc);
        train_row.wall_ms = train_ms;
        result.history.push_back(train_row);
        if (on_row) on_row(result.history.back());

        const auto val_start = clock::now();
        const EvalResult val = evaluate_split(model, data, Split::val, loss);
        const double val_ms =
            std::chrono::duration<double, std::milli>(clock::now() - val_start).count();
        EpochRow val_row;
        val_row.epoch = epoch;
        val_row.split = Split::val;
        val_row.loss = val.loss;
        val_row.metric_name = val.metric_name;
        val_row.metric_value = val.metric_value;
        val_row.wall_ms = val_ms;
        result.history.push_back(val_row);
        if (on_row) on_row(result.history.back());

        result.epochs_run = epoch;
        // Strict best-so-far parameters are what the loop returns; the
        // patience counter uses its own reference that only moves on
        // improvements larger than early_stop_delta.
        if (val.loss < result.best_val_loss) {
            result.best_val_loss = val.loss;
            result.best_model = model;
            result.best_epoch = epoch;
        }
        if (val.loss < patience_reference - cfg.early_stop_delta) {
            patience_reference = val.loss;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
        }
        if (cfg.stop_below_val_loss && val.loss < *cfg.stop_below_val_loss) break;
        if (cfg.early_stop_patience > 0 && epochs_without_improvement >= cfg.early_stop_patience)
            break;
    }
    result.final_model = model;
    if (result.best_epoch == 0) {
        result.best_model = model;
        result.best_val_loss = std::numeric_limits<double>::infinity();
    }
    return result;
}

} // namespace drnn
