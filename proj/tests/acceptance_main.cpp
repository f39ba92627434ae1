// Acceptance harness: end-to-end checks of the library's headline guarantees,
// one [PASS]/[FAIL] line per criterion on stdout, exit code 0 iff all pass.
//
//   drnn_acceptance              runs criteria 1..9
//   drnn_acceptance --only 5,7   runs a subset
//   drnn_acceptance --progress   streams per-epoch rows to stderr
//
// Every threshold is fixed here in code; nothing is configurable at runtime
// except the subset selection and progress logging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "drnn/experiments.hpp"
#include "drnn/flatten.hpp"

using namespace drnn;
namespace fs = std::filesystem;

namespace {

bool g_progress = false;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// Runs fn with std::cout redirected into a buffer (the library commands print
// informational lines; the harness owns stdout).
template <class Fn>
int quiet(Fn&& fn, std::string* captured = nullptr) {
    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    int rc = 1;
    try {
        rc = fn();
    } catch (...) {
        std::cout.rdbuf(old);
        throw;
    }
    std::cout.rdbuf(old);
    if (captured) *captured = sink.str();
    return rc;
}

fs::path work_dir() {
    const fs::path p = fs::temp_directory_path() / "drnn_acceptance";
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

EpochCallback progress_cb(const std::string& tag) {
    if (!g_progress) return {};
    return [tag](const EpochRow& row) {
        if (row.split == Split::val)
            std::cerr << "      " << tag << " epoch " << row.epoch << ": val loss "
                      << num(row.loss) << ", " << row.metric_name << " " << num(row.metric_value)
                      << "\n";
    };
}

// ---------------------------------------------------------------------------
// Criteria 1 + 2: exact stacked <-> flattened equivalence over the full grid
// ---------------------------------------------------------------------------

Outcome flatten_grid(const char* cell, std::vector<std::size_t> layer_counts) {
    ExperimentConfig cfg;
    cfg.command = Command::flatten_verify;
    cfg.out_dir = (work_dir() / "flatten").string();
    cfg.grid_cell = cell;
    cfg.grid_layers = std::move(layer_counts);
    cfg.grid_hidden = {1, 2, 4, 8};
    cfg.grid_steps = {1, 5, 20};
    cfg.grid_activations = {"tanh", "relu", "identity"};
    cfg.grid_seeds = 10;
    cfg.grid_tolerance = 1e-10;
    cfg.grid_init_route = "forward";
    cfg.report_name = std::string("acceptance_") + cell + ".csv";

    std::string log;
    const int rc = quiet([&] { return cmd_flatten_verify(cfg); }, &log);
    const std::size_t acts = cfg.grid_cell == "lstm" ? 1 : cfg.grid_activations.size();
    const std::size_t cells = cfg.grid_layers.size() * cfg.grid_hidden.size() *
                              cfg.grid_steps.size() * acts * cfg.grid_seeds;
    Outcome o;
    o.pass = rc == 0;
    o.detail = std::to_string(cells) + " grid cells (k x n x T x activation x seed), " +
               "output/state trajectories within 1e-10 under forward-derived initialization";
    if (rc != 0) o.detail += "; failures:\n" + log;
    return o;
}

Outcome criterion1() { return flatten_grid("rnn", {1, 2, 3, 4}); }
Outcome criterion2() { return flatten_grid("lstm", {1, 2, 3}); }

// ---------------------------------------------------------------------------
// Criterion 3: initial-state lifting
// ---------------------------------------------------------------------------

StackedParams make_rnn_stack(std::size_t k, std::size_t n, std::size_t q, std::size_t m,
                             Activation f, Rng& rng) {
    StackedParams s;
    for (std::size_t i = 0; i < k; ++i)
        s.layers.emplace_back(RnnParams::init(n, i == 0 ? q : n, f, rng));
    s.output = OutputParams::init(m, n, Activation{Act::identity}, rng);
    return s;
}

Outcome criterion3() {
    constexpr double kReplayTol = 1e-8;
    constexpr double kEquivTol = 1e-8;
    const std::size_t n = 3, q = 4, m = 2, T = 5;
    double worst_replay = 0.0, worst_output = 0.0;
    std::size_t cases = 0;

    for (Act act : {Act::identity, Act::relu}) {
        for (std::size_t k : {1, 2, 3}) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                Rng rng(9000 + 100 * k + seed + (act == Act::relu ? 50 : 0));
                StackedParams stacked = make_rnn_stack(k, n, q, m, Activation{act}, rng);
                if (act == Act::relu) {
                    // Keep every pre-activation strictly positive (small
                    // weights, +1 bias): all states stay off the zero branch,
                    // so the derived targets are feasible for the backward
                    // recursion at every intermediate step.
                    for (auto& cell : stacked.layers) {
                        auto& p = std::get<RnnParams>(cell);
                        for (auto& v : p.w_x.data) v *= 0.1;
                        for (auto& v : p.w_h.data) v *= 0.1;
                        for (std::size_t i = 0; i < p.b_h.size(); ++i) p.b_h[i] = 1.0;
                    }
                }
                const FlattenedNet flat = flatten_stacked_rnn(stacked);
                std::vector<Tensor1> xs(T);
                for (auto& x : xs) {
                    x.resize(q);
                    uniform_fill(rng, -1.0, 1.0, x);
                }
                Tensor1 h0_hat(k * n);
                if (act == Act::relu)
                    uniform_fill(rng, 0.5, 1.5, h0_hat);
                else
                    uniform_fill(rng, -0.8, 0.8, h0_hat);

                // Feasible targets: whatever the flat net itself produces.
                const DerivedInit di = forward_derived_init(flat, xs, h0_hat);
                const Tensor1 lifted = lift_initial_state(flat, di.stacked, kReplayTol);

                // Replay the lifted state and measure the reproduction error.
                const DerivedInit replay = forward_derived_init(flat, xs, lifted);
                for (std::size_t i = 0; i < di.stacked.h.size(); ++i)
                    worst_replay =
                        std::max(worst_replay, max_abs_diff(replay.stacked.h[i], di.stacked.h[i]));

                const EquivalenceReport rep = verify_equivalence(stacked, di.stacked, flat, lifted,
                                                                 Tensor1(), xs, kEquivTol);
                worst_output = std::max(worst_output, rep.max_output_diff);
                ++cases;
                if (worst_replay > kReplayTol || !rep.pass) {
                    Outcome o;
                    o.detail = std::string("lift failed for ") +
                               (act == Act::relu ? "relu" : "identity") + " k=" +
                               std::to_string(k) + " seed=" + std::to_string(seed) + ": replay " +
                               num(worst_replay) + ", output diff " + num(rep.max_output_diff);
                    return o;
                }
            }
        }
    }

    // Negative control: a tanh target outside (-1,1) must raise the
    // documented range error, identifying the offending block.
    bool range_error = false;
    std::string control;
    {
        Rng rng(9900);
        const StackedParams stacked = make_rnn_stack(2, 2, 2, 2, Activation{Act::tanh}, rng);
        const FlattenedNet flat = flatten_stacked_rnn(stacked);
        InitialState bad;
        bad.h = {Tensor1{0.3, -0.2}, Tensor1{1.5, 0.0}};
        try {
            (void)lift_initial_state(flat, bad, kReplayTol);
            control = "no error raised for tanh target 1.5";
        } catch (const LiftError& e) {
            range_error = std::string(e.what()).find("range") != std::string::npos;
            control = std::string("tanh target 1.5 -> block ") + std::to_string(e.block) +
                      (range_error ? " range error" : std::string(" unexpected error: ") +
                                                          e.what());
        }
    }

    Outcome o;
    o.pass = range_error;
    o.detail = std::to_string(cases) + " identity/relu lifts, replay <= " + num(worst_replay) +
               " (limit 1e-8), equivalence output diff <= " + num(worst_output) +
               "; negative control: " + control;
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 4: BPTT gradients vs central finite differences
// ---------------------------------------------------------------------------

double bptt_loss_only(const Model& m, const std::vector<Tensor1>& xs, const SeqTargets& tg,
                      const std::vector<std::uint8_t>& mask) {
    ModelGrads junk = ModelGrads::zeros_like(m);
    return bptt(m, xs, tg, mask, LossKind::softmax_cross_entropy, 1.0, junk);
}

double max_rel_grad_err(Model model, const std::vector<Tensor1>& xs, const SeqTargets& tg,
                        const std::vector<std::uint8_t>& mask) {
    constexpr double kStep = 1e-5;
    ModelGrads grads = ModelGrads::zeros_like(model);
    (void)bptt(model, xs, tg, mask, LossKind::softmax_cross_entropy, 1.0, grads);
    std::vector<TensorView> pv, gv;
    collect_views(model, pv);
    collect_views(grads, gv);
    double worst = 0.0;
    for (std::size_t v = 0; v < pv.size(); ++v) {
        for (std::size_t i = 0; i < pv[v].size; ++i) {
            double& theta = pv[v].data[i];
            const double saved = theta;
            theta = saved + kStep;
            const double up = bptt_loss_only(model, xs, tg, mask);
            theta = saved - kStep;
            const double dn = bptt_loss_only(model, xs, tg, mask);
            theta = saved;
            const double fd = (up - dn) / (2.0 * kStep);
            worst = std::max(worst, std::abs(gv[v].data[i] - fd) / (1.0 + std::abs(fd)));
        }
    }
    return worst;
}

Outcome criterion4() {
    constexpr double kTol = 1e-5;
    double worst = 0.0;
    std::size_t checks = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (int arch = 0; arch < 4; ++arch) {
            Rng rng(4000 + 31 * seed + arch);
            Model m;
            std::size_t T = 0, q = 2, out = 2;
            std::vector<std::uint8_t> mask;
            switch (arch) {
                case 0: // plain RNN, full mask
                    m.kind = ModelKind::recurrent;
                    m.layers.emplace_back(RnnParams::init(3, q, Activation{Act::tanh}, rng));
                    m.output = OutputParams::init(3, 3, Activation{Act::softmax}, rng);
                    out = 3;
                    T = 6;
                    mask.assign(T, 1);
                    break;
                case 1: // LSTM with a hole in the mask
                    m.kind = ModelKind::recurrent;
                    m.layers.emplace_back(LstmParams::init(2, q, rng));
                    m.output = OutputParams::init(2, 2, Activation{Act::softmax}, rng);
                    T = 4;
                    mask = {1, 0, 1, 1};
                    break;
                case 2: // delayed LSTM: zero padding plus masked positions
                    m.kind = ModelKind::recurrent;
                    m.layers.emplace_back(LstmParams::init(2, q, rng));
                    m.output = OutputParams::init(2, 2, Activation{Act::softmax}, rng);
                    m.delay = 3;
                    T = 5;
                    mask = {1, 0, 1, 1, 0};
                    break;
                default: // bidirectional LSTM
                    m.kind = ModelKind::bidirectional;
                    m.layers.emplace_back(LstmParams::init(2, q, rng));
                    m.layers.emplace_back(LstmParams::init(2, q, rng));
                    m.output = OutputParams::init(2, 4, Activation{Act::softmax}, rng);
                    T = 4;
                    mask = {0, 1, 0, 1};
                    break;
            }
            std::vector<Tensor1> xs(T);
            for (auto& x : xs) {
                x.resize(q);
                uniform_fill(rng, -1.0, 1.0, x);
            }
            SeqTargets tg;
            tg.classes.resize(T);
            for (auto& c : tg.classes) c = static_cast<int>(rng.next_below(out));
            worst = std::max(worst, max_rel_grad_err(std::move(m), xs, tg, mask));
            ++checks;
        }
    }
    Outcome o;
    o.pass = worst <= kTol;
    o.detail = std::to_string(checks) +
               " model/seed cases (rnn, lstm, delayed lstm with mask+padding, bi-lstm), max "
               "relative gradient error " +
               num(worst) + " (limit 1e-5)";
    return o;
}

// ---------------------------------------------------------------------------
// Shared training helper for criteria 5-7
// ---------------------------------------------------------------------------

struct TrainedEval {
    double metric = 0.0;
    double loss = 0.0;
    std::size_t epochs = 0;
};

TrainedEval train_and_eval(const TaskDataset& data, ArchId arch, std::size_t hidden, int delay,
                           std::uint64_t seed, const TrainConfig& tc, const std::string& tag) {
    ExperimentConfig cfg;
    cfg.arch = arch;
    cfg.hidden = hidden;
    cfg.delay = delay;
    cfg.layers = 1;
    cfg.seed = seed;
    const Model init = build_model(cfg, data);
    const LossKind loss = loss_for_task(data.task);
    const TrainResult res = train_loop(init, data, tc, loss, progress_cb(tag));
    const EvalResult ev = evaluate_split(res.best_model, data, Split::test, loss);
    return {ev.metric_value, ev.loss, res.epochs_run};
}

// ---------------------------------------------------------------------------
// Criterion 5: sequence reversal accuracy vs delay
// ---------------------------------------------------------------------------

Outcome criterion5() {
    // (a) closed-form expected true-positive rates at T=20, V=4.
    const struct {
        std::size_t d;
        double tpr;
    } pins[] = {{0, 0.625}, {4, 0.70}, {9, 0.8125}, {14, 0.8875}, {19, 1.0}};
    for (const auto& p : pins) {
        if (std::abs(expected_reversal_tpr(20, 4, p.d) - p.tpr) > 1e-12) {
            Outcome o;
            o.detail = "expected_reversal_tpr(20,4," + std::to_string(p.d) + ") != " + num(p.tpr);
            return o;
        }
    }

    Rng gen(4242);
    const TaskDataset data = gen_reversal(gen, 2000, 500, 500, 20, 4);
    const int delays[] = {0, 4, 9, 14, 19};
    std::vector<double> acc;
    std::string runs;
    for (int d : delays) {
        TrainConfig tc;
        tc.learning_rate = 2e-3;
        tc.batch_size = 20;
        tc.clip_norm = 5.0;
        tc.max_epochs = 300;
        tc.early_stop_patience = 15;
        tc.early_stop_delta = 5e-4;
        tc.seed = 1000 + static_cast<std::uint64_t>(d);
        if (d == 19) tc.stop_below_val_loss = 0.02; // effectively perfect
        const ArchId arch = d == 0 ? ArchId::lstm : ArchId::d_lstm;
        const TrainedEval r = train_and_eval(data, arch, 64, d, 100 + d, tc,
                                             "reversal d=" + std::to_string(d));
        acc.push_back(r.metric);
        runs += (runs.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + ": " +
                num(r.metric) + " (" + std::to_string(r.epochs) + " ep)";
    }

    const bool causal_matches_bound = std::abs(acc[0] - 0.625) <= 0.04;
    const bool full_delay_solves = acc[4] >= 0.99;
    bool nondecreasing = true;
    for (std::size_t i = 1; i < acc.size(); ++i)
        if (acc[i] < acc[i - 1] - 0.02) nondecreasing = false;

    Outcome o;
    o.pass = causal_matches_bound && full_delay_solves && nondecreasing;
    o.detail = "test accuracy " + runs + "; d=0 within 0.04 of 0.625: " +
               (causal_matches_bound ? "yes" : "NO") +
               ", d=19 >= 0.99: " + (full_delay_solves ? "yes" : "NO") +
               ", nondecreasing (0.02 band): " + (nondecreasing ? "yes" : "NO");
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 6: sine regression, causal vs delayed
// ---------------------------------------------------------------------------

TaskDataset sine_data(std::size_t acausal, std::uint64_t seed) {
    Rng rng(seed);
    SineTaskSpec spec;
    spec.gamma = 2.0;
    spec.acausal = acausal;
    spec.causal = 12;
    spec.seq_len = 50;
    return gen_sine(rng, spec, 2000, 500, 500);
}

TrainConfig sine_tc(std::uint64_t seed, bool expect_solvable) {
    TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.batch_size = 20;
    tc.clip_norm = 5.0;
    tc.seed = seed;
    if (expect_solvable) {
        tc.max_epochs = 400;
        tc.early_stop_patience = 20;
        tc.early_stop_delta = 1e-5;
        tc.stop_below_val_loss = 5e-4;
    } else {
        // The target is out of reach; run long enough to converge to the
        // causal-information floor and stop on the plateau.
        tc.max_epochs = 80;
        tc.early_stop_patience = 10;
        tc.early_stop_delta = 1e-4;
    }
    return tc;
}

Outcome criterion6() {
    const TaskDataset a8 = sine_data(8, 5248);
    const TrainedEval delayed =
        train_and_eval(a8, ArchId::d_lstm, 64, 10, 610, sine_tc(1610, true), "sine a=8 d=10");
    const TrainedEval causal =
        train_and_eval(a8, ArchId::lstm, 64, 0, 600, sine_tc(1600, false), "sine a=8 d=0");

    // Delay boundary: with d=5, acausality 5 is within reach, 6 is not.
    const TaskDataset a5 = sine_data(5, 5245);
    const TaskDataset a6 = sine_data(6, 5246);
    const TrainedEval reach =
        train_and_eval(a5, ArchId::d_lstm, 64, 5, 605, sine_tc(1605, true), "sine a=5 d=5");
    const TrainedEval beyond =
        train_and_eval(a6, ArchId::d_lstm, 64, 5, 606, sine_tc(1606, false), "sine a=6 d=5");

    const bool delayed_fits = delayed.metric <= 1e-3;
    const bool causal_worse = causal.metric >= 10.0 * delayed.metric;
    const bool boundary = reach.metric <= beyond.metric / 5.0;

    Outcome o;
    o.pass = delayed_fits && causal_worse && boundary;
    o.detail = "test mse: d=10 " + num(delayed.metric) + " (limit 1e-3), d=0 " +
               num(causal.metric) + " (>= 10x: " + (causal_worse ? "yes" : "NO") +
               "); boundary d=5: a=5 " + num(reach.metric) + " vs a=6 " + num(beyond.metric) +
               " (<= 1/5: " + (boundary ? "yes" : "NO") + ")";
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 7: masked character prediction, BPC ordering over delays
// ---------------------------------------------------------------------------

Outcome criterion7() {
    Rng corpus_rng(6001);
    const std::string text = synthesize_corpus(corpus_rng, 1000000);
    Rng gen(6002);
    const TaskDataset data = gen_masked_corpus(gen, text, 0.2, 180, {0.9, 0.05, 0.05});

    const auto run = [&](ArchId arch, int delay, std::uint64_t seed) {
        TrainConfig tc;
        tc.learning_rate = 1e-3;
        tc.batch_size = 16;
        tc.max_epochs = 5;
        tc.early_stop_patience = 0; // fixed epoch budget
        tc.seed = seed + 1000;
        return train_and_eval(data, arch, 128, delay, seed,
                              tc, "masked d=" + std::to_string(delay));
    };
    const TrainedEval d0 = run(ArchId::lstm, 0, 700);
    const TrainedEval d1 = run(ArchId::d_lstm, 1, 701);
    const TrainedEval d8 = run(ArchId::d_lstm, 8, 708);

    const bool gap1 = d1.metric <= d0.metric - 0.05;
    const bool gap8 = d8.metric <= d1.metric - 0.05;
    Outcome o;
    o.pass = gap1 && gap8;
    o.detail = "test bpc: d=0 " + num(d0.metric) + ", d=1 " + num(d1.metric) + ", d=8 " +
               num(d8.metric) + "; each step down >= 0.05 bpc: " +
               (gap1 ? "yes" : "NO d0->d1") + std::string("/") + (gap8 ? "yes" : "NO d1->d8");
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 8: runtime trend at matched parameter counts
// ---------------------------------------------------------------------------

Outcome criterion8() {
    ExperimentConfig cfg;
    cfg.command = Command::benchmark;
    cfg.seed = 8100;
    cfg.bench_input_width = 28;
    cfg.bench_output_width = 27;
    cfg.bench_seq_len = 180;
    cfg.bench_batch_size = 16;
    cfg.bench_warmup_batches = 10;
    cfg.bench_timed_batches = 200;
    cfg.bench_match_pct = 2.0;

    cfg.bench_archs = {"d_lstm:n=12:d=8", "bi_lstm:k=2:n=5"};
    const auto pair_rows = run_benchmark(cfg);
    const double ratio = pair_rows[1].median_ms / pair_rows[0].median_ms;

    cfg.bench_archs = {"d_lstm:n=12:d=1", "d_lstm:n=12:d=5", "d_lstm:n=12:d=8",
                       "d_lstm:n=12:d=10"};
    const auto delay_rows = run_benchmark(cfg);
    double lo = delay_rows[0].median_ms, hi = delay_rows[0].median_ms;
    for (const auto& r : delay_rows) {
        lo = std::min(lo, r.median_ms);
        hi = std::max(hi, r.median_ms);
    }
    const double spread = (hi - lo) / lo;

    Outcome o;
    o.pass = ratio >= 1.5 && spread <= 0.15;
    o.detail = "bi-lstm/d-lstm median latency ratio " + num(ratio) + " (params " +
               std::to_string(pair_rows[1].params) + " vs " +
               std::to_string(pair_rows[0].params) + ", need >= 1.5); delay sweep spread " +
               num(100.0 * spread) + "% (limit 15%)";
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical reruns
// ---------------------------------------------------------------------------

std::string strip_wall_ms(const std::string& csv) {
    std::istringstream is(csv);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        f.push_back(cur);
        if (f.size() >= 7) f[6] = "-";
        for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
        os << '\n';
    }
    return os.str();
}

Outcome criterion9() {
    const fs::path root = work_dir() / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);

    // gen-data twice per task: the dataset files must match byte for byte.
    std::size_t dataset_checks = 0;
    for (TaskKind task : {TaskKind::reversal, TaskKind::sine, TaskKind::masked_lm}) {
        std::vector<std::string> bytes;
        for (int run = 0; run < 2; ++run) {
            ExperimentConfig cfg;
            cfg.command = Command::gen_data;
            cfg.seed = 90;
            cfg.task = task;
            cfg.train_sequences = 8;
            cfg.val_sequences = 3;
            cfg.test_sequences = 3;
            cfg.seq_len = task == TaskKind::sine ? 12 : 8;
            cfg.vocab = 3;
            cfg.acausal = 2;
            cfg.causal = 3;
            cfg.corpus_chars = 2000;
            const fs::path out =
                root / (std::string(task_name(task)) + "_" + std::to_string(run) + ".txt");
            cfg.dataset_path = out.string();
            if (quiet([&] { return cmd_gen_data(cfg); }) != 0) {
                Outcome o;
                o.detail = std::string("gen-data failed for ") + task_name(task);
                return o;
            }
            bytes.push_back(read_file(out));
        }
        if (bytes[0] != bytes[1] || bytes[0].empty()) {
            Outcome o;
            o.detail = std::string("dataset bytes differ across reruns for ") + task_name(task);
            return o;
        }
        ++dataset_checks;
    }

    // train twice: metrics (minus wall-clock) and checkpoints must match.
    std::vector<fs::path> run_dirs;
    for (int run = 0; run < 2; ++run) {
        ExperimentConfig cfg;
        cfg.command = Command::train;
        cfg.seed = 91;
        cfg.out_dir = (root / ("train_" + std::to_string(run))).string();
        cfg.run_id = "rerun";
        cfg.task = TaskKind::reversal;
        cfg.train_sequences = 30;
        cfg.val_sequences = 10;
        cfg.test_sequences = 10;
        cfg.seq_len = 5;
        cfg.vocab = 3;
        cfg.arch = ArchId::lstm;
        cfg.hidden = 4;
        cfg.train.batch_size = 10;
        cfg.train.max_epochs = 2;
        cfg.train.early_stop_patience = 0;
        cfg.train.seed = cfg.seed;
        if (quiet([&] { return cmd_train(cfg); }) != 0) {
            Outcome o;
            o.detail = "train command failed";
            return o;
        }
        run_dirs.push_back(fs::path(cfg.out_dir) / cfg.run_id);
    }
    const bool metrics_equal = strip_wall_ms(read_file(run_dirs[0] / "metrics.csv")) ==
                               strip_wall_ms(read_file(run_dirs[1] / "metrics.csv"));
    const bool best_equal = read_file(run_dirs[0] / "checkpoint_best.txt") ==
                            read_file(run_dirs[1] / "checkpoint_best.txt");
    const bool final_equal = read_file(run_dirs[0] / "checkpoint_final.txt") ==
                             read_file(run_dirs[1] / "checkpoint_final.txt");

    Outcome o;
    o.pass = metrics_equal && best_equal && final_equal;
    o.detail = std::to_string(dataset_checks) +
               " gen-data reruns byte-identical; train rerun: metrics (minus wall_ms) " +
               (metrics_equal ? "identical" : "DIFFER") + ", checkpoints " +
               ((best_equal && final_equal) ? "identical" : "DIFFER");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--progress") {
            g_progress = true;
        } else if (arg == "--only" && i + 1 < argc) {
            std::string list = argv[++i];
            std::replace(list.begin(), list.end(), ',', ' ');
            std::istringstream is(list);
            int n = 0;
            while (is >> n) only.push_back(n);
        } else {
            std::cerr << "usage: " << argv[0] << " [--only N[,N...]] [--progress]\n";
            return 2;
        }
    }

    struct Criterion {
        int id;
        const char* title;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {1, "stacked RNN == flattened delayed RNN", &criterion1},
        {2, "stacked LSTM == flattened delayed LSTM", &criterion2},
        {3, "initial-state lifting", &criterion3},
        {4, "gradients match finite differences", &criterion4},
        {5, "reversal accuracy tracks delay", &criterion5},
        {6, "sine regression needs lookahead", &criterion6},
        {7, "masked-character bpc improves with delay", &criterion7},
        {8, "latency trend at matched parameters", &criterion8},
        {9, "byte-identical reruns", &criterion9},
    };

    bool all_pass = true;
    for (const Criterion& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        all_pass = all_pass && o.pass;
        std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.title
                  << " — " << o.detail << std::endl;
    }
    return all_pass ? 0 : 1;
}
