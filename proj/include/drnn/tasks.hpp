#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "drnn/rng.hpp"
#include "drnn/tensor.hpp"

namespace drnn {

enum class TaskKind { reversal, sine, masked_lm };

const char* task_name(TaskKind t);
TaskKind parse_task(const std::string& name);

// One training item. Categorical tasks fill input_ids/label_ids; the sine
// task fills the real-valued vectors. mask selects loss positions.
struct Sequence {
    std::vector<int> input_ids;
    std::vector<double> input_reals;
    std::vector<int> label_ids;
    std::vector<double> label_reals;
    std::vector<std::uint8_t> mask;

    std::size_t length() const {
        return input_ids.empty() ? input_reals.size() : input_ids.size();
    }
};

enum class Split { train, val, test };
const char* split_name(Split s);

enum class InputEncoding { one_hot, real };

struct TaskDataset {
    TaskKind task = TaskKind::reversal;
    InputEncoding input_encoding = InputEncoding::one_hot;
    std::size_t input_width = 0;  // one-hot alphabet size, or reals per step
    bool class_labels = true;
    std::size_t num_classes = 0;  // classification only
    std::size_t label_width = 0;  // regression only
    std::size_t seq_len = 0;
    std::uint64_t seed = 0;       // generation seed (provenance)
    double mask_prob = 0.0;       // masked_lm only
    double gamma = 0.0;           // sine only
    std::size_t acausal = 0;      // sine only
    std::size_t causal = 0;       // sine only
    Tensor1 filter;               // sine only, length acausal+causal

    std::vector<Sequence> train, val, test;

    const std::vector<Sequence>& split(Split s) const;
};

// Materializes the step-t input vector (one-hot expansion or real slice).
void input_vector_into(const TaskDataset& data, const Sequence& seq, std::size_t t, Tensor1& out);

// Sequence reversal: V-ary symbols drawn uniformly, labels are the inputs
// reversed, inputs one-hot of width V, mask all-true.
TaskDataset gen_reversal(Rng& rng, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                         std::size_t T, std::size_t V);

// Closed-form expected true-positive rate of an optimal fixed-strategy
// predictor on reversal with delay d: ½(1+1/V) + ⌊(d+1)/2⌋·(1/T)·(1−1/V),
// capped at 1 (it is a probability).
double expected_reversal_tpr(std::size_t T, std::size_t V, std::size_t d);

struct SineTaskSpec {
    double gamma = 1.0;
    std::size_t acausal = 0; // future taps a
    std::size_t causal = 0;  // past taps c (filter length a+c)
    Tensor1 filter;          // drawn from U[0,1) if empty
    std::size_t seq_len = 50;
};

// y_t = sin(gamma · Σ_{j=−c+1..a} w_{j+c} x_{t+j}            (x outside 1..T is 0)
TaskDataset gen_sine(Rng& rng, const SineTaskSpec& spec, std::size_t n_train, std::size_t n_val,
                     std::size_t n_test);

// Recomputes the label sequence for stored inputs from (filter, gamma);
// used both by the generator and the regeneration invariance check.
void sine_labels_for(const TaskDataset& data, const std::vector<double>& xs,
                     std::vector<double>& ys);

// 27 content characters (a..z, space) plus a mask token; inputs one-hot over
// 28 symbols, outputs over the 27 content classes.
struct CharVocab {
    static constexpr std::size_t content_classes = 27;
    static constexpr int mask_id = 27;
    static constexpr std::size_t input_symbols = 28;

    static int encode(char c);   // requires a..z or space
    static char decode(int id);  // 0..26
};

// Lowercases letters; every other byte becomes a space.
std::string normalize_corpus(std::string_view bytes);

// Deterministic English-like filler text: words sampled from a built-in
// vocabulary with Zipf-style weights, separated by single spaces. Stands in
// for a real corpus where none is available.
std::string synthesize_corpus(Rng& rng, std::size_t n_chars);

// Splits the text contiguously by split_fractions, chops each split into
// non-overlapping seq_len windows, and masks each character independently
// with probability mask_prob (input id 27, label = original character).
TaskDataset gen_masked_corpus(Rng& rng, std::string_view text, double mask_prob,
                              std::size_t seq_len, std::array<double, 3> split_fractions);

// Fraction of mask-true positions where preds matches labels.
double per_token_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                          const std::vector<std::uint8_t>& mask);

} // namespace drnn
