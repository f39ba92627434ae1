#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "drnn/tasks.hpp"

using namespace drnn;

// ---------------------------------------------------------------------------
// Reversal
// ---------------------------------------------------------------------------

TEST_CASE("gen_reversal labels every sequence with its reversed input") {
    Rng rng(7);
    const std::size_t T = 5, V = 3;
    TaskDataset d = gen_reversal(rng, 4, 3, 2, T, V);
    CHECK(d.task == TaskKind::reversal);
    CHECK(d.input_width == V);
    CHECK(d.num_classes == V);
    CHECK(d.seq_len == T);
    CHECK(d.train.size() == 4);
    CHECK(d.val.size() == 3);
    CHECK(d.test.size() == 2);
    for (const auto* split : {&d.train, &d.val, &d.test}) {
        for (const auto& s : *split) {
            REQUIRE(s.input_ids.size() == T);
            REQUIRE(s.label_ids.size() == T);
            REQUIRE(s.mask.size() == T);
            for (std::size_t t = 0; t < T; ++t) {
                CHECK(s.label_ids[t] == s.input_ids[T - 1 - t]);
                CHECK(s.input_ids[t] >= 0);
                CHECK(s.input_ids[t] < static_cast<int>(V));
                CHECK(s.mask[t] == 1);
            }
        }
    }
    CHECK_THROWS_AS((void)gen_reversal(rng, 1, 1, 1, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_reversal(rng, 1, 1, 1, 2, 0), std::invalid_argument);
}

TEST_CASE("gen_reversal is deterministic under a fixed seed") {
    Rng a(123), b(123);
    TaskDataset da = gen_reversal(a, 3, 2, 2, 6, 4);
    TaskDataset db = gen_reversal(b, 3, 2, 2, 6, 4);
    for (std::size_t i = 0; i < da.train.size(); ++i)
        CHECK(da.train[i].input_ids == db.train[i].input_ids);
    for (std::size_t i = 0; i < da.test.size(); ++i)
        CHECK(da.test[i].input_ids == db.test[i].input_ids);
}

TEST_CASE("expected_reversal_tpr pinned values, cap, and monotonicity") {
    CHECK(expected_reversal_tpr(20, 4, 0) == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(expected_reversal_tpr(20, 4, 4) == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(expected_reversal_tpr(20, 4, 9) == doctest::Approx(0.8125).epsilon(1e-12));
    CHECK(expected_reversal_tpr(20, 4, 14) == doctest::Approx(0.8875).epsilon(1e-12));
    CHECK(expected_reversal_tpr(20, 4, 19) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(expected_reversal_tpr(20, 4, 1000) == 1.0);  // probability cap
    CHECK(expected_reversal_tpr(20, 1, 3) == 1.0);     // single symbol is always right
    for (std::size_t d = 1; d < 40; ++d)
        CHECK(expected_reversal_tpr(20, 4, d) >= expected_reversal_tpr(20, 4, d - 1));
    CHECK_THROWS_AS((void)expected_reversal_tpr(0, 4, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Sine regression
// ---------------------------------------------------------------------------

TEST_CASE("gen_sine with gamma=0 produces all-zero labels") {
    Rng rng(11);
    SineTaskSpec spec;
    spec.gamma = 0.0;
    spec.acausal = 2;
    spec.causal = 3;
    spec.seq_len = 10;
    TaskDataset d = gen_sine(rng, spec, 3, 2, 2);
    for (const auto& s : d.train)
        for (double y : s.label_reals) CHECK(y == 0.0);
}

TEST_CASE("a single causal tap with unit weight gives y_t = sin(gamma x_t)") {
    TaskDataset d;
    d.task = TaskKind::sine;
    d.gamma = 2.0;
    d.acausal = 0;
    d.causal = 1;
    d.filter = Tensor1{1.0};
    const std::vector<double> xs{0.5, -0.3, 0.8};
    std::vector<double> ys;
    sine_labels_for(d, xs, ys);
    REQUIRE(ys.size() == 3);
    for (std::size_t t = 0; t < 3; ++t)
        CHECK(ys[t] == doctest::Approx(std::sin(2.0 * xs[t])).epsilon(1e-15));
}

TEST_CASE("sine labels match an independent zero-padded filter oracle") {
    TaskDataset d;
    d.task = TaskKind::sine;
    d.gamma = 1.5;
    d.acausal = 2; // future taps
    d.causal = 3;  // past taps, filter length 5
    d.filter = Tensor1{0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<double> xs{0.5, -0.3, 0.8, 0.1};
    std::vector<double> ys;
    sine_labels_for(d, xs, ys);

    // Oracle: copy the signal into a padded buffer and inner-product windows.
    const long c = 3, a = 2, T = 4;
    std::vector<double> padded(static_cast<std::size_t>(T) + c - 1 + a, 0.0);
    for (long t = 0; t < T; ++t) padded[static_cast<std::size_t>(t + c - 1)] = xs[static_cast<std::size_t>(t)];
    for (long t = 0; t < T; ++t) {
        double acc = 0.0;
        for (long w = 0; w < c + a; ++w)
            acc += d.filter[static_cast<std::size_t>(w)] * padded[static_cast<std::size_t>(t + w)];
        CHECK(ys[static_cast<std::size_t>(t)] ==
              doctest::Approx(std::sin(1.5 * acc)).epsilon(1e-15));
    }
}

TEST_CASE("gen_sine draws a uniform filter when none is given and stays regenerable") {
    Rng rng(13);
    SineTaskSpec spec;
    spec.gamma = 2.0;
    spec.acausal = 8;
    spec.causal = 12;
    spec.seq_len = 20;
    TaskDataset d = gen_sine(rng, spec, 4, 2, 2);
    REQUIRE(d.filter.size() == 20);
    for (std::size_t i = 0; i < d.filter.size(); ++i) {
        CHECK(d.filter[i] >= 0.0);
        CHECK(d.filter[i] < 1.0);
    }
    // Labels regenerate bit-exactly from the stored inputs and filter.
    for (const auto* split : {&d.train, &d.val, &d.test}) {
        for (const auto& s : *split) {
            std::vector<double> ys;
            sine_labels_for(d, s.input_reals, ys);
            CHECK(ys == s.label_reals);
            for (auto m : s.mask) CHECK(m == 1);
        }
    }

    SineTaskSpec bad = spec;
    bad.filter = Tensor1{1.0}; // wrong length
    CHECK_THROWS_AS((void)gen_sine(rng, bad, 1, 1, 1), std::invalid_argument);
    SineTaskSpec none;
    none.acausal = 0;
    none.causal = 0;
    CHECK_THROWS_AS((void)gen_sine(rng, none, 1, 1, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Character vocabulary and corpus handling
// ---------------------------------------------------------------------------

TEST_CASE("CharVocab encodes a..z and space and rejects everything else") {
    CHECK(CharVocab::encode('a') == 0);
    CHECK(CharVocab::encode('z') == 25);
    CHECK(CharVocab::encode(' ') == 26);
    for (int id = 0; id < 27; ++id) CHECK(CharVocab::encode(CharVocab::decode(id)) == id);
    CHECK_THROWS_AS((void)CharVocab::encode('A'), std::invalid_argument);
    CHECK_THROWS_AS((void)CharVocab::encode('!'), std::invalid_argument);
    CHECK_THROWS_AS((void)CharVocab::decode(27), std::invalid_argument);
    CHECK_THROWS_AS((void)CharVocab::decode(-1), std::invalid_argument);
    CHECK(CharVocab::content_classes == 27);
    CHECK(CharVocab::mask_id == 27);
    CHECK(CharVocab::input_symbols == 28);
}

TEST_CASE("normalize_corpus lowercases letters and blanks everything else") {
    CHECK(normalize_corpus("Hello, World!") == "hello  world ");
    CHECK(normalize_corpus("abc") == "abc");
    CHECK(normalize_corpus("A1b\nC") == "a b c");
    CHECK(normalize_corpus("") == "");
}

TEST_CASE("synthesize_corpus is deterministic, sized exactly, and normalized") {
    Rng a(21), b(21), c(22);
    const std::string s1 = synthesize_corpus(a, 5000);
    const std::string s2 = synthesize_corpus(b, 5000);
    const std::string s3 = synthesize_corpus(c, 5000);
    CHECK(s1 == s2);
    CHECK(s1 != s3);
    CHECK(s1.size() == 5000);
    bool has_space = false;
    for (char ch : s1) {
        const bool ok = (ch >= 'a' && ch <= 'z') || ch == ' ';
        REQUIRE(ok);
        has_space = has_space || ch == ' ';
    }
    CHECK(has_space);
}

TEST_CASE("gen_masked_corpus with mask_prob=0 copies the text unmasked") {
    Rng rng(31);
    const std::string text = synthesize_corpus(rng, 400);
    Rng gen(32);
    TaskDataset d = gen_masked_corpus(gen, text, 0.0, 20, {0.5, 0.25, 0.25});
    CHECK(d.input_width == 28);
    CHECK(d.num_classes == 27);
    CHECK(d.train.size() == 10); // 200 chars / 20
    CHECK(d.val.size() == 5);
    CHECK(d.test.size() == 5);
    for (const auto& s : d.train) {
        for (std::size_t t = 0; t < 20; ++t) {
            CHECK(s.mask[t] == 0);
            CHECK(s.input_ids[t] == s.label_ids[t]);
        }
    }
    // The first window reproduces the text prefix.
    for (std::size_t t = 0; t < 20; ++t)
        CHECK(CharVocab::decode(d.train[0].label_ids[t]) == text[t]);
}

TEST_CASE("gen_masked_corpus masks the requested fraction with labels preserved") {
    Rng rng(41);
    const std::string text = synthesize_corpus(rng, 1000000);
    Rng gen(42);
    TaskDataset d = gen_masked_corpus(gen, text, 0.2, 180, {0.9, 0.05, 0.05});
    CHECK(d.train.size() == 900000 / 180);

    std::size_t masked = 0, total = 0;
    for (const auto* split : {&d.train, &d.val, &d.test}) {
        for (const auto& s : *split) {
            for (std::size_t t = 0; t < s.length(); ++t) {
                ++total;
                if (s.mask[t]) {
                    ++masked;
                    CHECK(s.input_ids[t] == CharVocab::mask_id);
                } else {
                    CHECK(s.input_ids[t] == s.label_ids[t]);
                }
            }
        }
    }
    const double fraction = static_cast<double>(masked) / static_cast<double>(total);
    CHECK(fraction > 0.195);
    CHECK(fraction < 0.205);

    // Labels always carry the pre-mask character: spot-check against the text.
    for (std::size_t t = 0; t < 180; ++t)
        CHECK(CharVocab::decode(d.train[0].label_ids[t]) == text[t]);
}

TEST_CASE("gen_masked_corpus validates its arguments") {
    Rng rng(51);
    CHECK_THROWS_AS((void)gen_masked_corpus(rng, "abc", 0.2, 0, {0.8, 0.1, 0.1}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)gen_masked_corpus(rng, "abc", 1.5, 2, {0.8, 0.1, 0.1}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)gen_masked_corpus(rng, "abc", 0.2, 2, {0.8, 0.1, 0.2}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)gen_masked_corpus(rng, "ABC", 0.2, 2, {0.8, 0.1, 0.1}),
                    std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

TEST_CASE("per_token_accuracy counts only masked positions") {
    CHECK(per_token_accuracy({1, 2, 3}, {1, 2, 3}, {1, 1, 1}) == 1.0);
    CHECK(per_token_accuracy({1, 2, 3}, {0, 0, 0}, {1, 1, 1}) == 0.0);
    CHECK(per_token_accuracy({1, 0, 3}, {1, 2, 3}, {1, 1, 0}) == 0.5);
    CHECK(per_token_accuracy({9, 2, 9}, {1, 2, 3}, {0, 1, 0}) == 1.0);
    CHECK_THROWS_AS((void)per_token_accuracy({1}, {1}, {0}), std::invalid_argument);
    CHECK_THROWS_AS((void)per_token_accuracy({1, 2}, {1}, {1}), std::invalid_argument);
}

TEST_CASE("input_vector_into expands one-hot ids and slices real rows") {
    TaskDataset oh;
    oh.input_encoding = InputEncoding::one_hot;
    oh.input_width = 4;
    Sequence s;
    s.input_ids = {2, 0};
    Tensor1 x;
    input_vector_into(oh, s, 0, x);
    CHECK(x.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == (i == 2 ? 1.0 : 0.0));
    CHECK_THROWS_AS(input_vector_into(oh, s, 5, x), std::out_of_range);
    s.input_ids = {7};
    CHECK_THROWS_AS(input_vector_into(oh, s, 0, x), std::out_of_range);

    TaskDataset re;
    re.input_encoding = InputEncoding::real;
    re.input_width = 2;
    Sequence r;
    r.input_reals = {0.1, 0.2, 0.3, 0.4};
    input_vector_into(re, r, 1, x);
    CHECK(x.size() == 2);
    CHECK(x[0] == 0.3);
    CHECK(x[1] == 0.4);
}

TEST_CASE("task names parse and print consistently") {
    for (TaskKind t : {TaskKind::reversal, TaskKind::sine, TaskKind::masked_lm})
        CHECK(parse_task(task_name(t)) == t);
    CHECK_THROWS_AS((void)parse_task("copy"), std::invalid_argument);
    CHECK(std::string(split_name(Split::train)) == "train");
    CHECK(std::string(split_name(Split::val)) == "val");
    CHECK(std::string(split_name(Split::test)) == "test");
}
