#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drnn/serialize.hpp"

using namespace drnn;

namespace {

Model bi_rnn_model(std::size_t n, std::size_t q, std::size_t m, Rng& rng) {
    Model model;
    model.kind = ModelKind::bidirectional;
    model.layers.emplace_back(RnnParams::init(n, q, Activation{Act::tanh}, rng));
    model.layers.emplace_back(RnnParams::init(n, q, Activation{Act::tanh}, rng));
    model.output = OutputParams::init(m, 2 * n, Activation{Act::softmax}, rng);
    return model;
}

Model stacked_lstm_model(std::size_t n, std::size_t q, std::size_t m, Rng& rng, int delay) {
    Model model;
    model.kind = ModelKind::recurrent;
    model.layers.emplace_back(LstmParams::init(n, q, rng));
    model.layers.emplace_back(LstmParams::init(n, n, rng));
    model.output = OutputParams::init(m, n, Activation{Act::softmax}, rng);
    model.delay = delay;
    return model;
}

std::string saved_dataset(const TaskDataset& d) {
    std::ostringstream os;
    save_dataset(d, os);
    return os.str();
}

std::string saved_checkpoint(const Model& m) {
    std::ostringstream os;
    save_checkpoint(m, os);
    return os.str();
}

void check_dataset_round_trip(const TaskDataset& d) {
    const std::string first = saved_dataset(d);
    std::istringstream is(first);
    const TaskDataset back = load_dataset(is);
    CHECK(saved_dataset(back) == first);
    CHECK(back.task == d.task);
    CHECK(back.input_width == d.input_width);
    CHECK(back.train.size() == d.train.size());
    CHECK(back.val.size() == d.val.size());
    CHECK(back.test.size() == d.test.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        CHECK(back.train[i].input_ids == d.train[i].input_ids);
        CHECK(back.train[i].input_reals == d.train[i].input_reals);
        CHECK(back.train[i].label_ids == d.train[i].label_ids);
        CHECK(back.train[i].label_reals == d.train[i].label_reals);
        CHECK(back.train[i].mask == d.train[i].mask);
    }
}

} // namespace

TEST_CASE("format_double/parse_double round-trip is bit exact") {
    const double values[] = {0.0,   -0.0, 1.0,    0.1,       1.0 / 3.0, -2.5e-7,
                             1e300, 1e-300, 5e-324, 3.141592653589793, -123456.75};
    for (double v : values) {
        const double back = parse_double(format_double(v));
        CHECK(back == v);
        CHECK(std::signbit(back) == std::signbit(v));
    }
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.next_double() - 0.5) * std::pow(10.0, (i % 40) - 20);
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("parse_double rejects trailing junk and non-numbers") {
    CHECK_THROWS_AS((void)parse_double("abc"), IoError);
    CHECK_THROWS_AS((void)parse_double("1.5x"), IoError);
    CHECK_THROWS_AS((void)parse_double(""), IoError);
}

TEST_CASE("dataset save/load/save is byte-identical for all task kinds") {
    Rng r1(101);
    check_dataset_round_trip(gen_reversal(r1, 3, 2, 2, 6, 4));

    Rng r2(102);
    SineTaskSpec spec;
    spec.gamma = 2.0;
    spec.acausal = 2;
    spec.causal = 3;
    spec.seq_len = 8;
    check_dataset_round_trip(gen_sine(r2, spec, 3, 2, 2));

    Rng r3(103);
    const std::string text = synthesize_corpus(r3, 600);
    Rng r4(104);
    check_dataset_round_trip(gen_masked_corpus(r4, text, 0.25, 15, {0.5, 0.25, 0.25}));
}

TEST_CASE("checkpoint save/load/save is byte-identical and behavior-preserving") {
    Rng rng(201);
    std::vector<Model> models;
    {
        Model m;
        m.kind = ModelKind::recurrent;
        m.layers.emplace_back(RnnParams::init(3, 2, Activation{Act::relu}, rng));
        m.output = OutputParams::init(4, 3, Activation{Act::softmax}, rng);
        m.delay = 2;
        models.push_back(std::move(m));
    }
    models.push_back(stacked_lstm_model(3, 2, 4, rng, 1));
    models.push_back(bi_rnn_model(3, 2, 4, rng));

    for (const Model& m : models) {
        const std::string first = saved_checkpoint(m);
        std::istringstream is(first);
        const Model back = load_checkpoint(is);
        CHECK(saved_checkpoint(back) == first);
        validate_model(back);
        CHECK(back.delay == m.delay);
        CHECK(back.kind == m.kind);
        REQUIRE(back.layers.size() == m.layers.size());

        Rng seq_rng(202);
        std::vector<Tensor1> xs(5);
        for (auto& x : xs) {
            x.resize(m.input_width());
            uniform_fill(seq_rng, -1.0, 1.0, x);
        }
        const auto want = model_forward(m, xs);
        const auto got = model_forward(back, xs);
        REQUIRE(got.size() == want.size());
        for (std::size_t t = 0; t < want.size(); ++t) CHECK(got[t].data == want[t].data);
    }
}

TEST_CASE("loaders reject foreign headers and truncated input") {
    Rng rng(301);
    TaskDataset d = gen_reversal(rng, 2, 1, 1, 4, 3);
    Model m;
    m.kind = ModelKind::recurrent;
    m.layers.emplace_back(RnnParams::init(2, 2, Activation{Act::tanh}, rng));
    m.output = OutputParams::init(2, 2, Activation{Act::softmax}, rng);

    const std::string ds = saved_dataset(d);
    const std::string cp = saved_checkpoint(m);

    // Wrong container kind in either direction.
    {
        std::istringstream is(cp);
        CHECK_THROWS_AS((void)load_dataset(is), IoError);
    }
    {
        std::istringstream is(ds);
        CHECK_THROWS_AS((void)load_checkpoint(is), IoError);
    }
    // Corrupted magic line.
    {
        std::string bad = ds;
        bad[0] = 'X';
        std::istringstream is(bad);
        CHECK_THROWS_AS((void)load_dataset(is), IoError);
    }
    // Truncation at several depths.
    for (std::size_t keep : {ds.size() / 4, ds.size() / 2, ds.size() - 3}) {
        std::istringstream is(ds.substr(0, keep));
        CHECK_THROWS_AS((void)load_dataset(is), IoError);
    }
    for (std::size_t keep : {cp.size() / 4, cp.size() / 2, cp.rfind(' ')}) {
        std::istringstream is(cp.substr(0, keep));
        CHECK_THROWS_AS((void)load_checkpoint(is), IoError);
    }
    // Empty stream.
    {
        std::istringstream is("");
        CHECK_THROWS_AS((void)load_dataset(is), IoError);
        std::istringstream is2("");
        CHECK_THROWS_AS((void)load_checkpoint(is2), IoError);
    }
}

TEST_CASE("file helpers round-trip through disk and report missing paths") {
    Rng rng(401);
    TaskDataset d = gen_reversal(rng, 2, 1, 1, 5, 3);
    const std::string path = "/tmp/drnn_test_dataset.txt";
    save_dataset_file(d, path);
    const TaskDataset back = load_dataset_file(path);
    CHECK(saved_dataset(back) == saved_dataset(d));
    std::remove(path.c_str());

    Model m;
    m.kind = ModelKind::recurrent;
    m.layers.emplace_back(LstmParams::init(2, 3, rng));
    m.output = OutputParams::init(3, 2, Activation{Act::softmax}, rng);
    const std::string mpath = "/tmp/drnn_test_checkpoint.txt";
    save_checkpoint_file(m, mpath);
    const Model mback = load_checkpoint_file(mpath);
    CHECK(saved_checkpoint(mback) == saved_checkpoint(m));
    std::remove(mpath.c_str());

    CHECK_THROWS_AS((void)load_dataset_file("/tmp/drnn_no_such_file.txt"), IoError);
    CHECK_THROWS_AS((void)load_checkpoint_file("/tmp/drnn_no_such_file.txt"), IoError);
    CHECK_THROWS_AS(save_dataset_file(d, "/tmp/no_such_dir/x.txt"), IoError);
}
