#include "drnn/serialize.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

namespace drnn {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw IoError("not a real number: '" + s + "'");
    return v;
}

namespace {

constexpr const char* kDatasetMagic = "drnn-dataset v1";
constexpr const char* kCheckpointMagic = "drnn-checkpoint v1";

std::string next_token(std::istream& is, const char* what) {
    std::string tok;
    if (!(is >> tok)) throw IoError(std::string("unexpected end of input reading ") + what);
    return tok;
}

long long next_int(std::istream& is, const char* what) {
    const std::string tok = next_token(is, what);
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IoError(std::string("not an integer for ") + what + ": '" + tok + "'");
    return v;
}

std::size_t next_count(std::istream& is, const char* what) {
    const long long v = next_int(is, what);
    if (v < 0) throw IoError(std::string("negative count for ") + what);
    return static_cast<std::size_t>(v);
}

double next_real(std::istream& is, const char* what) {
    return parse_double(next_token(is, what));
}

void expect_token(std::istream& is, const char* expected) {
    const std::string tok = next_token(is, expected);
    if (tok != expected)
        throw IoError(std::string("expected '") + expected + "', found '" + tok + "'");
}

void check_magic(std::istream& is, const char* magic) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != magic)
        throw IoError(std::string("bad header: expected '") + magic + "', found '" + line + "'");
}

void write_reals(std::ostream& os, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        os << (i % 8 == 0 ? (i == 0 ? "" : "\n") : " ") << format_double(data[i]);
    }
    if (n > 0) os << '\n';
}

void write_sequence(std::ostream& os, const TaskDataset& d, const Sequence& s) {
    if (d.input_encoding == InputEncoding::one_hot) {
        os << "i";
        for (int v : s.input_ids) os << ' ' << v;
        os << '\n';
    } else {
        os << "x";
        for (double v : s.input_reals) os << ' ' << format_double(v);
        os << '\n';
    }
    if (d.class_labels) {
        os << "l";
        for (int v : s.label_ids) os << ' ' << v;
        os << '\n';
    } else {
        os << "y";
        for (double v : s.label_reals) os << ' ' << format_double(v);
        os << '\n';
    }
    os << "m";
    for (std::uint8_t v : s.mask) os << ' ' << int(v);
    os << '\n';
}

Sequence read_sequence(std::istream& is, const TaskDataset& d) {
    Sequence s;
    const std::size_t T = d.seq_len;
    if (d.input_encoding == InputEncoding::one_hot) {
        expect_token(is, "i");
        s.input_ids.resize(T);
        for (std::size_t t = 0; t < T; ++t)
            s.input_ids[t] = static_cast<int>(next_int(is, "input id"));
    } else {
        expect_token(is, "x");
        s.input_reals.resize(T * d.input_width);
        for (std::size_t t = 0; t < s.input_reals.size(); ++t)
            s.input_reals[t] = next_real(is, "input value");
    }
    if (d.class_labels) {
        expect_token(is, "l");
        s.label_ids.resize(T);
        for (std::size_t t = 0; t < T; ++t)
            s.label_ids[t] = static_cast<int>(next_int(is, "label id"));
    } else {
        expect_token(is, "y");
        s.label_reals.resize(T * d.label_width);
        for (std::size_t t = 0; t < s.label_reals.size(); ++t)
            s.label_reals[t] = next_real(is, "label value");
    }
    expect_token(is, "m");
    s.mask.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const long long v = next_int(is, "mask bit");
        if (v != 0 && v != 1) throw IoError("mask entries must be 0 or 1");
        s.mask[t] = static_cast<std::uint8_t>(v);
    }
    return s;
}

const char* encoding_name(InputEncoding e) {
    return e == InputEncoding::one_hot ? "one_hot" : "real";
}

InputEncoding parse_encoding(const std::string& s) {
    if (s == "one_hot") return InputEncoding::one_hot;
    if (s == "real") return InputEncoding::real;
    throw IoError("unknown input encoding: '" + s + "'");
}

} // namespace

void save_dataset(const TaskDataset& data, std::ostream& os) {
    os << kDatasetMagic << '\n';
    os << "task " << task_name(data.task) << '\n';
    os << "input_encoding " << encoding_name(data.input_encoding) << '\n';
    os << "input_width " << data.input_width << '\n';
    os << "class_labels " << (data.class_labels ? 1 : 0) << '\n';
    os << "num_classes " << data.num_classes << '\n';
    os << "label_width " << data.label_width << '\n';
    os << "seq_len " << data.seq_len << '\n';
    os << "seed " << data.seed << '\n';
    os << "mask_prob " << format_double(data.mask_prob) << '\n';
    os << "gamma " << format_double(data.gamma) << '\n';
    os << "acausal " << data.acausal << '\n';
    os << "causal " << data.causal << '\n';
    os << "filter " << data.filter.size();
    for (std::size_t i = 0; i < data.filter.size(); ++i) os << ' ' << format_double(data.filter[i]);
    os << '\n';
    const Split splits[] = {Split::train, Split::val, Split::test};
    for (Split sp : splits) {
        const auto& seqs = data.split(sp);
        os << "split " << split_name(sp) << ' ' << seqs.size() << '\n';
        for (const auto& s : seqs) write_sequence(os, data, s);
    }
    if (!os) throw IoError("failed writing dataset");
}

TaskDataset load_dataset(std::istream& is) {
    check_magic(is, kDatasetMagic);
    TaskDataset d;
    expect_token(is, "task");
    d.task = parse_task(next_token(is, "task"));
    expect_token(is, "input_encoding");
    d.input_encoding = parse_encoding(next_token(is, "input encoding"));
    expect_token(is, "input_width");
    d.input_width = next_count(is, "input width");
    expect_token(is, "class_labels");
    d.class_labels = next_int(is, "class label flag") != 0;
    expect_token(is, "num_classes");
    d.num_classes = next_count(is, "class count");
    expect_token(is, "label_width");
    d.label_width = next_count(is, "label width");
    expect_token(is, "seq_len");
    d.seq_len = next_count(is, "sequence length");
    expect_token(is, "seed");
    d.seed = static_cast<std::uint64_t>(next_int(is, "seed"));
    expect_token(is, "mask_prob");
    d.mask_prob = next_real(is, "mask probability");
    expect_token(is, "gamma");
    d.gamma = next_real(is, "gamma");
    expect_token(is, "acausal");
    d.acausal = next_count(is, "acausal taps");
    expect_token(is, "causal");
    d.causal = next_count(is, "causal taps");
    expect_token(is, "filter");
    d.filter.resize(next_count(is, "filter length"));
    for (std::size_t i = 0; i < d.filter.size(); ++i) d.filter[i] = next_real(is, "filter tap");
    const Split splits[] = {Split::train, Split::val, Split::test};
    for (Split sp : splits) {
        expect_token(is, "split");
        const std::string name = next_token(is, "split name");
        if (name != split_name(sp))
            throw IoError("expected split '" + std::string(split_name(sp)) + "', found '" + name +
                          "'");
        const std::size_t n = next_count(is, "split size");
        auto& out = sp == Split::train ? d.train : (sp == Split::val ? d.val : d.test);
        out.reserve(n);
        for (std::size_t k = 0; k < n; ++k) out.push_back(read_sequence(is, d));
    }
    return d;
}

void save_dataset_file(const TaskDataset& data, const std::string& path) {
    std::ofstream os(path, std::ios::binary); // binary: no newline translation
    if (!os) throw IoError("cannot open for writing: " + path);
    save_dataset(data, os);
    os.flush();
    if (!os) throw IoError("failed writing: " + path);
}

TaskDataset load_dataset_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return load_dataset(is);
}

namespace {

const char* model_kind_name(ModelKind k) {
    return k == ModelKind::recurrent ? "recurrent" : "bidirectional";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "recurrent") return ModelKind::recurrent;
    if (s == "bidirectional") return ModelKind::bidirectional;
    throw IoError("unknown model kind: '" + s + "'");
}

} // namespace

void save_checkpoint(const Model& m, std::ostream& os) {
    os << kCheckpointMagic << '\n';
    os << "kind " << model_kind_name(m.kind) << '\n';
    os << "delay " << m.delay << '\n';
    os << "layers " << m.layers.size() << '\n';
    for (const auto& c : m.layers) {
        if (std::holds_alternative<RnnParams>(c)) {
            const auto& p = std::get<RnnParams>(c);
            os << "layer rnn " << p.hidden() << ' ' << p.input() << ' ' << p.f.name() << '\n';
        } else {
            const auto& p = std::get<LstmParams>(c);
            os << "layer lstm " << p.hidden() << ' ' << p.input() << '\n';
        }
    }
    os << "output " << m.output.out() << ' ' << m.output.in() << ' ' << m.output.g.name() << '\n';
    std::vector<TensorView> views;
    collect_views(const_cast<Model&>(m), views);
    for (const auto& v : views) write_reals(os, v.data, v.size);
    if (!os) throw IoError("failed writing checkpoint");
}

Model load_checkpoint(std::istream& is) {
    check_magic(is, kCheckpointMagic);
    Model m;
    expect_token(is, "kind");
    m.kind = parse_model_kind(next_token(is, "model kind"));
    expect_token(is, "delay");
    m.delay = static_cast<int>(next_int(is, "delay"));
    expect_token(is, "layers");
    const std::size_t L = next_count(is, "layer count");
    m.layers.reserve(L);
    for (std::size_t i = 0; i < L; ++i) {
        expect_token(is, "layer");
        const std::string kind = next_token(is, "layer kind");
        const std::size_t n = next_count(is, "hidden width");
        const std::size_t q = next_count(is, "input width");
        if (n == 0 || q == 0) throw IoError("layer widths must be positive");
        if (kind == "rnn") {
            RnnParams p;
            p.w_x = Tensor2(n, q);
            p.w_h = Tensor2(n, n);
            p.b_h = Tensor1(n);
            p.f = Activation::parse(next_token(is, "layer activation"));
            m.layers.emplace_back(std::move(p));
        } else if (kind == "lstm") {
            LstmParams p;
            for (LstmGate* g : {&p.input_gate, &p.forget_gate, &p.output_gate, &p.cell_gate}) {
                g->w_x = Tensor2(n, q);
                g->w_h = Tensor2(n, n);
                g->b = Tensor1(n);
            }
            m.layers.emplace_back(std::move(p));
        } else {
            throw IoError("unknown layer kind: '" + kind + "'");
        }
    }
    expect_token(is, "output");
    const std::size_t mo = next_count(is, "output width");
    const std::size_t ni = next_count(is, "readout input width");
    if (mo == 0 || ni == 0) throw IoError("readout widths must be positive");
    m.output.w_o = Tensor2(mo, ni);
    m.output.b_o = Tensor1(mo);
    m.output.g = Activation::parse(next_token(is, "readout activation"));
    std::vector<TensorView> views;
    collect_views(m, views);
    for (auto& v : views)
        for (std::size_t i = 0; i < v.size; ++i) v.data[i] = next_real(is, "parameter value");
    validate_model(m);
    return m;
}

void save_checkpoint_file(const Model& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    save_checkpoint(m, os);
    os.flush();
    if (!os) throw IoError("failed writing: " + path);
}

Model load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return load_checkpoint(is);
}

} // namespace drnn
