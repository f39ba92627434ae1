#include "drnn/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace drnn {

const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::reversal: return "reversal";
        case TaskKind::sine: return "sine";
        case TaskKind::masked_lm: return "masked_lm";
    }
    return "?";
}

TaskKind parse_task(const std::string& name) {
    if (name == "reversal") return TaskKind::reversal;
    if (name == "sine") return TaskKind::sine;
    if (name == "masked_lm") return TaskKind::masked_lm;
    throw std::invalid_argument("unknown task: " + name);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

const std::vector<Sequence>& TaskDataset::split(Split s) const {
    switch (s) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
    }
    throw std::invalid_argument("bad split");
}

void input_vector_into(const TaskDataset& data, const Sequence& seq, std::size_t t, Tensor1& out) {
    out.resize(data.input_width);
    if (data.input_encoding == InputEncoding::one_hot) {
        if (t >= seq.input_ids.size()) throw std::out_of_range("input_vector_into: step");
        out.fill(0.0);
        const int id = seq.input_ids[t];
        if (id < 0 || static_cast<std::size_t>(id) >= data.input_width)
            throw std::out_of_range("input_vector_into: symbol id outside alphabet");
        out[static_cast<std::size_t>(id)] = 1.0;
    } else {
        const std::size_t base = t * data.input_width;
        if (base + data.input_width > seq.input_reals.size())
            throw std::out_of_range("input_vector_into: step");
        for (std::size_t i = 0; i < data.input_width; ++i) out[i] = seq.input_reals[base + i];
    }
}

namespace {

Sequence make_reversal_sequence(Rng& rng, std::size_t T, std::size_t V) {
    Sequence s;
    s.input_ids.resize(T);
    s.label_ids.resize(T);
    s.mask.assign(T, 1);
    for (std::size_t t = 0; t < T; ++t)
        s.input_ids[t] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(V)));
    for (std::size_t t = 0; t < T; ++t) s.label_ids[t] = s.input_ids[T - 1 - t];
    return s;
}

} // namespace

TaskDataset gen_reversal(Rng& rng, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                         std::size_t T, std::size_t V) {
    if (T == 0 || V == 0) throw std::invalid_argument("gen_reversal: T and V must be positive");
    TaskDataset d;
    d.task = TaskKind::reversal;
    d.input_encoding = InputEncoding::one_hot;
    d.input_width = V;
    d.class_labels = true;
    d.num_classes = V;
    d.seq_len = T;
    d.seed = rng.seed();
    d.train.reserve(n_train);
    d.val.reserve(n_val);
    d.test.reserve(n_test);
    for (std::size_t i = 0; i < n_train; ++i) d.train.push_back(make_reversal_sequence(rng, T, V));
    for (std::size_t i = 0; i < n_val; ++i) d.val.push_back(make_reversal_sequence(rng, T, V));
    for (std::size_t i = 0; i < n_test; ++i) d.test.push_back(make_reversal_sequence(rng, T, V));
    return d;
}

double expected_reversal_tpr(std::size_t T, std::size_t V, std::size_t d) {
    if (T == 0 || V == 0) throw std::invalid_argument("expected_reversal_tpr: T, V positive");
    const double v = static_cast<double>(V);
    const double known = static_cast<double>((d + 1) / 2); // ⌊(d+1)/2⌋ label positions are visible
    const double tpr =
        0.5 * (1.0 + 1.0 / v) + known * (1.0 / static_cast<double>(T)) * (1.0 - 1.0 / v);
    return std::min(tpr, 1.0);
}

void sine_labels_for(const TaskDataset& data, const std::vector<double>& xs,
                     std::vector<double>& ys) {
    const std::size_t T = xs.size();
    const std::size_t a = data.acausal;
    const std::size_t c = data.causal;
    if (data.filter.size() != a + c) throw std::invalid_argument("sine_labels_for: filter length");
    ys.resize(T);
    // y_t = sin(gamma * sum_{j=-c+1..a} w[j+c-1] * x_{t+j}), x zero outside the sequence.
    for (std::size_t t0 = 0; t0 < T; ++t0) {
        double acc = 0.0;
        for (long j = -static_cast<long>(c) + 1; j <= static_cast<long>(a); ++j) {
            const long src = static_cast<long>(t0) + j;
            if (src < 0 || src >= static_cast<long>(T)) continue;
            acc += data.filter[static_cast<std::size_t>(j + static_cast<long>(c) - 1)] *
                   xs[static_cast<std::size_t>(src)];
        }
        ys[t0] = std::sin(data.gamma * acc);
    }
}

namespace {

Sequence make_sine_sequence(Rng& rng, const TaskDataset& d) {
    Sequence s;
    s.input_reals.resize(d.seq_len);
    for (std::size_t t = 0; t < d.seq_len; ++t) s.input_reals[t] = rng.next_double();
    sine_labels_for(d, s.input_reals, s.label_reals);
    s.mask.assign(d.seq_len, 1);
    return s;
}

} // namespace

TaskDataset gen_sine(Rng& rng, const SineTaskSpec& spec, std::size_t n_train, std::size_t n_val,
                     std::size_t n_test) {
    if (spec.acausal + spec.causal == 0)
        throw std::invalid_argument("gen_sine: filter must have at least one tap");
    if (spec.seq_len == 0) throw std::invalid_argument("gen_sine: seq_len must be positive");
    TaskDataset d;
    d.task = TaskKind::sine;
    d.input_encoding = InputEncoding::real;
    d.input_width = 1;
    d.class_labels = false;
    d.label_width = 1;
    d.seq_len = spec.seq_len;
    d.seed = rng.seed();
    d.gamma = spec.gamma;
    d.acausal = spec.acausal;
    d.causal = spec.causal;
    if (spec.filter.size() != 0) {
        if (spec.filter.size() != spec.acausal + spec.causal)
            throw std::invalid_argument("gen_sine: filter length must be acausal+causal");
        d.filter = spec.filter;
    } else {
        d.filter.resize(spec.acausal + spec.causal);
        for (std::size_t i = 0; i < d.filter.size(); ++i) d.filter[i] = rng.next_double();
    }
    d.train.reserve(n_train);
    d.val.reserve(n_val);
    d.test.reserve(n_test);
    for (std::size_t i = 0; i < n_train; ++i) d.train.push_back(make_sine_sequence(rng, d));
    for (std::size_t i = 0; i < n_val; ++i) d.val.push_back(make_sine_sequence(rng, d));
    for (std::size_t i = 0; i < n_test; ++i) d.test.push_back(make_sine_sequence(rng, d));
    return d;
}

int CharVocab::encode(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c == ' ') return 26;
    throw std::invalid_argument(std::string("CharVocab::encode: unsupported character '") + c +
                                "'");
}

char CharVocab::decode(int id) {
    if (id >= 0 && id < 26) return static_cast<char>('a' + id);
    if (id == 26) return ' ';
    throw std::invalid_argument("CharVocab::decode: id outside 0..26");
}

std::string normalize_corpus(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (char ch : bytes) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (u >= 'a' && u <= 'z') {
            out.push_back(static_cast<char>(u));
        } else if (u >= 'A' && u <= 'Z') {
            out.push_back(static_cast<char>(u - 'A' + 'a'));
        } else {
            out.push_back(' ');
        }
    }
    return out;
}

namespace {

// Frequency-ordered vocabulary for the synthetic corpus. Sampling weight of
// the i-th word is 1/(i+1), so early entries dominate the way common words
// dominate natural text, while long tail words keep the character statistics
// varied enough that context carries information.
constexpr const char* kCorpusWords[] = {
    "the", "of", "and", "to", "in", "a", "is", "that", "for", "it", "as", "was", "with", "be",
    "by", "on", "not", "he", "this", "are", "or", "his", "from", "at", "which", "but", "have",
    "an", "had", "they", "you", "were", "their", "one", "all", "we", "can", "her", "has", "there",
    "been", "if", "more", "when", "will", "would", "who", "so", "no", "she", "other", "its",
    "may", "these", "what", "them", "than", "some", "him", "time", "into", "only", "could",
    "new", "then", "do", "any", "first", "such", "like", "our", "over", "man", "me", "even",
    "most", "made", "after", "also", "did", "many", "before", "must", "through", "years",
    "where", "much", "your", "way", "well", "down", "should", "because", "each", "just",
    "those", "people", "how", "too", "little", "state", "good", "very", "make", "world",
    "still", "own", "see", "men", "work", "long", "get", "here", "between", "both", "life",
    "being", "under", "never", "day", "same", "another", "know", "while", "last", "might",
    "us", "great", "old", "year", "off", "come", "since", "against", "go", "came", "right",
    "used", "take", "three", "states", "himself", "few", "house", "use", "during", "without",
    "again", "place", "around", "however", "home", "small", "found", "thought", "went", "say",
    "part", "once", "general", "high", "upon", "school", "every", "does", "got", "united",
    "left", "number", "course", "war", "until", "always", "away", "something", "fact", "water",
    "though", "less", "public", "put", "think", "almost", "hand", "enough", "far", "took",
    "head", "yet", "government", "system", "better", "set", "told", "nothing", "night", "end",
    "why", "called", "didnt", "eyes", "find", "going", "look", "asked", "later", "point",
    "knew", "next", "city", "business", "give", "group", "toward", "young", "days", "let",
    "room", "within", "side", "children", "given", "present", "order", "national", "second",
    "social", "possible", "rather", "per", "face", "among", "form", "important", "often",
    "things", "looked", "early", "white", "case", "become", "large", "need", "big", "four",
    "felt", "along", "best", "ever", "least", "several", "power", "development", "light",
    "thing", "seemed", "family", "interest", "want", "members", "others", "although", "turned",
    "area", "need", "done", "feel", "open", "god", "service", "certain", "kind", "began",
    "different", "door", "thus", "help", "means", "sense", "whole", "matter", "perhaps",
    "itself", "york", "times", "human", "line", "above", "name", "example", "action", "law",
    "company", "hands", "local", "show", "body", "five", "history", "whether", "gave", "today",
    "either", "across", "act", "feet", "anything", "past", "quite", "seen", "having", "death",
    "experience", "half", "really", "week", "word", "car", "field", "words", "already", "tell",
    "themselves", "information", "college", "shall", "together", "money", "held", "period",
    "keep", "sure", "real", "probably", "free", "cannot", "behind", "political", "air",
    "question", "office", "making", "brought", "whose", "special", "heard", "major", "problem",
    "federal", "became", "study", "ago", "moment", "available", "known", "result", "street",
    "economic", "boy", "position", "reason", "change", "south", "board", "individual", "job",
    "society", "areas", "west", "close", "turn", "love", "community", "true", "court", "force",
    "full", "seems", "wife", "future", "voice", "wanted", "department", "center", "woman",
    "control", "common", "necessary", "policy", "following", "front", "sometimes", "six",
    "girl", "clear", "further", "land", "able", "run", "mother", "students", "music", "short",
    "mind", "lines", "idea", "morning", "provide", "research", "age", "university", "nature",
    "spirit", "strong", "class", "evidence", "book", "usually", "plan", "road", "low", "modern",
    "kept", "foreign", "value", "hours", "outside", "education", "father", "alone", "process",
    "north", "secretary", "months", "type", "lost", "various", "million", "private", "program",
    "century", "basis", "effect", "paper", "earth", "child", "nearly", "stood", "higher",
    "person", "cost", "evening", "method", "pressure", "army", "increase", "church", "note",
    "space", "situation", "sound", "stage", "town", "friends", "report", "hard", "herself",
    "costs", "fire", "total", "required", "industry", "bible", "figure", "hope", "bring",
    "soon", "single", "minutes", "son", "else", "due", "blood", "summer", "deal", "reading",
};

} // namespace

std::string synthesize_corpus(Rng& rng, std::size_t n_chars) {
    const std::size_t n_words = sizeof(kCorpusWords) / sizeof(kCorpusWords[0]);
    std::vector<double> cumulative(n_words);
    double total = 0.0;
    for (std::size_t i = 0; i < n_words; ++i) {
        total += 1.0 / static_cast<double>(i + 1);
        cumulative[i] = total;
    }
    std::string out;
    out.reserve(n_chars + 16);
    while (out.size() < n_chars) {
        const double u = rng.next_double() * total;
        const std::size_t idx = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const char* word = kCorpusWords[std::min(idx, n_words - 1)];
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    out.resize(n_chars);
    // Guarantee the alphabet contract regardless of the word table contents.
    return normalize_corpus(out);
}

TaskDataset gen_masked_corpus(Rng& rng, std::string_view text, double mask_prob,
                              std::size_t seq_len, std::array<double, 3> split_fractions) {
    if (seq_len == 0) throw std::invalid_argument("gen_masked_corpus: seq_len must be positive");
    if (mask_prob < 0.0 || mask_prob > 1.0)
        throw std::invalid_argument("gen_masked_corpus: mask_prob must lie in [0,1]");
    const double frac_sum = split_fractions[0] + split_fractions[1] + split_fractions[2];
    if (std::abs(frac_sum - 1.0) > 1e-9)
        throw std::invalid_argument("gen_masked_corpus: split fractions must sum to 1");
    for (char c : text)
        if (!((c >= 'a' && c <= 'z') || c == ' '))
            throw std::invalid_argument(
                "gen_masked_corpus: text must be normalized to a..z and space");

    TaskDataset d;
    d.task = TaskKind::masked_lm;
    d.input_encoding = InputEncoding::one_hot;
    d.input_width = CharVocab::input_symbols;
    d.class_labels = true;
    d.num_classes = CharVocab::content_classes;
    d.seq_len = seq_len;
    d.seed = rng.seed();
    d.mask_prob = mask_prob;

    const std::size_t n = text.size();
    const std::size_t train_end = static_cast<std::size_t>(split_fractions[0] * static_cast<double>(n));
    const std::size_t val_end =
        train_end + static_cast<std::size_t>(split_fractions[1] * static_cast<double>(n));

    auto fill_split = [&](std::vector<Sequence>& out, std::size_t lo, std::size_t hi) {
        const std::size_t span = hi - lo;
        const std::size_t n_seq = span / seq_len;
        out.reserve(n_seq);
        for (std::size_t s = 0; s < n_seq; ++s) {
            Sequence seq;
            seq.input_ids.resize(seq_len);
            seq.label_ids.resize(seq_len);
            seq.mask.assign(seq_len, 0);
            const std::size_t base = lo + s * seq_len;
            for (std::size_t t = 0; t < seq_len; ++t) {
                const int id = CharVocab::encode(text[base + t]);
                seq.label_ids[t] = id;
                const bool masked = rng.next_double() < mask_prob;
                seq.input_ids[t] = masked ? CharVocab::mask_id : id;
                seq.mask[t] = masked ? 1 : 0;
            }
            out.push_back(std::move(seq));
        }
    };
    fill_split(d.train, 0, train_end);
    fill_split(d.val, train_end, val_end);
    fill_split(d.test, val_end, n);
    return d;
}

double per_token_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                          const std::vector<std::uint8_t>& mask) {
    if (preds.size() != labels.size() || preds.size() != mask.size())
        throw std::invalid_argument("per_token_accuracy: size mismatch");
    std::size_t hits = 0, denom = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!mask[i]) continue;
        ++denom;
        if (preds[i] == labels[i]) ++hits;
    }
    if (denom == 0) throw std::invalid_argument("per_token_accuracy: empty mask");
    return static_cast<double>(hits) / static_cast<double>(denom);
}

} // namespace drnn
