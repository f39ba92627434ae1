#include "drnn/activation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drnn {

void softmax_inplace(Tensor1& logits) {
    if (logits.size() == 0)
        throw std::invalid_argument("softmax: empty vector");
    double mx = logits[0];
    for (double v : logits.data)
        mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : logits.data) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : logits.data)
        v /= sum;
}

std::size_t argmax(const Tensor1& v) {
    if (v.size() == 0)
        throw std::invalid_argument("argmax: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void Activation::apply(Tensor1& v) const {
    if (kind == Act::softmax) {
        softmax_inplace(v);
        return;
    }
    for (auto& x : v.data)
        x = apply_scalar(x);
}

double Activation::apply_scalar(double x) const {
    switch (kind) {
        case Act::identity: return x;
        case Act::tanh: return std::tanh(x);
        case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Act::relu: return x > 0.0 ? x : 0.0;
        case Act::softmax: break;
    }
    throw std::invalid_argument("softmax has no scalar application");
}

double Activation::derivative(double pre, double post) const {
    switch (kind) {
        case Act::identity: return 1.0;
        case Act::tanh: return 1.0 - post * post;
        case Act::sigmoid: return post * (1.0 - post);
        case Act::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Act::softmax: break;
    }
    throw std::invalid_argument("softmax has no elementwise derivative");
}

Tensor1 Activation::right_inverse(const Tensor1& d, double clamp_tol) const {
    Tensor1 out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double v = d[i];
        switch (kind) {
            case Act::identity:
                out[i] = v;
                break;
            case Act::tanh: {
                if (std::fabs(v) > 1.0 + clamp_tol)
                    throw ActivationRangeError(i, v, "tanh right-inverse: value outside (-1, 1)");
                const double c = std::clamp(v, -1.0 + 1e-12, 1.0 - 1e-12);
                out[i] = std::atanh(c);
                break;
            }
            case Act::sigmoid: {
                if (v < -clamp_tol || v > 1.0 + clamp_tol)
                    throw ActivationRangeError(i, v, "sigmoid right-inverse: value outside (0, 1)");
                const double c = std::clamp(v, 1e-12, 1.0 - 1e-12);
                out[i] = std::log(c / (1.0 - c));
                break;
            }
            case Act::relu: {
                if (v < -clamp_tol)
                    throw ActivationRangeError(i, v, "relu right-inverse: negative value");
                out[i] = v > 0.0 ? v : 0.0;
                break;
            }
            case Act::softmax:
                throw std::invalid_argument("softmax has no elementwise right-inverse");
        }
    }
    return out;
}

const char* Activation::name() const {
    switch (kind) {
        case Act::identity: return "identity";
        case Act::tanh: return "tanh";
        case Act::sigmoid: return "sigmoid";
        case Act::relu: return "relu";
        case Act::softmax: return "softmax";
    }
    return "?";
}

Activation Activation::parse(const std::string& name) {
    if (name == "identity") return {Act::identity};
    if (name == "tanh") return {Act::tanh};
    if (name == "sigmoid") return {Act::sigmoid};
    if (name == "relu") return {Act::relu};
    if (name == "softmax") return {Act::softmax};
    std::ostringstream os;
    os << "unknown activation '" << name << "'";
    throw std::invalid_argument(os.str());
}

} // namespace drnn
