#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "drnn/tensor.hpp"

namespace drnn {

enum class Act { identity, tanh, sigmoid, relu, softmax };

// Thrown by right_inverse when an entry lies outside the activation's range by
// more than the clamp tolerance.
struct ActivationRangeError : std::runtime_error {
    std::size_t index;
    double value;
    ActivationRangeError(std::size_t i, double v, const std::string& what)
        : std::runtime_error(what), index(i), value(v) {}
};

// Elementwise nonlinearity with range D and a right-inverse r (f(r(d)) = d on D).
// softmax is vector-valued, output-only, and has no elementwise right-inverse.
struct Activation {
    Act kind = Act::identity;

    void apply(Tensor1& v) const;
    double apply_scalar(double x) const; // not valid for softmax

    // d/dx f(x) given the pre-activation x and the already-computed f(x).
    // relu uses the subgradient 0 at x = 0. Not valid for softmax.
    double derivative(double pre, double post) const;

    bool right_invertible() const { return kind != Act::softmax; }

    // Entries outside D by at most clamp_tol are clamped into the numerically
    // safe interior (1e-12 from the open boundaries for tanh/sigmoid); larger
    // violations raise ActivationRangeError. relu maps [-clamp_tol, 0) to 0.
    Tensor1 right_inverse(const Tensor1& d, double clamp_tol = 1e-9) const;

    const char* name() const;
    static Activation parse(const std::string& name);
};

// Numerically stable softmax (max-subtracted), in place.
void softmax_inplace(Tensor1& logits);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(const Tensor1& v);

} // namespace drnn
