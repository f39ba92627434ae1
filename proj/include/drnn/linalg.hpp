#pragma once

#include <cstddef>

#include "drnn/tensor.hpp"

namespace drnn {

struct LstsqResult {
    Tensor1 x;            // basic least-squares solution (free variables zeroed)
    double residual_norm; // ‖a·x − b‖₂, computed against the original system
    std::size_t rank;     // numerical rank at tolerance 1e-12 · max |R_kk|
};

// Minimizes ‖a·x − b‖₂ via Householder QR with column pivoting. Callers that
// need an exact inverse (e.g. initial-state lifting) must check `rank` and
// `residual_norm` themselves; rank deficiency is reported, not thrown.
LstsqResult least_squares_solve(const Tensor2& a, const Tensor1& b);

} // namespace drnn
