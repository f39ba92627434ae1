#pragma once

#include <cstdint>
#include <vector>

#include "drnn/tensor.hpp"

namespace drnn {

// Deterministic xoshiro256** generator, seeded through splitmix64. Implemented
// in-repo so a given seed yields the same stream on every platform and compiler.
struct Rng {
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform double in [0, 1), 53 mantissa bits.
    double next_double();

    // Uniform double in [lo, hi); requires lo < hi.
    double uniform(double lo, double hi);

    // Uniform integer in [0, n); requires n > 0. Rejection-sampled, unbiased.
    std::uint64_t next_below(std::uint64_t n);

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

void uniform_fill(Rng& rng, double lo, double hi, Tensor1& t);
void uniform_fill(Rng& rng, double lo, double hi, Tensor2& t);

// Fisher-Yates shuffle driven by rng.next_below, so shuffles are reproducible.
void shuffle_indices(Rng& rng, std::vector<std::size_t>& idx);

} // namespace drnn
