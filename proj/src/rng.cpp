#include "drnn/rng.hpp"

#include <stdexcept>

namespace drnn {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_)
        s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi))
        throw std::invalid_argument("Rng::uniform: requires lo < hi");
    return lo + next_double() * (hi - lo);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0)
        throw std::invalid_argument("Rng::next_below: requires n > 0");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

void uniform_fill(Rng& rng, double lo, double hi, Tensor1& t) {
    for (auto& v : t.data)
        v = rng.uniform(lo, hi);
}

void uniform_fill(Rng& rng, double lo, double hi, Tensor2& t) {
    for (auto& v : t.data)
        v = rng.uniform(lo, hi);
}

void shuffle_indices(Rng& rng, std::vector<std::size_t>& idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace drnn
