#include "drnn/linalg.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace drnn {

LstsqResult least_squares_solve(const Tensor2& a, const Tensor1& b) {
    if (a.rows != b.size())
        throw std::invalid_argument("least_squares_solve: a.rows must equal b.size");
    const std::size_t m = a.rows;
    const std::size_t n = a.cols;
    const std::size_t steps = std::min(m, n);

    Tensor2 r = a;      // transformed in place into R
    Tensor1 qtb = b;    // transformed in place into Q^T b
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    for (std::size_t k = 0; k < steps; ++k) {
        // Pivot: bring the column with the largest remaining norm to position k.
        std::size_t pivot = k;
        double best = -1.0;
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i)
                s += r(i, j) * r(i, j);
            if (s > best) {
                best = s;
                pivot = j;
            }
        }
        if (pivot != k) {
            for (std::size_t i = 0; i < m; ++i)
                std::swap(r(i, k), r(i, pivot));
            std::swap(perm[k], perm[pivot]);
        }

        // Householder reflector annihilating r(k+1..m-1, k).
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i)
            norm += r(i, k) * r(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0)
            continue; // column already zero; diagonal entry stays 0
        const double alpha = r(k, k) >= 0.0 ? -norm : norm;
        std::vector<double> v(m - k);
        v[0] = r(k, k) - alpha;
        for (std::size_t i = k + 1; i < m; ++i)
            v[i - k] = r(i, k);
        double vtv = 0.0;
        for (double vi : v)
            vtv += vi * vi;
        r(k, k) = alpha;
        for (std::size_t i = k + 1; i < m; ++i)
            r(i, k) = 0.0;
        if (vtv == 0.0)
            continue;
        const double beta = 2.0 / vtv;
        for (std::size_t j = k + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i)
                s += v[i - k] * r(i, j);
            s *= beta;
            for (std::size_t i = k; i < m; ++i)
                r(i, j) -= s * v[i - k];
        }
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i)
            s += v[i - k] * qtb[i];
        s *= beta;
        for (std::size_t i = k; i < m; ++i)
            qtb[i] -= s * v[i - k];
    }

    // Numerical rank from the R diagonal.
    double max_diag = 0.0;
    for (std::size_t k = 0; k < steps; ++k)
        max_diag = std::max(max_diag, std::fabs(r(k, k)));
    const double tol = 1e-12 * max_diag;
    std::size_t rank = 0;
    while (rank < steps && std::fabs(r(rank, rank)) > tol)
        ++rank;

    // Back substitution on the leading rank×rank block; free variables zeroed.
    Tensor1 y(n, 0.0);
    for (std::size_t ki = rank; ki-- > 0;) {
        double s = qtb[ki];
        for (std::size_t j = ki + 1; j < rank; ++j)
            s -= r(ki, j) * y[j];
        y[ki] = s / r(ki, ki);
    }

    LstsqResult out;
    out.x.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        out.x[perm[j]] = y[j];
    out.rank = rank;

    Tensor1 ax = matvec(a, out.x);
    double res = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        res += (ax[i] - b[i]) * (ax[i] - b[i]);
    out.residual_norm = std::sqrt(res);
    return out;
}

} // namespace drnn
