#include "drnn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace drnn {

void matvec_into(const Tensor2& m, const Tensor1& v, Tensor1& out) {
    if (m.cols != v.size())
        throw std::invalid_argument("matvec: shape mismatch");
    out.resize(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j)
            s += r[j] * v[j];
        out[i] = s;
    }
}

Tensor1 matvec(const Tensor2& m, const Tensor1& v) {
    Tensor1 out;
    matvec_into(m, v, out);
    return out;
}

void matvec_transpose_add(const Tensor2& m, const Tensor1& v, Tensor1& out) {
    if (m.rows != v.size() || m.cols != out.size())
        throw std::invalid_argument("matvec_transpose_add: shape mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        const double vi = v[i];
        for (std::size_t j = 0; j < m.cols; ++j)
            out[j] += r[j] * vi;
    }
}

void add_outer(Tensor2& m, const Tensor1& u, const Tensor1& v) {
    if (m.rows != u.size() || m.cols != v.size())
        throw std::invalid_argument("add_outer: shape mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        const double ui = u[i];
        for (std::size_t j = 0; j < m.cols; ++j)
            r[j] += ui * v[j];
    }
}

void axpy(double a, const Tensor1& x, Tensor1& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("axpy: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += a * x[i];
}

double dot(const Tensor1& a, const Tensor1& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double max_abs_diff(const Tensor1& a, const Tensor1& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool all_finite(const Tensor1& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Tensor2& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace drnn
