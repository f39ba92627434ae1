#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace drnn {

// Dense vector of doubles. All numerics in this library are 64-bit.
struct Tensor1 {
    std::vector<double> data;

    Tensor1() = default;
    explicit Tensor1(std::size_t n, double value = 0.0) : data(n, value) {}
    Tensor1(std::initializer_list<double> vals) : data(vals) {}

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void fill(double v) { data.assign(data.size(), v); }
    void resize(std::size_t n) { data.assign(n, 0.0); }
};

// Dense row-major matrix of doubles.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double value = 0.0)
        : rows(r), cols(c), data(r * c, value) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    void fill(double v) { data.assign(data.size(), v); }
};

// out = m v. Each entry accumulates sequentially by column index; this order is
// part of the contract (block-structured and stacked forward passes must agree
// deterministically).
void matvec_into(const Tensor2& m, const Tensor1& v, Tensor1& out);
Tensor1 matvec(const Tensor2& m, const Tensor1& v);

// out += m^T v (same fixed accumulation order on every call).
void matvec_transpose_add(const Tensor2& m, const Tensor1& v, Tensor1& out);

// m += u v^T
void add_outer(Tensor2& m, const Tensor1& u, const Tensor1& v);

// y += a * x
void axpy(double a, const Tensor1& x, Tensor1& y);

double dot(const Tensor1& a, const Tensor1& b);

// Largest absolute entry difference; tensors must have equal shape.
double max_abs_diff(const Tensor1& a, const Tensor1& b);

bool all_finite(const Tensor1& t);
bool all_finite(const Tensor2& t);

} // namespace drnn
