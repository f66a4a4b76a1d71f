#include "molang/tensor.hpp"

#include <cmath>
#include <sstream>

namespace molang {

long shape_numel(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<long>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<long> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<long> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<long>(data_.size()))
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(std::vector<long> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::randn(std::vector<long> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (long i = 0; i < t.size(); ++i) t[i] = rng.next_normal() * stddev;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() called on tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(std::vector<long> shape) const {
    if (shape_numel(shape) != size())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

namespace kernels {

void matmul(const double* a, const double* b, double* c, long m, long k, long n) {
    for (long i = 0; i < m * n; ++i) c[i] = 0.0;
    matmul_acc(a, b, c, m, k, n);
}

void matmul_acc(const double* __restrict a, const double* __restrict b, double* __restrict c, long m, long k, long n) {
    for (long i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (long p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (long j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at_b_acc(const double* __restrict a, const double* __restrict b, double* __restrict c, long m, long k,
                     long n) {
    // c[k,n] += sum_i a[i,k] * b[i,n]
    for (long i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (long p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + p * n;
            for (long j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

void matmul_a_bt_acc(const double* __restrict a, const double* __restrict b, double* __restrict c, long m, long n,
                     long k) {
    // c[m,k] += a[m,n] @ b[k,n]^T ; dot products along n
    for (long i = 0; i < m; ++i) {
        const double* ai = a + i * n;
        double* ci = c + i * k;
        for (long p = 0; p < k; ++p) {
            const double* bp = b + p * n;
            double acc = 0.0;
            for (long j = 0; j < n; ++j) acc += ai[j] * bp[j];
            ci[p] += acc;
        }
    }
}

}  // namespace kernels

}  // namespace molang
