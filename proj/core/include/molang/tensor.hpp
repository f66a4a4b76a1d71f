#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "molang/error.hpp"
#include "molang/rng.hpp"

namespace molang {

// Dense row-major array of doubles. Values are double end to end; binary32
// is only used on disk (see checkpoint.hpp and motion_io.hpp).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<long> shape);
    Tensor(std::vector<long> shape, std::vector<double> data);

    static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<long> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor randn(std::vector<long> shape, Rng& rng, double stddev = 1.0);

    const std::vector<long>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    long size() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](long i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<std::size_t>(i)]; }

    // 2-D / 3-D accessors (unchecked)
    double& at(long i, long j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(long i, long j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double& at(long i, long j, long k) {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(long i, long j, long k) const {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double item() const;  // scalar value; throws ContractError unless size()==1

    Tensor reshaped(std::vector<long> shape) const;
    void fill(double value);

    const std::vector<double>& storage() const { return data_; }

private:
    std::vector<long> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<long>& shape);
long shape_numel(const std::vector<long>& shape);

namespace kernels {

// c[m,n] = a[m,k] @ b[k,n]
void matmul(const double* a, const double* b, double* c, long m, long k, long n);
// c += a @ b
void matmul_acc(const double* a, const double* b, double* c, long m, long k, long n);
// c[k,n] += a[m,k]^T @ b[m,n]
void matmul_at_b_acc(const double* a, const double* b, double* c, long m, long k, long n);
// c[m,k] += a[m,n] @ b[k,n]^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, long m, long n, long k);

}  // namespace kernels

}  // namespace molang
