#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "attnbounds/errors.hpp"

namespace attnbounds {

// Row-major dense matrix of doubles. Value type: copy/move freely, operations
// never mutate their inputs. Construction from data rejects NaN/Inf entries.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_.data() + r * cols_, cols_);
    }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const DenseMatrix& other) const = default;

    // Throws NumericError if any entry is NaN or Inf.
    void check_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Ordered set of n binary vectors in {0,1}^d, row-major bits. n >= 1, d >= 1.
class BinaryVectorSet {
public:
    BinaryVectorSet(std::size_t n, std::size_t d);
    BinaryVectorSet(std::size_t n, std::size_t d, std::vector<std::uint8_t> bits);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }

    std::uint8_t bit(std::size_t i, std::size_t j) const { return bits_[i * d_ + j]; }
    void set_bit(std::size_t i, std::size_t j, std::uint8_t v);

    std::span<const std::uint8_t> vec(std::size_t i) const {
        return std::span<const std::uint8_t>(bits_.data() + i * d_, d_);
    }

    bool operator==(const BinaryVectorSet& other) const = default;

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Integer cross-set dot product a_i . b_j.
int dot(const BinaryVectorSet& a, std::size_t i, const BinaryVectorSet& b, std::size_t j);

// Integer squared Euclidean distance ||a_i - b_j||^2 (= Hamming distance here).
int squared_distance(const BinaryVectorSet& a, std::size_t i, const BinaryVectorSet& b, std::size_t j);

// Standard product with deterministic left-to-right accumulation over the
// inner dimension, so results are bit-for-bit reproducible on one platform.
DenseMatrix matmul(const DenseMatrix& lhs, const DenseMatrix& rhs);

// Divides each row by its sum. Every row sum must be strictly positive.
DenseMatrix row_normalize(const DenseMatrix& m);

// log sum_i exp(x_i), max-shifted so inputs up to ~700 apart cannot overflow.
double logsumexp(std::span<const double> values);

// log(e^a + e^b), stable for any magnitudes.
double log_add_exp(double a, double b);

// log(e^a - e^b); returns -inf when e^a <= e^b (value clamped at zero).
double log_sub_exp(double a, double b);

} // namespace attnbounds
