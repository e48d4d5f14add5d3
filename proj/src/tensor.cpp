#include "attnbounds/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnbounds/opcount.hpp"

namespace attnbounds {

namespace ops {

namespace {
thread_local std::uint64_t g_madds = 0;
}

std::uint64_t count() { return g_madds; }
void reset() { g_madds = 0; }
void add(std::uint64_t n) { g_madds += n; }

} // namespace ops

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("DenseMatrix: data length != rows*cols");
    check_finite();
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw ShapeError("DenseMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    check_finite();
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

void DenseMatrix::check_finite() const {
    for (double v : data_)
        if (!std::isfinite(v))
            throw NumericError("DenseMatrix: non-finite entry");
}

BinaryVectorSet::BinaryVectorSet(std::size_t n, std::size_t d)
    : n_(n), d_(d), bits_(n * d, 0) {
    if (n_ < 1 || d_ < 1)
        throw ShapeError("BinaryVectorSet: n and d must be >= 1");
}

BinaryVectorSet::BinaryVectorSet(std::size_t n, std::size_t d, std::vector<std::uint8_t> bits)
    : n_(n), d_(d), bits_(std::move(bits)) {
    if (n_ < 1 || d_ < 1)
        throw ShapeError("BinaryVectorSet: n and d must be >= 1");
    if (bits_.size() != n_ * d_)
        throw ShapeError("BinaryVectorSet: bits length != n*d");
    for (std::uint8_t b : bits_)
        if (b > 1)
            throw ConfigError("BinaryVectorSet: entries must be 0 or 1");
}

void BinaryVectorSet::set_bit(std::size_t i, std::size_t j, std::uint8_t v) {
    if (v > 1)
        throw ConfigError("BinaryVectorSet: entries must be 0 or 1");
    bits_[i * d_ + j] = v;
}

int dot(const BinaryVectorSet& a, std::size_t i, const BinaryVectorSet& b, std::size_t j) {
    if (a.dim() != b.dim())
        throw ShapeError("dot: dimension mismatch");
    int s = 0;
    for (std::size_t k = 0; k < a.dim(); ++k)
        s += a.bit(i, k) & b.bit(j, k);
    return s;
}

int squared_distance(const BinaryVectorSet& a, std::size_t i, const BinaryVectorSet& b, std::size_t j) {
    if (a.dim() != b.dim())
        throw ShapeError("squared_distance: dimension mismatch");
    int s = 0;
    for (std::size_t k = 0; k < a.dim(); ++k)
        s += a.bit(i, k) ^ b.bit(j, k);
    return s;
}

DenseMatrix matmul(const DenseMatrix& lhs, const DenseMatrix& rhs) {
    if (lhs.cols() != rhs.rows())
        throw ShapeError("matmul: lhs.cols != rhs.rows");
    const std::size_t n = lhs.rows(), inner = lhs.cols(), m = rhs.cols();
    DenseMatrix out(n, m);
    // i,k,j order: for each output cell the adds over k happen left to right.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double l = lhs(i, k);
            for (std::size_t j = 0; j < m; ++j)
                out(i, j) += l * rhs(k, j);
        }
    }
    ops::add(static_cast<std::uint64_t>(n) * inner * m);
    out.check_finite();
    return out;
}

DenseMatrix row_normalize(const DenseMatrix& m) {
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j)
            sum += m(i, j);
        if (!(sum > 0.0))
            throw DegenerateRowError("row_normalize: nonpositive row sum");
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(i, j) = m(i, j) / sum;
    }
    ops::add(static_cast<std::uint64_t>(m.rows()) * m.cols() * 2);
    return out;
}

double logsumexp(std::span<const double> values) {
    if (values.empty())
        throw ConfigError("logsumexp: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : values)
        mx = std::max(mx, v);
    if (!std::isfinite(mx))
        return mx; // all -inf, or an explicit +inf input
    double acc = 0.0;
    for (double v : values)
        acc += std::exp(v - mx);
    return mx + std::log(acc);
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    const double mx = std::max(a, b);
    return mx + std::log1p(std::exp(std::min(a, b) - mx));
}

double log_sub_exp(double a, double b) {
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    if (!(a > b))
        return -std::numeric_limits<double>::infinity();
    // log(e^a - e^b) = a + log(1 - e^{b-a})
    return a + std::log1p(-std::exp(b - a));
}

} // namespace attnbounds
