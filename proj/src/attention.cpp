#include "attnbounds/attention.hpp"

#include <cmath>
#include <vector>

#include "attnbounds/opcount.hpp"

namespace attnbounds {

namespace {

void check_qk(const DenseMatrix& q, const DenseMatrix& k) {
    if (q.cols() != k.cols())
        throw ShapeError("attention: Q and K column mismatch");
}

void check_kv(const DenseMatrix& k, const DenseMatrix& v) {
    if (k.rows() != v.rows())
        throw ShapeError("attention: K and V row mismatch");
}

DenseMatrix maybe_prescale(const AttentionSpec& spec, const DenseMatrix& q) {
    if (!spec.scale_by_inv_sqrt_dk)
        return q;
    const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    DenseMatrix out(q.rows(), q.cols());
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < q.cols(); ++j)
            out(i, j) = q(i, j) * s;
    ops::add(static_cast<std::uint64_t>(q.rows()) * q.cols());
    return out;
}

double dot_rows(const DenseMatrix& q, std::size_t i, const DenseMatrix& k, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c)
        s += q(i, c) * k(j, c);
    return s;
}

double sqdist_rows(const DenseMatrix& q, std::size_t i, const DenseMatrix& k, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c) {
        const double diff = q(i, c) - k(j, c);
        s += diff * diff;
    }
    return s;
}

enum class Normalize { none, row_softmax };

// Shared body for the dot-product kernels. A window of 0 means unbanded.
DenseMatrix dot_kernel(const AttentionSpec& spec, const DenseMatrix& q_in, const DenseMatrix& k_in,
                       const DenseMatrix& v, std::size_t window, Normalize norm) {
    check_qk(q_in, k_in);
    check_kv(k_in, v);
    const DenseMatrix q = maybe_prescale(spec, q_in);
    const DenseMatrix& k = k_in; // only Q carries the 1/sqrt(d_k) factor

    const std::size_t n = q.rows(), m = k.rows(), dv = v.cols();
    const double c = spec.temperature;
    const std::size_t half = window / 2;

    DenseMatrix out(n, dv);
    std::vector<double> scores(m);
    std::uint64_t madds = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = window == 0 ? 0 : (i >= half ? i - half : 0);
        const std::size_t hi = window == 0 ? m : std::min(m, i + half + 1);
        double row_sum = 0.0;
        for (std::size_t j = lo; j < hi; ++j) {
            scores[j] = std::exp(c * dot_rows(q, i, k, j));
            row_sum += scores[j];
        }
        madds += (hi - lo) * (q.cols() + 1);
        if (norm == Normalize::row_softmax) {
            if (!(row_sum > 0.0))
                throw DegenerateRowError("softmax_attention: nonpositive row sum");
            for (std::size_t j = lo; j < hi; ++j)
                scores[j] /= row_sum;
            madds += hi - lo;
        }
        for (std::size_t j = lo; j < hi; ++j)
            for (std::size_t col = 0; col < dv; ++col)
                out(i, col) += scores[j] * v(j, col);
        madds += (hi - lo) * dv;
    }
    ops::add(madds);
    out.check_finite();
    return out;
}

DenseMatrix l2_kernel(const AttentionSpec& spec, const DenseMatrix& q_in, const DenseMatrix& k_in,
                      const DenseMatrix& v) {
    check_qk(q_in, k_in);
    check_kv(k_in, v);
    const DenseMatrix q = maybe_prescale(spec, q_in);
    const DenseMatrix& k = k_in; // only Q carries the 1/sqrt(d_k) factor

    const std::size_t n = q.rows(), m = k.rows(), dv = v.cols();
    const double c = spec.temperature;
    DenseMatrix out(n, dv);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double s = std::exp(-c * sqdist_rows(q, i, k, j));
            for (std::size_t col = 0; col < dv; ++col)
                out(i, col) += s * v(j, col);
        }
    }
    ops::add(static_cast<std::uint64_t>(n) * m * (2 * q.cols() + dv + 1));
    out.check_finite();
    return out;
}

} // namespace

void AttentionSpec::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ConfigError("AttentionSpec: temperature must be finite and positive");
    if (kind == AttentionKind::sliding_window) {
        if (window < 2 || window % 2 != 0)
            throw ConfigError("AttentionSpec: sliding window must be even and >= 2");
    }
}

DenseMatrix score_matrix(const AttentionSpec& spec, const DenseMatrix& q_in, const DenseMatrix& k_in) {
    spec.validate();
    check_qk(q_in, k_in);
    const DenseMatrix q = maybe_prescale(spec, q_in);
    const DenseMatrix& k = k_in; // only Q carries the 1/sqrt(d_k) factor

    const std::size_t n = q.rows(), m = k.rows();
    const double c = spec.temperature;
    DenseMatrix s(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            switch (spec.kind) {
            case AttentionKind::exp_dot:
            case AttentionKind::softmax_dot:
                s(i, j) = std::exp(c * dot_rows(q, i, k, j));
                break;
            case AttentionKind::sliding_window: {
                const std::size_t diff = i > j ? i - j : j - i;
                s(i, j) = diff <= spec.window / 2 ? std::exp(c * dot_rows(q, i, k, j)) : 0.0;
                break;
            }
            case AttentionKind::l2_rbf:
                s(i, j) = std::exp(-c * sqdist_rows(q, i, k, j));
                break;
            }
        }
    }
    ops::add(static_cast<std::uint64_t>(n) * m * (q.cols() + 1));
    s.check_finite();
    return s;
}

DenseMatrix exp_dot_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v) {
    spec.validate();
    return dot_kernel(spec, q, q, v, 0, Normalize::none);
}

DenseMatrix softmax_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v) {
    spec.validate();
    return dot_kernel(spec, q, q, v, 0, Normalize::row_softmax);
}

DenseMatrix sliding_window_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v) {
    spec.validate();
    if (spec.window == 0)
        throw ConfigError("sliding_window_attention: window unset");
    return dot_kernel(spec, q, q, v, spec.window, Normalize::none);
}

DenseMatrix l2_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v) {
    spec.validate();
    return l2_kernel(spec, q, q, v);
}

DenseMatrix attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                      const DenseMatrix& v) {
    spec.validate();
    switch (spec.kind) {
    case AttentionKind::exp_dot:
        return dot_kernel(spec, q, k, v, 0, Normalize::none);
    case AttentionKind::softmax_dot:
        return dot_kernel(spec, q, k, v, 0, Normalize::row_softmax);
    case AttentionKind::sliding_window:
        if (spec.window == 0)
            throw ConfigError("attention: window unset");
        return dot_kernel(spec, q, k, v, spec.window, Normalize::none);
    case AttentionKind::l2_rbf:
        return l2_kernel(spec, q, k, v);
    }
    throw ConfigError("attention: unknown kind");
}

} // namespace attnbounds
