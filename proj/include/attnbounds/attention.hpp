#pragma once

#include <cstddef>

#include "attnbounds/tensor.hpp"

namespace attnbounds {

enum class AttentionKind { exp_dot, softmax_dot, sliding_window, l2_rbf };

// Which score function f and normalization h to use, plus the temperature C.
// The 1/sqrt(d_k) factor is off by default; when enabled it is applied by
// pre-scaling Q, which costs O(n d) and leaves the kernels untouched.
struct AttentionSpec {
    AttentionKind kind = AttentionKind::exp_dot;
    double temperature = 1.0; // C > 0
    std::size_t window = 0;   // w, sliding_window only; even, >= 2
    bool scale_by_inv_sqrt_dk = false;

    void validate() const;
};

// S_ij = e^{C Q_i.K_j} for the dot-product kinds, e^{-C ||Q_i-K_j||^2} for
// l2_rbf, and the banded dot-product variant (zero outside |i-j| <= w/2) for
// sliding_window. Materializes the full n x n matrix; intended for tests and
// small inputs.
DenseMatrix score_matrix(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k);

// The reference kernels below use the self shape Q=K. Each streams one score
// row at a time, so memory stays O(n) while time is the deliberate O(n^2 d).
DenseMatrix exp_dot_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v);
DenseMatrix softmax_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v);
DenseMatrix sliding_window_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v);
DenseMatrix l2_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& v);

// General Q != K entry point; delegates to the same kernels.
DenseMatrix attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                      const DenseMatrix& v);

} // namespace attnbounds
