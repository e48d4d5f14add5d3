#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attnbounds/tensor.hpp"

namespace attnbounds {

// Polynomial score function sum_z c_z (C x)^z of the dot product x = Q_i.K_j.
// The temperature C multiplies the score before the coefficients apply; it is
// folded into Q (Q <- C*Q) ahead of the feature expansion.
struct PolySpec {
    std::size_t order = 0;             // p
    std::vector<double> coefficients;  // c_0..c_p, exactly order+1 entries
    double temperature = 1.0;

    // c_z = 1/z! for z = 0..p, the truncated series for e^x.
    static PolySpec taylor(std::size_t p, double temperature = 1.0);
    // Single term c * x^p.
    static PolySpec monomial(std::size_t p, double coeff, double temperature = 1.0);

    void validate() const;
    bool is_monomial() const; // all coefficients below the order are zero
};

// Cap on d^p, the feature-map width per row. Exceeding it raises ResourceError
// before any allocation happens.
inline constexpr std::size_t kDefaultFeatureBudget = 10'000'000;

// Explicit order-p tensor embedding: the entry for the index tuple
// (r_1,...,r_p), enumerated lexicographically, is v_{r_1}*...*v_{r_p}.
// Satisfies feature_map(x,p).feature_map(y,p) = (x.y)^p. p = 0 yields [1].
std::vector<double> feature_map(std::span<const double> v, std::size_t p,
                                std::size_t budget = kDefaultFeatureBudget);

// S.V for the single monomial spec, computed as Qhat (Khat^T V) so the cost is
// linear in n for fixed d and p. Matches the O(n^2) direct product.
DenseMatrix sv_linear(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                      const DenseMatrix& v, std::size_t budget = kDefaultFeatureBudget);

// Row sums s_i = sum_j c (Q_i.K_j)^p via Qhat_i . (sum_j Khat_j), linear in n.
std::vector<double> row_sums_linear(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                                    std::size_t budget = kDefaultFeatureBudget);

// Full polynomial attention: sums the per-order monomial contributions and,
// when normalize is set, divides row i by the row sum s_i (error if s_i = 0).
DenseMatrix poly_attention(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                           const DenseMatrix& v, bool normalize,
                           std::size_t budget = kDefaultFeatureBudget);

// Order-p truncated-series approximation of softmax dot-product attention:
// poly_attention with c_z = 1/z! and normalization on. Rows whose truncated
// sum is zero or negative raise DegenerateRowError.
DenseMatrix taylor_softmax_attention(std::size_t p, double temperature, const DenseMatrix& q,
                                     const DenseMatrix& k, const DenseMatrix& v,
                                     std::size_t budget = kDefaultFeatureBudget);

} // namespace attnbounds
