#include "attnbounds/poly.hpp"

#include <cmath>
#include <limits>

#include "attnbounds/opcount.hpp"

namespace attnbounds {

PolySpec PolySpec::taylor(std::size_t p, double temperature) {
    PolySpec spec;
    spec.order = p;
    spec.temperature = temperature;
    spec.coefficients.resize(p + 1);
    double fact = 1.0;
    for (std::size_t z = 0; z <= p; ++z) {
        if (z > 0)
            fact *= static_cast<double>(z);
        spec.coefficients[z] = 1.0 / fact;
    }
    return spec;
}

PolySpec PolySpec::monomial(std::size_t p, double coeff, double temperature) {
    PolySpec spec;
    spec.order = p;
    spec.temperature = temperature;
    spec.coefficients.assign(p + 1, 0.0);
    spec.coefficients[p] = coeff;
    return spec;
}

void PolySpec::validate() const {
    if (coefficients.size() != order + 1)
        throw ConfigError("PolySpec: coefficient count must be order+1");
    if (!std::isfinite(temperature))
        throw ConfigError("PolySpec: temperature must be finite");
    for (double c : coefficients)
        if (!std::isfinite(c))
            throw ConfigError("PolySpec: non-finite coefficient");
}

bool PolySpec::is_monomial() const {
    for (std::size_t z = 0; z + 1 <= order; ++z)
        if (coefficients[z] != 0.0)
            return false;
    return true;
}

namespace {

// d^p, guarded against the budget before any multiplication can overflow.
std::size_t feature_width(std::size_t d, std::size_t p, std::size_t budget) {
    if (p > 0 && std::log(static_cast<double>(d)) * static_cast<double>(p) >
                     std::log(static_cast<double>(budget)) + 1e-9)
        throw ResourceError("feature_map: d^p exceeds the feature budget");
    std::size_t w = 1;
    for (std::size_t i = 0; i < p; ++i) {
        w *= d;
        if (w > budget)
            throw ResourceError("feature_map: d^p exceeds the feature budget");
    }
    return w;
}

void check_poly_shapes(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix* v) {
    if (q.cols() != k.cols())
        throw ShapeError("poly attention: Q and K column mismatch");
    if (v && k.rows() != v->rows())
        throw ShapeError("poly attention: K and V row mismatch");
}

// Walks one row through the ascending tensor powers: after step z the buffer
// holds the order-z embedding (d^z entries, index tuples in lexicographic
// order). Buffers are reused across rows so no per-row allocation happens.
struct RowExpander {
    std::vector<double> cur, next;

    void reset() { cur.assign(1, 1.0); }

    void step(const DenseMatrix& m, std::size_t row, double scale) {
        const std::size_t d = m.cols();
        next.resize(cur.size() * d);
        for (std::size_t a = 0; a < cur.size(); ++a)
            for (std::size_t r = 0; r < d; ++r)
                next[a * d + r] = cur[a] * (scale * m(row, r));
        cur.swap(next);
    }
};

// One linear pass over K and one over Q computing, for every order z with a
// nonzero coefficient, the reductions Khat_z^T V and sum_j Khat_z[j], then the
// products Qhat_z against them. The temperature is folded into the Q-side
// expansion steps. Everything stays O(n) in the row counts with a working set
// of sum_z d^z values per order.
void poly_core(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
               const DenseMatrix* v, std::size_t budget, DenseMatrix* out_sv,
               std::vector<double>* out_sums) {
    spec.validate();
    const std::size_t p = spec.order;
    const std::size_t d = q.cols();
    const std::size_t dv = out_sv && v ? v->cols() : 0;
    feature_width(d, p, budget);

    std::vector<char> active(p + 1);
    for (std::size_t z = 0; z <= p; ++z)
        active[z] = spec.coefficients[z] != 0.0;

    // K-side reductions per active order
    std::vector<std::vector<double>> ktv(p + 1), ksum(p + 1);
    {
        std::size_t width = 1;
        for (std::size_t z = 0; z <= p; ++z) {
            if (active[z]) {
                if (out_sv)
                    ktv[z].assign(width * dv, 0.0);
                if (out_sums)
                    ksum[z].assign(width, 0.0);
            }
            width *= d;
        }
    }

    std::uint64_t madds = 0;
    RowExpander expand;
    for (std::size_t j = 0; j < k.rows(); ++j) {
        expand.reset();
        for (std::size_t z = 0; z <= p; ++z) {
            if (z > 0) {
                expand.step(k, j, 1.0);
                madds += expand.cur.size();
            }
            if (!active[z])
                continue;
            const std::size_t width = expand.cur.size();
            if (out_sv) {
                for (std::size_t f = 0; f < width; ++f) {
                    const double kf = expand.cur[f];
                    for (std::size_t col = 0; col < dv; ++col)
                        ktv[z][f * dv + col] += kf * (*v)(j, col);
                }
                madds += width * dv;
            }
            if (out_sums) {
                for (std::size_t f = 0; f < width; ++f)
                    ksum[z][f] += expand.cur[f];
                madds += width;
            }
        }
    }

    if (out_sv)
        *out_sv = DenseMatrix(q.rows(), dv);
    if (out_sums)
        out_sums->assign(q.rows(), 0.0);

    for (std::size_t i = 0; i < q.rows(); ++i) {
        expand.reset();
        for (std::size_t z = 0; z <= p; ++z) {
            if (z > 0) {
                expand.step(q, i, spec.temperature);
                madds += expand.cur.size();
            }
            if (!active[z])
                continue;
            const double coeff = spec.coefficients[z];
            const std::size_t width = expand.cur.size();
            if (out_sv) {
                for (std::size_t f = 0; f < width; ++f) {
                    const double qf = coeff * expand.cur[f];
                    for (std::size_t col = 0; col < dv; ++col)
                        (*out_sv)(i, col) += qf * ktv[z][f * dv + col];
                }
                madds += width * dv;
            }
            if (out_sums) {
                double s = 0.0;
                for (std::size_t f = 0; f < width; ++f)
                    s += expand.cur[f] * ksum[z][f];
                (*out_sums)[i] += coeff * s;
                madds += width;
            }
        }
    }
    ops::add(madds);
}

} // namespace

std::vector<double> feature_map(std::span<const double> v, std::size_t p, std::size_t budget) {
    if (v.empty())
        throw ShapeError("feature_map: empty vector");
    const std::size_t d = v.size();
    const std::size_t width = feature_width(d, p, budget);
    std::vector<double> cur(1, 1.0), next;
    for (std::size_t round = 0; round < p; ++round) {
        next.assign(cur.size() * d, 0.0);
        for (std::size_t a = 0; a < cur.size(); ++a)
            for (std::size_t r = 0; r < d; ++r)
                next[a * d + r] = cur[a] * v[r];
        cur.swap(next);
    }
    cur.resize(width);
    return cur;
}

DenseMatrix sv_linear(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                      const DenseMatrix& v, std::size_t budget) {
    spec.validate();
    if (!spec.is_monomial())
        throw ConfigError("sv_linear: spec must be a single monomial");
    check_poly_shapes(q, k, &v);
    DenseMatrix out;
    poly_core(spec, q, k, &v, budget, &out, nullptr);
    out.check_finite();
    return out;
}

std::vector<double> row_sums_linear(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                                    std::size_t budget) {
    spec.validate();
    if (!spec.is_monomial())
        throw ConfigError("row_sums_linear: spec must be a single monomial");
    check_poly_shapes(q, k, nullptr);
    std::vector<double> sums;
    poly_core(spec, q, k, nullptr, budget, nullptr, &sums);
    return sums;
}

DenseMatrix poly_attention(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                           const DenseMatrix& v, bool normalize, std::size_t budget) {
    check_poly_shapes(q, k, &v);
    DenseMatrix out;
    if (!normalize) {
        poly_core(spec, q, k, &v, budget, &out, nullptr);
        out.check_finite();
        return out;
    }
    std::vector<double> sums;
    poly_core(spec, q, k, &v, budget, &out, &sums);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        if (sums[i] == 0.0 || !std::isfinite(sums[i]))
            throw DegenerateRowError("poly_attention: zero row sum under normalization");
        for (std::size_t col = 0; col < out.cols(); ++col)
            out(i, col) /= sums[i];
    }
    ops::add(static_cast<std::uint64_t>(out.rows()) * out.cols());
    out.check_finite();
    return out;
}

DenseMatrix taylor_softmax_attention(std::size_t p, double temperature, const DenseMatrix& q,
                                     const DenseMatrix& k, const DenseMatrix& v, std::size_t budget) {
    const PolySpec spec = PolySpec::taylor(p, temperature);
    check_poly_shapes(q, k, &v);
    DenseMatrix out;
    std::vector<double> sums;
    poly_core(spec, q, k, &v, budget, &out, &sums);
    // Truncated sums must stay strictly positive for the softmax reading;
    // odd truncations on negative scores can break this.
    for (double s : sums)
        if (!(s > 0.0))
            throw DegenerateRowError("taylor_softmax_attention: nonpositive truncated row sum");
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t col = 0; col < out.cols(); ++col)
            out(i, col) /= sums[i];
    ops::add(static_cast<std::uint64_t>(out.rows()) * out.cols());
    out.check_finite();
    return out;
}

} // namespace attnbounds
