#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "attnbounds/opcount.hpp"
#include "attnbounds/poly.hpp"

using namespace attnbounds;

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::vector<double> data(rows * cols);
    for (double& v : data)
        v = scale * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    return DenseMatrix(rows, cols, std::move(data));
}

// Independent O(n^2) oracle: evaluates the polynomial score for every (i, j)
// pair directly and multiplies through. Never touches the feature-map path.
double brute_score(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                   std::size_t i, std::size_t j) {
    double x = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c)
        x += q(i, c) * k(j, c);
    x *= spec.temperature;
    double acc = 0.0, pw = 1.0;
    for (std::size_t z = 0; z <= spec.order; ++z) {
        acc += spec.coefficients[z] * pw;
        pw *= x;
    }
    return acc;
}

DenseMatrix brute_sv(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                     const DenseMatrix& v, bool normalize) {
    DenseMatrix out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            const double s = brute_score(spec, q, k, i, j);
            row_sum += s;
            for (std::size_t col = 0; col < v.cols(); ++col)
                out(i, col) += s * v(j, col);
        }
        if (normalize)
            for (std::size_t col = 0; col < v.cols(); ++col)
                out(i, col) /= row_sum;
    }
    return out;
}

std::vector<double> brute_row_sums(const PolySpec& spec, const DenseMatrix& q,
                                   const DenseMatrix& k) {
    std::vector<double> sums(q.rows(), 0.0);
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < k.rows(); ++j)
            sums[i] += brute_score(spec, q, k, i, j);
    return sums;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

} // namespace

TEST_CASE("feature_map enumerates ordered tuples lexicographically") {
    const std::vector<double> cube = feature_map(std::vector<double>{2.0}, 3);
    REQUIRE(cube.size() == 1);
    CHECK(cube[0] == 8.0);

    const std::vector<double> pairs = feature_map(std::vector<double>{1.0, 2.0}, 2);
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[0] == 1.0); // (1,1)
    CHECK(pairs[1] == 2.0); // (1,2)
    CHECK(pairs[2] == 2.0); // (2,1)
    CHECK(pairs[3] == 4.0); // (2,2)

    const std::vector<double> empty_product = feature_map(std::vector<double>{3.0, -1.0, 0.5}, 0);
    REQUIRE(empty_product.size() == 1);
    CHECK(empty_product[0] == 1.0);
}

TEST_CASE("feature_map inner product identity") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + rng() % 4;
        const std::size_t p = rng() % 5;
        const DenseMatrix x = random_matrix(rng, 1, d, 1.0);
        const DenseMatrix y = random_matrix(rng, 1, d, 1.0);
        const std::vector<double> fx = feature_map(x.row(0), p);
        const std::vector<double> fy = feature_map(y.row(0), p);
        double lhs = 0.0;
        for (std::size_t f = 0; f < fx.size(); ++f)
            lhs += fx[f] * fy[f];
        double xy = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            xy += x(0, c) * y(0, c);
        const double rhs = std::pow(xy, static_cast<double>(p));
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("feature budget guard") {
    const std::vector<double> v(10, 0.5);
    CHECK_THROWS_AS(feature_map(v, 9), ResourceError); // 10^9 > 10^7
    CHECK_NOTHROW(feature_map(v, 3));
    CHECK_THROWS_AS(feature_map(v, 3, 100), ResourceError); // custom budget
}

TEST_CASE("sv_linear trivial cases") {
    std::mt19937_64 rng(47);
    const DenseMatrix q = random_matrix(rng, 6, 3, 1.0);
    const DenseMatrix k = random_matrix(rng, 6, 3, 1.0);
    const DenseMatrix v = random_matrix(rng, 6, 2, 1.0);

    // p = 0: every score is c, outputs are c * column sums of V
    const DenseMatrix flat = sv_linear(PolySpec::monomial(0, 1.0), q, k, v);
    for (std::size_t col = 0; col < 2; ++col) {
        double want = 0.0;
        for (std::size_t j = 0; j < 6; ++j)
            want += v(j, col);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(flat(i, col) == doctest::Approx(want).epsilon(1e-12));
    }

    // p = 1 equals (QK^T)V by associativity
    const DenseMatrix lin = sv_linear(PolySpec::monomial(1, 1.0), q, k, v);
    const DenseMatrix brute = brute_sv(PolySpec::monomial(1, 1.0), q, k, v, false);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t col = 0; col < 2; ++col)
            CHECK(rel_err(lin(i, col), brute(i, col)) <= 1e-12);

    CHECK_THROWS_AS(sv_linear(PolySpec::taylor(2), q, k, v), ConfigError);
    CHECK_THROWS_AS(sv_linear(PolySpec::monomial(1, 1.0), q, random_matrix(rng, 6, 2, 1.0), v),
                    ShapeError);
}

TEST_CASE("linear paths match the quadratic oracle") {
    std::mt19937_64 rng(53);
    for (std::size_t p = 0; p <= 3; ++p) {
        for (std::size_t d : {1u, 2u, 3u, 4u}) {
            const std::size_t n = 8;
            const DenseMatrix q = random_matrix(rng, n, d, 1.0);
            const DenseMatrix k = random_matrix(rng, n, d, 1.0);
            const DenseMatrix v = random_matrix(rng, n, 2, 1.0);
            const PolySpec mono = PolySpec::monomial(p, 1.0);

            const DenseMatrix sv = sv_linear(mono, q, k, v);
            const DenseMatrix sv_ref = brute_sv(mono, q, k, v, false);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t col = 0; col < 2; ++col)
                    CHECK(rel_err(sv(i, col), sv_ref(i, col)) <= 1e-10);

            const std::vector<double> sums = row_sums_linear(mono, q, k);
            const std::vector<double> sums_ref = brute_row_sums(mono, q, k);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(rel_err(sums[i], sums_ref[i]) <= 1e-10);
        }
    }
}

TEST_CASE("row_sums_linear trivial cases") {
    std::mt19937_64 rng(59);
    const DenseMatrix q = random_matrix(rng, 5, 3, 1.0);
    const DenseMatrix k = random_matrix(rng, 5, 3, 1.0);

    const std::vector<double> flat = row_sums_linear(PolySpec::monomial(0, 2.5), q, k);
    for (double s : flat)
        CHECK(s == doctest::Approx(5 * 2.5).epsilon(1e-12));

    const std::vector<double> lin = row_sums_linear(PolySpec::monomial(1, 1.0), q, k);
    for (std::size_t i = 0; i < 5; ++i) {
        double want = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            double ksum = 0.0;
            for (std::size_t j = 0; j < 5; ++j)
                ksum += k(j, c);
            want += q(i, c) * ksum;
        }
        CHECK(lin[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("poly_attention against the oracle") {
    std::mt19937_64 rng(61);

    // order-0 series, normalized: uniform weights, rows average V
    const DenseMatrix q0 = random_matrix(rng, 6, 2, 1.0);
    const DenseMatrix k0 = random_matrix(rng, 6, 2, 1.0);
    const DenseMatrix v0 = random_matrix(rng, 6, 2, 1.0);
    const DenseMatrix uniform = poly_attention(PolySpec::taylor(0), q0, k0, v0, true);
    for (std::size_t col = 0; col < 2; ++col) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 6; ++j)
            mean += v0(j, col) / 6.0;
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(uniform(i, col) == doctest::Approx(mean).epsilon(1e-12));
    }

    // order-2 series, normalized, bounded entries
    const DenseMatrix q = random_matrix(rng, 8, 2, 0.5);
    const DenseMatrix k = random_matrix(rng, 8, 2, 0.5);
    const DenseMatrix v = random_matrix(rng, 8, 2, 1.0);
    const PolySpec t2 = PolySpec::taylor(2);
    const DenseMatrix got = poly_attention(t2, q, k, v, true);
    const DenseMatrix want = brute_sv(t2, q, k, v, true);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t col = 0; col < 2; ++col)
            CHECK(rel_err(got(i, col), want(i, col)) <= 1e-10);

    // a single c_1 = 1 coefficient without normalization equals sv_linear p=1
    PolySpec single;
    single.order = 1;
    single.coefficients = {0.0, 1.0};
    const DenseMatrix lhs = poly_attention(single, q, k, v, false);
    const DenseMatrix rhs = sv_linear(PolySpec::monomial(1, 1.0), q, k, v);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t col = 0; col < 2; ++col)
            CHECK(lhs(i, col) == doctest::Approx(rhs(i, col)).epsilon(1e-12));
}

TEST_CASE("temperature folds into the scores") {
    std::mt19937_64 rng(67);
    const DenseMatrix q = random_matrix(rng, 5, 3, 0.4);
    const DenseMatrix k = random_matrix(rng, 5, 3, 0.4);
    const DenseMatrix v = random_matrix(rng, 5, 1, 1.0);
    const PolySpec warm = PolySpec::taylor(3, 1.7);
    const DenseMatrix got = poly_attention(warm, q, k, v, true);
    const DenseMatrix want = brute_sv(warm, q, k, v, true);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(rel_err(got(i, 0), want(i, 0)) <= 1e-10);
}

TEST_CASE("degenerate truncated row sums raise") {
    // Q.K = -3 with p = 1 makes the truncated sum 1 + (-3) < 0.
    const DenseMatrix q{{1.0}};
    const DenseMatrix k{{-3.0}};
    const DenseMatrix v{{1.0}};
    CHECK_THROWS_AS(taylor_softmax_attention(1, 1.0, q, k, v), DegenerateRowError);

    // an exactly-zero row sum is rejected for plain poly_attention too
    PolySpec zero;
    zero.order = 0;
    zero.coefficients = {0.0};
    CHECK_THROWS_AS(poly_attention(zero, q, k, v, true), DegenerateRowError);
}

TEST_CASE("op counts for sv_linear grow linearly in n") {
    std::mt19937_64 rng(71);
    const PolySpec mono = PolySpec::monomial(2, 1.0);
    std::vector<std::uint64_t> counts;
    for (std::size_t n : {64u, 128u, 256u}) {
        const DenseMatrix q = random_matrix(rng, n, 3, 1.0);
        const DenseMatrix k = random_matrix(rng, n, 3, 1.0);
        const DenseMatrix v = random_matrix(rng, n, 1, 1.0);
        ops::reset();
        sv_linear(mono, q, k, v);
        counts.push_back(ops::count());
    }
    // doubling n should double the tally, up to small constants
    for (std::size_t i = 1; i < counts.size(); ++i) {
        const double ratio = static_cast<double>(counts[i]) / static_cast<double>(counts[i - 1]);
        CHECK(ratio > 1.8);
        CHECK(ratio < 2.2);
    }
}
