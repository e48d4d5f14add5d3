#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnbounds/tensor.hpp"

namespace attnbounds {

struct BenchRecord {
    std::string kernel;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t p = 0;
    std::size_t reps = 0;
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
    std::uint64_t op_count = 0; // multiply-add tally for one evaluation

    bool operator==(const BenchRecord& other) const = default;
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Known kernels: exp_dot, softmax_dot, sliding_window, l2_rbf, poly, taylor.
// poly and taylor run the linear-path attention with series coefficients of
// order p and normalization on. Inputs are seed-deterministic uniforms in
// [-1,1] (value width d); one warm-up evaluation per size is discarded and
// repetitions are interleaved across sizes. Single-threaded throughout.
std::vector<BenchRecord> run_scaling(const std::string& kernel, std::span<const std::size_t> sizes,
                                     std::size_t d, std::size_t p, std::size_t reps,
                                     std::uint64_t seed);

// Least-squares slope of log(mean_seconds) against log(n).
FitResult fit_exponent(std::span<const BenchRecord> records);
// Same fit on the op-count column; the machine-independent scaling signal.
FitResult fit_exponent_ops(std::span<const BenchRecord> records);

struct TaylorPoint {
    std::size_t p = 0;
    // Max elementwise |approx - softmax| across the output; empty when the
    // truncated row sums were degenerate at this order.
    std::optional<double> max_abs_error;
};

// Error of the order-p series approximation against the softmax reference for
// p = 0..p_max on one fixed random input. input_scale bounds the entries so
// that |Q_i.K_j| stays inside the convergent regime ( <= 1 for scale 1/sqrt(d)).
std::vector<TaylorPoint> taylor_sweep(std::size_t p_max, double temperature, std::size_t n,
                                      std::size_t d, double input_scale, std::uint64_t seed);

// CSV with header kernel,n,d,p,reps,mean_seconds,std_seconds,op_count.
// Doubles are emitted with full precision so parse(emit(r)) == r.
std::string records_to_csv(std::span<const BenchRecord> records);
std::vector<BenchRecord> records_from_csv(const std::string& text);
std::string records_to_json(std::span<const BenchRecord> records);

} // namespace attnbounds
