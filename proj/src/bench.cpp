#include "attnbounds/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attnbounds/attention.hpp"
#include "attnbounds/opcount.hpp"
#include "attnbounds/poly.hpp"

namespace attnbounds {

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::vector<double> data(rows * cols);
    for (double& v : data)
        v = scale * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    return DenseMatrix(rows, cols, std::move(data));
}

struct Workload {
    DenseMatrix q, k, v;
};

Workload make_workload(std::size_t n, std::size_t d, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    Workload w{random_matrix(rng, n, d, scale), random_matrix(rng, n, d, scale),
               random_matrix(rng, n, d, scale)};
    return w;
}

using KernelFn = DenseMatrix (*)(const Workload&, std::size_t p, std::size_t window);

DenseMatrix run_exp_dot(const Workload& w, std::size_t, std::size_t) {
    AttentionSpec spec{AttentionKind::exp_dot, 1.0, 0, false};
    return exp_dot_attention(spec, w.q, w.v);
}
DenseMatrix run_softmax(const Workload& w, std::size_t, std::size_t) {
    AttentionSpec spec{AttentionKind::softmax_dot, 1.0, 0, false};
    return softmax_attention(spec, w.q, w.v);
}
DenseMatrix run_sliding(const Workload& w, std::size_t, std::size_t window) {
    AttentionSpec spec{AttentionKind::sliding_window, 1.0, window, false};
    return sliding_window_attention(spec, w.q, w.v);
}
DenseMatrix run_l2(const Workload& w, std::size_t, std::size_t) {
    AttentionSpec spec{AttentionKind::l2_rbf, 1.0, 0, false};
    return l2_attention(spec, w.q, w.v);
}
DenseMatrix run_poly(const Workload& w, std::size_t p, std::size_t) {
    return taylor_softmax_attention(p, 1.0, w.q, w.k, w.v);
}

KernelFn kernel_by_name(const std::string& kernel) {
    if (kernel == "exp_dot") return run_exp_dot;
    if (kernel == "softmax_dot") return run_softmax;
    if (kernel == "sliding_window") return run_sliding;
    if (kernel == "l2_rbf") return run_l2;
    if (kernel == "poly" || kernel == "taylor") return run_poly;
    throw ConfigError("run_scaling: unknown kernel " + kernel);
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

std::vector<BenchRecord> run_scaling(const std::string& kernel, std::span<const std::size_t> sizes,
                                     std::size_t d, std::size_t p, std::size_t reps,
                                     std::uint64_t seed) {
    if (sizes.size() < 3)
        throw ConfigError("run_scaling: need at least 3 sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw ConfigError("run_scaling: sizes must be strictly ascending");
    if (reps < 3)
        throw ConfigError("run_scaling: reps must be >= 3");
    const KernelFn fn = kernel_by_name(kernel);
    const bool poly_path = kernel == "poly" || kernel == "taylor";
    // Keep |Q_i.K_j| <= 1 on the series path so truncated sums stay positive.
    const double scale = poly_path ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
    const std::size_t window = 16; // sliding_window kernel only

    std::vector<Workload> work;
    work.reserve(sizes.size());
    for (std::size_t n : sizes)
        work.push_back(make_workload(n, d, seed + n, scale));

    // Warm-up pass, discarded; also sizes the inner batch so that one timed
    // region is never shorter than ~200us.
    std::vector<std::size_t> batch(sizes.size(), 1);
    std::vector<std::uint64_t> op_counts(sizes.size(), 0);
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        ops::reset();
        const double t0 = now_seconds();
        fn(work[s], p, window);
        const double elapsed = now_seconds() - t0;
        op_counts[s] = ops::count();
        if (elapsed < 2e-4)
            batch[s] = static_cast<std::size_t>(2e-4 / std::max(elapsed, 1e-7)) + 1;
    }

    std::vector<std::vector<double>> times(sizes.size());
    for (std::size_t rep = 0; rep < reps; ++rep) {
        for (std::size_t s = 0; s < sizes.size(); ++s) {
            const double t0 = now_seconds();
            for (std::size_t b = 0; b < batch[s]; ++b)
                fn(work[s], p, window);
            const double elapsed = (now_seconds() - t0) / static_cast<double>(batch[s]);
            times[s].push_back(elapsed);
        }
    }

    std::vector<BenchRecord> records;
    records.reserve(sizes.size());
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        double mean = 0.0;
        for (double t : times[s])
            mean += t;
        mean /= static_cast<double>(reps);
        double var = 0.0;
        for (double t : times[s])
            var += (t - mean) * (t - mean);
        var /= static_cast<double>(reps);
        records.push_back(BenchRecord{kernel, sizes[s], d, poly_path ? p : 0, reps, mean,
                                      std::sqrt(var), op_counts[s]});
    }
    return records;
}

namespace {

FitResult fit_loglog(std::span<const BenchRecord> records, bool use_ops) {
    if (records.size() < 3)
        throw ConfigError("fit_exponent: need at least 3 records");
    const std::size_t n = records.size();
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = use_ops ? static_cast<double>(records[i].op_count)
                                 : records[i].mean_seconds;
        if (!(records[i].n > 0) || !(y > 0.0))
            throw ConfigError("fit_exponent: n and the fitted metric must be positive");
        xs[i] = std::log(static_cast<double>(records[i].n));
        ys[i] = std::log(y);
    }
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (records[i].n == records[j].n)
                throw ConfigError("fit_exponent: duplicate n");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0)
        throw ConfigError("fit_exponent: zero variance in log n");

    FitResult fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy == 0.0) {
        fit.r_squared = 1.0; // perfectly flat data is perfectly explained
    } else {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
            ss_res += resid * resid;
        }
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

} // namespace

FitResult fit_exponent(std::span<const BenchRecord> records) { return fit_loglog(records, false); }
FitResult fit_exponent_ops(std::span<const BenchRecord> records) { return fit_loglog(records, true); }

std::vector<TaylorPoint> taylor_sweep(std::size_t p_max, double temperature, std::size_t n,
                                      std::size_t d, double input_scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const DenseMatrix q = random_matrix(rng, n, d, input_scale);
    const DenseMatrix k = random_matrix(rng, n, d, input_scale);
    const DenseMatrix v = random_matrix(rng, n, d, 1.0);

    AttentionSpec spec{AttentionKind::softmax_dot, temperature, 0, false};
    const DenseMatrix reference = attention(spec, q, k, v);

    std::vector<TaylorPoint> out;
    out.reserve(p_max + 1);
    for (std::size_t p = 0; p <= p_max; ++p) {
        TaylorPoint point{p, std::nullopt};
        try {
            const DenseMatrix approx = taylor_softmax_attention(p, temperature, q, k, v);
            double err = 0.0;
            for (std::size_t i = 0; i < reference.rows(); ++i)
                for (std::size_t j = 0; j < reference.cols(); ++j)
                    err = std::max(err, std::abs(approx(i, j) - reference(i, j)));
            point.max_abs_error = err;
        } catch (const DegenerateRowError&) {
            // recorded as a failure for this order; the sweep continues
        }
        out.push_back(point);
    }
    return out;
}

std::string records_to_csv(std::span<const BenchRecord> records) {
    std::ostringstream out;
    out.precision(17);
    out << "kernel,n,d,p,reps,mean_seconds,std_seconds,op_count\n";
    for (const BenchRecord& r : records)
        out << r.kernel << ',' << r.n << ',' << r.d << ',' << r.p << ',' << r.reps << ','
            << r.mean_seconds << ',' << r.std_seconds << ',' << r.op_count << '\n';
    return out.str();
}

std::vector<BenchRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "kernel,n,d,p,reps,mean_seconds,std_seconds,op_count")
        throw ConfigError("records_from_csv: bad header");
    std::vector<BenchRecord> records;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        BenchRecord r;
        std::string field;
        auto next = [&]() {
            if (!std::getline(ls, field, ','))
                throw ConfigError("records_from_csv: short row");
            return field;
        };
        r.kernel = next();
        r.n = std::stoull(next());
        r.d = std::stoull(next());
        r.p = std::stoull(next());
        r.reps = std::stoull(next());
        r.mean_seconds = std::stod(next());
        r.std_seconds = std::stod(next());
        r.op_count = std::stoull(next());
        records.push_back(std::move(r));
    }
    return records;
}

std::string records_to_json(std::span<const BenchRecord> records) {
    nlohmann::json j = nlohmann::json::array();
    for (const BenchRecord& r : records)
        j.push_back({{"kernel", r.kernel},
                     {"n", r.n},
                     {"d", r.d},
                     {"p", r.p},
                     {"reps", r.reps},
                     {"mean_seconds", r.mean_seconds},
                     {"std_seconds", r.std_seconds},
                     {"op_count", r.op_count}});
    return j.dump(2);
}

} // namespace attnbounds
