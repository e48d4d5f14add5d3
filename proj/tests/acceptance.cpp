// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Each criterion pins its tolerances and its runtime budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attnbounds/attention.hpp"
#include "attnbounds/bench.hpp"
#include "attnbounds/gadgets.hpp"
#include "attnbounds/poly.hpp"
#include "attnbounds/problems.hpp"

using namespace attnbounds;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::vector<double> data(rows * cols);
    for (double& v : data)
        v = uniform(rng, -scale, scale);
    return DenseMatrix(rows, cols, std::move(data));
}

// ---- criterion 1: reduction-chain equivalence --------------------------------

bool criterion_reductions(std::string& detail) {
    std::size_t oracle_mismatches = 0, identity_mismatches = 0;
    const std::size_t trials = 1000;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::mt19937_64 mix(0xC0FFEE + trial);
        const std::size_t n = 1 + mix() % 16;
        const std::size_t d = 1 + mix() % 10;
        const ProblemInstance ovp =
            generate(ProblemKind::OVP, n, d, 0, Planted::random_free, mix());
        const ProblemInstance tvpp = ovp_to_tvpp(ovp);
        const ProblemInstance bhfp = ovp_to_bhfp(ovp);
        const ProblemInstance bhcp = bhfp_to_bhcp(bhfp);

        const bool truth = oracle(ovp);
        if (oracle(tvpp) != truth || oracle(bhcp) != truth)
            ++oracle_mismatches;

        const int dd = static_cast<int>(d);
        const int d_far = static_cast<int>(bhfp.a.dim());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const int base = dot(ovp.a, i, ovp.b, j);
                const int far = squared_distance(bhfp.a, i, bhfp.b, j);
                if (dot(tvpp.a, i, tvpp.b, j) != dd - base || far != 2 * dd - 2 * base ||
                    squared_distance(bhcp.a, i, bhcp.b, j) != d_far - far) {
                    ++identity_mismatches;
                    i = n;
                    break;
                }
            }
    }
    std::ostringstream os;
    os << trials << " instances, " << oracle_mismatches << " oracle mismatches, "
       << identity_mismatches << " identity mismatches";
    detail = os.str();
    return oracle_mismatches == 0 && identity_mismatches == 0;
}

// ---- criterion 2/3: gadget soundness and separation ---------------------------

struct VariantCase {
    HardnessVariant variant;
    bool mu_tracks_n; // mu = 1 - 1/n^2 per instance
};

std::vector<VariantCase> acceptance_variants() {
    auto v = [](Mechanism mech, Mode mode, double mu, std::size_t w = 0) {
        HardnessVariant out;
        out.mechanism = mech;
        out.mode = mode;
        out.mu = mu;
        out.window = w;
        return out;
    };
    return {
        {v(Mechanism::exp_dot, Mode::exact, 0.0), false},
        {v(Mechanism::exp_dot, Mode::multiplicative, 0.5), false},
        {v(Mechanism::exp_dot, Mode::additive, 1.0), false},
        {v(Mechanism::softmax_dot, Mode::exact, 0.0), false},
        {v(Mechanism::softmax_dot, Mode::multiplicative, 0.5), false},
        {v(Mechanism::softmax_dot, Mode::multiplicative, 0.5), true},
        {v(Mechanism::sliding_window, Mode::exact, 0.0, 8), false},
        {v(Mechanism::l2_rbf, Mode::exact, 0.0), false},
        {v(Mechanism::l2_rbf, Mode::multiplicative, 0.5), false},
        {v(Mechanism::score_matrix_approx, Mode::multiplicative, 0.5), false},
        {v(Mechanism::score_matrix_approx, Mode::additive, 1.0), false},
    };
}

struct SoundnessStream {
    ProblemInstance instance;
    HardnessVariant variant;
};

// The exact instance/variant stream shared by criteria 2 and 3.
SoundnessStream stream_case(const VariantCase& vc, std::size_t idx) {
    const ProblemKind kind =
        vc.variant.mechanism == Mechanism::l2_rbf ? ProblemKind::BHCP : ProblemKind::TVPP;
    const bool want_yes = idx < 200;
    std::mt19937_64 mix(0xABCD0000 + idx * 977 +
                        static_cast<std::size_t>(vc.variant.mechanism) * 131 +
                        static_cast<std::size_t>(vc.variant.mode) * 17 + (vc.mu_tracks_n ? 7 : 0));
    const std::size_t n = 2 + mix() % 31;   // n in [2, 32]
    const std::size_t d = 2 + mix() % 7;    // d in [2, 8]
    const int t_lo = kind == ProblemKind::TVPP || want_yes ? 1 : 0;
    const int t = t_lo + static_cast<int>(mix() % (d - t_lo + 1));
    HardnessVariant variant = vc.variant;
    if (vc.mu_tracks_n)
        variant.mu = 1.0 - 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    if (variant.mechanism == Mechanism::sliding_window)
        variant.window = 2 + 2 * (mix() % 8); // w in {2,...,16}
    return {generate(kind, n, d, t, want_yes ? Planted::yes : Planted::no, mix()), variant};
}

bool criterion_soundness(std::string& detail) {
    std::size_t total = 0, disagreements = 0;
    for (const VariantCase& vc : acceptance_variants()) {
        for (std::size_t idx = 0; idx < 400; ++idx) {
            const SoundnessStream sc = stream_case(vc, idx);
            const bool truth = oracle(sc.instance);
            ++total;
            if (decide(sc.instance, sc.variant) != truth) {
                ++disagreements;
                continue;
            }
            if (sc.variant.mode != Mode::exact &&
                decide(sc.instance, sc.variant, InjectionPolicy::worst_case()) != truth)
                ++disagreements;
        }
    }
    std::ostringstream os;
    os << total << " decisions across " << acceptance_variants().size() << " variants, "
       << disagreements << " disagreements (worst-case injection at full budget included)";
    detail = os.str();
    return disagreements == 0;
}

bool criterion_separation(std::string& detail) {
    std::size_t bundles = 0, violations = 0;
    for (const VariantCase& vc : acceptance_variants()) {
        for (std::size_t idx = 0; idx < 400; idx += 7) {
            const SoundnessStream sc = stream_case(vc, idx);
            GadgetBundle bundle;
            if (sc.variant.mechanism == Mechanism::l2_rbf) {
                bundle = build_bhcp_gadget(sc.instance.a, sc.instance.b, sc.instance.threshold,
                                           sc.variant);
            } else if (sc.variant.mechanism == Mechanism::sliding_window) {
                // the bookkeeping k^2 = n_total * w needs w | k^2
                const std::size_t k = sc.instance.a.size();
                if (k % 2 != 0)
                    continue;
                HardnessVariant variant = sc.variant;
                variant.window = 2;
                bundle = build_sliding_gadget(sc.instance.a, sc.instance.b,
                                              sc.instance.threshold, variant, k * k / 2, 2);
            } else {
                bundle = build_tvpp_gadget(sc.instance.a, sc.instance.b, sc.instance.threshold,
                                           sc.variant);
            }
            ++bundles;
            if (!(bundle.log_Delta - bundle.log_delta > 0.0))
                ++violations;
        }
    }

    // analytic exp_dot exact gap: log Delta - log delta = C - ln n = ln n
    double worst_gap_err = 0.0;
    for (std::size_t n = 2; n <= 32; ++n) {
        std::mt19937_64 mix(n);
        const std::size_t d = 2 + mix() % 7;
        const int t = 1 + static_cast<int>(mix() % d);
        const ProblemInstance inst = generate(ProblemKind::TVPP, n, d, t, Planted::yes, mix());
        HardnessVariant exact;
        exact.mechanism = Mechanism::exp_dot;
        exact.mode = Mode::exact;
        const GadgetBundle g = build_tvpp_gadget(inst.a, inst.b, t, exact);
        const double want = std::log(static_cast<double>(n));
        worst_gap_err = std::max(worst_gap_err,
                                 std::abs((g.log_Delta - g.log_delta) - want));
    }

    std::ostringstream os;
    os << bundles << " bundles, " << violations << " separation violations, analytic gap error "
       << worst_gap_err << " (tol 1e-9)";
    detail = os.str();
    return violations == 0 && worst_gap_err <= 1e-9;
}

// ---- criterion 4: linear-path equivalence -------------------------------------

double brute_poly_score(const PolySpec& spec, const DenseMatrix& q, const DenseMatrix& k,
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

double mixed_rel(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

bool criterion_linear_path(std::string& detail) {
    double worst = 0.0;
    std::mt19937_64 rng(0x11E4);
    for (std::size_t n = 1; n <= 64; ++n) {
        for (std::size_t d = 1; d <= 4; ++d) {
            for (std::size_t p = 0; p <= 3; ++p) {
                const DenseMatrix q = random_matrix(rng, n, d, 1.0);
                const DenseMatrix k = random_matrix(rng, n, d, 1.0);
                const DenseMatrix v = random_matrix(rng, n, 2, 1.0);
                const PolySpec mono = PolySpec::monomial(p, 1.0);

                const DenseMatrix sv = sv_linear(mono, q, k, v);
                const std::vector<double> sums = row_sums_linear(mono, q, k);
                for (std::size_t i = 0; i < n; ++i) {
                    double want_sum = 0.0;
                    double want_sv[2] = {0.0, 0.0};
                    for (std::size_t j = 0; j < n; ++j) {
                        const double s = brute_poly_score(mono, q, k, i, j);
                        want_sum += s;
                        want_sv[0] += s * v(j, 0);
                        want_sv[1] += s * v(j, 1);
                    }
                    worst = std::max(worst, mixed_rel(sums[i], want_sum));
                    worst = std::max(worst, mixed_rel(sv(i, 0), want_sv[0]));
                    worst = std::max(worst, mixed_rel(sv(i, 1), want_sv[1]));
                }

                // normalized full-polynomial path with bounded scores
                const double scale = 1.0 / std::sqrt(static_cast<double>(d));
                const DenseMatrix qs = random_matrix(rng, n, d, scale);
                const DenseMatrix ks = random_matrix(rng, n, d, scale);
                const PolySpec taylor = PolySpec::taylor(p);
                const DenseMatrix normalized = poly_attention(taylor, qs, ks, v, true);
                for (std::size_t i = 0; i < n; ++i) {
                    double row_sum = 0.0;
                    double want_row[2] = {0.0, 0.0};
                    for (std::size_t j = 0; j < n; ++j) {
                        const double s = brute_poly_score(taylor, qs, ks, i, j);
                        row_sum += s;
                        want_row[0] += s * v(j, 0);
                        want_row[1] += s * v(j, 1);
                    }
                    worst = std::max(worst, mixed_rel(normalized(i, 0), want_row[0] / row_sum));
                    worst = std::max(worst, mixed_rel(normalized(i, 1), want_row[1] / row_sum));
                }
            }
        }
    }

    // feature-map inner-product identity on 1000 random pairs
    double worst_feature = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + rng() % 4;
        const std::size_t p = rng() % 4;
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
        worst_feature =
            std::max(worst_feature, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }

    std::ostringstream os;
    os << "worst linear-vs-brute relative error " << worst << ", worst feature-map identity error "
       << worst_feature << " (tol 1e-9)";
    detail = os.str();
    return worst <= 1e-9 && worst_feature <= 1e-9;
}

// ---- criterion 5: scaling exponents -------------------------------------------

bool criterion_scaling(std::string& detail) {
    const std::vector<std::size_t> quad_sizes{256, 512, 1024, 2048, 4096};
    const auto quad = run_scaling("exp_dot", quad_sizes, 8, 0, 5, 0xBE9C);
    const FitResult quad_ops = fit_exponent_ops(quad);
    const FitResult quad_wall = fit_exponent(quad);

    const std::vector<std::size_t> lin_sizes{1024, 2048, 4096, 8192, 16384};
    const auto lin = run_scaling("poly", lin_sizes, 4, 2, 5, 0xBE9D);
    const FitResult lin_ops = fit_exponent_ops(lin);
    const FitResult lin_wall = fit_exponent(lin);

    const bool ok = quad_ops.slope >= 1.8 && std::abs(quad_ops.slope - 2.0) <= 0.05 &&
                    quad_wall.slope >= 1.8 && std::abs(quad_wall.slope - 2.0) <= 0.3 &&
                    lin_ops.slope <= 1.2 && std::abs(lin_ops.slope - 1.0) <= 0.05 &&
                    lin_wall.slope <= 1.2 && std::abs(lin_wall.slope - 1.0) <= 0.3;
    std::ostringstream os;
    os << "exp_dot op slope " << quad_ops.slope << " wall slope " << quad_wall.slope
       << " (need >= 1.8, ops within 0.05 of 2, wall within 0.3); poly op slope " << lin_ops.slope
       << " wall slope " << lin_wall.slope << " (need <= 1.2, ops within 0.05 of 1, wall within 0.3)";
    detail = os.str();
    return ok;
}

// ---- criterion 6: series approximation quality ---------------------------------

bool criterion_taylor(std::string& detail) {
    const auto points = taylor_sweep(10, 1.0, 16, 4, 0.5, 0x7AE1); // |Q_i.K_j| <= 1
    bool monotone = true;
    for (std::size_t p = 1; p <= 6; ++p) {
        if (!points[p].max_abs_error || !points[p - 1].max_abs_error) {
            monotone = false;
            break;
        }
        if (*points[p].max_abs_error > *points[p - 1].max_abs_error)
            monotone = false;
    }
    const bool tail_ok = points[10].max_abs_error && *points[10].max_abs_error <= 1e-6;
    std::ostringstream os;
    os << "errors p=0..6 non-increasing: " << (monotone ? "yes" : "no") << ", error at p=10 = "
       << (points[10].max_abs_error ? *points[10].max_abs_error : -1.0) << " (tol 1e-6)";
    detail = os.str();
    return monotone && tail_ok;
}

// ---- criterion 7: additive ceiling handling ------------------------------------

bool criterion_additive_ceiling(std::string& detail) {
    const std::size_t n = 8, d = 6;
    const double ceiling = additive_error_ceiling(Mechanism::l2_rbf, n, d).mu_max;

    HardnessVariant ok_variant;
    ok_variant.mechanism = Mechanism::l2_rbf;
    ok_variant.mode = Mode::additive;
    ok_variant.mu = ceiling / 2.0;

    HardnessVariant bad_variant = ok_variant;
    bad_variant.mu = 2.0 * ceiling;

    const ProblemInstance probe = generate(ProblemKind::BHCP, n, d, 3, Planted::yes, 0x90D);
    bool accepted = false, rejected = false;
    try {
        build_bhcp_gadget(probe.a, probe.b, 3, ok_variant);
        accepted = true;
    } catch (const Error&) {
    }
    try {
        build_bhcp_gadget(probe.a, probe.b, 3, bad_variant);
    } catch (const BoundError&) {
        rejected = true;
    }

    std::size_t disagreements = 0;
    for (std::size_t idx = 0; idx < 100; ++idx) {
        std::mt19937_64 mix(0x90D00 + idx);
        const bool want_yes = idx % 2 == 0;
        const int t = (want_yes ? 1 : 0) + static_cast<int>(mix() % (d - (want_yes ? 1 : 0) + 1));
        const ProblemInstance inst =
            generate(ProblemKind::BHCP, n, d, t, want_yes ? Planted::yes : Planted::no, mix());
        if (decide(inst, ok_variant, InjectionPolicy::worst_case()) != oracle(inst))
            ++disagreements;
    }

    std::ostringstream os;
    os << "mu = ceiling/2 accepted: " << (accepted ? "yes" : "no")
       << ", mu = 2*ceiling rejected: " << (rejected ? "yes" : "no") << ", " << disagreements
       << " disagreements over 100 planted instances";
    detail = os.str();
    return accepted && rejected && disagreements == 0;
}

struct Criterion {
    int id;
    const char* label;
    std::function<bool(std::string&)> run;
    double budget_seconds;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "reduction-chain equivalence (1000 instances, exact identities)", criterion_reductions,
         10.0},
        {2, "gadget decision soundness (200 yes + 200 no per variant)", criterion_soundness,
         120.0},
        {3, "separation invariant and analytic exp_dot gap", criterion_separation, 120.0},
        {4, "linear-path equivalence and feature-map identity", criterion_linear_path, 30.0},
        {5, "scaling exponents (op-count primary, wall-clock secondary)", criterion_scaling,
         120.0},
        {6, "series approximation quality vs softmax", criterion_taylor, 5.0},
        {7, "additive-error ceiling handling for l2", criterion_additive_ceiling, 10.0},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        std::string detail;
        bool ok = false;
        const double t0 = now_seconds();
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
            ok = false;
        }
        const double elapsed = now_seconds() - t0;
        if (elapsed > criterion.budget_seconds) {
            ok = false;
            detail += " [runtime budget exceeded]";
        }
        std::printf("[%s] criterion %d: %s :: %s (%.2fs < %.0fs)\n", ok ? "PASS" : "FAIL",
                    criterion.id, criterion.label, detail.c_str(), elapsed,
                    criterion.budget_seconds);
        if (!ok)
            ++failures;
    }
    if (failures == 0)
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
