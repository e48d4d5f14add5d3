#include "attnbounds/gadgets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "attnbounds/opcount.hpp"

namespace attnbounds {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double ratio_factor(double mu) { return (1.0 + mu) / (1.0 - mu); }

double ln(double x) { return std::log(x); }

} // namespace

std::string to_string(Mechanism m) {
    switch (m) {
    case Mechanism::exp_dot: return "exp_dot";
    case Mechanism::softmax_dot: return "softmax_dot";
    case Mechanism::sliding_window: return "sliding_window";
    case Mechanism::l2_rbf: return "l2_rbf";
    case Mechanism::score_matrix_approx: return "score_matrix";
    }
    return "?";
}

std::string to_string(Mode m) {
    switch (m) {
    case Mode::exact: return "exact";
    case Mode::multiplicative: return "multiplicative";
    case Mode::additive: return "additive";
    }
    return "?";
}

Mechanism mechanism_from_string(const std::string& name) {
    if (name == "exp_dot") return Mechanism::exp_dot;
    if (name == "softmax_dot" || name == "softmax") return Mechanism::softmax_dot;
    if (name == "sliding_window" || name == "sliding") return Mechanism::sliding_window;
    if (name == "l2_rbf" || name == "l2") return Mechanism::l2_rbf;
    if (name == "score_matrix" || name == "score_matrix_approx") return Mechanism::score_matrix_approx;
    throw ConfigError("unknown mechanism: " + name);
}

Mode mode_from_string(const std::string& name) {
    if (name == "exact") return Mode::exact;
    if (name == "multiplicative" || name == "mult") return Mode::multiplicative;
    if (name == "additive" || name == "add") return Mode::additive;
    throw ConfigError("unknown mode: " + name);
}

void HardnessVariant::validate() const {
    if (!std::isfinite(mu) || mu < 0.0)
        throw VariantError("variant: mu must be finite and >= 0");
    switch (mode) {
    case Mode::exact:
        if (mu != 0.0)
            throw VariantError("variant: exact mode requires mu = 0");
        break;
    case Mode::multiplicative:
        if (mu >= 1.0)
            throw VariantError("variant: multiplicative mode requires mu < 1");
        break;
    case Mode::additive:
        break;
    }
    if (mechanism == Mechanism::sliding_window) {
        if (window < 2 || window % 2 != 0)
            throw VariantError("variant: sliding_window requires an even window >= 2");
    }
    if (mechanism == Mechanism::score_matrix_approx && mode == Mode::exact)
        throw VariantError("variant: score_matrix has no exact mode");
}

std::string HardnessVariant::name() const {
    return to_string(mechanism) + ":" + to_string(mode);
}

double select_temperature(const HardnessVariant& variant, std::size_t n, std::size_t d, int t) {
    (void)t; // the formulas depend on n, d and the window only
    variant.validate();
    if (n < 1 || d < 1)
        throw ConfigError("select_temperature: n and d must be >= 1");
    const double dn = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    const double dw = static_cast<double>(variant.window);
    const double mu = variant.mu;

    switch (variant.mechanism) {
    case Mechanism::exp_dot:
        switch (variant.mode) {
        case Mode::exact: return 2.0 * ln(dn);
        case Mode::multiplicative: return 2.0 * ln(ratio_factor(mu) * dn);
        case Mode::additive: return 2.0 * ln(dn + 2.0 * mu);
        }
        break;
    case Mechanism::softmax_dot:
        switch (variant.mode) {
        case Mode::exact: return ln(dn) + dd;
        case Mode::multiplicative: return ln(2.0 * ratio_factor(mu) * dn) + dd;
        case Mode::additive: return ln(dn) + dd; // advisory path, mu ceiling enforced at build
        }
        break;
    case Mechanism::sliding_window:
        switch (variant.mode) {
        case Mode::exact: return 2.0 * ln(dw);
        case Mode::multiplicative: return 2.0 * ln(ratio_factor(mu) * dw);
        case Mode::additive: return 2.0 * ln(dw + 2.0 * mu);
        }
        break;
    case Mechanism::l2_rbf:
        switch (variant.mode) {
        case Mode::exact: return 2.0 * ln(dn);
        case Mode::multiplicative: return 2.0 * ln(ratio_factor(mu) * dn);
        case Mode::additive: return 2.0 * ln(dn + 2.0);
        }
        break;
    case Mechanism::score_matrix_approx:
        switch (variant.mode) {
        case Mode::exact: break; // rejected in validate()
        case Mode::multiplicative: return 2.0 * ln(ratio_factor(mu) * dn);
        case Mode::additive: return 2.0 * ln(dn + 2.0 * mu);
        }
        break;
    }
    throw VariantError("select_temperature: unsupported variant " + variant.name());
}

AdditiveCeiling additive_error_ceiling(Mechanism mechanism, std::size_t n, std::size_t d) {
    const double dn = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    switch (mechanism) {
    case Mechanism::l2_rbf:
        return {std::exp(-2.0 * dd * ln(dn + 2.0)), 2.0 * ln(dn + 2.0)};
    case Mechanism::softmax_dot:
        return {std::exp(-3.0 * dd * ln(dn) - 3.0 * dd * dd), ln(dn) + dd};
    default:
        throw VariantError("additive_error_ceiling: only l2_rbf and softmax_dot have one");
    }
}

namespace {

// Case bounds for the gap, in log domain. delta is always the lower edge and
// Delta the upper edge; Direction records which side signals yes.
struct GapBounds {
    double log_delta;
    double log_Delta;
    Direction direction;
};

GapBounds tvpp_gap_bounds(const HardnessVariant& variant, double c, std::size_t n, std::size_t d,
                          int t) {
    const double dn = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    const double mu = variant.mu;
    const double ct = c * static_cast<double>(t);
    const double ct1 = c * static_cast<double>(t - 1);
    const double log_n_minus_1 = n > 1 ? ln(dn - 1.0) : kNegInf;
    const double log_mu = mu > 0.0 ? ln(mu) : kNegInf;

    switch (variant.mechanism) {
    case Mechanism::exp_dot:
        switch (variant.mode) {
        case Mode::exact:
            // no case: Y <= n e^{C(t-1)}; yes case: Y >= e^{Ct}
            return {ln(dn) + ct1, ct, Direction::max_above};
        case Mode::multiplicative:
            return {std::log1p(mu) + ln(dn) + ct1, std::log1p(-mu) + ct, Direction::max_above};
        case Mode::additive:
            return {log_add_exp(ln(dn) + ct1, log_mu), log_sub_exp(ct, log_mu),
                    Direction::max_above};
        }
        break;
    case Mechanism::softmax_dot: {
        // exact no case:  Y <= e^{C(t-1)} / (e^{C(t-1)} + 1)
        // exact yes case: Y >= (e^{Ct} + n-1) / (e^{Ct} + n-1 + n e^d)
        // Both sit just under 1 for large C t, so each log is evaluated as
        // -log1p(ratio) to keep relative precision near zero.
        const double log_no = -log_add_exp(0.0, -ct1);
        const double log_yes_numer = log_add_exp(ct, log_n_minus_1);
        const double log_yes = -log_add_exp(0.0, ln(dn) + dd - log_yes_numer);
        switch (variant.mode) {
        case Mode::exact:
            return {log_no, log_yes, Direction::max_above};
        case Mode::multiplicative: {
            // flipped V: reads carry the a-block mass, so yes signals small.
            // no case:  Y >= 1 / (e^{C(t-1)} + 1)       -> Delta (upper edge)
            // yes case: Y <= n e^d / (e^{Ct} + n-1 + n e^d) -> delta (lower edge)
            const double upper = std::log1p(-mu) - log_add_exp(ct1, 0.0);
            const double lower =
                std::log1p(mu) + ln(dn) + dd - log_add_exp(log_yes_numer, ln(dn) + dd);
            return {lower, upper, Direction::min_below};
        }
        case Mode::additive:
            return {log_add_exp(log_no, log_mu), log_sub_exp(log_yes, log_mu),
                    Direction::max_above};
        }
        break;
    }
    case Mechanism::score_matrix_approx:
        switch (variant.mode) {
        case Mode::exact:
            break; // rejected earlier
        case Mode::multiplicative:
            // no case:  Y <= (1+mu) n e^{C(t-1)}
            // yes case: Y >= (1-mu) e^{Ct} + n-1
            return {std::log1p(mu) + ln(dn) + ct1,
                    log_add_exp(std::log1p(-mu) + ct, log_n_minus_1), Direction::max_above};
        case Mode::additive:
            // per-entry budget: n entries drift in the no case, one output
            // loses at most mu against the witness bound in the yes case
            return {log_add_exp(ln(dn) + ct1, ln(dn) + log_mu),
                    log_sub_exp(log_add_exp(ct, log_n_minus_1), log_mu), Direction::max_above};
        }
        break;
    default:
        break;
    }
    throw VariantError("tvpp gap bounds: unsupported variant " + variant.name());
}

GapBounds sliding_gap_bounds(const HardnessVariant& variant, double c, std::size_t w, int t) {
    const double dw = static_cast<double>(w);
    const double mu = variant.mu;
    const double ct = c * static_cast<double>(t);
    const double ct1 = c * static_cast<double>(t - 1);
    const double log_mu = mu > 0.0 ? ln(mu) : kNegInf;
    switch (variant.mode) {
    case Mode::exact:
        // no case: Y <= w e^{C(t-1)}; yes case: Y >= e^{Ct}
        return {ln(dw) + ct1, ct, Direction::max_above};
    case Mode::multiplicative:
        return {std::log1p(mu) + ln(dw) + ct1, std::log1p(-mu) + ct, Direction::max_above};
    case Mode::additive:
        return {log_add_exp(ln(dw) + ct1, log_mu), log_sub_exp(ct, log_mu), Direction::max_above};
    }
    throw VariantError("sliding gap bounds: unsupported mode");
}

GapBounds bhcp_gap_bounds(const HardnessVariant& variant, double c, std::size_t n, int t2) {
    const double dn = static_cast<double>(n);
    const double mu = variant.mu;
    const double ct = -c * static_cast<double>(t2);
    const double ct1 = -c * static_cast<double>(t2 - 1);
    const double log_mu = mu > 0.0 ? ln(mu) : kNegInf;
    switch (variant.mode) {
    case Mode::exact:
        // no case: Y <= n e^{-C t2}; yes case: Y >= e^{-C(t2-1)}
        return {ln(dn) + ct, ct1, Direction::max_above};
    case Mode::multiplicative:
        return {std::log1p(mu) + ln(dn) + ct, std::log1p(-mu) + ct1, Direction::max_above};
    case Mode::additive:
        return {log_add_exp(ln(dn) + ct, log_mu), log_sub_exp(ct1, log_mu), Direction::max_above};
    }
    throw VariantError("bhcp gap bounds: unsupported mode");
}

void require_separation(GadgetBundle& bundle) {
    if (!(bundle.log_Delta > bundle.log_delta))
        throw ConstructionError("gadget: Delta <= delta, the temperature does not separate");
}

DenseMatrix stack_tvpp_q(const BinaryVectorSet& a, const BinaryVectorSet& b, double c) {
    const std::size_t n = a.size(), d = a.dim();
    DenseMatrix q(2 * n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            q(i, k) = static_cast<double>(a.bit(i, k));
            q(n + i, k) = c * static_cast<double>(b.bit(i, k));
        }
    ops::add(2 * static_cast<std::uint64_t>(n) * d);
    return q;
}

void check_gadget_sets(const BinaryVectorSet& a, const BinaryVectorSet& b) {
    if (a.size() != b.size() || a.dim() != b.dim())
        throw ShapeError("gadget: A and B must share n and d");
}

} // namespace

GadgetBundle build_tvpp_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t,
                               const HardnessVariant& variant,
                               std::optional<double> temperature_override) {
    variant.validate();
    check_gadget_sets(a, b);
    const std::size_t n = a.size(), d = a.dim();
    if (t < 1 || t > static_cast<int>(d))
        throw ConfigError("build_tvpp_gadget: threshold must satisfy 1 <= t <= d");
    switch (variant.mechanism) {
    case Mechanism::exp_dot:
    case Mechanism::softmax_dot:
    case Mechanism::score_matrix_approx:
        break;
    default:
        throw VariantError("build_tvpp_gadget: mechanism " + to_string(variant.mechanism) +
                           " does not take the TVPP gadget");
    }
    if (variant.mechanism == Mechanism::softmax_dot && variant.mode == Mode::additive) {
        const AdditiveCeiling ceiling = additive_error_ceiling(Mechanism::softmax_dot, n, d);
        if (variant.mu > ceiling.mu_max)
            throw VariantError("softmax_dot:additive is unsupported above mu = "
                               "exp(-3 d log n - 3 d^2)");
    }

    GadgetBundle bundle;
    if (temperature_override) {
        bundle.temperature = *temperature_override;
    } else {
        bundle.temperature = select_temperature(variant, n, d, t);
        // The minimal softmax temperature ln n + d separates the exact-case
        // bounds by only (n-1) e^{-Ct} relative, which is below double
        // resolution once C t is large. One extra unit makes the gap a
        // constant fraction of the bound magnitudes at every t.
        if (variant.mechanism == Mechanism::softmax_dot && variant.mode != Mode::multiplicative)
            bundle.temperature += 1.0;
    }
    if (!(bundle.temperature > 0.0) || !std::isfinite(bundle.temperature))
        throw ConfigError("build_tvpp_gadget: temperature must be positive and finite");
    bundle.q = stack_tvpp_q(a, b, bundle.temperature);

    const bool flipped =
        variant.mechanism == Mechanism::softmax_dot && variant.mode == Mode::multiplicative;
    bundle.v = DenseMatrix(2 * n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        bundle.v(i, 0) = flipped ? 1.0 : 0.0;
        bundle.v(n + i, 0) = flipped ? 0.0 : 1.0;
    }
    ops::add(2 * n);

    const GapBounds gap = tvpp_gap_bounds(variant, bundle.temperature, n, d, t);
    bundle.log_delta = gap.log_delta;
    bundle.log_Delta = gap.log_Delta;
    bundle.direction = gap.direction;
    bundle.read_indices.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        bundle.read_indices[i] = i;
    require_separation(bundle);
    return bundle;
}

GadgetBundle build_bhcp_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t2,
                               const HardnessVariant& variant,
                               std::optional<double> fixed_kernel_constant) {
    variant.validate();
    check_gadget_sets(a, b);
    const std::size_t n = a.size(), d = a.dim();
    if (t2 < 0 || t2 > static_cast<int>(d))
        throw ConfigError("build_bhcp_gadget: squared threshold must satisfy 0 <= t2 <= d");
    if (variant.mechanism != Mechanism::l2_rbf)
        throw VariantError("build_bhcp_gadget: mechanism must be l2_rbf");
    if (variant.mode == Mode::additive) {
        const AdditiveCeiling ceiling = additive_error_ceiling(Mechanism::l2_rbf, n, d);
        if (variant.mu > ceiling.mu_max)
            throw BoundError("l2_rbf:additive requires mu <= (n+2)^{-2d}");
    }

    const double required_c = select_temperature(variant, n, d, t2);
    double scale = 1.0;
    GadgetBundle bundle;
    bundle.temperature = required_c;
    if (fixed_kernel_constant) {
        if (!(*fixed_kernel_constant > 0.0) || !std::isfinite(*fixed_kernel_constant))
            throw ConfigError("build_bhcp_gadget: fixed kernel constant must be positive");
        // e^{-C_fixed ||sqrt(beta) x - sqrt(beta) y||^2} = e^{-C_required ||x-y||^2}
        scale = std::sqrt(required_c / *fixed_kernel_constant);
        bundle.temperature = *fixed_kernel_constant;
    }

    bundle.q = DenseMatrix(2 * n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            bundle.q(i, k) = scale * static_cast<double>(a.bit(i, k));
            bundle.q(n + i, k) = scale * static_cast<double>(b.bit(i, k));
        }
    bundle.v = DenseMatrix(2 * n, 1);
    for (std::size_t i = 0; i < n; ++i)
        bundle.v(n + i, 0) = 1.0;
    ops::add(2 * static_cast<std::uint64_t>(n) * d + 2 * n);

    const GapBounds gap = bhcp_gap_bounds(variant, required_c, n, t2);
    bundle.log_delta = gap.log_delta;
    bundle.log_Delta = gap.log_Delta;
    bundle.direction = gap.direction;
    bundle.read_indices.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        bundle.read_indices[i] = i;
    require_separation(bundle);
    return bundle;
}

namespace {

// Block-cyclic sliding layout. Even rows hold a-vectors (value weight 1),
// odd rows hold C*b-vectors (read positions). The b rows cycle through one
// arc of m = w/2 consecutive set members per segment; each segment repeats
// all k a-vectors with enough padding that every window stays inside the
// segment's arc. Fillers are copies of a_0, a genuine set member, so every
// window term is a real (a_i, b_j) score and the no-case bound survives.
// Total rows = ceil(k/m) * 2(k + 2m) = O(k^2/w + k + w).
struct SlidingLayout {
    std::vector<std::int64_t> a_of_row; // index into A, -1 for b rows
    std::vector<std::int64_t> b_of_row; // index into B, -1 for a rows
};

SlidingLayout sliding_layout(std::size_t k, std::size_t w) {
    const std::size_t m = w / 2;
    const std::size_t arcs = (k + m - 1) / m;
    const std::size_t pad = (m + 1) / 2;
    const std::size_t slots = k + 2 * m; // per parity, per segment
    SlidingLayout layout;
    layout.a_of_row.assign(arcs * 2 * slots, -1);
    layout.b_of_row.assign(arcs * 2 * slots, -1);
    for (std::size_t c = 0; c < arcs; ++c) {
        const std::size_t arc_base = c * m;
        const std::size_t arc_len = std::min(m, k - arc_base);
        const std::size_t seg_row0 = c * 2 * slots;
        for (std::size_t s = 0; s < slots; ++s) {
            const std::size_t a_row = seg_row0 + 2 * s;
            const std::size_t b_row = seg_row0 + 2 * s + 1;
            const bool real_a = s >= pad && s < pad + k;
            layout.a_of_row[a_row] = real_a ? static_cast<std::int64_t>(s - pad) : 0;
            layout.b_of_row[b_row] = static_cast<std::int64_t>(arc_base + (s % arc_len));
        }
    }
    return layout;
}

GadgetBundle build_sliding_bundle(const BinaryVectorSet& a, const BinaryVectorSet& b, int t,
                                  const HardnessVariant& variant) {
    variant.validate();
    check_gadget_sets(a, b);
    if (variant.mechanism != Mechanism::sliding_window)
        throw VariantError("sliding gadget: mechanism must be sliding_window");
    const std::size_t k = a.size(), d = a.dim();
    const std::size_t w = variant.window;
    if (t < 1 || t > static_cast<int>(d))
        throw ConfigError("sliding gadget: threshold must satisfy 1 <= t <= d");

    GadgetBundle bundle;
    bundle.temperature = select_temperature(variant, k, d, t);
    const SlidingLayout layout = sliding_layout(k, w);
    const std::size_t rows = layout.a_of_row.size();

    bundle.q = DenseMatrix(rows, d);
    bundle.v = DenseMatrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        if (layout.a_of_row[r] >= 0) {
            const auto i = static_cast<std::size_t>(layout.a_of_row[r]);
            for (std::size_t col = 0; col < d; ++col)
                bundle.q(r, col) = static_cast<double>(a.bit(i, col));
            bundle.v(r, 0) = 1.0;
        } else {
            const auto j = static_cast<std::size_t>(layout.b_of_row[r]);
            for (std::size_t col = 0; col < d; ++col)
                bundle.q(r, col) = bundle.temperature * static_cast<double>(b.bit(j, col));
            bundle.read_indices.push_back(r);
        }
    }
    ops::add(static_cast<std::uint64_t>(rows) * (d + 1));

    // All-pairs coverage: every (a_i, b_j) must fall inside some read window.
    // Index bookkeeping only; no input bit is touched again.
    const std::size_t half = w / 2;
    std::vector<std::uint8_t> covered(k * k, 0);
    for (std::size_t r : bundle.read_indices) {
        const auto j = static_cast<std::size_t>(layout.b_of_row[r]);
        const std::size_t lo = r >= half ? r - half : 0;
        const std::size_t hi = std::min(rows - 1, r + half);
        for (std::size_t s = lo; s <= hi; ++s)
            if (layout.a_of_row[s] >= 0)
                covered[static_cast<std::size_t>(layout.a_of_row[s]) * k + j] = 1;
    }
    for (std::uint8_t c : covered)
        if (!c)
            throw ConstructionError("sliding gadget: window coverage check failed");

    const GapBounds gap = sliding_gap_bounds(variant, bundle.temperature, w, t);
    bundle.log_delta = gap.log_delta;
    bundle.log_Delta = gap.log_Delta;
    bundle.direction = gap.direction;
    require_separation(bundle);
    return bundle;
}

} // namespace

GadgetBundle build_sliding_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t,
                                  const HardnessVariant& variant, std::size_t n_total,
                                  std::size_t w) {
    if (variant.window != 0 && variant.window != w)
        throw ConfigError("build_sliding_gadget: variant window disagrees with w");
    const std::size_t k = a.size();
    if (k * k != n_total * w)
        throw ConfigError("build_sliding_gadget: requires k^2 == n_total * w");
    HardnessVariant v = variant;
    v.window = w;
    return build_sliding_bundle(a, b, t, v);
}

DenseMatrix inject_error(const DenseMatrix& y, Mode mode, double mu, Adversary adversary,
                         Push push, std::uint64_t seed) {
    if (mode == Mode::exact)
        throw VariantError("inject_error: mode must be multiplicative or additive");
    if (!std::isfinite(mu) || mu < 0.0)
        throw BoundError("inject_error: mu must be finite and >= 0");
    if (mode == Mode::multiplicative && mu >= 1.0)
        throw BoundError("inject_error: multiplicative mu must be < 1");

    std::mt19937_64 rng(seed);
    auto unit = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };

    DenseMatrix out(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) {
            const double v = y(i, j);
            double perturbed = v;
            if (mode == Mode::multiplicative) {
                const double factor = adversary == Adversary::worst_case
                                          ? (push == Push::down ? 1.0 - mu : 1.0 + mu)
                                          : 1.0 + unit() * mu;
                perturbed = v * factor;
            } else {
                const double offset = adversary == Adversary::worst_case
                                          ? (push == Push::down ? -mu : mu)
                                          : unit() * mu;
                perturbed = v + offset;
            }
            out(i, j) = perturbed;
        }
    return out;
}

namespace {

struct BuiltGadget {
    GadgetBundle bundle;
    std::size_t window = 0; // 0 = unbanded
};

BuiltGadget build_for(const ProblemInstance& inst, const HardnessVariant& variant) {
    switch (variant.mechanism) {
    case Mechanism::exp_dot:
    case Mechanism::softmax_dot:
    case Mechanism::score_matrix_approx:
        if (inst.kind != ProblemKind::TVPP)
            throw VariantError("decide: " + to_string(variant.mechanism) +
                               " pairs with TVPP instances");
        return {build_tvpp_gadget(inst.a, inst.b, inst.threshold, variant), 0};
    case Mechanism::sliding_window:
        if (inst.kind != ProblemKind::TVPP)
            throw VariantError("decide: sliding_window pairs with TVPP instances");
        return {build_sliding_bundle(inst.a, inst.b, inst.threshold, variant), variant.window};
    case Mechanism::l2_rbf:
        if (inst.kind != ProblemKind::BHCP)
            throw VariantError("decide: l2_rbf pairs with BHCP instances");
        return {build_bhcp_gadget(inst.a, inst.b, inst.threshold, variant), 0};
    }
    throw VariantError("decide: unknown mechanism");
}

// Log-domain score terms contributing to one read row, split by the V mask:
// selected rows carry weight 1, the rest weight 0. Banded when window > 0.
struct RowTerms {
    std::vector<double> selected;
    std::vector<double> rest;
};

RowTerms read_row_terms(const GadgetBundle& g, Mechanism mech, std::size_t r,
                        std::size_t window) {
    const std::size_t rows = g.q.rows();
    const std::size_t half = window / 2;
    const std::size_t lo = window == 0 ? 0 : (r >= half ? r - half : 0);
    const std::size_t hi = window == 0 ? rows - 1 : std::min(rows - 1, r + half);
    RowTerms terms;
    for (std::size_t s = lo; s <= hi; ++s) {
        double term;
        if (mech == Mechanism::l2_rbf) {
            double sq = 0.0;
            for (std::size_t c = 0; c < g.q.cols(); ++c) {
                const double diff = g.q(r, c) - g.q(s, c);
                sq += diff * diff;
            }
            term = -g.temperature * sq;
        } else {
            double dot = 0.0;
            for (std::size_t c = 0; c < g.q.cols(); ++c)
                dot += g.q(r, c) * g.q(s, c);
            term = dot;
        }
        (g.v(s, 0) != 0.0 ? terms.selected : terms.rest).push_back(term);
    }
    return terms;
}

struct InjectionPlan {
    InjectionPolicy::Kind kind;
    Mode mode;
    double mu;
    Push push; // worst-case only
};

double perturb_output_stat(double stat, const InjectionPlan& plan, std::mt19937_64& rng) {
    if (plan.kind == InjectionPolicy::Kind::none || plan.mode == Mode::exact || plan.mu == 0.0)
        return stat;
    auto unit = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
    if (plan.mode == Mode::multiplicative) {
        const double factor = plan.kind == InjectionPolicy::Kind::worst_case
                                  ? (plan.push == Push::down ? -plan.mu : plan.mu)
                                  : unit() * plan.mu;
        return stat + std::log1p(factor);
    }
    const double offset = plan.kind == InjectionPolicy::Kind::worst_case
                              ? (plan.push == Push::down ? -plan.mu : plan.mu)
                              : unit() * plan.mu;
    if (offset >= 0.0)
        return log_add_exp(stat, offset > 0.0 ? ln(offset) : kNegInf);
    return log_sub_exp(stat, ln(-offset));
}

// Score-matrix semantics: the budget applies to every entry of S, so the
// output shift scales with the number of summed terms.
double perturb_score_stat(std::vector<double>& terms, const InjectionPlan& plan,
                          std::mt19937_64& rng) {
    auto unit = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
    if (plan.kind == InjectionPolicy::Kind::none || plan.mu == 0.0)
        return logsumexp(terms);
    if (plan.mode == Mode::multiplicative) {
        if (plan.kind == InjectionPolicy::Kind::worst_case) {
            const double shift = std::log1p(plan.push == Push::down ? -plan.mu : plan.mu);
            return logsumexp(terms) + shift;
        }
        for (double& term : terms)
            term += std::log1p(unit() * plan.mu);
        return logsumexp(terms);
    }
    // additive per entry
    double net = 0.0;
    if (plan.kind == InjectionPolicy::Kind::worst_case)
        net = (plan.push == Push::down ? -plan.mu : plan.mu) * static_cast<double>(terms.size());
    else
        for (std::size_t i = 0; i < terms.size(); ++i)
            net += unit() * plan.mu;
    const double base = logsumexp(terms);
    if (net >= 0.0)
        return log_add_exp(base, net > 0.0 ? ln(net) : kNegInf);
    return log_sub_exp(base, ln(-net));
}

DecisionReport run_decision(const ProblemInstance& inst, const HardnessVariant& variant,
                            const InjectionPolicy& injection) {
    variant.validate();
    inst.validate();
    const BuiltGadget built = build_for(inst, variant);
    const GadgetBundle& g = built.bundle;

    const bool truth = oracle(inst);
    InjectionPlan plan{injection.kind, variant.mode, variant.mu, Push::down};
    if (injection.kind == InjectionPolicy::Kind::worst_case) {
        // aim against the ground truth: drag yes signals toward the no side
        const bool yes_is_high = g.direction == Direction::max_above;
        plan.push = truth == yes_is_high ? Push::down : Push::up;
    }
    std::mt19937_64 rng(injection.seed);

    double aggregated = g.direction == Direction::max_above
                            ? kNegInf
                            : std::numeric_limits<double>::infinity();
    for (std::size_t r : g.read_indices) {
        RowTerms terms = read_row_terms(g, variant.mechanism, r, built.window);
        double stat;
        if (variant.mechanism == Mechanism::score_matrix_approx) {
            stat = perturb_score_stat(terms.selected, plan, rng);
        } else if (variant.mechanism == Mechanism::softmax_dot) {
            // ln(sel / (sel + rest)) via the block ratio, so values just
            // under 1 keep relative precision in log domain
            const double ratio = logsumexp(terms.rest) - logsumexp(terms.selected);
            stat = perturb_output_stat(-log_add_exp(0.0, ratio), plan, rng);
        } else {
            stat = perturb_output_stat(logsumexp(terms.selected), plan, rng);
        }
        aggregated = g.direction == Direction::max_above ? std::max(aggregated, stat)
                                                         : std::min(aggregated, stat);
    }

    const double midpoint = 0.5 * (g.log_delta + g.log_Delta);
    const bool decision = g.direction == Direction::max_above ? aggregated > midpoint
                                                              : aggregated < midpoint;

    DecisionReport report;
    report.variant = variant.name();
    report.mu = variant.mu;
    report.temperature = g.temperature;
    report.log_delta = g.log_delta;
    report.log_Delta = g.log_Delta;
    report.statistic = aggregated;
    report.decision = decision;
    report.oracle_answer = truth;
    report.oracle_agreement = decision == truth;
    return report;
}

} // namespace

bool decide(const ProblemInstance& inst, const HardnessVariant& variant,
            const InjectionPolicy& injection) {
    return run_decision(inst, variant, injection).decision;
}

DecisionReport decide_report(const ProblemInstance& inst, const HardnessVariant& variant,
                             const InjectionPolicy& injection) {
    return run_decision(inst, variant, injection);
}

std::string report_to_json(const DecisionReport& report) {
    nlohmann::json j;
    j["variant"] = report.variant;
    j["mu"] = report.mu;
    j["C"] = report.temperature;
    j["delta"] = report.log_delta;
    j["Delta"] = report.log_Delta;
    j["statistic"] = report.statistic;
    j["decision"] = report.decision;
    j["oracle"] = report.oracle_answer;
    j["oracle_agreement"] = report.oracle_agreement;
    return j.dump(2);
}

bool score_matrix_decide(const ProblemInstance& inst, Mode mode, double mu,
                         const InjectionPolicy& injection) {
    HardnessVariant variant{Mechanism::score_matrix_approx, mode, mu, 0};
    return decide(inst, variant, injection);
}

} // namespace attnbounds
