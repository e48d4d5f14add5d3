#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attnbounds/problems.hpp"
#include "attnbounds/tensor.hpp"

namespace attnbounds {

enum class Mechanism { exp_dot, softmax_dot, sliding_window, l2_rbf, score_matrix_approx };
enum class Mode { exact, multiplicative, additive };

std::string to_string(Mechanism m);
std::string to_string(Mode m);
Mechanism mechanism_from_string(const std::string& name);
Mode mode_from_string(const std::string& name);

// One (mechanism, mode) cell with its error budget mu and, for the sliding
// mechanism, the window width. Combinations without a construction are
// rejected: score_matrix has no exact mode; softmax additive and l2 additive
// are admitted only under their closed-form mu ceilings (see
// additive_error_ceiling), checked at gadget build time where n and d are known.
struct HardnessVariant {
    Mechanism mechanism = Mechanism::exp_dot;
    Mode mode = Mode::exact;
    double mu = 0.0;
    std::size_t window = 0;

    void validate() const;
    std::string name() const; // "mechanism:mode"
};

// Which side of the (delta, Delta) gap signals a yes instance. With max_above
// a large inspected output means yes; with min_below (the flipped-V softmax
// multiplicative construction) a small output means yes.
enum class Direction { max_above, min_below };

// Attention inputs built from a problem instance plus the decision bookkeeping.
// log_delta < log_Delta always; the decision thresholds the inspected
// log-domain statistic against the midpoint of the gap.
struct GadgetBundle {
    DenseMatrix q;
    DenseMatrix v;
    double temperature = 0.0;
    double log_delta = 0.0;
    double log_Delta = 0.0;
    Direction direction = Direction::max_above;
    std::vector<std::size_t> read_indices;
};

// The temperature each (mechanism, mode) needs to force Delta > delta:
//   exp_dot        exact 2 ln n | mult 2 ln((1+mu)/(1-mu) n) | add 2 ln(n + 2mu)
//   softmax_dot    exact ln n + d | mult ln(2(1+mu)/(1-mu) n) + d | add ln n + d
//   sliding_window exact 2 ln w | mult 2 ln((1+mu)/(1-mu) w) | add 2 ln(w + 2mu)
//   l2_rbf         exact 2 ln n | mult 2 ln((1+mu)/(1-mu) n) | add 2 ln(n+2)
//   score_matrix   mult 2 ln((1+mu)/(1-mu) n) | add 2 ln(n + 2mu)
// All logarithms are natural.
double select_temperature(const HardnessVariant& variant, std::size_t n, std::size_t d, int t);

// Q = [A; C*B] (2n x d), V = [0^n; 1^n] (flipped for softmax multiplicative),
// read indices = first n rows. temperature_override replaces the selected C;
// any override must still separate the gap or the build fails.
GadgetBundle build_tvpp_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t,
                               const HardnessVariant& variant,
                               std::optional<double> temperature_override = std::nullopt);

// Q = [A; B] (temperature lives in the kernel), V = [0^n; 1^n]. When the
// kernel constant is fixed by the caller, every row of Q is rescaled by
// sqrt(required_C / fixed_C) so the statistics are unchanged.
GadgetBundle build_bhcp_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t2,
                               const HardnessVariant& variant,
                               std::optional<double> fixed_kernel_constant = std::nullopt);

// Interleaved block-cyclic layout: C*b vectors cycle through arcs of w/2
// consecutive set members on one parity, each a_i is repeated once per arc on
// the other parity, so every (a_i, b_j) pair lands inside some window. The
// all-pairs coverage property is verified at build time and failure throws;
// it is never silently returned. Requires k^2 == n_total * w.
GadgetBundle build_sliding_gadget(const BinaryVectorSet& a, const BinaryVectorSet& b, int t,
                                  const HardnessVariant& variant, std::size_t n_total,
                                  std::size_t w);

enum class Adversary { worst_case, random_within_budget };
enum class Push { down, up };

// Perturbs y within the mode's budget: worst_case moves every entry in the
// push direction at the full budget; random draws per-entry perturbations.
// The result always satisfies |yhat - y| <= mu |y| (multiplicative) or <= mu
// (additive) entrywise.
DenseMatrix inject_error(const DenseMatrix& y, Mode mode, double mu, Adversary adversary,
                         Push push, std::uint64_t seed);

// How decide() perturbs the attention output before thresholding. worst_case
// aims the full budget against the known ground truth (the oracle answer).
struct InjectionPolicy {
    enum class Kind { none, worst_case, random_within_budget };
    Kind kind = Kind::none;
    std::uint64_t seed = 0;

    static InjectionPolicy none() { return {}; }
    static InjectionPolicy worst_case() { return {Kind::worst_case, 0}; }
    static InjectionPolicy random(std::uint64_t seed) {
        return {Kind::random_within_budget, seed};
    }
};

// Builds the gadget for (instance, variant), evaluates the matching kernel's
// read outputs in log domain, optionally perturbs them within the variant's
// budget, and thresholds against the gap midpoint. Valid pairings are TVPP
// with {exp_dot, softmax_dot, sliding_window, score_matrix_approx} and BHCP
// with l2_rbf. Agrees with oracle() on every valid instance.
bool decide(const ProblemInstance& inst, const HardnessVariant& variant,
            const InjectionPolicy& injection = InjectionPolicy::none());

struct DecisionReport {
    std::string variant;
    double mu = 0.0;
    double temperature = 0.0;
    double log_delta = 0.0;
    double log_Delta = 0.0;
    double statistic = 0.0; // the thresholded log-domain read statistic
    bool decision = false;
    bool oracle_answer = false;
    bool oracle_agreement = false;
};

DecisionReport decide_report(const ProblemInstance& inst, const HardnessVariant& variant,
                             const InjectionPolicy& injection = InjectionPolicy::none());
std::string report_to_json(const DecisionReport& report);

// Score-matrix variant of decide: the perturbation budget applies to each
// entry of S before the product with V, per-entry rather than per-output.
bool score_matrix_decide(const ProblemInstance& inst, Mode mode, double mu,
                         const InjectionPolicy& injection = InjectionPolicy::none());

// Closed-form additive-error ceilings and matching temperatures:
//   l2_rbf:      mu_max = (n+2)^{-2d},            C = 2 ln(n+2)
//   softmax_dot: mu_max = exp(-3d ln n - 3d^2),   C = ln n + d (advisory)
struct AdditiveCeiling {
    double mu_max;
    double temperature;
};
AdditiveCeiling additive_error_ceiling(Mechanism mechanism, std::size_t n, std::size_t d);

} // namespace attnbounds
