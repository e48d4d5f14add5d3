#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnbounds/attention.hpp"
#include "attnbounds/bench.hpp"
#include "attnbounds/gadgets.hpp"
#include "attnbounds/poly.hpp"
#include "attnbounds/problems.hpp"

namespace {

using namespace attnbounds;

constexpr int kExitOk = 0;
constexpr int kExitDisagreement = 1;
constexpr int kExitUsage = 2;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed) {
    if (cli_seed)
        return *cli_seed;
    if (const char* env = std::getenv("ATTNBOUNDS_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 1;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n')
            std::cout << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out)
        throw ConfigError("cannot open output file " + out_path);
    out << text;
}

HardnessVariant parse_variant(const std::string& text, double mu, std::size_t window) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("variant must look like mechanism:mode, got " + text);
    HardnessVariant variant;
    variant.mechanism = mechanism_from_string(text.substr(0, colon));
    variant.mode = mode_from_string(text.substr(colon + 1));
    variant.mu = mu;
    variant.window = window;
    variant.validate();
    return variant;
}

int run_verify_reductions(std::size_t trials, std::size_t n_max, std::size_t d_max,
                          std::uint64_t seed) {
    if (n_max < 1 || d_max < 1)
        throw ConfigError("verify reductions: nmax and dmax must be >= 1");
    std::size_t disagreements = 0, identity_failures = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::mt19937_64 mix(seed + trial);
        const std::size_t n = 1 + mix() % n_max;
        const std::size_t d = 1 + mix() % d_max;
        const ProblemInstance ovp =
            generate(ProblemKind::OVP, n, d, 0, Planted::random_free, mix());
        const ProblemInstance tvpp = ovp_to_tvpp(ovp);
        const ProblemInstance bhfp = ovp_to_bhfp(ovp);
        const ProblemInstance bhcp = bhfp_to_bhcp(bhfp);

        const bool truth = oracle(ovp);
        if (oracle(tvpp) != truth || oracle(bhfp) != truth || oracle(bhcp) != truth)
            ++disagreements;

        const int dd = static_cast<int>(d);
        const int d3 = static_cast<int>(bhfp.a.dim());
        for (std::size_t i = 0; i < n && identity_failures == 0; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const int base = dot(ovp.a, i, ovp.b, j);
                if (dot(tvpp.a, i, tvpp.b, j) != dd - base ||
                    squared_distance(bhfp.a, i, bhfp.b, j) != 2 * dd - 2 * base ||
                    squared_distance(bhcp.a, i, bhcp.b, j) !=
                        d3 - squared_distance(bhfp.a, i, bhfp.b, j)) {
                    ++identity_failures;
                    break;
                }
            }
    }
    std::cout << "reductions: " << trials << " trials, " << disagreements
              << " oracle disagreements, " << identity_failures << " identity failures\n";
    return disagreements == 0 && identity_failures == 0 ? kExitOk : kExitDisagreement;
}

int run_verify_gadgets(const HardnessVariant& variant, bool mu_is_gap, std::size_t yes_count,
                       std::size_t no_count, std::size_t n_max, std::size_t d_max,
                       std::uint64_t seed) {
    if (n_max < 2 || d_max < 2)
        throw ConfigError("verify gadgets: nmax and dmax must be >= 2");
    const ProblemKind kind =
        variant.mechanism == Mechanism::l2_rbf ? ProblemKind::BHCP : ProblemKind::TVPP;
    std::size_t disagreements = 0, total = 0;
    for (std::size_t idx = 0; idx < yes_count + no_count; ++idx) {
        const bool want_yes = idx < yes_count;
        std::mt19937_64 mix(seed + idx);
        const std::size_t n = 2 + mix() % (n_max - 1);
        const std::size_t d = 2 + mix() % (d_max - 1);
        const int t_lo = kind == ProblemKind::TVPP || want_yes ? 1 : 0;
        const int t = t_lo + static_cast<int>(mix() % (d - t_lo + 1));
        HardnessVariant v = variant;
        if (mu_is_gap) // mu tracks 1 - 1/n^2 per instance
            v.mu = 1.0 - 1.0 / (static_cast<double>(n) * static_cast<double>(n));
        const ProblemInstance inst =
            generate(kind, n, d, t, want_yes ? Planted::yes : Planted::no, mix());
        const bool truth = oracle(inst);
        const bool plain = decide(inst, v);
        bool stressed = plain;
        if (v.mode != Mode::exact)
            stressed = decide(inst, v, InjectionPolicy::worst_case());
        if (plain != truth || stressed != truth)
            ++disagreements;
        ++total;
    }
    std::cout << "gadgets " << variant.name() << ": " << total << " instances, " << disagreements
              << " disagreements\n";
    return disagreements == 0 ? kExitOk : kExitDisagreement;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention kernels, reduction gadgets, and scaling benchmarks"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may appear after a subcommand

    std::optional<std::uint64_t> seed_flag;
    std::string out_path;
    std::string format = "csv";
    app.add_option("--seed", seed_flag, "global RNG seed (env ATTNBOUNDS_SEED when absent)");
    app.add_option("--out", out_path, "write output to this file instead of stdout");
    app.add_option("--format", format, "bench output format")
        ->check(CLI::IsMember({"csv", "json"}));

    // verify
    auto* verify = app.add_subcommand("verify", "run property sweeps against the oracles");
    verify->require_subcommand(1);
    auto* vred = verify->add_subcommand("reductions", "reduction-chain equivalence sweep");
    std::size_t trials = 1000, vr_nmax = 16, vr_dmax = 10;
    vred->add_option("--trials", trials, "number of random instances");
    vred->add_option("--nmax", vr_nmax, "max set size");
    vred->add_option("--dmax", vr_dmax, "max dimension");

    auto* vgad = verify->add_subcommand("gadgets", "decision-vs-oracle sweep for one variant");
    std::string variant_text = "exp_dot:exact";
    double mu = 0.0;
    std::size_t window = 8, yes_count = 200, no_count = 200, vg_nmax = 32, vg_dmax = 8;
    bool mu_near_one = false;
    vgad->add_option("--variant", variant_text, "mechanism:mode");
    vgad->add_option("--mu", mu, "error budget for approximate modes");
    vgad->add_flag("--mu-near-one", mu_near_one, "use mu = 1 - 1/n^2 per instance");
    vgad->add_option("--window", window, "window width for sliding_window");
    vgad->add_option("--yes", yes_count, "planted yes instances");
    vgad->add_option("--no", no_count, "planted no instances");
    vgad->add_option("--nmax", vg_nmax, "max set size");
    vgad->add_option("--dmax", vg_dmax, "max dimension");

    // decide
    auto* dec = app.add_subcommand("decide", "decide one instance file through a gadget");
    std::string instance_path, inject = "none";
    dec->add_option("--instance", instance_path, "instance JSON file")->required();
    dec->add_option("--variant", variant_text, "mechanism:mode")->required();
    dec->add_option("--mu", mu, "error budget for approximate modes");
    dec->add_option("--window", window, "window width for sliding_window");
    dec->add_option("--inject", inject, "perturb outputs within budget")
        ->check(CLI::IsMember({"none", "worst", "random"}));

    // bench
    auto* bench = app.add_subcommand("bench", "scaling and approximation measurements");
    bench->require_subcommand(1);
    auto* bscale = bench->add_subcommand("scaling", "wall-clock and op-count scaling");
    std::string kernel = "exp_dot";
    std::vector<std::size_t> sizes{256, 512, 1024, 2048, 4096};
    std::size_t bench_d = 8, bench_p = 2, reps = 5;
    bool with_fit = false;
    bscale->add_option("--kernel", kernel, "exp_dot|softmax_dot|sliding_window|l2_rbf|poly");
    bscale->add_option("--sizes", sizes, "ascending sequence lengths")->expected(-1);
    bscale->add_option("--d", bench_d, "embedding width");
    bscale->add_option("--p", bench_p, "polynomial order (poly kernel)");
    bscale->add_option("--reps", reps, "repetitions per size");
    bscale->add_flag("--fit", with_fit, "append fitted exponents to stderr");

    auto* btaylor = bench->add_subcommand("taylor", "series-vs-softmax error sweep");
    std::size_t p_max = 10, tn = 16, td = 4;
    double temperature = 1.0, input_scale = 0.0;
    btaylor->add_option("--pmax", p_max, "largest order");
    btaylor->add_option("--n", tn, "sequence length");
    btaylor->add_option("--d", td, "embedding width");
    btaylor->add_option("--C", temperature, "temperature");
    btaylor->add_option("--scale", input_scale, "entry scale (default 1/sqrt(d))");

    // gen
    auto* gen = app.add_subcommand("gen", "write a problem instance file");
    std::string kind_text = "TVPP", planted_text = "random";
    std::size_t gen_n = 8, gen_d = 6;
    int gen_t = 3;
    gen->add_option("--kind", kind_text, "OVP|TVPP|BHFP|BHCP");
    gen->add_option("--n", gen_n, "set size");
    gen->add_option("--d", gen_d, "dimension");
    gen->add_option("--threshold", gen_t, "dot threshold t or squared distance t2");
    gen->add_option("--planted", planted_text, "yes|no|random")
        ->check(CLI::IsMember({"yes", "no", "random"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    }

    const std::uint64_t seed = resolve_seed(seed_flag);
    try {
        if (vred->parsed())
            return run_verify_reductions(trials, vr_nmax, vr_dmax, seed);

        if (vgad->parsed()) {
            const HardnessVariant variant = parse_variant(
                variant_text, mu_near_one ? 0.5 : mu, window); // placeholder mu when swept
            return run_verify_gadgets(variant, mu_near_one, yes_count, no_count, vg_nmax, vg_dmax,
                                      seed);
        }

        if (dec->parsed()) {
            const HardnessVariant variant = parse_variant(variant_text, mu, window);
            const ProblemInstance inst = load_instance(instance_path);
            InjectionPolicy policy = InjectionPolicy::none();
            if (inject == "worst")
                policy = InjectionPolicy::worst_case();
            else if (inject == "random")
                policy = InjectionPolicy::random(seed);
            const DecisionReport report = decide_report(inst, variant, policy);
            emit(report_to_json(report), out_path);
            return report.oracle_agreement ? kExitOk : kExitDisagreement;
        }

        if (bscale->parsed()) {
            const auto records = run_scaling(kernel, sizes, bench_d, bench_p, reps, seed);
            emit(format == "json" ? records_to_json(records) : records_to_csv(records), out_path);
            if (with_fit) {
                const FitResult wall = fit_exponent(records);
                const FitResult opsfit = fit_exponent_ops(records);
                std::cerr << "wall slope " << wall.slope << " (r2 " << wall.r_squared
                          << "), op slope " << opsfit.slope << " (r2 " << opsfit.r_squared
                          << ")\n";
            }
            return kExitOk;
        }

        if (btaylor->parsed()) {
            const double scale =
                input_scale > 0.0 ? input_scale : 1.0 / std::sqrt(static_cast<double>(td));
            const auto points = taylor_sweep(p_max, temperature, tn, td, scale, seed);
            std::ostringstream text;
            text.precision(17);
            text << "p,max_abs_error\n";
            for (const TaylorPoint& pt : points) {
                text << pt.p << ',';
                if (pt.max_abs_error)
                    text << *pt.max_abs_error;
                else
                    text << "degenerate";
                text << '\n';
            }
            emit(text.str(), out_path);
            return kExitOk;
        }

        if (gen->parsed()) {
            const ProblemKind kind = problem_kind_from_string(kind_text);
            const Planted planted = planted_text == "yes"   ? Planted::yes
                                    : planted_text == "no"  ? Planted::no
                                                            : Planted::random_free;
            const ProblemInstance inst = generate(kind, gen_n, gen_d, gen_t, planted, seed);
            emit(instance_to_json(inst), out_path);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
