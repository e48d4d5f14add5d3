#include "attnbounds/problems.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace attnbounds {

std::string to_string(ProblemKind kind) {
    switch (kind) {
    case ProblemKind::OVP: return "OVP";
    case ProblemKind::TVPP: return "TVPP";
    case ProblemKind::BHFP: return "BHFP";
    case ProblemKind::BHCP: return "BHCP";
    }
    return "?";
}

ProblemKind problem_kind_from_string(const std::string& name) {
    if (name == "OVP") return ProblemKind::OVP;
    if (name == "TVPP") return ProblemKind::TVPP;
    if (name == "BHFP") return ProblemKind::BHFP;
    if (name == "BHCP") return ProblemKind::BHCP;
    throw ConfigError("unknown problem kind: " + name);
}

void ProblemInstance::validate() const {
    if (a.size() != b.size() || a.dim() != b.dim())
        throw ShapeError("ProblemInstance: A and B must share n and d");
    const int d = static_cast<int>(a.dim());
    switch (kind) {
    case ProblemKind::OVP:
        break;
    case ProblemKind::TVPP:
        if (threshold < 1 || threshold > d)
            throw ConfigError("ProblemInstance: TVPP threshold must satisfy 1 <= t <= d");
        break;
    case ProblemKind::BHFP:
    case ProblemKind::BHCP:
        if (threshold < 0 || threshold > d)
            throw ConfigError("ProblemInstance: squared threshold must satisfy 0 <= t2 <= d");
        break;
    }
}

bool oracle(const ProblemInstance& inst) {
    inst.validate();
    const std::size_t n = inst.a.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            switch (inst.kind) {
            case ProblemKind::OVP:
                if (dot(inst.a, i, inst.b, j) == 0) return true;
                break;
            case ProblemKind::TVPP:
                if (dot(inst.a, i, inst.b, j) >= inst.threshold) return true;
                break;
            case ProblemKind::BHFP:
                if (squared_distance(inst.a, i, inst.b, j) >= inst.threshold) return true;
                break;
            case ProblemKind::BHCP:
                if (squared_distance(inst.a, i, inst.b, j) < inst.threshold) return true;
                break;
            }
        }
    }
    return false;
}

ProblemInstance ovp_to_tvpp(const ProblemInstance& inst) {
    if (inst.kind != ProblemKind::OVP)
        throw KindError("ovp_to_tvpp: input must be OVP");
    inst.validate();
    const std::size_t n = inst.a.size(), d = inst.a.dim();
    BinaryVectorSet abar(n, 2 * d), bbar(n, 2 * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            abar.set_bit(i, k, inst.a.bit(i, k));
            abar.set_bit(i, d + k, 1 - inst.a.bit(i, k));
            bbar.set_bit(i, k, 1 - inst.b.bit(i, k));
            bbar.set_bit(i, d + k, 1);
        }
    }
    return ProblemInstance{ProblemKind::TVPP, std::move(abar), std::move(bbar),
                           static_cast<int>(d)};
}

ProblemInstance ovp_to_bhfp(const ProblemInstance& inst) {
    if (inst.kind != ProblemKind::OVP)
        throw KindError("ovp_to_bhfp: input must be OVP");
    inst.validate();
    const std::size_t n = inst.a.size(), d = inst.a.dim();
    BinaryVectorSet abar(n, 3 * d), bbar(n, 3 * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            abar.set_bit(i, k, inst.a.bit(i, k));
            abar.set_bit(i, d + k, 1 - inst.a.bit(i, k));
            // third block of abar stays 0
            bbar.set_bit(i, k, inst.b.bit(i, k));
            // second block of bbar stays 0
            bbar.set_bit(i, 2 * d + k, 1 - inst.b.bit(i, k));
        }
    }
    return ProblemInstance{ProblemKind::BHFP, std::move(abar), std::move(bbar),
                           static_cast<int>(2 * d)};
}

ProblemInstance bhfp_to_bhcp(const ProblemInstance& inst) {
    if (inst.kind != ProblemKind::BHFP)
        throw KindError("bhfp_to_bhcp: input must be BHFP");
    inst.validate();
    const std::size_t n = inst.b.size(), d = inst.b.dim();
    BinaryVectorSet bbar(n, d);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < d; ++k)
            bbar.set_bit(j, k, 1 - inst.b.bit(j, k));
    // t2 = 0 would map above d; valid inputs from ovp_to_bhfp always stay in range.
    return ProblemInstance{ProblemKind::BHCP, inst.a, std::move(bbar),
                           static_cast<int>(d) - inst.threshold + 1};
}

namespace {

struct BitRng {
    std::mt19937_64 rng;
    explicit BitRng(std::uint64_t seed) : rng(seed) {}
    // uniform in [0,1)
    double uniform() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng() % n); }
};

BinaryVectorSet random_set(BitRng& rng, std::size_t n, std::size_t d, double density) {
    BinaryVectorSet s(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k)
            s.set_bit(i, k, rng.bernoulli(density) ? 1 : 0);
    return s;
}

// Overwrite row j of b with a witness partner for row i of a.
void plant_witness(ProblemInstance& inst, BitRng& rng, std::size_t i, std::size_t j) {
    const std::size_t d = inst.a.dim();
    switch (inst.kind) {
    case ProblemKind::OVP:
        // b_j supported only where a_i is zero
        for (std::size_t k = 0; k < d; ++k)
            inst.b.set_bit(j, k, inst.a.bit(i, k) ? 0 : (rng.bernoulli(0.5) ? 1 : 0));
        break;
    case ProblemKind::TVPP: {
        // force t shared ones
        std::vector<std::size_t> coords(d);
        for (std::size_t k = 0; k < d; ++k)
            coords[k] = k;
        std::shuffle(coords.begin(), coords.end(), rng.rng);
        for (std::size_t k = 0; k < static_cast<std::size_t>(inst.threshold); ++k) {
            inst.a.set_bit(i, coords[k], 1);
            inst.b.set_bit(j, coords[k], 1);
        }
        break;
    }
    case ProblemKind::BHFP: {
        // copy a_i and flip exactly t2 coordinates
        for (std::size_t k = 0; k < d; ++k)
            inst.b.set_bit(j, k, inst.a.bit(i, k));
        std::vector<std::size_t> coords(d);
        for (std::size_t k = 0; k < d; ++k)
            coords[k] = k;
        std::shuffle(coords.begin(), coords.end(), rng.rng);
        for (std::size_t k = 0; k < static_cast<std::size_t>(inst.threshold); ++k)
            inst.b.set_bit(j, coords[k], 1 - inst.b.bit(j, coords[k]));
        break;
    }
    case ProblemKind::BHCP: {
        if (inst.threshold < 1)
            throw GenerationError("generate: BHCP planted-yes impossible with threshold 0");
        // copy a_i and flip exactly t2-1 coordinates, landing strictly inside
        for (std::size_t k = 0; k < d; ++k)
            inst.b.set_bit(j, k, inst.a.bit(i, k));
        std::vector<std::size_t> coords(d);
        for (std::size_t k = 0; k < d; ++k)
            coords[k] = k;
        std::shuffle(coords.begin(), coords.end(), rng.rng);
        for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(inst.threshold); ++k)
            inst.b.set_bit(j, coords[k], 1 - inst.b.bit(j, coords[k]));
        break;
    }
    }
}

// Bit densities for the no-case proposal. As attempts accumulate the drift
// parameter moves the distribution toward a corner where no witness can
// exist, so rejection terminates for every feasible regime.
struct NoProposal {
    double a_density;
    double b_density;
};

NoProposal no_proposal(ProblemKind kind, int /*threshold*/, double drift) {
    switch (kind) {
    case ProblemKind::OVP:  return {1.0 - 0.5 * (1.0 - drift), 1.0 - 0.5 * (1.0 - drift)};
    case ProblemKind::TVPP: return {0.5 * (1.0 - drift), 0.5 * (1.0 - drift)};
    case ProblemKind::BHFP: return {1.0 - 0.5 * (1.0 - drift), 1.0 - 0.5 * (1.0 - drift)};
    case ProblemKind::BHCP: return {1.0 - 0.5 * (1.0 - drift), 0.5 * (1.0 - drift)};
    }
    return {0.5, 0.5};
}

} // namespace

ProblemInstance generate(ProblemKind kind, std::size_t n, std::size_t d, int threshold,
                         Planted planted, std::uint64_t seed) {
    if (n < 1 || d < 1)
        throw ConfigError("generate: n and d must be >= 1");
    BitRng rng(seed);

    if (planted == Planted::random_free || planted == Planted::yes) {
        ProblemInstance inst{kind, random_set(rng, n, d, 0.5), random_set(rng, n, d, 0.5),
                             threshold};
        inst.validate();
        if (planted == Planted::yes)
            plant_witness(inst, rng, rng.index(n), rng.index(n));
        return inst;
    }

    // planted == no: biased rejection, each candidate proven by a full scan
    constexpr int kBudget = 1000;
    for (int attempt = 0; attempt < kBudget; ++attempt) {
        const double drift = std::min(1.0, static_cast<double>(attempt) / 50.0);
        const NoProposal prop = no_proposal(kind, threshold, drift);
        ProblemInstance inst{kind, random_set(rng, n, d, prop.a_density),
                             random_set(rng, n, d, prop.b_density), threshold};
        inst.validate();
        if (!oracle(inst))
            return inst;
    }
    throw GenerationError("generate: no-instance rejection budget exhausted");
}

std::string instance_to_json(const ProblemInstance& inst) {
    inst.validate();
    nlohmann::json j;
    j["kind"] = to_string(inst.kind);
    j["n"] = inst.a.size();
    j["d"] = inst.a.dim();
    if (inst.kind != ProblemKind::OVP)
        j["threshold"] = inst.threshold;
    auto set_to_json = [](const BinaryVectorSet& s) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < s.size(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < s.dim(); ++k)
                row.push_back(static_cast<int>(s.bit(i, k)));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["A"] = set_to_json(inst.a);
    j["B"] = set_to_json(inst.b);
    return j.dump(2);
}

ProblemInstance instance_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("instance parse error: ") + e.what());
    }
    try {
        const ProblemKind kind = problem_kind_from_string(j.at("kind").get<std::string>());
        const std::size_t n = j.at("n").get<std::size_t>();
        const std::size_t d = j.at("d").get<std::size_t>();
        auto set_from_json = [n, d](const nlohmann::json& rows) {
            if (rows.size() != n)
                throw ConfigError("instance: wrong row count");
            BinaryVectorSet s(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                if (rows[i].size() != d)
                    throw ConfigError("instance: wrong row length");
                for (std::size_t k = 0; k < d; ++k)
                    s.set_bit(i, k, rows[i][k].get<int>() ? 1 : 0);
            }
            return s;
        };
        ProblemInstance inst{kind, set_from_json(j.at("A")), set_from_json(j.at("B")),
                             j.contains("threshold") ? j["threshold"].get<int>() : 0};
        inst.validate();
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("instance field error: ") + e.what());
    }
}

void save_instance(const ProblemInstance& inst, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("save_instance: cannot open " + path.string());
    out << instance_to_json(inst) << '\n';
}

ProblemInstance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("load_instance: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return instance_from_json(buf.str());
}

} // namespace attnbounds
