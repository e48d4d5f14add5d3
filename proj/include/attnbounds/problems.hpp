#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "attnbounds/tensor.hpp"

namespace attnbounds {

enum class ProblemKind { OVP, TVPP, BHFP, BHCP };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

// A pair of equal-sized binary vector sets plus the decision threshold.
//   OVP:  is there a cross pair with a.b = 0?        (no threshold)
//   TVPP: is there a cross pair with a.b >= t?        1 <= t <= d
//   BHFP: is there a cross pair with ||a-b||^2 >= t2? 0 <= t2 <= d
//   BHCP: is there a cross pair with ||a-b||^2 < t2?  0 <= t2 <= d
// Distance thresholds are stored squared: binary vectors make the squared
// distance an integer, so decisions at the boundary never touch floats.
struct ProblemInstance {
    ProblemKind kind;
    BinaryVectorSet a;
    BinaryVectorSet b;
    int threshold = 0;

    void validate() const;
};

// Exhaustive O(n^2 d) scan in integer arithmetic.
bool oracle(const ProblemInstance& inst);

// a_i -> [a_i | 1-a_i], b_j -> [1-b_j | 1], threshold t = d.
// Identity: abar_i . bbar_j = d - a_i.b_j, so the TVPP answer equals OVP's.
ProblemInstance ovp_to_tvpp(const ProblemInstance& inst);

// a_i -> [a_i | 1-a_i | 0], b_j -> [b_j | 0 | 1-b_j], squared threshold 2d.
// Identity: ||abar_i - bbar_j||^2 = 2d - 2 a_i.b_j.
ProblemInstance ovp_to_bhfp(const ProblemInstance& inst);

// A unchanged, b_j -> 1-b_j, squared threshold t2' = d - t2 + 1.
// Identity: ||a_i - bbar_j||^2 = d - ||a_i - b_j||^2.
ProblemInstance bhfp_to_bhcp(const ProblemInstance& inst);

enum class Planted { yes, no, random_free };

// Seed-deterministic instance supply. planted=yes inserts a witness pair;
// planted=no rejection-samples until the full oracle scan confirms absence
// (the proposal drifts toward a feasible corner so the budget is spent only
// on genuinely impossible parameter regimes); random_free is i.i.d. uniform.
ProblemInstance generate(ProblemKind kind, std::size_t n, std::size_t d, int threshold,
                         Planted planted, std::uint64_t seed);

// JSON instance file format: {kind, n, d, threshold, A, B} with A and B as
// arrays of 0/1 arrays. Round-trips bit-exactly. OVP omits the threshold.
std::string instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const std::string& text);
void save_instance(const ProblemInstance& inst, const std::filesystem::path& path);
ProblemInstance load_instance(const std::filesystem::path& path);

} // namespace attnbounds
