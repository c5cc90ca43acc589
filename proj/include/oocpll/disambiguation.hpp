#pragma once

#include <span>
#include <vector>

#include "oocpll/rng.hpp"
#include "oocpll/types.hpp"

namespace oocpll {

// Eq-style confidence normalization: `masked` renormalizes over the masked
// label set so rows are distributions; `literal` keeps the raw softmax
// coordinates (rows then sum to the masked mass).
enum class LdNorm { literal, masked };

// Confidence row over the candidate set: proportional to the output on
// candidates, zero on non-candidates.
std::vector<double> update_conf_normal(std::span<const double> probs, const CandidateMask& mask,
                                       LdNorm norm = LdNorm::masked);

// The same rule with the sets switched: supported on the non-candidate set.
// Throws when the non-candidate set is empty.
std::vector<double> update_conf_reversed(std::span<const double> probs,
                                         const CandidateMask& mask,
                                         LdNorm norm = LdNorm::masked);

// Random candidate set: each label enters independently with probability
// rho; an empty draw is replaced by one uniformly random label.
CandidateMask gen_random_candidates(int num_classes, double rho, SplitRng& rng);

// Per-example label confidences: normal-path rows live in normal_conf,
// reversed-path rows in reversed_conf. A path update zeroes the row of the
// other path.
struct ConfidenceTable {
    Matrix normal_conf;    // supported on candidate sets
    Matrix reversed_conf;  // supported on non-candidate sets

    // Uniform over each example's candidate (resp. non-candidate) set; the
    // reversed row of a full-candidate example stays zero.
    static ConfidenceTable init_uniform(const std::vector<CandidateMask>& masks,
                                        int num_classes);

    void set_normal_row(std::size_t i, std::span<const double> row);
    void set_reversed_row(std::size_t i, std::span<const double> row);
};

// Fresh random candidate sets for the open partition, regenerated once per
// epoch per example.
struct OpenSetAssignment {
    std::vector<CandidateMask> masks;  // indexed like the dataset
    double rho = 0.5;

    void regenerate(const std::vector<std::size_t>& open_idx, int num_classes, SplitRng& rng);
};

}  // namespace oocpll
