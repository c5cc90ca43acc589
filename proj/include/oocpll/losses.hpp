#pragma once

#include <span>
#include <vector>

#include "oocpll/types.hpp"

namespace oocpll {

// Floor applied to every probability before a log is taken.
inline constexpr double prob_floor = 1e-12;

// A quantity computed separately over the candidate and non-candidate sets.
struct SplitLoss {
    double candidate = 0.0;
    double non_candidate = 0.0;
};

// Mean per-label binary CE over the candidate / non-candidate sets, treating
// the labels of each set as positive. An empty set yields +inf.
SplitLoss decoupled_ce(std::span<const double> probs, const CandidateMask& mask);

// Minimum per-label binary CE item over each set; equals -log of the set's
// maximum predicted probability. An empty set yields +inf.
SplitLoss wooden_ce(std::span<const double> probs, const CandidateMask& mask);

// Shannon entropy of the probability mass renormalized to each set.
// Diagnostic only. An empty set yields +inf.
SplitLoss confidence_entropy(std::span<const double> probs, const CandidateMask& mask);

// -sum_j target_j * log(max(probs_j, prob_floor)); targets must be >= 0.
double soft_target_ce(std::span<const double> probs, std::span<const double> target);

// Mean soft-target CE of output rows against confidence rows. The two-arg
// forms divide by the row count; the normalizer overloads divide by an
// explicit count (full batch size when loss_norm = batch). Zero rows or a
// zero normalizer contribute 0.
double loss_normal(const Matrix& probs, const Matrix& confidence);
double loss_normal(const Matrix& probs, const Matrix& confidence, std::size_t normalizer);
double loss_closed(const Matrix& probs, const Matrix& reversed_confidence);
double loss_closed(const Matrix& probs, const Matrix& reversed_confidence, std::size_t normalizer);

// Mean CE of output rows against generated candidate sets (indicator
// targets). Every mask must be non-empty.
double loss_open(const Matrix& probs, const std::vector<CandidateMask>& assigned);
double loss_open(const Matrix& probs, const std::vector<CandidateMask>& assigned,
                 std::size_t normalizer);

// l_normal + alpha * l_closed + beta * l_open.
double total_loss(double l_normal, double l_closed, double l_open, double alpha, double beta);

}  // namespace oocpll
