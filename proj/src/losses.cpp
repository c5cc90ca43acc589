#include "oocpll/losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oocpll {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double clamped_log(double p) { return std::log(p < prob_floor ? prob_floor : p); }

void check_probs(std::span<const double> probs, const CandidateMask& mask) {
    if (static_cast<int>(probs.size()) != mask.num_classes())
        throw std::invalid_argument("probability vector length does not match mask");
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0)
            throw std::invalid_argument("probability entries must be finite and non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("probability vector does not sum to 1");
}

}  // namespace

SplitLoss decoupled_ce(std::span<const double> probs, const CandidateMask& mask) {
    check_probs(probs, mask);
    double cand_sum = 0.0, non_sum = 0.0;
    int k = 0, z = 0;
    for (int j = 0; j < mask.num_classes(); ++j) {
        const double item = -clamped_log(probs[static_cast<std::size_t>(j)]);
        if (mask.bits()[static_cast<std::size_t>(j)]) {
            cand_sum += item;
            ++k;
        } else {
            non_sum += item;
            ++z;
        }
    }
    SplitLoss out;
    out.candidate = k > 0 ? cand_sum / k : inf;
    out.non_candidate = z > 0 ? non_sum / z : inf;
    return out;
}

SplitLoss wooden_ce(std::span<const double> probs, const CandidateMask& mask) {
    check_probs(probs, mask);
    double cand_max = -1.0, non_max = -1.0;
    for (int j = 0; j < mask.num_classes(); ++j) {
        const double p = probs[static_cast<std::size_t>(j)];
        if (mask.bits()[static_cast<std::size_t>(j)]) {
            if (p > cand_max) cand_max = p;
        } else {
            if (p > non_max) non_max = p;
        }
    }
    SplitLoss out;
    out.candidate = cand_max < 0.0 ? inf : -clamped_log(cand_max);
    out.non_candidate = non_max < 0.0 ? inf : -clamped_log(non_max);
    return out;
}

SplitLoss confidence_entropy(std::span<const double> probs, const CandidateMask& mask) {
    check_probs(probs, mask);
    double cand_mass = 0.0, non_mass = 0.0;
    for (int j = 0; j < mask.num_classes(); ++j) {
        const double p = probs[static_cast<std::size_t>(j)];
        if (mask.bits()[static_cast<std::size_t>(j)])
            cand_mass += p;
        else
            non_mass += p;
    }
    auto entropy = [&](bool candidate, double mass) {
        if ((candidate && mask.count() == 0) || (!candidate && mask.non_candidate_count() == 0))
            return inf;
        double h = 0.0;
        for (int j = 0; j < mask.num_classes(); ++j) {
            if (static_cast<bool>(mask.bits()[static_cast<std::size_t>(j)]) != candidate) continue;
            double r = probs[static_cast<std::size_t>(j)] / (mass < prob_floor ? prob_floor : mass);
            if (r > prob_floor) h -= r * std::log(r);
        }
        return h;
    };
    return {entropy(true, cand_mass), entropy(false, non_mass)};
}

double soft_target_ce(std::span<const double> probs, std::span<const double> target) {
    if (probs.size() != target.size())
        throw std::invalid_argument("soft_target_ce: length mismatch");
    double loss = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        const double t = target[j];
        if (t < 0.0 || !std::isfinite(t))
            throw std::invalid_argument("soft_target_ce: targets must be finite and >= 0");
        if (t > 0.0) loss -= t * clamped_log(probs[j]);
    }
    return loss;
}

namespace {

double mean_soft_target_ce(const Matrix& probs, const Matrix& targets, std::size_t normalizer) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw std::invalid_argument("loss: output and target shapes differ");
    if (probs.rows() == 0 || normalizer == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i)
        sum += soft_target_ce(probs.row_span(i), targets.row_span(i));
    return sum / static_cast<double>(normalizer);
}

}  // namespace

double loss_normal(const Matrix& probs, const Matrix& confidence) {
    return mean_soft_target_ce(probs, confidence, probs.rows());
}

double loss_normal(const Matrix& probs, const Matrix& confidence, std::size_t normalizer) {
    return mean_soft_target_ce(probs, confidence, normalizer);
}

double loss_closed(const Matrix& probs, const Matrix& reversed_confidence) {
    return mean_soft_target_ce(probs, reversed_confidence, probs.rows());
}

double loss_closed(const Matrix& probs, const Matrix& reversed_confidence,
                   std::size_t normalizer) {
    return mean_soft_target_ce(probs, reversed_confidence, normalizer);
}

double loss_open(const Matrix& probs, const std::vector<CandidateMask>& assigned,
                 std::size_t normalizer) {
    if (probs.rows() != assigned.size())
        throw std::invalid_argument("loss_open: row count does not match assignments");
    if (probs.rows() == 0 || normalizer == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto& mask = assigned[i];
        if (mask.count() == 0)
            throw std::invalid_argument("loss_open: empty candidate assignment");
        if (mask.num_classes() != static_cast<int>(probs.cols()))
            throw std::invalid_argument("loss_open: assignment class count mismatch");
        for (int j : mask.candidates())
            sum -= clamped_log(probs.at(i, static_cast<std::size_t>(j)));
    }
    return sum / static_cast<double>(normalizer);
}

double loss_open(const Matrix& probs, const std::vector<CandidateMask>& assigned) {
    return loss_open(probs, assigned, probs.rows());
}

double total_loss(double l_normal, double l_closed, double l_open, double alpha, double beta) {
    return l_normal + alpha * l_closed + beta * l_open;
}

}  // namespace oocpll
