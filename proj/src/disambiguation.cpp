#include "oocpll/disambiguation.hpp"

#include <algorithm>
#include <stdexcept>

#include "oocpll/losses.hpp"

namespace oocpll {

namespace {

std::vector<double> masked_row(std::span<const double> probs, const CandidateMask& mask,
                               bool over_candidates, LdNorm norm) {
    if (static_cast<int>(probs.size()) != mask.num_classes())
        throw std::invalid_argument("confidence update: probability length mismatch");
    const int members = over_candidates ? mask.count() : mask.non_candidate_count();
    if (members < 1)
        throw std::invalid_argument(over_candidates
                                        ? "confidence update: empty candidate set"
                                        : "confidence update: empty non-candidate set");
    std::vector<double> row(probs.size(), 0.0);
    double mass = 0.0;
    for (int j = 0; j < mask.num_classes(); ++j) {
        if (static_cast<bool>(mask.bits()[static_cast<std::size_t>(j)]) != over_candidates)
            continue;
        const double p = probs[static_cast<std::size_t>(j)];
        row[static_cast<std::size_t>(j)] = p;
        mass += p;
    }
    if (norm == LdNorm::masked) {
        if (mass < prob_floor) mass = prob_floor;
        for (auto& v : row) v /= mass;
    }
    return row;
}

}  // namespace

std::vector<double> update_conf_normal(std::span<const double> probs, const CandidateMask& mask,
                                       LdNorm norm) {
    return masked_row(probs, mask, true, norm);
}

std::vector<double> update_conf_reversed(std::span<const double> probs,
                                         const CandidateMask& mask, LdNorm norm) {
    return masked_row(probs, mask, false, norm);
}

CandidateMask gen_random_candidates(int num_classes, double rho, SplitRng& rng) {
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("gen_random_candidates: rho must be in [0, 1]");
    CandidateMask mask(num_classes);
    for (int j = 0; j < num_classes; ++j)
        if (rng.bernoulli(rho)) mask.add(j);
    if (mask.count() == 0) mask.add(rng.uniform_int(num_classes));
    return mask;
}

ConfidenceTable ConfidenceTable::init_uniform(const std::vector<CandidateMask>& masks,
                                              int num_classes) {
    ConfidenceTable table;
    table.normal_conf = Matrix(masks.size(), static_cast<std::size_t>(num_classes));
    table.reversed_conf = Matrix(masks.size(), static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto& mask = masks[i];
        if (mask.num_classes() != num_classes)
            throw std::invalid_argument("ConfidenceTable: mask class count mismatch");
        const double cand = 1.0 / mask.count();
        for (int j : mask.candidates())
            table.normal_conf.at(i, static_cast<std::size_t>(j)) = cand;
        if (mask.non_candidate_count() > 0) {
            const double non = 1.0 / mask.non_candidate_count();
            for (int j : mask.non_candidates())
                table.reversed_conf.at(i, static_cast<std::size_t>(j)) = non;
        }
    }
    return table;
}

void ConfidenceTable::set_normal_row(std::size_t i, std::span<const double> row) {
    std::copy(row.begin(), row.end(), normal_conf.row(i));
    std::fill(reversed_conf.row(i), reversed_conf.row(i) + reversed_conf.cols(), 0.0);
}

void ConfidenceTable::set_reversed_row(std::size_t i, std::span<const double> row) {
    std::copy(row.begin(), row.end(), reversed_conf.row(i));
    std::fill(normal_conf.row(i), normal_conf.row(i) + normal_conf.cols(), 0.0);
}

void OpenSetAssignment::regenerate(const std::vector<std::size_t>& open_idx, int num_classes,
                                   SplitRng& rng) {
    for (std::size_t i : open_idx) {
        if (i >= masks.size()) masks.resize(i + 1);
        masks[i] = gen_random_candidates(num_classes, rho, rng);
    }
}

}  // namespace oocpll
