#include "oocpll/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oocpll/losses.hpp"

namespace oocpll {

void EnsembleState::push_history(Matrix outputs) {
    history.push_back(std::move(outputs));
    while (static_cast<int>(history.size()) > phi) history.erase(history.begin());
}

EnsembleState warmup_ensemble(const std::vector<Matrix>& history, double eta) {
    if (history.empty()) throw std::invalid_argument("warmup_ensemble: empty history");
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("warmup_ensemble: eta must be in [0, 1]");
    EnsembleState state;
    state.eta = eta;
    state.phi = static_cast<int>(history.size());
    state.mean_probs = Matrix(history.front().rows(), history.front().cols());
    for (const auto& m : history) {
        if (m.rows() != state.mean_probs.rows() || m.cols() != state.mean_probs.cols())
            throw std::invalid_argument("warmup_ensemble: inconsistent output shapes");
        for (std::size_t i = 0; i < m.data().size(); ++i)
            state.mean_probs.data()[i] += m.data()[i];
    }
    const double inv = 1.0 / static_cast<double>(history.size());
    for (auto& v : state.mean_probs.data()) v *= inv;
    state.history = history;
    return state;
}

void moving_update(EnsembleState& state, const Matrix& current) {
    if (state.eta < 0.0 || state.eta > 1.0)
        throw std::invalid_argument("moving_update: eta must be in [0, 1]");
    if (current.rows() != state.mean_probs.rows() || current.cols() != state.mean_probs.cols())
        throw std::invalid_argument("moving_update: shape mismatch");
    const double eta = state.eta;
    for (std::size_t i = 0; i < current.data().size(); ++i)
        state.mean_probs.data()[i] =
            eta * state.mean_probs.data()[i] + (1.0 - eta) * current.data()[i];
}

namespace {

template <typename LossFn>
LossTable loss_table_impl(const Matrix& probs, const std::vector<CandidateMask>& masks,
                          LossFn fn) {
    if (probs.rows() != masks.size())
        throw std::invalid_argument("loss table: row count does not match masks");
    LossTable table;
    table.candidate.resize(probs.rows());
    table.non_candidate.resize(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const SplitLoss split = fn(probs.row_span(i), masks[i]);
        table.candidate[i] = split.candidate;
        table.non_candidate[i] = split.non_candidate;
    }
    return table;
}

// Indices of the top `count` scores, ties broken toward the lower index;
// `taken` marks examples already claimed by an earlier stage.
std::vector<std::size_t> top_by_score(const std::vector<double>& score,
                                      const std::vector<char>& taken, std::size_t count) {
    std::vector<std::size_t> order;
    order.reserve(score.size());
    for (std::size_t i = 0; i < score.size(); ++i)
        if (!taken[i]) order.push_back(i);
    if (count > order.size())
        throw std::invalid_argument("partition: requested pool exceeds available examples");
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          if (score[a] != score[b]) return score[a] > score[b];
                          return a < b;
                      });
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

LossTable wooden_loss_table(const Matrix& probs, const std::vector<CandidateMask>& masks) {
    return loss_table_impl(probs, masks,
                           [](std::span<const double> p, const CandidateMask& m) {
                               return wooden_ce(p, m);
                           });
}

LossTable decoupled_loss_table(const Matrix& probs, const std::vector<CandidateMask>& masks) {
    return loss_table_impl(probs, masks,
                           [](std::span<const double> p, const CandidateMask& m) {
                               return decoupled_ce(p, m);
                           });
}

Partition partition_from_scores(const std::vector<double>& open_score,
                                const std::vector<double>& closed_score,
                                std::size_t open_count, std::size_t closed_count,
                                SelectionOrder order) {
    const std::size_t n = open_score.size();
    if (closed_score.size() != n)
        throw std::invalid_argument("partition_from_scores: score lengths differ");
    if (open_count + closed_count > n)
        throw std::invalid_argument("partition_from_scores: pool sizes exceed dataset");

    Partition part;
    std::vector<char> taken(n, 0);
    auto claim = [&](const std::vector<double>& score, std::size_t count,
                     std::vector<std::size_t>& into) {
        into = top_by_score(score, taken, count);
        for (std::size_t i : into) taken[i] = 1;
    };
    if (order == SelectionOrder::open_first) {
        claim(open_score, open_count, part.open_idx);
        claim(closed_score, closed_count, part.closed_idx);
    } else {
        claim(closed_score, closed_count, part.closed_idx);
        claim(open_score, open_count, part.open_idx);
    }
    part.normal_idx.reserve(n - open_count - closed_count);
    for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) part.normal_idx.push_back(i);
    return part;
}

Partition partition_ooc(const EnsembleState& ensemble,
                        const std::vector<CandidateMask>& masks, double gamma1, double gamma2,
                        SelectionOrder order) {
    if (gamma1 < 0.0 || gamma2 < 0.0 || gamma1 + gamma2 >= 1.0)
        throw std::invalid_argument("partition_ooc: need gamma1, gamma2 >= 0 and sum < 1");
    const std::size_t n = masks.size();
    const LossTable losses = wooden_loss_table(ensemble.mean_probs, masks);
    std::vector<double> open_score(n), closed_score(n);
    for (std::size_t i = 0; i < n; ++i) {
        open_score[i] = losses.candidate[i] + losses.non_candidate[i];
        closed_score[i] = losses.candidate[i] - losses.non_candidate[i];
    }
    const auto open_count = static_cast<std::size_t>(gamma2 * static_cast<double>(n));
    const auto closed_count = static_cast<std::size_t>(gamma1 * static_cast<double>(n));
    Partition part = partition_from_scores(open_score, closed_score, open_count, closed_count,
                                           order);
    part.gamma1 = gamma1;
    part.gamma2 = gamma2;
    return part;
}

std::pair<double, double> estimate_proportions(TrainProcedure& proc,
                                               const std::vector<LabeledExample>& validation,
                                               double epsilon, const RampSchedule& ramp) {
    if (validation.empty())
        throw std::invalid_argument("estimate_proportions: validation set required");
    if (ramp.stage_epochs < 1 || ramp.epochs_per_step < 1)
        throw std::invalid_argument("estimate_proportions: bad ramp schedule");

    const std::size_t n = proc.dataset_size();

    auto pools_for = [&](double normal_frac, double closed_frac, double open_frac) {
        const LossTable losses = proc.loss_table();
        std::vector<double> normal_score(n), open_score(n), closed_score(n);
        for (std::size_t i = 0; i < n; ++i) {
            normal_score[i] = losses.non_candidate[i] - losses.candidate[i];
            closed_score[i] = -normal_score[i];
            open_score[i] = losses.non_candidate[i] + losses.candidate[i];
        }
        const auto n_normal = static_cast<std::size_t>(normal_frac * static_cast<double>(n));
        const auto n_closed = static_cast<std::size_t>(closed_frac * static_cast<double>(n));
        const auto n_open = static_cast<std::size_t>(open_frac * static_cast<double>(n));
        // Normal pool first (it is the one being grown), then closed, then
        // open, each from the remainder.
        std::vector<char> taken(n, 0);
        Partition pools;
        auto claim = [&](const std::vector<double>& score, std::size_t count,
                         std::vector<std::size_t>& into) {
            std::vector<std::size_t> cand;
            cand.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                if (!taken[i]) cand.push_back(i);
            count = std::min(count, cand.size());
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(count),
                              cand.end(), [&](std::size_t a, std::size_t b) {
                                  if (score[a] != score[b]) return score[a] > score[b];
                                  return a < b;
                              });
            cand.resize(count);
            std::sort(cand.begin(), cand.end());
            for (std::size_t i : cand) taken[i] = 1;
            into = std::move(cand);
        };
        claim(normal_score, n_normal, pools.normal_idx);
        claim(closed_score, n_closed, pools.closed_idx);
        claim(open_score, n_open, pools.open_idx);
        return pools;
    };

    proc.warm_up();

    // Stage 1 settle: train at the starting normal proportion until the
    // validation accuracy over a trailing window stays inside the band.
    if (ramp.settle_epochs > 0) {
        std::vector<double> window;
        const int budget = 4 * ramp.settle_epochs;
        bool stable = false;
        for (int e = 0; e < budget; ++e) {
            proc.train_epoch(pools_for(ramp.normal_start, 0.0, 0.0));
            const double acc = proc.validation_accuracy(validation);
            window.push_back(acc);
            if (static_cast<int>(window.size()) > ramp.settle_epochs)
                window.erase(window.begin());
            if (static_cast<int>(window.size()) == ramp.settle_epochs) {
                const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
                if (*hi - *lo <= ramp.stabilize_band) {
                    stable = true;
                    break;
                }
            }
        }
        if (!stable)
            throw std::runtime_error(
                "estimate_proportions: validation accuracy did not stabilize during stage 1");
    }

    // Each stage monitors against its own running best, seeded from the
    // accuracy at stage entry.
    auto ramp_stage = [&](double start, double cap,
                          auto make_pools) {  // returns the stage estimate
        double kept = start;
        double stage_best = proc.validation_accuracy(validation);
        const int first = static_cast<int>(std::ceil(start * ramp.stage_epochs));
        for (int i = first; i <= ramp.stage_epochs; ++i) {
            const double value = std::min(static_cast<double>(i) / ramp.stage_epochs, cap);
            for (int e = 0; e < ramp.epochs_per_step; ++e)
                proc.train_epoch(make_pools(value));
            const double acc = proc.validation_accuracy(validation);
            if (stage_best - acc > epsilon) return kept;
            stage_best = std::max(stage_best, acc);
            kept = value;
            if (value >= cap) break;
        }
        return kept;
    };

    const double normal_frac = ramp_stage(
        ramp.normal_start, 1.0, [&](double v) { return pools_for(v, 0.0, 0.0); });
    const double ooc_frac = 1.0 - normal_frac;

    const double closed_frac = ramp_stage(
        0.0, ooc_frac, [&](double v) { return pools_for(normal_frac, v, 0.0); });

    const double open_frac = ramp_stage(
        0.0, ooc_frac - closed_frac,
        [&](double v) { return pools_for(normal_frac, closed_frac, v); });

    // Convert fractions of the observed dataset into tau-style proportions
    // of the inferred pre-injection count.
    const double base_frac = 1.0 - open_frac;
    if (base_frac <= 0.0) return {0.0, 0.0};
    return {closed_frac / base_frac, open_frac / base_frac};
}

}  // namespace oocpll
