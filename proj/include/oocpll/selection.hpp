#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "oocpll/types.hpp"

namespace oocpll {

// Moving-average ensemble of per-example model outputs used for selection
// scoring. history holds the raw warm-up outputs (most recent last, at most
// phi entries).
struct EnsembleState {
    Matrix mean_probs;  // one row per example, rows sum to 1
    std::vector<Matrix> history;
    double eta = 0.9;
    int phi = 5;

    void push_history(Matrix outputs);
};

// Arithmetic mean of the recorded warm-up outputs.
EnsembleState warmup_ensemble(const std::vector<Matrix>& history, double eta);

// mean_probs <- eta * mean_probs + (1 - eta) * current.
void moving_update(EnsembleState& state, const Matrix& current);

// Disjoint index pools covering the whole dataset.
struct Partition {
    std::vector<std::size_t> normal_idx;
    std::vector<std::size_t> closed_idx;
    std::vector<std::size_t> open_idx;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
};

enum class SelectionOrder { open_first, closed_first };

// Per-example losses over the candidate and non-candidate sets.
struct LossTable {
    std::vector<double> candidate;      // l per example
    std::vector<double> non_candidate;  // l-bar per example
};

LossTable wooden_loss_table(const Matrix& probs, const std::vector<CandidateMask>& masks);
LossTable decoupled_loss_table(const Matrix& probs, const std::vector<CandidateMask>& masks);

// Rank-based selection: the top open_count examples by open_score form the
// open pool, then the top closed_count of the remainder by closed_score form
// the closed pool (the stages swap under closed_first). Ties break toward
// the lower index; the rest is normal.
Partition partition_from_scores(const std::vector<double>& open_score,
                                const std::vector<double>& closed_score,
                                std::size_t open_count, std::size_t closed_count,
                                SelectionOrder order = SelectionOrder::open_first);

// OOC selection criterion instantiated with wooden losses on the ensemble
// output: open score l + l-bar, closed score l - l-bar; pool sizes are
// floor(gamma * n) of the given index range.
Partition partition_ooc(const EnsembleState& ensemble,
                        const std::vector<CandidateMask>& masks, double gamma1, double gamma2,
                        SelectionOrder order = SelectionOrder::open_first);

// Training procedure handle used by the proportion estimator. Implemented by
// the trainer; epochs requested through it continue one underlying run.
class TrainProcedure {
public:
    virtual ~TrainProcedure() = default;

    virtual std::size_t dataset_size() const = 0;

    // Ordinary disambiguation training on all examples, config-many epochs.
    virtual void warm_up() = 0;

    // One epoch restricted to the pooled examples: normal pool trained by
    // ordinary disambiguation, closed by reversed disambiguation, open by
    // random candidate generation. Unlisted examples are skipped.
    virtual void train_epoch(const Partition& pools) = 0;

    // Current per-example wooden losses from the ensemble output.
    virtual LossTable loss_table() = 0;

    virtual double validation_accuracy(const std::vector<LabeledExample>& validation) = 0;
};

struct RampSchedule {
    double normal_start = 0.5;  // stage-1 initial normal proportion
    int stage_epochs = 50;      // ramp denominator per stage
    int epochs_per_step = 1;    // training epochs at each ramp value
    int settle_epochs = 5;      // stage-1 epochs at normal_start before ramping
    double stabilize_band = 0.10;  // max val-accuracy spread over the settle window
};

// Three-stage ramp: grow the normal proportion until validation accuracy
// drops by more than epsilon from its running best, then fix it and ramp the
// closed proportion, then the open proportion. Returns (gamma1, gamma2)
// expressed relative to the inferred pre-injection example count, i.e. in
// the same units as tau1/tau2. Throws when validation accuracy never
// stabilizes during stage 1.
std::pair<double, double> estimate_proportions(TrainProcedure& proc,
                                               const std::vector<LabeledExample>& validation,
                                               double epsilon, const RampSchedule& ramp);

}  // namespace oocpll
