#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oocpll/disambiguation.hpp"
#include "oocpll/mlp.hpp"
#include "oocpll/selection.hpp"
#include "oocpll/types.hpp"

namespace oocpll {

// How the per-batch losses are normalized: by the full batch size, or by the
// number of examples of that partition present in the batch (default).
enum class LossNorm { batch, partition };

struct TrainConfig {
    // data generation
    double q = 0.1;
    double tau1 = 0.0;
    double tau2 = 0.0;
    // selection proportions, relative to the pre-injection example count
    // like tau1/tau2; negative means "follow tau1/tau2"
    double gamma1 = -1.0;
    double gamma2 = -1.0;
    // loss trade-offs
    double alpha = 1.0;
    double beta = 0.1;
    // ensemble
    double eta = 0.9;
    int phi = 5;
    // schedule
    int T_warmup = 30;
    int T_max = 100;
    int batch_size = 128;
    // optimizer
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.001;
    // open-set random candidate inclusion probability
    double rho = 0.5;
    std::uint64_t seed = 1;
    std::vector<int> hidden_dims{64, 64};
    // behavior flags
    LossNorm loss_norm = LossNorm::partition;
    LdNorm ld_norm = LdNorm::masked;
    SelectionOrder selection_order = SelectionOrder::open_first;
    // ablation switches
    bool disable_rld = false;
    bool disable_rcg = false;
    bool disable_wce = false;
    bool disable_warmup = false;
    bool disable_ld = false;

    double resolved_gamma1() const { return gamma1 < 0.0 ? tau1 : gamma1; }
    double resolved_gamma2() const { return gamma2 < 0.0 ? tau2 : gamma2; }

    // Throws std::invalid_argument with the offending key named first.
    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    double loss_normal = 0.0;
    double loss_closed = 0.0;
    double loss_open = 0.0;
    double loss_total = 0.0;
    double test_accuracy = 0.0;
    // null while no partition exists or the pool is empty
    std::optional<double> precision_normal;
    std::optional<double> precision_closed;
    std::optional<double> precision_open;
    // fraction of truth-normal + truth-closed examples whose active
    // confidence argmax hits the hidden true label
    double disambiguation_rate = 0.0;
    // Frobenius norm of the active confidence-table change
    double confidence_delta = 0.0;

    bool operator==(const EpochMetrics&) const = default;
};

// Thrown when a batch loss stops being finite; message names the epoch and
// the partition loss that diverged.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-epoch view of the selection stage, for loss-distribution dumps.
struct SelectionSnapshot {
    int epoch = 0;
    const LossTable* losses = nullptr;
    const Partition* partition = nullptr;
    const std::vector<TruthType>* truth = nullptr;
};
using SelectionObserver = std::function<void(const SelectionSnapshot&)>;

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    MlpParams model;
    ConfidenceTable confidence;
    EnsembleState ensemble;
    Partition partition;          // last computed partition
    bool partition_valid = false; // false when selection never ran
};

// Full training loop: warm-up with ordinary disambiguation on everything,
// then per-epoch ensemble update, OOC selection, per-partition treatment and
// a step on the combined loss. Deterministic for a fixed seed.
TrainResult run_training(const TrainConfig& config, const PartialDataset& dataset,
                         const std::vector<LabeledExample>& test_set,
                         const SelectionObserver& observer = {});

// Fills test accuracy, per-type selection precision (null without a
// partition or for an empty pool) and the disambiguation success rate; the
// caller completes the loss and delta fields.
EpochMetrics eval_metrics(const MlpParams& model, const Partition* partition,
                          const ConfidenceTable& confidence, const PartialDataset& dataset,
                          const std::vector<LabeledExample>& test_set);

// One row per example: the reversed row where the reversed path is active,
// the normal row otherwise.
Matrix active_confidence(const ConfidenceTable& confidence, const Partition* partition);

// Frobenius norm of the elementwise difference.
double confidence_delta(const Matrix& current, const Matrix& previous);

enum class AblationSwitch { ld, rld, rcg, wce, warmup };

AblationSwitch ablation_from_string(const std::string& name);
const char* to_string(AblationSwitch sw);
TrainConfig apply_ablation(const TrainConfig& config, AblationSwitch sw);

struct AblationResult {
    TrainResult full;
    TrainResult ablated;
};

// Paired runs under identical seeds: the full method plus one toggled
// switch. Rejects configs that already have a switch set.
AblationResult run_ablation(const TrainConfig& config, const PartialDataset& dataset,
                            const std::vector<LabeledExample>& test_set, AblationSwitch sw);

// Metrics CSV, one row per epoch; doubles carry 17 significant digits so
// identical runs serialize to identical bytes.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);

// Argmax class accuracy over the labeled examples of a set.
double accuracy(const MlpParams& model, const std::vector<LabeledExample>& examples);

namespace detail {
class TrainerCore;
}

// TrainProcedure implementation backing estimate_proportions: one ongoing
// run whose epochs are requested stage by stage.
class ProportionTrainer : public TrainProcedure {
public:
    ProportionTrainer(const TrainConfig& config, const PartialDataset& dataset);
    ~ProportionTrainer() override;

    std::size_t dataset_size() const override;
    void warm_up() override;
    void train_epoch(const Partition& pools) override;
    LossTable loss_table() override;
    double validation_accuracy(const std::vector<LabeledExample>& validation) override;

private:
    std::unique_ptr<detail::TrainerCore> core_;
    TrainConfig config_;
    int epoch_ = 0;
};

}  // namespace oocpll
