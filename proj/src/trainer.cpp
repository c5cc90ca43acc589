#include "oocpll/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "oocpll/losses.hpp"

namespace oocpll {

namespace {

// Intra-run worker cap from OOC_PLL_THREADS, read once per process.
// Default 1 keeps runs bit-reproducible independent of the machine.
int intra_run_threads() {
    static const int cap = [] {
        const char* env = std::getenv("OOC_PLL_THREADS");
        int v = env != nullptr ? std::atoi(env) : 1;
        if (v < 1) v = 1;
        const int hc = static_cast<int>(std::thread::hardware_concurrency());
        if (hc > 0 && v > hc) v = hc;
        return v;
    }();
    return cap;
}

void add_in_place(MlpParams& into, const MlpParams& from) {
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        auto& a = into.layers[l];
        const auto& b = from.layers[l];
        for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += b.weights[i];
        for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
    }
}

void zero_params(MlpParams& p) {
    for (auto& l : p.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

}  // namespace

namespace detail {

enum class Role : unsigned char { normal, closed, open, skip };

class TrainerCore {
public:
    TrainerCore(const TrainConfig& config, const PartialDataset& dataset)
        : cfg(config),
          data(dataset),
          init_rng(config.seed, 1),
          shuffle_rng(config.seed, 2),
          rcg_rng(config.seed, 3) {
        cfg.validate();
        data.validate();
        n = data.size();
        if (n == 0) throw std::invalid_argument("run_training: empty dataset");
        c = data.num_classes;

        model = make_mlp(data.dim, cfg.hidden_dims, c, init_rng);
        opt = make_optimizer(model, cfg.base_lr, cfg.momentum, cfg.weight_decay, cfg.T_max);
        conf = ConfidenceTable::init_uniform(data.masks, c);
        ensemble.eta = cfg.eta;
        ensemble.phi = cfg.phi;
        open_assign.rho = cfg.rho;
        open_assign.masks.resize(n);

        const int threads = intra_run_threads();
        workers.resize(static_cast<std::size_t>(threads));
        for (auto& w : workers) w.grads = zeros_like(model);
        total_grads = zeros_like(model);
    }

    struct EpochLosses {
        double normal = 0.0;
        double closed = 0.0;
        double open = 0.0;
    };

    // One pass over the non-skipped examples in freshly shuffled batches.
    // Returns the batch-mean partition losses.
    EpochLosses run_epoch(const std::vector<Role>& role, int cosine_epoch) {
        std::vector<std::size_t> active;
        active.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (role[i] != Role::skip) active.push_back(i);
        shuffle_rng.shuffle(active);

        opt.epoch = std::clamp(cosine_epoch, 0, cfg.T_max);

        EpochLosses sums;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < active.size(); start += cfg.batch_size) {
            const std::size_t stop =
                std::min(active.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto batch = std::span<const std::size_t>(active).subspan(start, stop - start);

            std::size_t count_n = 0, count_c = 0, count_o = 0;
            for (std::size_t i : batch) {
                switch (role[i]) {
                    case Role::normal: ++count_n; break;
                    case Role::closed: ++count_c; break;
                    case Role::open: ++count_o; break;
                    case Role::skip: break;
                }
            }
            const double norm_n =
                cfg.loss_norm == LossNorm::batch ? static_cast<double>(batch.size())
                                                 : static_cast<double>(count_n);
            const double norm_c =
                cfg.loss_norm == LossNorm::batch ? static_cast<double>(batch.size())
                                                 : static_cast<double>(count_c);
            const double norm_o =
                cfg.loss_norm == LossNorm::batch ? static_cast<double>(batch.size())
                                                 : static_cast<double>(count_o);

            const int threads =
                std::min<int>(static_cast<int>(workers.size()),
                              std::max<int>(1, static_cast<int>(batch.size())));
            for (int t = 0; t < threads; ++t) {
                zero_params(workers[static_cast<std::size_t>(t)].grads);
                workers[static_cast<std::size_t>(t)].sums = {};
            }

            auto process_range = [&](int t, std::size_t lo, std::size_t hi) {
                Worker& w = workers[static_cast<std::size_t>(t)];
                for (std::size_t b = lo; b < hi; ++b)
                    process_example(batch[b], role[batch[b]], norm_n, norm_c, norm_o,
                                    cosine_epoch, w);
            };
            if (threads == 1) {
                process_range(0, 0, batch.size());
            } else {
                std::vector<std::thread> pool;
                std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
                const std::size_t chunk = (batch.size() + threads - 1) / threads;
                for (int t = 0; t < threads; ++t) {
                    const std::size_t lo = std::min(batch.size(), static_cast<std::size_t>(t) * chunk);
                    const std::size_t hi = std::min(batch.size(), lo + chunk);
                    pool.emplace_back([&, t, lo, hi] {
                        try {
                            process_range(t, lo, hi);
                        } catch (...) {
                            errors[static_cast<std::size_t>(t)] = std::current_exception();
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (const auto& err : errors)
                    if (err) std::rethrow_exception(err);
            }

            zero_params(total_grads);
            EpochLosses batch_sums;
            for (int t = 0; t < threads; ++t) {
                const Worker& w = workers[static_cast<std::size_t>(t)];
                add_in_place(total_grads, w.grads);
                batch_sums.normal += w.sums.normal;
                batch_sums.closed += w.sums.closed;
                batch_sums.open += w.sums.open;
            }
            const double l_n = norm_n > 0.0 ? batch_sums.normal / norm_n : 0.0;
            const double l_c = norm_c > 0.0 ? batch_sums.closed / norm_c : 0.0;
            const double l_o = norm_o > 0.0 ? batch_sums.open / norm_o : 0.0;
            check_finite(l_n, "normal", cosine_epoch);
            check_finite(l_c, "closed", cosine_epoch);
            check_finite(l_o, "open", cosine_epoch);

            sgd_step(model, total_grads, opt);
            sums.normal += l_n;
            sums.closed += l_c;
            sums.open += l_o;
            ++batches;
        }
        if (batches > 0) {
            sums.normal /= static_cast<double>(batches);
            sums.closed /= static_cast<double>(batches);
            sums.open /= static_cast<double>(batches);
        }
        return sums;
    }

    void regenerate_open(const std::vector<std::size_t>& open_idx) {
        open_assign.regenerate(open_idx, c, rcg_rng);
    }

    Matrix outputs() const { return forward_all(model, data); }

    TrainConfig cfg;
    const PartialDataset& data;
    SplitRng init_rng;
    SplitRng shuffle_rng;
    SplitRng rcg_rng;
    std::size_t n = 0;
    int c = 0;
    MlpParams model;
    OptimizerState opt;
    ConfidenceTable conf;
    EnsembleState ensemble;
    OpenSetAssignment open_assign;

private:
    struct Worker {
        MlpParams grads;
        ForwardWorkspace ws;
        std::vector<double> target;
        EpochLosses sums;
    };

    static void check_finite(double loss, const char* which, int epoch) {
        if (!std::isfinite(loss))
            throw TrainingDiverged("epoch " + std::to_string(epoch) + ": non-finite " + which +
                                   " partition loss");
    }

    void process_example(std::size_t i, Role role, double norm_n, double norm_c, double norm_o,
                         int epoch, Worker& w) {
        forward(model, data.examples[i].features, w.ws);
        const std::span<const double> probs = w.ws.probs();
        for (double p : probs)
            if (!std::isfinite(p))
                throw TrainingDiverged("epoch " + std::to_string(epoch) +
                                       ": non-finite model output in the " +
                                       (role == Role::closed
                                            ? "closed"
                                            : role == Role::open ? "open" : "normal") +
                                       std::string(" partition"));
        const CandidateMask& mask = data.masks[i];

        // The contradictory closed assignment of a full-candidate example
        // falls back to the normal path.
        if (role == Role::closed && mask.non_candidate_count() == 0) role = Role::normal;

        double scale = 0.0;
        std::span<const double> target;
        switch (role) {
            case Role::normal: {
                if (!cfg.disable_ld) {
                    const auto row = update_conf_normal(probs, mask, cfg.ld_norm);
                    conf.set_normal_row(i, row);
                }
                target = conf.normal_conf.row_span(i);
                const double item = soft_target_ce(probs, target);
                w.sums.normal += item;
                scale = norm_n > 0.0 ? 1.0 / norm_n : 0.0;
                break;
            }
            case Role::closed: {
                if (!cfg.disable_ld) {
                    const auto row = update_conf_reversed(probs, mask, cfg.ld_norm);
                    conf.set_reversed_row(i, row);
                }
                target = conf.reversed_conf.row_span(i);
                const double item = soft_target_ce(probs, target);
                w.sums.closed += item;
                scale = norm_c > 0.0 ? cfg.alpha / norm_c : 0.0;
                break;
            }
            case Role::open: {
                w.target.assign(static_cast<std::size_t>(c), 0.0);
                for (int j : open_assign.masks[i].candidates())
                    w.target[static_cast<std::size_t>(j)] = 1.0;
                target = w.target;
                const double item = soft_target_ce(probs, target);
                w.sums.open += item;
                scale = norm_o > 0.0 ? cfg.beta / norm_o : 0.0;
                break;
            }
            case Role::skip:
                return;
        }
        if (scale != 0.0) accumulate_grad_soft_target(model, w.ws, target, scale, w.grads);
    }

    std::vector<Worker> workers;
    MlpParams total_grads;
};

}  // namespace detail

using detail::Role;
using detail::TrainerCore;

void TrainConfig::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(q)) throw std::invalid_argument("q: must be in [0, 1]");
    if (!in01(tau1)) throw std::invalid_argument("tau1: must be in [0, 1]");
    if (!in01(tau2)) throw std::invalid_argument("tau2: must be in [0, 1]");
    if (gamma1 >= 0.0 && gamma1 > 1.0)
        throw std::invalid_argument("gamma1: must be in [0, 1] or negative for default");
    if (gamma2 >= 0.0 && gamma2 > 1.0)
        throw std::invalid_argument("gamma2: must be in [0, 1] or negative for default");
    if (alpha < 0.0 || !std::isfinite(alpha))
        throw std::invalid_argument("alpha: must be finite and >= 0");
    if (beta < 0.0 || !std::isfinite(beta))
        throw std::invalid_argument("beta: must be finite and >= 0");
    if (!in01(eta)) throw std::invalid_argument("eta: must be in [0, 1]");
    if (!in01(rho)) throw std::invalid_argument("rho: must be in [0, 1]");
    if (phi < 1) throw std::invalid_argument("phi: must be >= 1");
    if (T_max < 1) throw std::invalid_argument("T_max: must be >= 1");
    if (T_warmup < 0) throw std::invalid_argument("T_warmup: must be >= 0");
    if (T_warmup > T_max) throw std::invalid_argument("T_warmup: must be <= T_max");
    if (!disable_warmup && T_warmup < T_max && phi > T_warmup)
        throw std::invalid_argument("phi: must be <= T_warmup");
    if (batch_size < 1) throw std::invalid_argument("batch_size: must be >= 1");
    if (base_lr <= 0.0) throw std::invalid_argument("base_lr: must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("momentum: must be in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay: must be >= 0");
    if (hidden_dims.empty())
        throw std::invalid_argument("hidden_dims: at least one hidden layer");
    for (int h : hidden_dims)
        if (h < 1) throw std::invalid_argument("hidden_dims: entries must be >= 1");
}

double accuracy(const MlpParams& model, const std::vector<LabeledExample>& examples) {
    std::size_t labeled = 0, hits = 0;
    ForwardWorkspace ws;
    for (const auto& ex : examples) {
        if (ex.true_label < 0) continue;
        ++labeled;
        forward(model, ex.features, ws);
        if (argmax(ws.probs()) == static_cast<std::size_t>(ex.true_label)) ++hits;
    }
    return labeled > 0 ? static_cast<double>(hits) / static_cast<double>(labeled) : 0.0;
}

Matrix active_confidence(const ConfidenceTable& confidence, const Partition* partition) {
    Matrix active = confidence.normal_conf;
    if (partition != nullptr) {
        for (std::size_t i : partition->closed_idx) {
            const auto row = confidence.reversed_conf.row_span(i);
            bool any = false;
            for (double v : row)
                if (v != 0.0) { any = true; break; }
            if (any) std::copy(row.begin(), row.end(), active.row(i));
        }
    }
    return active;
}

double confidence_delta(const Matrix& current, const Matrix& previous) {
    if (current.rows() != previous.rows() || current.cols() != previous.cols())
        throw std::invalid_argument("confidence_delta: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < current.data().size(); ++i) {
        const double d = current.data()[i] - previous.data()[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

EpochMetrics eval_metrics(const MlpParams& model, const Partition* partition,
                          const ConfidenceTable& confidence, const PartialDataset& dataset,
                          const std::vector<LabeledExample>& test_set) {
    EpochMetrics m;
    m.test_accuracy = accuracy(model, test_set);

    if (partition != nullptr) {
        auto precision = [&](const std::vector<std::size_t>& idx, TruthType want)
            -> std::optional<double> {
            if (idx.empty()) return std::nullopt;
            std::size_t hits = 0;
            for (std::size_t i : idx)
                if (dataset.truth_type[i] == want) ++hits;
            return static_cast<double>(hits) / static_cast<double>(idx.size());
        };
        m.precision_normal = precision(partition->normal_idx, TruthType::normal);
        m.precision_closed = precision(partition->closed_idx, TruthType::closed_set);
        m.precision_open = precision(partition->open_idx, TruthType::open_set);
    }

    const Matrix active = active_confidence(confidence, partition);
    std::size_t eligible = 0, identified = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.truth_type[i] == TruthType::open_set) continue;
        ++eligible;
        if (argmax(active.row_span(i)) ==
            static_cast<std::size_t>(dataset.examples[i].true_label))
            ++identified;
    }
    m.disambiguation_rate =
        eligible > 0 ? static_cast<double>(identified) / static_cast<double>(eligible) : 0.0;
    return m;
}

TrainResult run_training(const TrainConfig& config, const PartialDataset& dataset,
                         const std::vector<LabeledExample>& test_set,
                         const SelectionObserver& observer) {
    TrainerCore core(config, dataset);
    const TrainConfig& cfg = core.cfg;
    const std::size_t n = core.n;

    const int warmup_end = cfg.disable_warmup ? 0 : cfg.T_warmup;
    const double g1 = cfg.resolved_gamma1();
    const double g2 = cfg.resolved_gamma2();
    const auto n_base = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) / (1.0 + cfg.tau2)));
    const auto closed_count = static_cast<std::size_t>(g1 * static_cast<double>(n_base));
    const auto open_count = static_cast<std::size_t>(g2 * static_cast<double>(n_base));
    if (closed_count + open_count >= n)
        throw std::invalid_argument(
            "gamma1: selection pools would cover the whole dataset");
    const bool selection_enabled =
        !cfg.disable_ld && warmup_end < cfg.T_max && (closed_count + open_count) > 0;

    TrainResult result;
    std::vector<Role> role(n, Role::normal);
    LossTable losses_for_dump;
    Matrix prev_active = active_confidence(core.conf, nullptr);

    for (int epoch = 0; epoch < cfg.T_max; ++epoch) {
        if (selection_enabled && epoch >= warmup_end) {
            if (epoch == warmup_end) {
                if (warmup_end == 0)
                    core.ensemble.mean_probs = core.outputs();
                else
                    core.ensemble.mean_probs =
                        warmup_ensemble(core.ensemble.history, cfg.eta).mean_probs;
            }
            losses_for_dump =
                cfg.disable_wce
                    ? decoupled_loss_table(core.ensemble.mean_probs, dataset.masks)
                    : wooden_loss_table(core.ensemble.mean_probs, dataset.masks);
            std::vector<double> open_score(n), closed_score(n);
            for (std::size_t i = 0; i < n; ++i) {
                open_score[i] = losses_for_dump.candidate[i] + losses_for_dump.non_candidate[i];
                closed_score[i] = losses_for_dump.candidate[i] - losses_for_dump.non_candidate[i];
            }
            result.partition = partition_from_scores(open_score, closed_score, open_count,
                                                     closed_count, cfg.selection_order);
            result.partition.gamma1 = g1;
            result.partition.gamma2 = g2;
            result.partition_valid = true;

            core.regenerate_open(result.partition.open_idx);

            std::fill(role.begin(), role.end(), Role::normal);
            if (!cfg.disable_rld)
                for (std::size_t i : result.partition.closed_idx) role[i] = Role::closed;
            if (!cfg.disable_rcg)
                for (std::size_t i : result.partition.open_idx) role[i] = Role::open;

            if (observer) {
                SelectionSnapshot snap;
                snap.epoch = epoch;
                snap.losses = &losses_for_dump;
                snap.partition = &result.partition;
                snap.truth = &dataset.truth_type;
                observer(snap);
            }
        }

        const TrainerCore::EpochLosses losses = core.run_epoch(role, epoch);

        Matrix outputs = core.outputs();
        if (epoch < warmup_end)
            core.ensemble.push_history(std::move(outputs));
        else if (selection_enabled)
            moving_update(core.ensemble, outputs);

        EpochMetrics m = eval_metrics(core.model,
                                      result.partition_valid ? &result.partition : nullptr,
                                      core.conf, dataset, test_set);
        m.epoch = epoch;
        m.loss_normal = losses.normal;
        m.loss_closed = losses.closed;
        m.loss_open = losses.open;
        m.loss_total = total_loss(losses.normal, losses.closed, losses.open, cfg.alpha, cfg.beta);
        Matrix active = active_confidence(core.conf,
                                          result.partition_valid ? &result.partition : nullptr);
        m.confidence_delta = confidence_delta(active, prev_active);
        prev_active = std::move(active);
        result.metrics.push_back(m);
    }

    result.model = std::move(core.model);
    result.confidence = std::move(core.conf);
    result.ensemble = std::move(core.ensemble);
    return result;
}

AblationSwitch ablation_from_string(const std::string& name) {
    if (name == "ld") return AblationSwitch::ld;
    if (name == "rld") return AblationSwitch::rld;
    if (name == "rcg") return AblationSwitch::rcg;
    if (name == "wce") return AblationSwitch::wce;
    if (name == "warmup") return AblationSwitch::warmup;
    throw std::invalid_argument("ablate: unknown switch '" + name +
                                "' (expected ld|rld|rcg|wce|warmup)");
}

const char* to_string(AblationSwitch sw) {
    switch (sw) {
        case AblationSwitch::ld: return "ld";
        case AblationSwitch::rld: return "rld";
        case AblationSwitch::rcg: return "rcg";
        case AblationSwitch::wce: return "wce";
        case AblationSwitch::warmup: return "warmup";
    }
    return "unknown";
}

TrainConfig apply_ablation(const TrainConfig& config, AblationSwitch sw) {
    TrainConfig out = config;
    switch (sw) {
        case AblationSwitch::ld: out.disable_ld = true; break;
        case AblationSwitch::rld: out.disable_rld = true; break;
        case AblationSwitch::rcg: out.disable_rcg = true; break;
        case AblationSwitch::wce: out.disable_wce = true; break;
        case AblationSwitch::warmup: out.disable_warmup = true; break;
    }
    return out;
}

AblationResult run_ablation(const TrainConfig& config, const PartialDataset& dataset,
                            const std::vector<LabeledExample>& test_set, AblationSwitch sw) {
    if (config.disable_ld || config.disable_rld || config.disable_rcg || config.disable_wce ||
        config.disable_warmup)
        throw std::invalid_argument(
            "run_ablation: config already has an ablation switch set");
    AblationResult result;
    result.full = run_training(config, dataset, test_set);
    result.ablated = run_training(apply_ablation(config, sw), dataset, test_set);
    return result;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_optional(std::string& out, const std::optional<double>& v) {
    if (v.has_value()) append_double(out, *v);
}

}  // namespace

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
    std::string out =
        "epoch,loss_normal,loss_closed,loss_open,loss_total,test_accuracy,"
        "precision_normal,precision_closed,precision_open,disambiguation_rate,"
        "confidence_delta\n";
    for (const auto& m : metrics) {
        out += std::to_string(m.epoch);
        out += ',';
        append_double(out, m.loss_normal);
        out += ',';
        append_double(out, m.loss_closed);
        out += ',';
        append_double(out, m.loss_open);
        out += ',';
        append_double(out, m.loss_total);
        out += ',';
        append_double(out, m.test_accuracy);
        out += ',';
        append_optional(out, m.precision_normal);
        out += ',';
        append_optional(out, m.precision_closed);
        out += ',';
        append_optional(out, m.precision_open);
        out += ',';
        append_double(out, m.disambiguation_rate);
        out += ',';
        append_double(out, m.confidence_delta);
        out += '\n';
    }
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);
    const std::string body = metrics_csv(metrics);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write failed for metrics file: " + path);
}

ProportionTrainer::ProportionTrainer(const TrainConfig& config, const PartialDataset& dataset)
    : core_(std::make_unique<TrainerCore>(config, dataset)), config_(config) {}

ProportionTrainer::~ProportionTrainer() = default;

std::size_t ProportionTrainer::dataset_size() const { return core_->n; }

void ProportionTrainer::warm_up() {
    const int warmup = config_.disable_warmup ? 0 : config_.T_warmup;
    std::vector<Role> all_normal(core_->n, Role::normal);
    for (int e = 0; e < warmup; ++e) {
        core_->run_epoch(all_normal, epoch_);
        core_->ensemble.push_history(core_->outputs());
        ++epoch_;
    }
    if (warmup > 0)
        core_->ensemble.mean_probs =
            warmup_ensemble(core_->ensemble.history, config_.eta).mean_probs;
    else
        core_->ensemble.mean_probs = core_->outputs();
}

void ProportionTrainer::train_epoch(const Partition& pools) {
    std::vector<Role> role(core_->n, Role::skip);
    for (std::size_t i : pools.normal_idx) role[i] = Role::normal;
    for (std::size_t i : pools.closed_idx) role[i] = Role::closed;
    for (std::size_t i : pools.open_idx) role[i] = Role::open;
    core_->regenerate_open(pools.open_idx);
    core_->run_epoch(role, std::min(epoch_, config_.T_max));
    moving_update(core_->ensemble, core_->outputs());
    ++epoch_;
}

LossTable ProportionTrainer::loss_table() {
    return wooden_loss_table(core_->ensemble.mean_probs, core_->data.masks);
}

double ProportionTrainer::validation_accuracy(const std::vector<LabeledExample>& validation) {
    return accuracy(core_->model, validation);
}

}  // namespace oocpll
