#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "oocpll/config.hpp"
#include "oocpll/datagen.hpp"
#include "oocpll/disambiguation.hpp"
#include "oocpll/io.hpp"
#include "oocpll/losses.hpp"
#include "oocpll/mlp.hpp"
#include "oocpll/selection.hpp"
#include "oocpll/trainer.hpp"

namespace py = pybind11;
using namespace oocpll;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols())
            throw std::invalid_argument("rows must all have the same length");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i));
    }
    return m;
}

std::vector<std::vector<double>> rows_from_matrix(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        rows[i].assign(m.row(i), m.row(i) + m.cols());
    return rows;
}

}  // namespace

PYBIND11_MODULE(oocpll, m) {
    m.doc() = "Partial-label learning with mixed closed-set and open-set "
              "out-of-candidate examples";

    py::enum_<Source>(m, "Source")
        .value("in_distribution", Source::in_distribution)
        .value("auxiliary", Source::auxiliary);

    py::enum_<TruthType>(m, "TruthType")
        .value("normal", TruthType::normal)
        .value("closed_set", TruthType::closed_set)
        .value("open_set", TruthType::open_set);

    py::enum_<LdNorm>(m, "LdNorm")
        .value("literal", LdNorm::literal)
        .value("masked", LdNorm::masked);

    py::enum_<LossNorm>(m, "LossNorm")
        .value("batch", LossNorm::batch)
        .value("partition", LossNorm::partition);

    py::enum_<SelectionOrder>(m, "SelectionOrder")
        .value("open_first", SelectionOrder::open_first)
        .value("closed_first", SelectionOrder::closed_first);

    py::enum_<AblationSwitch>(m, "AblationSwitch")
        .value("ld", AblationSwitch::ld)
        .value("rld", AblationSwitch::rld)
        .value("rcg", AblationSwitch::rcg)
        .value("wce", AblationSwitch::wce)
        .value("warmup", AblationSwitch::warmup);

    py::class_<CandidateMask>(m, "CandidateMask")
        .def(py::init<int>(), py::arg("num_classes"))
        .def_static("from_string", &CandidateMask::from_string)
        .def("num_classes", &CandidateMask::num_classes)
        .def("count", &CandidateMask::count)
        .def("non_candidate_count", &CandidateMask::non_candidate_count)
        .def("contains", &CandidateMask::contains)
        .def("add", &CandidateMask::add)
        .def("remove", &CandidateMask::remove)
        .def("candidates", &CandidateMask::candidates)
        .def("non_candidates", &CandidateMask::non_candidates)
        .def("__str__", &CandidateMask::to_string)
        .def("__eq__", [](const CandidateMask& a, const CandidateMask& b) { return a == b; });

    py::class_<LabeledExample>(m, "LabeledExample")
        .def(py::init<>())
        .def_readwrite("features", &LabeledExample::features)
        .def_readwrite("true_label", &LabeledExample::true_label)
        .def_readwrite("source", &LabeledExample::source);

    py::class_<PartialDataset>(m, "PartialDataset")
        .def(py::init<>())
        .def_readwrite("examples", &PartialDataset::examples)
        .def_readwrite("masks", &PartialDataset::masks)
        .def_readwrite("truth_type", &PartialDataset::truth_type)
        .def_readwrite("num_classes", &PartialDataset::num_classes)
        .def_readwrite("dim", &PartialDataset::dim)
        .def("__len__", &PartialDataset::size)
        .def("validate", &PartialDataset::validate);

    m.def("generate_candidates",
          [](int true_label, double q, int num_classes, std::uint64_t seed) {
              SplitRng rng(seed);
              return generate_candidates(true_label, q, num_classes, rng);
          },
          py::arg("true_label"), py::arg("q"), py::arg("num_classes"), py::arg("seed"));

    m.def("gen_random_candidates",
          [](int num_classes, double rho, std::uint64_t seed) {
              SplitRng rng(seed);
              return gen_random_candidates(num_classes, rho, rng);
          },
          py::arg("num_classes"), py::arg("rho"), py::arg("seed"));

    m.def("synth_blobs",
          [](int num_classes, int n_per_class, int dim, double separation, int open_classes,
             std::uint64_t seed, int aux_per_class, double open_sigma) {
              SplitRng rng(seed);
              SynthBlobs blobs = synth_blobs(num_classes, n_per_class, dim, separation,
                                             open_classes, rng, aux_per_class, open_sigma);
              return py::make_tuple(blobs.in_distribution, blobs.auxiliary);
          },
          py::arg("num_classes"), py::arg("n_per_class"), py::arg("dim"),
          py::arg("separation"), py::arg("open_classes"), py::arg("seed"),
          py::arg("aux_per_class") = -1, py::arg("open_sigma") = 0.35);

    auto split_pair = [](const SplitLoss& s) { return py::make_tuple(s.candidate, s.non_candidate); };
    m.def("decoupled_ce",
          [split_pair](const std::vector<double>& probs, const CandidateMask& mask) {
              return split_pair(decoupled_ce(probs, mask));
          });
    m.def("wooden_ce",
          [split_pair](const std::vector<double>& probs, const CandidateMask& mask) {
              return split_pair(wooden_ce(probs, mask));
          });
    m.def("confidence_entropy",
          [split_pair](const std::vector<double>& probs, const CandidateMask& mask) {
              return split_pair(confidence_entropy(probs, mask));
          });
    m.def("soft_target_ce", [](const std::vector<double>& probs, const std::vector<double>& t) {
        return soft_target_ce(probs, t);
    });
    m.def("loss_normal",
          [](const std::vector<std::vector<double>>& probs,
             const std::vector<std::vector<double>>& conf) {
              return loss_normal(matrix_from_rows(probs), matrix_from_rows(conf));
          });
    m.def("loss_closed",
          [](const std::vector<std::vector<double>>& probs,
             const std::vector<std::vector<double>>& conf) {
              return loss_closed(matrix_from_rows(probs), matrix_from_rows(conf));
          });
    m.def("loss_open",
          [](const std::vector<std::vector<double>>& probs,
             const std::vector<CandidateMask>& assigned) {
              return loss_open(matrix_from_rows(probs), assigned);
          });
    m.def("total_loss", &total_loss, py::arg("l_normal"), py::arg("l_closed"),
          py::arg("l_open"), py::arg("alpha"), py::arg("beta"));

    m.def("update_conf_normal",
          [](const std::vector<double>& probs, const CandidateMask& mask, LdNorm norm) {
              return update_conf_normal(probs, mask, norm);
          },
          py::arg("probs"), py::arg("mask"), py::arg("norm") = LdNorm::masked);
    m.def("update_conf_reversed",
          [](const std::vector<double>& probs, const CandidateMask& mask, LdNorm norm) {
              return update_conf_reversed(probs, mask, norm);
          },
          py::arg("probs"), py::arg("mask"), py::arg("norm") = LdNorm::masked);

    py::class_<Partition>(m, "Partition")
        .def_readonly("normal_idx", &Partition::normal_idx)
        .def_readonly("closed_idx", &Partition::closed_idx)
        .def_readonly("open_idx", &Partition::open_idx);

    m.def("partition_from_scores", &partition_from_scores, py::arg("open_score"),
          py::arg("closed_score"), py::arg("open_count"), py::arg("closed_count"),
          py::arg("order") = SelectionOrder::open_first);
    m.def("partition_ooc",
          [](const std::vector<std::vector<double>>& ensemble_probs,
             const std::vector<CandidateMask>& masks, double gamma1, double gamma2,
             SelectionOrder order) {
              EnsembleState state;
              state.mean_probs = matrix_from_rows(ensemble_probs);
              return partition_ooc(state, masks, gamma1, gamma2, order);
          },
          py::arg("ensemble_probs"), py::arg("masks"), py::arg("gamma1"), py::arg("gamma2"),
          py::arg("order") = SelectionOrder::open_first);

    py::class_<MlpParams>(m, "MlpParams")
        .def("input_dim", &MlpParams::input_dim)
        .def("num_classes", &MlpParams::num_classes)
        .def("parameter_count", &MlpParams::parameter_count)
        .def("forward", [](const MlpParams& p, const std::vector<double>& x) {
            return forward(p, x);
        });
    m.def("make_mlp",
          [](int input_dim, const std::vector<int>& hidden, int num_classes,
             std::uint64_t seed) {
              SplitRng rng(seed);
              return make_mlp(input_dim, hidden, num_classes, rng);
          },
          py::arg("input_dim"), py::arg("hidden_dims"), py::arg("num_classes"), py::arg("seed"));
    m.def("cosine_lr", &cosine_lr, py::arg("base_lr"), py::arg("epoch"),
          py::arg("total_epochs"));
    m.def("save_checkpoint", &save_checkpoint);
    m.def("load_checkpoint", &load_checkpoint);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("q", &TrainConfig::q)
        .def_readwrite("tau1", &TrainConfig::tau1)
        .def_readwrite("tau2", &TrainConfig::tau2)
        .def_readwrite("gamma1", &TrainConfig::gamma1)
        .def_readwrite("gamma2", &TrainConfig::gamma2)
        .def_readwrite("alpha", &TrainConfig::alpha)
        .def_readwrite("beta", &TrainConfig::beta)
        .def_readwrite("eta", &TrainConfig::eta)
        .def_readwrite("phi", &TrainConfig::phi)
        .def_readwrite("T_warmup", &TrainConfig::T_warmup)
        .def_readwrite("T_max", &TrainConfig::T_max)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("base_lr", &TrainConfig::base_lr)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("rho", &TrainConfig::rho)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("hidden_dims", &TrainConfig::hidden_dims)
        .def_readwrite("loss_norm", &TrainConfig::loss_norm)
        .def_readwrite("ld_norm", &TrainConfig::ld_norm)
        .def_readwrite("selection_order", &TrainConfig::selection_order)
        .def_readwrite("disable_rld", &TrainConfig::disable_rld)
        .def_readwrite("disable_rcg", &TrainConfig::disable_rcg)
        .def_readwrite("disable_wce", &TrainConfig::disable_wce)
        .def_readwrite("disable_warmup", &TrainConfig::disable_warmup)
        .def_readwrite("disable_ld", &TrainConfig::disable_ld)
        .def("validate", &TrainConfig::validate);

    py::class_<EpochMetrics>(m, "EpochMetrics")
        .def_readonly("epoch", &EpochMetrics::epoch)
        .def_readonly("loss_normal", &EpochMetrics::loss_normal)
        .def_readonly("loss_closed", &EpochMetrics::loss_closed)
        .def_readonly("loss_open", &EpochMetrics::loss_open)
        .def_readonly("loss_total", &EpochMetrics::loss_total)
        .def_readonly("test_accuracy", &EpochMetrics::test_accuracy)
        .def_readonly("precision_normal", &EpochMetrics::precision_normal)
        .def_readonly("precision_closed", &EpochMetrics::precision_closed)
        .def_readonly("precision_open", &EpochMetrics::precision_open)
        .def_readonly("disambiguation_rate", &EpochMetrics::disambiguation_rate)
        .def_readonly("confidence_delta", &EpochMetrics::confidence_delta);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("metrics", &TrainResult::metrics)
        .def_readonly("model", &TrainResult::model)
        .def_readonly("partition", &TrainResult::partition)
        .def_readonly("partition_valid", &TrainResult::partition_valid)
        .def("active_confidence", [](const TrainResult& r) {
            return rows_from_matrix(active_confidence(
                r.confidence, r.partition_valid ? &r.partition : nullptr));
        });

    m.def("run_training",
          [](const TrainConfig& config, const PartialDataset& dataset,
             const std::vector<LabeledExample>& test_set) {
              return run_training(config, dataset, test_set);
          },
          py::arg("config"), py::arg("dataset"), py::arg("test_set"));

    py::class_<AblationResult>(m, "AblationResult")
        .def_readonly("full", &AblationResult::full)
        .def_readonly("ablated", &AblationResult::ablated);
    m.def("run_ablation", &run_ablation, py::arg("config"), py::arg("dataset"),
          py::arg("test_set"), py::arg("switch"));

    m.def("accuracy", &accuracy, py::arg("model"), py::arg("examples"));
    m.def("metrics_csv", &metrics_csv);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("num_classes", &SynthConfig::num_classes)
        .def_readwrite("n_per_class", &SynthConfig::n_per_class)
        .def_readwrite("dim", &SynthConfig::dim)
        .def_readwrite("separation", &SynthConfig::separation)
        .def_readwrite("open_classes", &SynthConfig::open_classes)
        .def_readwrite("open_sigma", &SynthConfig::open_sigma)
        .def_readwrite("n_test_per_class", &SynthConfig::n_test_per_class);

    m.def("synthesize",
          [](const TrainConfig& train, const SynthConfig& synth) {
              RunSpec spec;
              spec.train = train;
              spec.synth = synth;
              SynthOutput out = synthesize(spec);
              return py::make_tuple(std::move(out.train), std::move(out.test));
          },
          py::arg("train_config"), py::arg("synth_config"));

    py::class_<RampSchedule>(m, "RampSchedule")
        .def(py::init<>())
        .def_readwrite("normal_start", &RampSchedule::normal_start)
        .def_readwrite("stage_epochs", &RampSchedule::stage_epochs)
        .def_readwrite("epochs_per_step", &RampSchedule::epochs_per_step)
        .def_readwrite("settle_epochs", &RampSchedule::settle_epochs)
        .def_readwrite("stabilize_band", &RampSchedule::stabilize_band);

    m.def("estimate_proportions",
          [](const TrainConfig& config, const PartialDataset& dataset,
             const std::vector<LabeledExample>& validation, double epsilon,
             const RampSchedule& ramp) {
              ProportionTrainer proc(config, dataset);
              return estimate_proportions(proc, validation, epsilon, ramp);
          },
          py::arg("config"), py::arg("dataset"), py::arg("validation"), py::arg("epsilon"),
          py::arg("ramp") = RampSchedule{});
}
