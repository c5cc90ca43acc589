#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oocpll/config.hpp"
#include "oocpll/io.hpp"
#include "oocpll/losses.hpp"
#include "oocpll/trainer.hpp"

namespace fs = std::filesystem;
using namespace oocpll;

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write failed for file: " + path.string());
}

RunSpec load_spec(const std::string& config_path, long long seed_override) {
    RunSpec spec = parse_config_file(config_path);
    if (seed_override >= 0) spec.train.seed = static_cast<std::uint64_t>(seed_override);
    validate_run_spec(spec);
    return spec;
}

void write_confidence_dump(const fs::path& path, const TrainResult& result,
                           const PartialDataset& dataset) {
    const Matrix active = active_confidence(result.confidence,
                                            result.partition_valid ? &result.partition : nullptr);
    std::string body = "index,truth_type,top_label,top_confidence";
    for (int j = 0; j < dataset.num_classes; ++j) body += ",c" + std::to_string(j);
    body += '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto row = active.row_span(i);
        std::size_t top = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[top]) top = j;
        body += std::to_string(i);
        body += ',';
        body += to_string(dataset.truth_type[i]);
        body += ',' + std::to_string(top) + ',' + format_double(row[top]);
        for (double v : row) body += ',' + format_double(v);
        body += '\n';
    }
    write_text(path, body);
}

SelectionObserver selection_dump_observer(const fs::path& out_dir,
                                          bool enabled) {
    if (!enabled) return {};
    return [out_dir](const SelectionSnapshot& snap) {
        char name[64];
        std::snprintf(name, sizeof(name), "selection_epoch_%04d.csv", snap.epoch);
        const std::size_t n = snap.losses->candidate.size();
        std::vector<char> assigned(n, 'n');
        for (std::size_t i : snap.partition->closed_idx) assigned[i] = 'c';
        for (std::size_t i : snap.partition->open_idx) assigned[i] = 'o';
        std::string body = "index,l_w,lbar_w,assigned,truth\n";
        for (std::size_t i = 0; i < n; ++i) {
            body += std::to_string(i);
            body += ',' + format_double(snap.losses->candidate[i]);
            body += ',' + format_double(snap.losses->non_candidate[i]);
            body += ',';
            body += assigned[i] == 'n' ? "normal" : (assigned[i] == 'c' ? "closed" : "open");
            body += ',';
            body += to_string((*snap.truth)[i]);
            body += '\n';
        }
        write_text(out_dir / name, body);
    };
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              long long seed_override) {
    const RunSpec spec = load_spec(config_path, seed_override);
    fs::create_directories(out_dir);
    SynthOutput out = synthesize(spec);

    write_dataset_csv((fs::path(out_dir) / "train.csv").string(), out.train.examples,
                      out.train.dim);
    write_sidecar_csv((fs::path(out_dir) / "train_sidecar.csv").string(), out.train);
    write_dataset_csv((fs::path(out_dir) / "test.csv").string(), out.test, out.train.dim);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), spec);

    std::size_t normal = 0, closed = 0, open = 0;
    for (TruthType t : out.train.truth_type) {
        if (t == TruthType::normal) ++normal;
        else if (t == TruthType::closed_set) ++closed;
        else ++open;
    }
    std::cout << "wrote " << out.train.size() << " train examples ("
              << normal << " normal, " << closed << " closed-set, " << open
              << " open-set), " << out.test.size() << " test examples, c="
              << out.train.num_classes << ", d=" << out.train.dim << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, long long seed_override,
              const std::string& ablate) {
    RunSpec spec = load_spec(config_path, seed_override);
    if (!ablate.empty()) spec.train = apply_ablation(spec.train, ablation_from_string(ablate));

    const fs::path data(data_dir);
    PartialDataset train_set = load_corrupted_dataset((data / "train.csv").string(),
                                                      (data / "train_sidecar.csv").string());
    std::vector<LabeledExample> test_set =
        load_dataset_csv((data / "test.csv").string(), train_set.num_classes);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    TrainResult result = run_training(spec.train, train_set, test_set,
                                      selection_dump_observer(out, spec.dump_selection));

    write_metrics_csv((out / "metrics.csv").string(), result.metrics);
    write_manifest((out / "manifest.json").string(), spec);
    save_checkpoint(result.model, (out / "checkpoint.txt").string());
    write_confidence_dump(out / "confidence.csv", result, train_set);

    std::cout << "final test accuracy: "
              << format_double(result.metrics.back().test_accuracy) << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<std::string>& values, const std::string& out_dir,
              long long seed_override) {
    static const std::vector<std::string> axes = {"alpha", "beta",   "phi",  "eta", "gamma1",
                                                  "gamma2", "q",     "tau1", "tau2"};
    if (std::find(axes.begin(), axes.end(), axis) == axes.end())
        throw ConfigError("axis: unknown sweep axis '" + axis + "'");
    if (values.empty()) throw ConfigError("values: sweep needs at least one value");

    const RunSpec base = load_spec(config_path, seed_override);
    fs::create_directories(out_dir);

    std::string summary =
        "axis,value,final_accuracy,precision_normal,precision_closed,precision_open\n";
    for (const std::string& value_str : values) {
        RunSpec spec = base;
        const double value = [&] {
            try {
                return std::stod(value_str);
            } catch (const std::exception&) {
                throw ConfigError("values: cannot parse '" + value_str + "' as a number");
            }
        }();
        if (axis == "alpha") spec.train.alpha = value;
        else if (axis == "beta") spec.train.beta = value;
        else if (axis == "phi") spec.train.phi = static_cast<int>(value);
        else if (axis == "eta") spec.train.eta = value;
        else if (axis == "gamma1") spec.train.gamma1 = value;
        else if (axis == "gamma2") spec.train.gamma2 = value;
        else if (axis == "q") spec.train.q = value;
        else if (axis == "tau1") spec.train.tau1 = value;
        else if (axis == "tau2") spec.train.tau2 = value;
        validate_run_spec(spec);

        const fs::path run_dir = fs::path(out_dir) / (axis + "_" + value_str);
        fs::create_directories(run_dir);

        SynthOutput data = synthesize(spec);
        TrainResult result = run_training(spec.train, data.train, data.test,
                                          selection_dump_observer(run_dir, spec.dump_selection));
        write_metrics_csv((run_dir / "metrics.csv").string(), result.metrics);
        write_manifest((run_dir / "manifest.json").string(), spec);

        const EpochMetrics& last = result.metrics.back();
        auto opt_str = [](const std::optional<double>& v) {
            return v.has_value() ? format_double(*v) : std::string();
        };
        summary += axis + "," + value_str + "," + format_double(last.test_accuracy) + "," +
                   opt_str(last.precision_normal) + "," + opt_str(last.precision_closed) + "," +
                   opt_str(last.precision_open) + "\n";
        std::cout << axis << "=" << value_str
                  << " final accuracy " << format_double(last.test_accuracy) << "\n";
    }
    write_text(fs::path(out_dir) / "summary.csv", summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-label learning with mixed closed-set and open-set OOC examples"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, ablate, axis;
    std::vector<std::string> values;
    long long seed_override = -1;

    CLI::App* synth = app.add_subcommand("synth", "Generate a corrupted dataset + sidecar");
    synth->add_option("--config", config_path, "Config file")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();
    synth->add_option("--seed", seed_override, "Override the config seed");

    CLI::App* train = app.add_subcommand("train", "Train on a synthesized dataset");
    train->add_option("--config", config_path, "Config file")->required();
    train->add_option("--data", data_dir, "Dataset directory from `synth`")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--seed", seed_override, "Override the config seed");
    train->add_option("--ablate", ablate, "Disable one component: ld|rld|rcg|wce|warmup");

    CLI::App* sweep = app.add_subcommand("sweep", "Run a one-axis hyper-parameter grid");
    sweep->add_option("--config", config_path, "Config file")->required();
    sweep->add_option("--axis", axis, "Swept parameter")->required();
    sweep->add_option("--values", values, "Comma-separated values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--seed", seed_override, "Override the config seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_dir, seed_override);
        if (train->parsed())
            return cmd_train(config_path, data_dir, out_dir, seed_override, ablate);
        return cmd_sweep(config_path, axis, values, out_dir, seed_override);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 4;
    } catch (const CsvError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
