#pragma once

#include <stdexcept>
#include <string>

#include "oocpll/trainer.hpp"

namespace oocpll {

// Config-file failure; the message names the offending key or path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Synthesis-side keys of the flat config format.
struct SynthConfig {
    int num_classes = 10;
    int n_per_class = 500;
    int dim = 2;
    double separation = 4.0;
    int open_classes = 5;
    double open_sigma = 0.35;
    int n_test_per_class = 200;
};

struct RunSpec {
    TrainConfig train;
    SynthConfig synth;
    bool dump_selection = false;
};

// Flat `key = value` text with '#' comments. Unknown keys and unparsable
// values raise ConfigError naming the key; a missing file names the path.
RunSpec parse_config_file(const std::string& path);
RunSpec parse_config_text(const std::string& text, const std::string& origin);

// Validates both halves, naming the offending key.
void validate_run_spec(const RunSpec& spec);

// JSON run manifest with the fully resolved configuration.
std::string manifest_json(const RunSpec& spec);
void write_manifest(const std::string& path, const RunSpec& spec);

// Dataset synthesis driven by a RunSpec: blobs, q-flipped candidate sets,
// closed-set swaps and open-set injection, plus a clean test split.
struct SynthOutput {
    PartialDataset train;
    std::vector<LabeledExample> test;
};
SynthOutput synthesize(const RunSpec& spec);

}  // namespace oocpll
