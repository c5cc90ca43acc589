#include "oocpll/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oocpll/datagen.hpp"

namespace oocpll {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ConfigError(key + ": cannot parse '" + value + "' as a number");
    return v;
}

int parse_int_value(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw ConfigError(key + ": cannot parse '" + value + "' as an integer");
    return static_cast<int>(v);
}

bool parse_bool_value(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError(key + ": cannot parse '" + value + "' as a boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::string item;
    std::stringstream ss(value);
    while (std::getline(ss, item, ',')) out.push_back(parse_int_value(key, trim(item)));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

void apply_key(RunSpec& spec, const std::string& key, const std::string& value) {
    TrainConfig& t = spec.train;
    SynthConfig& s = spec.synth;
    if (key == "q") t.q = parse_double_value(key, value);
    else if (key == "tau1") t.tau1 = parse_double_value(key, value);
    else if (key == "tau2") t.tau2 = parse_double_value(key, value);
    else if (key == "gamma1") t.gamma1 = parse_double_value(key, value);
    else if (key == "gamma2") t.gamma2 = parse_double_value(key, value);
    else if (key == "alpha") t.alpha = parse_double_value(key, value);
    else if (key == "beta") t.beta = parse_double_value(key, value);
    else if (key == "eta") t.eta = parse_double_value(key, value);
    else if (key == "phi") t.phi = parse_int_value(key, value);
    else if (key == "T_warmup") t.T_warmup = parse_int_value(key, value);
    else if (key == "T_max") t.T_max = parse_int_value(key, value);
    else if (key == "batch_size") t.batch_size = parse_int_value(key, value);
    else if (key == "base_lr") t.base_lr = parse_double_value(key, value);
    else if (key == "momentum") t.momentum = parse_double_value(key, value);
    else if (key == "weight_decay") t.weight_decay = parse_double_value(key, value);
    else if (key == "rho") t.rho = parse_double_value(key, value);
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int_value(key, value));
    else if (key == "hidden_dims") t.hidden_dims = parse_int_list(key, value);
    else if (key == "loss_norm") {
        if (value == "batch") t.loss_norm = LossNorm::batch;
        else if (value == "partition") t.loss_norm = LossNorm::partition;
        else throw ConfigError("loss_norm: expected batch|partition, got '" + value + "'");
    } else if (key == "ld_norm") {
        if (value == "literal") t.ld_norm = LdNorm::literal;
        else if (value == "masked") t.ld_norm = LdNorm::masked;
        else throw ConfigError("ld_norm: expected literal|masked, got '" + value + "'");
    } else if (key == "selection_order") {
        if (value == "open_first") t.selection_order = SelectionOrder::open_first;
        else if (value == "closed_first") t.selection_order = SelectionOrder::closed_first;
        else throw ConfigError("selection_order: expected open_first|closed_first, got '" +
                               value + "'");
    }
    else if (key == "disable_rld") t.disable_rld = parse_bool_value(key, value);
    else if (key == "disable_rcg") t.disable_rcg = parse_bool_value(key, value);
    else if (key == "disable_wce") t.disable_wce = parse_bool_value(key, value);
    else if (key == "disable_warmup") t.disable_warmup = parse_bool_value(key, value);
    else if (key == "disable_ld") t.disable_ld = parse_bool_value(key, value);
    else if (key == "num_classes") s.num_classes = parse_int_value(key, value);
    else if (key == "n_per_class") s.n_per_class = parse_int_value(key, value);
    else if (key == "dim") s.dim = parse_int_value(key, value);
    else if (key == "separation") s.separation = parse_double_value(key, value);
    else if (key == "open_classes") s.open_classes = parse_int_value(key, value);
    else if (key == "open_sigma") s.open_sigma = parse_double_value(key, value);
    else if (key == "n_test_per_class") s.n_test_per_class = parse_int_value(key, value);
    else if (key == "dump_selection") spec.dump_selection = parse_bool_value(key, value);
    else throw ConfigError(key + ": unknown configuration key");
}

}  // namespace

RunSpec parse_config_text(const std::string& text, const std::string& origin) {
    RunSpec spec;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        apply_key(spec, key, value);
    }
    return spec;
}

RunSpec parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

void validate_run_spec(const RunSpec& spec) {
    spec.train.validate();
    const SynthConfig& s = spec.synth;
    if (s.num_classes < 2) throw ConfigError("num_classes: must be >= 2");
    if (s.n_per_class < 1) throw ConfigError("n_per_class: must be >= 1");
    if (s.dim < 2) throw ConfigError("dim: must be >= 2");
    if (s.separation <= 0.0) throw ConfigError("separation: must be > 0");
    if (s.open_classes < 0) throw ConfigError("open_classes: must be >= 0");
    if (s.open_sigma <= 0.0) throw ConfigError("open_sigma: must be > 0");
    if (s.n_test_per_class < 1) throw ConfigError("n_test_per_class: must be >= 1");
    if (spec.train.tau2 > 0.0 && s.open_classes == 0)
        throw ConfigError("open_classes: must be > 0 when tau2 > 0");
}

std::string manifest_json(const RunSpec& spec) {
    nlohmann::ordered_json j;
    const TrainConfig& t = spec.train;
    j["q"] = t.q;
    j["tau1"] = t.tau1;
    j["tau2"] = t.tau2;
    j["gamma1"] = t.resolved_gamma1();
    j["gamma2"] = t.resolved_gamma2();
    j["alpha"] = t.alpha;
    j["beta"] = t.beta;
    j["eta"] = t.eta;
    j["phi"] = t.phi;
    j["T_warmup"] = t.T_warmup;
    j["T_max"] = t.T_max;
    j["batch_size"] = t.batch_size;
    j["base_lr"] = t.base_lr;
    j["momentum"] = t.momentum;
    j["weight_decay"] = t.weight_decay;
    j["rho"] = t.rho;
    j["seed"] = t.seed;
    j["hidden_dims"] = t.hidden_dims;
    j["loss_norm"] = t.loss_norm == LossNorm::batch ? "batch" : "partition";
    j["ld_norm"] = t.ld_norm == LdNorm::literal ? "literal" : "masked";
    j["selection_order"] =
        t.selection_order == SelectionOrder::open_first ? "open_first" : "closed_first";
    j["disable_rld"] = t.disable_rld;
    j["disable_rcg"] = t.disable_rcg;
    j["disable_wce"] = t.disable_wce;
    j["disable_warmup"] = t.disable_warmup;
    j["disable_ld"] = t.disable_ld;
    j["num_classes"] = spec.synth.num_classes;
    j["n_per_class"] = spec.synth.n_per_class;
    j["dim"] = spec.synth.dim;
    j["separation"] = spec.synth.separation;
    j["open_classes"] = spec.synth.open_classes;
    j["open_sigma"] = spec.synth.open_sigma;
    j["n_test_per_class"] = spec.synth.n_test_per_class;
    j["dump_selection"] = spec.dump_selection;
    return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const RunSpec& spec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest file: " + path);
    const std::string body = manifest_json(spec);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write failed for manifest file: " + path);
}

SynthOutput synthesize(const RunSpec& spec) {
    validate_run_spec(spec);
    const SynthConfig& s = spec.synth;
    const TrainConfig& t = spec.train;

    SplitRng data_rng(t.seed, 0);
    const std::size_t n = static_cast<std::size_t>(s.num_classes) *
                          static_cast<std::size_t>(s.n_per_class);
    int aux_per_class = -1;
    if (s.open_classes > 0) {
        const auto needed = static_cast<std::size_t>(t.tau2 * static_cast<double>(n));
        aux_per_class = static_cast<int>(
            (needed + static_cast<std::size_t>(s.open_classes) - 1) /
            static_cast<std::size_t>(s.open_classes));
        aux_per_class = std::max(aux_per_class, s.n_per_class);
    }
    SynthBlobs blobs = synth_blobs(s.num_classes, s.n_per_class, s.dim, s.separation,
                                   s.open_classes, data_rng, aux_per_class,
                                   s.open_sigma);

    PartialDataset base =
        assemble_partial(std::move(blobs.in_distribution), t.q, s.num_classes, data_rng);
    base = inject_closedset(std::move(base), t.tau1, data_rng);
    PartialDataset train =
        inject_openset(std::move(base), blobs.auxiliary, t.tau2, t.q, data_rng);

    SplitRng test_rng(t.seed, 4);
    SynthBlobs test_blobs =
        synth_blobs(s.num_classes, s.n_test_per_class, s.dim, s.separation, 0, test_rng);

    return {std::move(train), std::move(test_blobs.in_distribution)};
}

}  // namespace oocpll
