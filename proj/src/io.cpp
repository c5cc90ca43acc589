#include "oocpll/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace oocpll {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, int line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw CsvError(CsvError::Kind::malformed_row,
                       "line " + std::to_string(line) + ": bad numeric field '" + s + "'", line);
    return v;
}

long parse_long(const std::string& s, int line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw CsvError(CsvError::Kind::malformed_row,
                       "line " + std::to_string(line) + ": bad integer field '" + s + "'", line);
    return v;
}

}  // namespace

std::vector<LabeledExample> load_dataset_csv(const std::string& path, int num_classes) {
    std::ifstream in(path);
    if (!in)
        throw CsvError(CsvError::Kind::missing_file, "cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line))
        throw CsvError(CsvError::Kind::malformed_row, "missing header in " + path, 1);
    const auto header = split_csv(line);
    if (header.size() < 2 || header.back() != "label")
        throw CsvError(CsvError::Kind::malformed_row, "bad header in " + path, 1);
    const int dim = static_cast<int>(header.size()) - 1;
    for (int k = 0; k < dim; ++k) {
        if (header[static_cast<std::size_t>(k)] != "f" + std::to_string(k))
            throw CsvError(CsvError::Kind::malformed_row, "bad header in " + path, 1);
    }

    std::vector<LabeledExample> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (static_cast<int>(fields.size()) != dim + 1)
            throw CsvError(CsvError::Kind::malformed_row,
                           "line " + std::to_string(lineno) + ": expected " +
                               std::to_string(dim + 1) + " fields, got " +
                               std::to_string(fields.size()),
                           lineno);
        LabeledExample ex;
        ex.features.resize(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k)
            ex.features[static_cast<std::size_t>(k)] =
                parse_double(fields[static_cast<std::size_t>(k)], lineno);
        const long label = parse_long(fields.back(), lineno);
        if (label == out_of_space) {
            ex.true_label = out_of_space;
            ex.source = Source::auxiliary;
        } else if (label >= 0 && label < num_classes) {
            ex.true_label = static_cast<int>(label);
            ex.source = Source::in_distribution;
        } else {
            throw CsvError(CsvError::Kind::label_out_of_range,
                           "line " + std::to_string(lineno) + ": label " +
                               std::to_string(label) + " outside [0, " +
                               std::to_string(num_classes) + ") and not -1",
                           lineno);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

void write_dataset_csv(const std::string& path, const std::vector<LabeledExample>& examples,
                       int dim) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (int k = 0; k < dim; ++k) out << "f" << k << ",";
    out << "label\n";
    char buf[64];
    for (const auto& ex : examples) {
        if (static_cast<int>(ex.features.size()) != dim)
            throw std::invalid_argument("write_dataset_csv: feature dimension mismatch");
        for (double v : ex.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ",";
        }
        out << ex.true_label << "\n";
    }
    if (!out) throw std::runtime_error("write failed for dataset file: " + path);
}

void write_sidecar_csv(const std::string& path, const PartialDataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write sidecar file: " + path);
    out << "index,truth_type,candidate_bits\n";
    for (std::size_t i = 0; i < dataset.size(); ++i)
        out << i << "," << to_string(dataset.truth_type[i]) << ","
            << dataset.masks[i].to_string() << "\n";
    if (!out) throw std::runtime_error("write failed for sidecar file: " + path);
}

PartialDataset load_corrupted_dataset(const std::string& data_csv,
                                      const std::string& sidecar_csv) {
    std::ifstream in(sidecar_csv);
    if (!in)
        throw CsvError(CsvError::Kind::missing_file, "cannot open sidecar file: " + sidecar_csv);

    std::string line;
    if (!std::getline(in, line) || split_csv(line) !=
            std::vector<std::string>{"index", "truth_type", "candidate_bits"})
        throw CsvError(CsvError::Kind::malformed_row, "bad sidecar header in " + sidecar_csv, 1);

    std::vector<CandidateMask> masks;
    std::vector<TruthType> truth;
    int lineno = 1;
    int num_classes = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 3)
            throw CsvError(CsvError::Kind::malformed_row,
                           "line " + std::to_string(lineno) + ": expected 3 fields", lineno);
        if (parse_long(fields[0], lineno) != static_cast<long>(masks.size()))
            throw CsvError(CsvError::Kind::malformed_row,
                           "line " + std::to_string(lineno) + ": indices must be consecutive",
                           lineno);
        try {
            truth.push_back(truth_type_from_string(fields[1]));
            masks.push_back(CandidateMask::from_string(fields[2]));
        } catch (const std::invalid_argument& e) {
            throw CsvError(CsvError::Kind::malformed_row,
                           "line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
        if (num_classes == 0)
            num_classes = masks.back().num_classes();
        else if (masks.back().num_classes() != num_classes)
            throw CsvError(CsvError::Kind::dimension_mismatch,
                           "line " + std::to_string(lineno) + ": inconsistent class count",
                           lineno);
    }
    if (num_classes < 2)
        throw CsvError(CsvError::Kind::malformed_row, "sidecar has no rows: " + sidecar_csv);

    PartialDataset ds;
    ds.examples = load_dataset_csv(data_csv, num_classes);
    ds.masks = std::move(masks);
    ds.truth_type = std::move(truth);
    ds.num_classes = num_classes;
    ds.dim = ds.examples.empty() ? 0 : static_cast<int>(ds.examples.front().features.size());
    if (ds.examples.size() != ds.masks.size())
        throw CsvError(CsvError::Kind::dimension_mismatch,
                       "dataset has " + std::to_string(ds.examples.size()) +
                           " rows but sidecar has " + std::to_string(ds.masks.size()));
    ds.validate();
    return ds;
}

}  // namespace oocpll
