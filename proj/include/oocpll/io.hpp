#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "oocpll/types.hpp"

namespace oocpll {

// CSV loading failure with a machine-checkable reason and a 1-based line
// number (0 when no specific line applies).
class CsvError : public std::runtime_error {
public:
    enum class Kind { missing_file, malformed_row, dimension_mismatch, label_out_of_range };

    CsvError(Kind kind, const std::string& message, int line = 0)
        : std::runtime_error(message), kind(kind), line(line) {}

    Kind kind;
    int line;
};

// Schema: header `f0,...,f{d-1},label`; label is an integer in [0, c) or -1
// for out-of-space. Features are written with 17 significant digits so a
// write/load round trip is bit-identical.
std::vector<LabeledExample> load_dataset_csv(const std::string& path, int num_classes);
void write_dataset_csv(const std::string& path, const std::vector<LabeledExample>& examples,
                       int dim);

// Sidecar schema: `index,truth_type,candidate_bits` with candidate_bits a
// c-character 0/1 string.
void write_sidecar_csv(const std::string& path, const PartialDataset& dataset);

// Assembles a full dataset from the data CSV plus its corruption sidecar;
// the class count is inferred from the sidecar bit strings.
PartialDataset load_corrupted_dataset(const std::string& data_csv,
                                      const std::string& sidecar_csv);

}  // namespace oocpll
