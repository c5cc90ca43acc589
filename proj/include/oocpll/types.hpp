#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oocpll {

// Sentinel label for examples whose true class lies outside the label space.
inline constexpr int out_of_space = -1;

enum class Source { in_distribution, auxiliary };

enum class TruthType { normal, closed_set, open_set };

const char* to_string(TruthType t);
TruthType truth_type_from_string(const std::string& s);

struct LabeledExample {
    std::vector<double> features;
    int true_label = out_of_space;  // class index in [0, c), or out_of_space
    Source source = Source::in_distribution;
};

// Candidate label set over c classes. Set bits are candidate labels, clear
// bits form the non-candidate set.
class CandidateMask {
public:
    CandidateMask() = default;
    explicit CandidateMask(int num_classes);

    static CandidateMask from_bits(std::vector<std::uint8_t> bits);
    static CandidateMask from_string(const std::string& bits);  // e.g. "0110"
    static CandidateMask single(int label, int num_classes);

    int num_classes() const { return static_cast<int>(bits_.size()); }
    int count() const { return count_; }  // candidate count k
    int non_candidate_count() const { return num_classes() - count_; }  // z

    bool contains(int label) const;
    void add(int label);
    void remove(int label);

    std::vector<int> candidates() const;
    std::vector<int> non_candidates() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::string to_string() const;

    bool operator==(const CandidateMask& other) const = default;

private:
    std::vector<std::uint8_t> bits_;
    int count_ = 0;
};

// Dense row-major matrix; the shape used for per-example probability and
// confidence tables (n rows, c columns).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    std::span<double> row_span(std::size_t i) { return {row(i), cols_}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Partially-labeled dataset. truth_type (and LabeledExample::true_label) are
// hidden ground truth carried for evaluation only; training code must not
// read them.
struct PartialDataset {
    std::vector<LabeledExample> examples;
    std::vector<CandidateMask> masks;
    std::vector<TruthType> truth_type;
    int num_classes = 0;
    int dim = 0;

    std::size_t size() const { return examples.size(); }

    // Throws std::invalid_argument when cross-field invariants are broken.
    void validate() const;
};

}  // namespace oocpll
