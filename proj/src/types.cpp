#include "oocpll/types.hpp"

#include <stdexcept>

namespace oocpll {

const char* to_string(TruthType t) {
    switch (t) {
        case TruthType::normal: return "normal";
        case TruthType::closed_set: return "closed";
        case TruthType::open_set: return "open";
    }
    return "unknown";
}

TruthType truth_type_from_string(const std::string& s) {
    if (s == "normal") return TruthType::normal;
    if (s == "closed") return TruthType::closed_set;
    if (s == "open") return TruthType::open_set;
    throw std::invalid_argument("unknown truth type: " + s);
}

CandidateMask::CandidateMask(int num_classes) {
    if (num_classes < 2)
        throw std::invalid_argument("CandidateMask: num_classes must be >= 2");
    bits_.assign(static_cast<std::size_t>(num_classes), 0);
}

CandidateMask CandidateMask::from_bits(std::vector<std::uint8_t> bits) {
    CandidateMask m(static_cast<int>(bits.size()));
    m.bits_ = std::move(bits);
    m.count_ = 0;
    for (auto& b : m.bits_) {
        if (b > 1) b = 1;
        m.count_ += b;
    }
    return m;
}

CandidateMask CandidateMask::from_string(const std::string& bits) {
    std::vector<std::uint8_t> v;
    v.reserve(bits.size());
    for (char ch : bits) {
        if (ch != '0' && ch != '1')
            throw std::invalid_argument("CandidateMask: bit string must be 0/1");
        v.push_back(ch == '1' ? 1 : 0);
    }
    return from_bits(std::move(v));
}

CandidateMask CandidateMask::single(int label, int num_classes) {
    CandidateMask m(num_classes);
    m.add(label);
    return m;
}

bool CandidateMask::contains(int label) const {
    if (label < 0 || label >= num_classes())
        throw std::out_of_range("CandidateMask: label out of range");
    return bits_[static_cast<std::size_t>(label)] != 0;
}

void CandidateMask::add(int label) {
    if (label < 0 || label >= num_classes())
        throw std::out_of_range("CandidateMask: label out of range");
    auto& b = bits_[static_cast<std::size_t>(label)];
    if (!b) {
        b = 1;
        ++count_;
    }
}

void CandidateMask::remove(int label) {
    if (label < 0 || label >= num_classes())
        throw std::out_of_range("CandidateMask: label out of range");
    auto& b = bits_[static_cast<std::size_t>(label)];
    if (b) {
        b = 0;
        --count_;
    }
}

std::vector<int> CandidateMask::candidates() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (int j = 0; j < num_classes(); ++j)
        if (bits_[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

std::vector<int> CandidateMask::non_candidates() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(non_candidate_count()));
    for (int j = 0; j < num_classes(); ++j)
        if (!bits_[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

std::string CandidateMask::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t j = 0; j < bits_.size(); ++j)
        if (bits_[j]) s[j] = '1';
    return s;
}

void PartialDataset::validate() const {
    const std::size_t n = examples.size();
    if (masks.size() != n || truth_type.size() != n)
        throw std::invalid_argument(
            "PartialDataset: examples, masks and truth_type must have equal length");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ex = examples[i];
        const auto& mask = masks[i];
        if (static_cast<int>(ex.features.size()) != dim)
            throw std::invalid_argument("PartialDataset: feature dimension mismatch at index " +
                                        std::to_string(i));
        if (mask.num_classes() != num_classes)
            throw std::invalid_argument("PartialDataset: mask class count mismatch at index " +
                                        std::to_string(i));
        if (mask.count() < 1)
            throw std::invalid_argument("PartialDataset: empty candidate set at index " +
                                        std::to_string(i));
        const bool aux = ex.source == Source::auxiliary;
        if (aux != (ex.true_label == out_of_space))
            throw std::invalid_argument(
                "PartialDataset: true_label sentinel must match auxiliary source at index " +
                std::to_string(i));
        if (aux != (truth_type[i] == TruthType::open_set))
            throw std::invalid_argument(
                "PartialDataset: open_set tag must match auxiliary source at index " +
                std::to_string(i));
        if (!aux && (ex.true_label < 0 || ex.true_label >= num_classes))
            throw std::invalid_argument("PartialDataset: true_label out of range at index " +
                                        std::to_string(i));
        if (truth_type[i] == TruthType::normal && !mask.contains(ex.true_label))
            throw std::invalid_argument(
                "PartialDataset: normal example missing its true label at index " +
                std::to_string(i));
        if (truth_type[i] == TruthType::closed_set && mask.contains(ex.true_label))
            throw std::invalid_argument(
                "PartialDataset: closed-set example still holds its true label at index " +
                std::to_string(i));
    }
}

}  // namespace oocpll
