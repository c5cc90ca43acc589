#include "oocpll/datagen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace oocpll {

CandidateMask generate_candidates(int true_label, double q, int num_classes, SplitRng& rng) {
    if (q < 0.0 || q > 1.0)
        throw std::invalid_argument("generate_candidates: q must be in [0, 1]");
    if (num_classes < 2)
        throw std::invalid_argument("generate_candidates: num_classes must be >= 2");
    if (true_label < 0 || true_label >= num_classes)
        throw std::invalid_argument("generate_candidates: true_label out of range");
    CandidateMask mask(num_classes);
    mask.add(true_label);
    for (int j = 0; j < num_classes; ++j) {
        if (j == true_label) continue;
        if (rng.bernoulli(q)) mask.add(j);
    }
    return mask;
}

PartialDataset assemble_partial(std::vector<LabeledExample> examples, double q,
                                int num_classes, SplitRng& rng) {
    PartialDataset ds;
    ds.num_classes = num_classes;
    ds.dim = examples.empty() ? 0 : static_cast<int>(examples.front().features.size());
    ds.masks.reserve(examples.size());
    ds.truth_type.assign(examples.size(), TruthType::normal);
    for (const auto& ex : examples) {
        if (ex.source != Source::in_distribution)
            throw std::invalid_argument("assemble_partial: only in-distribution examples");
        ds.masks.push_back(generate_candidates(ex.true_label, q, num_classes, rng));
    }
    ds.examples = std::move(examples);
    return ds;
}

PartialDataset inject_closedset(PartialDataset dataset, double tau1, SplitRng& rng) {
    if (tau1 < 0.0 || tau1 > 1.0)
        throw std::invalid_argument("inject_closedset: tau1 must be in [0, 1]");
    const std::size_t n = dataset.size();
    const std::size_t target = static_cast<std::size_t>(tau1 * static_cast<double>(n));
    if (target == 0) return dataset;

    // Only in-distribution normal examples with a non-candidate to swap in.
    std::vector<std::size_t> eligible;
    eligible.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (dataset.examples[i].source != Source::in_distribution) continue;
        if (dataset.truth_type[i] != TruthType::normal) continue;
        if (dataset.masks[i].non_candidate_count() < 1) continue;
        eligible.push_back(i);
    }
    if (eligible.size() < target)
        throw std::runtime_error("inject_closedset: only " + std::to_string(eligible.size()) +
                                 " selectable examples for " + std::to_string(target) +
                                 " closed-set injections");

    const auto picks = rng.sample_without_replacement(eligible.size(), target);
    for (std::size_t p : picks) {
        const std::size_t i = eligible[p];
        CandidateMask& mask = dataset.masks[i];
        const int true_label = dataset.examples[i].true_label;
        const auto replacements = mask.non_candidates();
        const int incoming = replacements[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(replacements.size())))];
        mask.remove(true_label);
        mask.add(incoming);
        dataset.truth_type[i] = TruthType::closed_set;
    }
    return dataset;
}

PartialDataset inject_openset(PartialDataset base, const std::vector<LabeledExample>& aux,
                              double tau2, double q, SplitRng& rng) {
    if (tau2 < 0.0)
        throw std::invalid_argument("inject_openset: tau2 must be >= 0");
    const std::size_t n = base.size();
    const std::size_t target = static_cast<std::size_t>(tau2 * static_cast<double>(n));
    if (target == 0) return base;
    if (aux.size() < target)
        throw std::runtime_error("inject_openset: auxiliary pool has " +
                                 std::to_string(aux.size()) + " examples, need " +
                                 std::to_string(target));

    const auto picks = rng.sample_without_replacement(aux.size(), target);
    base.examples.reserve(n + target);
    base.masks.reserve(n + target);
    base.truth_type.reserve(n + target);
    for (std::size_t p : picks) {
        const LabeledExample& src = aux[p];
        if (static_cast<int>(src.features.size()) != base.dim)
            throw std::runtime_error("inject_openset: auxiliary feature dimension " +
                                     std::to_string(src.features.size()) + " != " +
                                     std::to_string(base.dim));
        LabeledExample ex = src;
        ex.true_label = out_of_space;
        ex.source = Source::auxiliary;
        const int pseudo = rng.uniform_int(base.num_classes);
        base.masks.push_back(generate_candidates(pseudo, q, base.num_classes, rng));
        base.examples.push_back(std::move(ex));
        base.truth_type.push_back(TruthType::open_set);
    }
    return base;
}

SynthBlobs synth_blobs(int num_classes, int n_per_class, int dim, double separation,
                       int open_classes, SplitRng& rng, int aux_per_class,
                       double open_sigma) {
    if (num_classes < 2) throw std::invalid_argument("synth_blobs: num_classes must be >= 2");
    if (dim < 2) throw std::invalid_argument("synth_blobs: dim must be >= 2");
    if (separation <= 0.0) throw std::invalid_argument("synth_blobs: separation must be > 0");
    if (open_sigma <= 0.0) throw std::invalid_argument("synth_blobs: open_sigma must be > 0");
    if (n_per_class < 0 || open_classes < 0)
        throw std::invalid_argument("synth_blobs: counts must be >= 0");
    if (aux_per_class < 0) aux_per_class = n_per_class;

    const double radius = separation / (2.0 * std::sin(std::numbers::pi / num_classes));
    const double open_radius = 2.0 * radius;

    auto sample_cluster = [&](double cx, double cy, double sigma, int count, int label,
                              Source source, std::vector<LabeledExample>& out) {
        for (int s = 0; s < count; ++s) {
            LabeledExample ex;
            ex.features.resize(static_cast<std::size_t>(dim));
            for (int k = 0; k < dim; ++k)
                ex.features[static_cast<std::size_t>(k)] = sigma * rng.normal();
            ex.features[0] += cx;
            ex.features[1] += cy;
            ex.true_label = label;
            ex.source = source;
            out.push_back(std::move(ex));
        }
    };

    SynthBlobs blobs;
    blobs.in_distribution.reserve(static_cast<std::size_t>(num_classes) * n_per_class);
    for (int c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * c / num_classes;
        sample_cluster(radius * std::cos(angle), radius * std::sin(angle), 1.0, n_per_class,
                       c, Source::in_distribution, blobs.in_distribution);
    }
    blobs.auxiliary.reserve(static_cast<std::size_t>(open_classes) * aux_per_class);
    for (int c = 0; c < open_classes; ++c) {
        const double angle =
            2.0 * std::numbers::pi * c / std::max(open_classes, 1) + std::numbers::pi / num_classes;
        sample_cluster(open_radius * std::cos(angle), open_radius * std::sin(angle), open_sigma,
                       aux_per_class, out_of_space, Source::auxiliary, blobs.auxiliary);
    }
    return blobs;
}

}  // namespace oocpll
