#pragma once

#include <vector>

#include "oocpll/rng.hpp"
#include "oocpll/types.hpp"

namespace oocpll {

// Candidate set for a single example: the true label always enters, every
// other label enters independently with probability q.
CandidateMask generate_candidates(int true_label, double q, int num_classes, SplitRng& rng);

// Dataset of normal partially-labeled examples, one q-flipped mask each.
PartialDataset assemble_partial(std::vector<LabeledExample> examples, double q,
                                int num_classes, SplitRng& rng);

// Turns floor(tau1 * n) uniformly chosen in-distribution examples into
// closed-set OOC: the true label leaves the candidate set and one uniformly
// random former non-candidate enters, keeping the cardinality unchanged.
// Selection is without replacement among examples with at least one
// non-candidate; throws when too few such examples exist.
PartialDataset inject_closedset(PartialDataset dataset, double tau1, SplitRng& rng);

// Appends floor(tau2 * n) auxiliary examples sampled without replacement
// from aux; each gets a uniform pseudo-label and a q-flipped candidate mask,
// and is tagged open-set. Base examples are preserved unmodified.
PartialDataset inject_openset(PartialDataset base, const std::vector<LabeledExample>& aux,
                              double tau2, double q, SplitRng& rng);

struct SynthBlobs {
    std::vector<LabeledExample> in_distribution;
    std::vector<LabeledExample> auxiliary;
};

// Gaussian clusters. In-distribution clusters have unit variance and centers
// on a circle in the first two dims with adjacent-center distance ==
// separation; open-set clusters sit on a 2.5x radius circle at interleaved
// angles and are tight (open_sigma): near-coincident points whose
// contradictory candidate sets cannot be fitted apart, mirroring
// visually-similar open-set images. aux_per_class < 0 means n_per_class
// auxiliary examples per open cluster.
SynthBlobs synth_blobs(int num_classes, int n_per_class, int dim, double separation,
                       int open_classes, SplitRng& rng, int aux_per_class = -1,
                       double open_sigma = 0.35);

}  // namespace oocpll
