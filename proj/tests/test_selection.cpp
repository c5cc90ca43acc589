#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "oocpll/rng.hpp"
#include "oocpll/selection.hpp"

using namespace oocpll;

namespace {

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), m.row(i));
    return m;
}

Matrix random_prob_matrix(SplitRng& rng, std::size_t n, std::size_t c) {
    Matrix m(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            m.at(i, j) = rng.uniform(1e-4, 1.0);
            sum += m.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) m.at(i, j) /= sum;
    }
    return m;
}

}  // namespace

TEST_CASE("warmup_ensemble single epoch copies the output") {
    const Matrix out = rows_to_matrix({{0.2, 0.8}, {0.6, 0.4}});
    const EnsembleState state = warmup_ensemble({out}, 0.9);
    CHECK(state.mean_probs == out);
    CHECK(state.phi == 1);
}

TEST_CASE("warmup_ensemble averages per entry") {
    const Matrix a = rows_to_matrix({{0.4, 0.6}});
    const Matrix b = rows_to_matrix({{0.6, 0.4}});
    const EnsembleState state = warmup_ensemble({a, b}, 0.9);
    CHECK(state.mean_probs.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(state.mean_probs.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("warmup_ensemble over the retained history window") {
    EnsembleState buffer;
    buffer.phi = 5;
    // push 8 epochs; only the last 5 stay
    for (int e = 0; e < 8; ++e)
        buffer.push_history(rows_to_matrix({{static_cast<double>(e), 1.0 - e}}));
    REQUIRE(buffer.history.size() == 5);
    const EnsembleState state = warmup_ensemble(buffer.history, 0.9);
    // mean of epochs 3..7
    CHECK(state.mean_probs.at(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("warmup_ensemble rejects empty history") {
    CHECK_THROWS_AS(warmup_ensemble({}, 0.9), std::invalid_argument);
}

TEST_CASE("moving_update convex combination") {
    EnsembleState state;
    state.eta = 0.9;
    state.mean_probs = rows_to_matrix({{0.5, 0.5}});
    moving_update(state, rows_to_matrix({{0.7, 0.3}}));
    CHECK(state.mean_probs.at(0, 0) == doctest::Approx(0.52).epsilon(1e-12));
    CHECK(state.mean_probs.at(0, 1) == doctest::Approx(0.48).epsilon(1e-12));
}

TEST_CASE("moving_update eta extremes") {
    EnsembleState state;
    state.eta = 0.0;
    state.mean_probs = rows_to_matrix({{0.5, 0.5}});
    const Matrix cur = rows_to_matrix({{0.9, 0.1}});
    moving_update(state, cur);
    CHECK(state.mean_probs == cur);

    state.eta = 1.0;
    const Matrix before = state.mean_probs;
    moving_update(state, rows_to_matrix({{0.1, 0.9}}));
    CHECK(state.mean_probs == before);

    state.eta = 1.5;
    CHECK_THROWS_AS(moving_update(state, cur), std::invalid_argument);
}

TEST_CASE("moving_update preserves row normalization") {
    SplitRng rng(61);
    EnsembleState state;
    state.eta = 0.9;
    state.mean_probs = random_prob_matrix(rng, 20, 6);
    for (int e = 0; e < 10; ++e) moving_update(state, random_prob_matrix(rng, 20, 6));
    for (std::size_t i = 0; i < 20; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 6; ++j) sum += state.mean_probs.at(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("partition_from_scores recovers the hand-worked example") {
    // losses (l, lbar): A(0.1,2.0) B(2.0,0.1) C(2.0,2.0) D(0.2,1.5)
    const std::vector<double> l{0.1, 2.0, 2.0, 0.2};
    const std::vector<double> lbar{2.0, 0.1, 2.0, 1.5};
    std::vector<double> open_score(4), closed_score(4);
    for (int i = 0; i < 4; ++i) {
        open_score[static_cast<std::size_t>(i)] =
            l[static_cast<std::size_t>(i)] + lbar[static_cast<std::size_t>(i)];
        closed_score[static_cast<std::size_t>(i)] =
            l[static_cast<std::size_t>(i)] - lbar[static_cast<std::size_t>(i)];
    }
    const Partition part = partition_from_scores(open_score, closed_score, 1, 1);
    CHECK(part.open_idx == std::vector<std::size_t>{2});
    CHECK(part.closed_idx == std::vector<std::size_t>{1});
    CHECK(part.normal_idx == std::vector<std::size_t>{0, 3});
}

TEST_CASE("partition_ooc with zero proportions is all normal") {
    SplitRng rng(62);
    EnsembleState state;
    state.mean_probs = random_prob_matrix(rng, 10, 4);
    std::vector<CandidateMask> masks(10, CandidateMask::from_string("1100"));
    const Partition part = partition_ooc(state, masks, 0.0, 0.0);
    CHECK(part.normal_idx.size() == 10);
    CHECK(part.closed_idx.empty());
    CHECK(part.open_idx.empty());
}

TEST_CASE("partition_ooc rejects infeasible proportions") {
    SplitRng rng(63);
    EnsembleState state;
    state.mean_probs = random_prob_matrix(rng, 10, 4);
    std::vector<CandidateMask> masks(10, CandidateMask::from_string("1100"));
    CHECK_THROWS_AS(partition_ooc(state, masks, 0.6, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(partition_ooc(state, masks, -0.1, 0.2), std::invalid_argument);
}

TEST_CASE("partition is exact, disjoint and exhaustive for random inputs") {
    SplitRng rng(64);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(150));
        const int c = 3 + rng.uniform_int(5);
        EnsembleState state;
        state.mean_probs = random_prob_matrix(rng, n, static_cast<std::size_t>(c));
        std::vector<CandidateMask> masks;
        for (std::size_t i = 0; i < n; ++i) {
            CandidateMask m(c);
            const int k = 1 + rng.uniform_int(c - 1);
            for (std::size_t j :
                 rng.sample_without_replacement(static_cast<std::size_t>(c),
                                                static_cast<std::size_t>(k)))
                m.add(static_cast<int>(j));
            masks.push_back(std::move(m));
        }
        double g1 = rng.uniform(0.0, 0.6);
        double g2 = rng.uniform(0.0, 0.9 - g1);
        const Partition part = partition_ooc(state, masks, g1, g2);
        CHECK(part.closed_idx.size() ==
              static_cast<std::size_t>(g1 * static_cast<double>(n)));
        CHECK(part.open_idx.size() == static_cast<std::size_t>(g2 * static_cast<double>(n)));
        std::vector<int> hit(n, 0);
        for (std::size_t i : part.normal_idx) ++hit[i];
        for (std::size_t i : part.closed_idx) ++hit[i];
        for (std::size_t i : part.open_idx) ++hit[i];
        for (std::size_t i = 0; i < n; ++i) CHECK(hit[i] == 1);

        const Partition again = partition_ooc(state, masks, g1, g2);
        CHECK(again.normal_idx == part.normal_idx);
        CHECK(again.closed_idx == part.closed_idx);
        CHECK(again.open_idx == part.open_idx);
    }
}

TEST_CASE("selection is invariant to monotone rescaling of the open scores") {
    SplitRng rng(65);
    const std::size_t n = 60;
    std::vector<double> open_score(n), closed_score(n);
    for (auto& s : open_score) s = rng.uniform(-3.0, 3.0);
    for (auto& s : closed_score) s = rng.uniform(-3.0, 3.0);
    const Partition base = partition_from_scores(open_score, closed_score, 12, 9);

    std::vector<double> affine(n), expo(n);
    for (std::size_t i = 0; i < n; ++i) {
        affine[i] = 2.0 * open_score[i] + 1.0;
        expo[i] = std::exp(open_score[i]);
    }
    for (const auto& rescaled : {affine, expo}) {
        const Partition part = partition_from_scores(rescaled, closed_score, 12, 9);
        CHECK(part.open_idx == base.open_idx);
        CHECK(part.closed_idx == base.closed_idx);
        CHECK(part.normal_idx == base.normal_idx);
    }
}

TEST_CASE("score ties break toward the lower index") {
    const std::vector<double> open_score{1.0, 1.0, 1.0, 0.0};
    const std::vector<double> closed_score{0.0, 0.0, 0.0, 0.0};
    const Partition part = partition_from_scores(open_score, closed_score, 2, 1);
    CHECK(part.open_idx == std::vector<std::size_t>{0, 1});
    CHECK(part.closed_idx == std::vector<std::size_t>{2});
}

TEST_CASE("wooden loss table separates a constructed oracle exactly") {
    // one example per type with a >= 1.0 margin between the score bands
    const int c = 10;
    auto build_row = [&](double cand_max, double non_max, Matrix& m, std::size_t i,
                         CandidateMask& mask) {
        // mask with 3 candidates; put the maxes at the first candidate /
        // first non-candidate and spread the remainder below both
        std::vector<int> cands = {0, 1, 2};
        for (int j : cands) mask.add(j);
        const double rest = 1.0 - cand_max - non_max;
        const double filler = rest / static_cast<double>(c - 2);
        for (int j = 0; j < c; ++j) m.at(i, static_cast<std::size_t>(j)) = filler;
        m.at(i, 0) = cand_max;
        m.at(i, 3) = non_max;
    };
    Matrix probs(3, c);
    std::vector<CandidateMask> masks(3, CandidateMask(c));
    build_row(std::exp(-0.1), std::exp(-2.5), probs, 0, masks[0]);  // normal
    build_row(std::exp(-2.5), std::exp(-0.1), probs, 1, masks[1]);  // closed
    build_row(std::exp(-2.1), std::exp(-2.1), probs, 2, masks[2]);  // open
    EnsembleState state;
    state.mean_probs = probs;
    const Partition part = partition_ooc(state, masks, 0.34, 0.34);
    CHECK(part.open_idx == std::vector<std::size_t>{2});
    CHECK(part.closed_idx == std::vector<std::size_t>{1});
    CHECK(part.normal_idx == std::vector<std::size_t>{0});
}

TEST_CASE("closed_first order claims double-extreme examples for the closed pool") {
    // one example tops both scores; the stage order decides who gets it
    const std::vector<double> open_score{5.0, 1.0, 0.0};
    const std::vector<double> closed_score{5.0, 0.0, 1.0};
    const Partition open_first =
        partition_from_scores(open_score, closed_score, 1, 1, SelectionOrder::open_first);
    CHECK(open_first.open_idx == std::vector<std::size_t>{0});
    CHECK(open_first.closed_idx == std::vector<std::size_t>{2});
    const Partition closed_first =
        partition_from_scores(open_score, closed_score, 1, 1, SelectionOrder::closed_first);
    CHECK(closed_first.closed_idx == std::vector<std::size_t>{0});
    CHECK(closed_first.open_idx == std::vector<std::size_t>{1});
}
