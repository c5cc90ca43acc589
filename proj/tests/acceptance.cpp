// Acceptance suite: one check per criterion, one PASS/FAIL line each.
// Criteria 6-9 share a table of desk-scale runs (5 seeds per variant).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "oocpll/config.hpp"
#include "oocpll/datagen.hpp"
#include "oocpll/disambiguation.hpp"
#include "oocpll/losses.hpp"
#include "oocpll/mlp.hpp"
#include "oocpll/selection.hpp"
#include "oocpll/trainer.hpp"

using namespace oocpll;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s - %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> random_simplex(SplitRng& rng, int c) {
    std::vector<double> v(static_cast<std::size_t>(c));
    double sum = 0.0;
    for (auto& x : v) {
        x = rng.uniform(1e-6, 1.0);
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

CandidateMask random_mask(SplitRng& rng, int c, int min_k, int max_k) {
    const int k = min_k + rng.uniform_int(max_k - min_k + 1);
    CandidateMask mask(c);
    for (std::size_t j : rng.sample_without_replacement(static_cast<std::size_t>(c),
                                                        static_cast<std::size_t>(k)))
        mask.add(static_cast<int>(j));
    return mask;
}

// ---------------------------------------------------------------- criterion 1
void criterion_wooden_identity() {
    const auto start = Clock::now();
    SplitRng rng(1001);
    bool identity_ok = true, invariance_ok = true;
    for (int t = 0; t < 10000; ++t) {
        const int c = 3 + rng.uniform_int(10);
        const auto probs = random_simplex(rng, c);
        const CandidateMask mask = random_mask(rng, c, 1, c);

        // independent oracle: -log of the max masked probability
        double cand_max = -1.0, non_max = -1.0;
        for (int j = 0; j < c; ++j) {
            const double p = probs[static_cast<std::size_t>(j)];
            if (mask.contains(j))
                cand_max = std::max(cand_max, p);
            else
                non_max = std::max(non_max, p);
        }
        const SplitLoss loss = wooden_ce(probs, mask);
        if (cand_max > 0.0 &&
            std::abs(loss.candidate - (-std::log(std::max(cand_max, prob_floor)))) > 1e-12)
            identity_ok = false;
        if (non_max > 0.0 &&
            std::abs(loss.non_candidate - (-std::log(std::max(non_max, prob_floor)))) > 1e-12)
            identity_ok = false;

        // cardinality invariance at a fixed max probability: shrink the
        // candidate set to the argmax alone
        if (cand_max > 0.0 && mask.count() > 1) {
            int argmax_cand = -1;
            for (int j = 0; j < c; ++j)
                if (mask.contains(j) && probs[static_cast<std::size_t>(j)] == cand_max) {
                    argmax_cand = j;
                    break;
                }
            const CandidateMask solo = CandidateMask::single(argmax_cand, c);
            if (wooden_ce(probs, solo).candidate != loss.candidate) invariance_ok = false;
        }
    }
    const double elapsed = seconds_since(start);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "10000 pairs, identity %s, scale invariance %s, %.2fs",
                  identity_ok ? "exact" : "BROKEN", invariance_ok ? "exact" : "BROKEN",
                  elapsed);
    report(1, "wooden-loss identity", identity_ok && invariance_ok && elapsed < 1.0, buf);
}

// ---------------------------------------------------------------- criterion 2
void criterion_gradient_oracle() {
    const auto start = Clock::now();
    SplitRng rng(1002);
    double worst = 0.0;
    for (int config = 0; config < 100; ++config) {
        const int d = 5, c = 4;
        const std::vector<int> hidden{3 + rng.uniform_int(5), 3 + rng.uniform_int(5)};
        const double alpha = rng.uniform(0.2, 3.0);
        const double beta = rng.uniform(0.05, 1.0);

        // a mixed batch: two normal, one closed, one open example
        struct Item {
            std::vector<double> x;
            std::vector<double> target;
            double scale;
        };
        std::vector<Item> batch;
        auto draw_x = [&] {
            std::vector<double> x(d);
            for (auto& v : x) v = rng.normal();
            return x;
        };
        for (int i = 0; i < 2; ++i) {
            const CandidateMask mask = random_mask(rng, c, 1, c - 1);
            batch.push_back({draw_x(), update_conf_normal(random_simplex(rng, c), mask),
                             1.0 / 2.0});
        }
        {
            const CandidateMask mask = random_mask(rng, c, 1, c - 1);
            batch.push_back({draw_x(), update_conf_reversed(random_simplex(rng, c), mask),
                             alpha / 1.0});
        }
        {
            const CandidateMask mask = random_mask(rng, c, 1, c);
            std::vector<double> target(c, 0.0);
            for (int j : mask.candidates()) target[static_cast<std::size_t>(j)] = 1.0;
            batch.push_back({draw_x(), std::move(target), beta / 1.0});
        }

        // central differences are meaningless across a rectifier kink, so
        // redraw parameters until every preactivation clears the step size
        MlpParams params = make_mlp(d, hidden, c, rng);
        for (int attempt = 0; attempt < 100; ++attempt) {
            double min_pre = 1e18;
            ForwardWorkspace probe;
            for (const auto& item : batch) {
                forward(params, item.x, probe);
                for (std::size_t l = 0; l + 1 < probe.pre.size(); ++l)
                    for (double z : probe.pre[l]) min_pre = std::min(min_pre, std::abs(z));
            }
            if (min_pre > 1e-3) break;
            params = make_mlp(d, hidden, c, rng);
        }

        // objective via the forward-only loss path
        auto objective = [&]() {
            double total = 0.0;
            for (const auto& item : batch)
                total += item.scale * soft_target_ce(forward(params, item.x), item.target);
            return total;
        };

        // analytic gradient via backprop
        MlpParams grads = zeros_like(params);
        ForwardWorkspace ws;
        for (const auto& item : batch) {
            forward(params, item.x, ws);
            accumulate_grad_soft_target(params, ws, item.target, item.scale, grads);
        }

        const double h = 1e-5;
        auto fd_at = [&](double& value) {
            const double saved = value;
            value = saved + h;
            const double up = objective();
            value = saved - h;
            const double down = objective();
            value = saved;
            return (up - down) / (2.0 * h);
        };
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto check_one = [&](double& p, double g) {
                const double fd = fd_at(p);
                const double mag = std::max(std::abs(fd), std::abs(g));
                if (mag >= 1e-6)
                    worst = std::max(worst, std::abs(fd - g) / mag);
                else if (std::abs(fd - g) > 1e-10)
                    worst = std::max(worst, 1.0);
            };
            for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i)
                check_one(params.layers[l].weights[i], grads.layers[l].weights[i]);
            for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i)
                check_one(params.layers[l].bias[i], grads.layers[l].bias[i]);
        }
    }
    const double elapsed = seconds_since(start);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "100 configurations, max relative error %.3g, %.1fs",
                  worst, elapsed);
    report(2, "gradient oracle", worst < 1e-4 && elapsed < 30.0, buf);
}

// ---------------------------------------------------------------- criterion 3
void criterion_selection_oracle() {
    SplitRng rng(1003);
    const int c = 10;
    bool all_exact = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_normal = 5 + static_cast<std::size_t>(rng.uniform_int(21));
        const std::size_t n_closed = 5 + static_cast<std::size_t>(rng.uniform_int(21));
        const std::size_t n_open = 5 + static_cast<std::size_t>(rng.uniform_int(21));
        const std::size_t n = n_normal + n_closed + n_open;

        Matrix probs(n, c);
        std::vector<CandidateMask> masks(n, CandidateMask(c));
        std::vector<TruthType> truth(n);

        // wooden-loss bands with >= 1.0 margins between the score levels:
        // normal (l in [.20,.30], lbar in [2.3,2.6]), closed mirrored,
        // open (both in [2.0,2.15]); every band keeps e^-l + e^-lbar and
        // the spread filler inside a valid probability row
        auto place = [&](std::size_t i, double l, double lbar) {
            const double cand_max = std::exp(-l);
            const double non_max = std::exp(-lbar);
            const int k = 1 + rng.uniform_int(3);
            for (std::size_t j : rng.sample_without_replacement(c, static_cast<std::size_t>(k)))
                masks[i].add(static_cast<int>(j));
            const auto cands = masks[i].candidates();
            const auto nons = masks[i].non_candidates();
            const int cand_pos = cands[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(cands.size())))];
            const int non_pos = nons[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(nons.size())))];
            const double filler =
                (1.0 - cand_max - non_max) / static_cast<double>(c - 2);
            for (int j = 0; j < c; ++j) probs.at(i, static_cast<std::size_t>(j)) = filler;
            probs.at(i, static_cast<std::size_t>(cand_pos)) = cand_max;
            probs.at(i, static_cast<std::size_t>(non_pos)) = non_max;
        };

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n_normal; ++i, ++pos) {
            truth[order[pos]] = TruthType::normal;
            place(order[pos], rng.uniform(0.20, 0.30), rng.uniform(2.3, 2.6));
        }
        for (std::size_t i = 0; i < n_closed; ++i, ++pos) {
            truth[order[pos]] = TruthType::closed_set;
            place(order[pos], rng.uniform(2.3, 2.6), rng.uniform(0.20, 0.30));
        }
        for (std::size_t i = 0; i < n_open; ++i, ++pos) {
            truth[order[pos]] = TruthType::open_set;
            const double l = rng.uniform(2.0, 2.15);
            place(order[pos], l, l);
        }

        EnsembleState state;
        state.mean_probs = probs;
        const double g1 = (static_cast<double>(n_closed) + 0.5) / static_cast<double>(n);
        const double g2 = (static_cast<double>(n_open) + 0.5) / static_cast<double>(n);
        const Partition part = partition_ooc(state, masks, g1, g2);

        auto pure = [&](const std::vector<std::size_t>& idx, TruthType want) {
            for (std::size_t i : idx)
                if (truth[i] != want) return false;
            return true;
        };
        if (part.open_idx.size() != n_open || part.closed_idx.size() != n_closed ||
            !pure(part.open_idx, TruthType::open_set) ||
            !pure(part.closed_idx, TruthType::closed_set) ||
            !pure(part.normal_idx, TruthType::normal))
            all_exact = false;
    }
    report(3, "selection oracle equivalence", all_exact,
           all_exact ? "50 constructions recovered exactly"
                     : "a construction was mis-partitioned");
}

// ---------------------------------------------------------------- criterion 4
void criterion_partition_algebra() {
    SplitRng rng(1004);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(400));
        std::vector<double> open_score(n), closed_score(n);
        for (auto& s : open_score)
            s = rng.bernoulli(0.25) ? std::round(rng.uniform(-2.0, 2.0) * 10.0) / 10.0
                                    : rng.uniform(-5.0, 5.0);
        for (auto& s : closed_score)
            s = rng.bernoulli(0.25) ? std::round(rng.uniform(-2.0, 2.0) * 10.0) / 10.0
                                    : rng.uniform(-5.0, 5.0);
        const double g1 = rng.uniform(0.0, 0.6);
        const double g2 = rng.uniform(0.0, 0.95 - g1);
        const auto n_closed = static_cast<std::size_t>(g1 * static_cast<double>(n));
        const auto n_open = static_cast<std::size_t>(g2 * static_cast<double>(n));

        const Partition part = partition_from_scores(open_score, closed_score, n_open,
                                                     n_closed);
        if (part.open_idx.size() != n_open || part.closed_idx.size() != n_closed ||
            part.normal_idx.size() != n - n_open - n_closed) {
            ok = false;
            break;
        }
        std::vector<int> hit(n, 0);
        for (std::size_t i : part.open_idx) ++hit[i];
        for (std::size_t i : part.closed_idx) ++hit[i];
        for (std::size_t i : part.normal_idx) ++hit[i];
        for (std::size_t i = 0; i < n; ++i)
            if (hit[i] != 1) ok = false;

        const Partition again = partition_from_scores(open_score, closed_score, n_open,
                                                      n_closed);
        if (again.open_idx != part.open_idx || again.closed_idx != part.closed_idx ||
            again.normal_idx != part.normal_idx)
            ok = false;
        if (!ok) break;
    }
    report(4, "partition algebra", ok,
           ok ? "1000 random score tables: disjoint, exhaustive, exact, deterministic"
              : "partition algebra violated");
}

// ---------------------------------------------------------------- criterion 5
void criterion_disambiguation_invariants() {
    SplitRng rng(1005);
    bool ok = true;
    for (int trial = 0; trial < 10000; ++trial) {
        const int c = 3 + rng.uniform_int(10);
        const auto probs = random_simplex(rng, c);
        const CandidateMask mask = random_mask(rng, c, 1, c - 1);
        const CandidateMask comp = [&] {
            CandidateMask m(c);
            for (int j : mask.non_candidates()) m.add(j);
            return m;
        }();

        const auto row = update_conf_normal(probs, mask);
        double mass = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = row[static_cast<std::size_t>(j)];
            if (mask.contains(j) && v <= 0.0) ok = false;
            if (!mask.contains(j) && v != 0.0) ok = false;
            mass += v;
        }
        if (std::abs(mass - 1.0) > 1e-9) ok = false;

        // reversed/normal symmetry under the set swap must be exact
        if (update_conf_reversed(probs, mask) != update_conf_normal(probs, comp)) ok = false;

        const auto rev = update_conf_reversed(probs, mask);
        double rev_mass = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = rev[static_cast<std::size_t>(j)];
            if (mask.contains(j) && v != 0.0) ok = false;
            rev_mass += v;
        }
        if (std::abs(rev_mass - 1.0) > 1e-9) ok = false;
        if (!ok) break;
    }
    report(5, "disambiguation invariants", ok,
           ok ? "10000 rows: support exact, rows normalized, swap symmetry exact"
              : "a confidence-row invariant failed");
}

// ------------------------------------------------------- desk-scale criteria
struct DeskOutcome {
    double accuracy = 0.0;
    double precision_normal = 0.0;
    double precision_closed = 0.0;
    double precision_open = 0.0;
    double runtime_seconds = 0.0;
};

RunSpec desk_spec(double tau1, double tau2, std::uint64_t seed) {
    RunSpec spec;
    spec.train.q = 0.3;
    spec.train.tau1 = tau1;
    spec.train.tau2 = tau2;
    spec.train.seed = seed;
    spec.train.beta = 0.5;   // from the alpha/beta search grid
    spec.train.T_warmup = 50;
    spec.synth.num_classes = 10;
    spec.synth.n_per_class = 500;
    spec.synth.dim = 2;
    spec.synth.separation = 4.0;
    spec.synth.open_classes = 5;
    spec.synth.open_sigma = 0.2;
    spec.synth.n_test_per_class = 200;
    return spec;
}

enum class Variant { full, baseline, ablate_ld, ablate_rld, ablate_wce };

DeskOutcome desk_run(double tau1, double tau2, std::uint64_t seed, Variant variant) {
    RunSpec spec = desk_spec(tau1, tau2, seed);
    TrainConfig cfg = spec.train;
    switch (variant) {
        case Variant::full: break;
        case Variant::baseline: cfg.T_warmup = cfg.T_max; break;
        case Variant::ablate_ld: cfg = apply_ablation(cfg, AblationSwitch::ld); break;
        case Variant::ablate_rld: cfg = apply_ablation(cfg, AblationSwitch::rld); break;
        case Variant::ablate_wce: cfg = apply_ablation(cfg, AblationSwitch::wce); break;
    }
    const SynthOutput data = synthesize(spec);
    const auto start = Clock::now();
    const TrainResult result = run_training(cfg, data.train, data.test);
    DeskOutcome out;
    out.runtime_seconds = seconds_since(start);
    const EpochMetrics& last = result.metrics.back();
    out.accuracy = last.test_accuracy;
    out.precision_normal = last.precision_normal.value_or(0.0);
    out.precision_closed = last.precision_closed.value_or(0.0);
    out.precision_open = last.precision_open.value_or(0.0);
    return out;
}

struct DeskTable {
    // per-variant 5-seed means at (0.2, 0.4)
    std::map<Variant, double> acc_a;
    double prec_normal = 0.0, prec_closed = 0.0, prec_open = 0.0;
    // (0.3, 0.6) means
    double full_b = 0.0, baseline_b = 0.0;
    double max_runtime = 0.0;
};

DeskTable run_desk_table() {
    DeskTable table;
    const std::vector<Variant> variants_a{Variant::full, Variant::baseline, Variant::ablate_ld,
                                          Variant::ablate_rld, Variant::ablate_wce};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (Variant v : variants_a) {
            const DeskOutcome out = desk_run(0.2, 0.4, seed, v);
            table.acc_a[v] += out.accuracy / 5.0;
            table.max_runtime = std::max(table.max_runtime, out.runtime_seconds);
            if (v == Variant::full) {
                table.prec_normal += out.precision_normal / 5.0;
                table.prec_closed += out.precision_closed / 5.0;
                table.prec_open += out.precision_open / 5.0;
            }
        }
        table.full_b += desk_run(0.3, 0.6, seed, Variant::full).accuracy / 5.0;
        table.baseline_b += desk_run(0.3, 0.6, seed, Variant::baseline).accuracy / 5.0;
    }
    return table;
}

void criterion_directional_reproduction(const DeskTable& table) {
    const double full = table.acc_a.at(Variant::full);
    const double baseline = table.acc_a.at(Variant::baseline);
    const double gap = 100.0 * (full - baseline);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "full %.2f%% vs baseline %.2f%% (gap %+.2f points, need >= 3), slowest run "
                  "%.0fs (< 300s)",
                  100.0 * full, 100.0 * baseline, gap, table.max_runtime);
    report(6, "desk-scale directional reproduction", gap >= 3.0 && table.max_runtime < 300.0,
           buf);
}

void criterion_selection_precision(const DeskTable& table) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "5-seed mean precision normal %.3f closed %.3f open %.3f",
                  table.prec_normal, table.prec_closed, table.prec_open);
    report(7, "desk-scale selection precision",
           table.prec_normal >= 0.80 && table.prec_closed >= 0.80 && table.prec_open >= 0.80,
           buf);
}

void criterion_ablation_directions(const DeskTable& table) {
    const double full = table.acc_a.at(Variant::full);
    const double wo_ld = table.acc_a.at(Variant::ablate_ld);
    const double wo_rld = table.acc_a.at(Variant::ablate_rld);
    const double wo_wce = table.acc_a.at(Variant::ablate_wce);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "full %.2f%% vs w/o ld %.2f%%, w/o rld %.2f%%, w/o wce %.2f%%",
                  100.0 * full, 100.0 * wo_ld, 100.0 * wo_rld, 100.0 * wo_wce);
    report(8, "ablation directions", full > wo_ld && full > wo_rld && full > wo_wce, buf);
}

void criterion_degradation_trend(const DeskTable& table) {
    const double baseline_drop = table.acc_a.at(Variant::baseline) - table.baseline_b;
    const double full_drop = table.acc_a.at(Variant::full) - table.full_b;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "raising tau: baseline drops %.2f points, full method drops %.2f points",
                  100.0 * baseline_drop, 100.0 * full_drop);
    report(9, "degradation trend", baseline_drop > full_drop, buf);
}

// --------------------------------------------------------------- criterion 10
void criterion_determinism() {
    namespace fs = std::filesystem;
    RunSpec spec = desk_spec(0.2, 0.4, 7);
    spec.train.T_warmup = 10;
    spec.train.T_max = 30;
    spec.synth.n_per_class = 100;
    const SynthOutput data = synthesize(spec);

    const fs::path dir = fs::temp_directory_path() / "oocpll_acceptance_determinism";
    fs::create_directories(dir);
    std::vector<std::string> bodies;
    for (int run = 0; run < 2; ++run) {
        const TrainResult result = run_training(spec.train, data.train, data.test);
        const fs::path path = dir / ("metrics_" + std::to_string(run) + ".csv");
        write_metrics_csv(path.string(), result.metrics);
        std::ifstream in(path, std::ios::binary);
        bodies.emplace_back(std::istreambuf_iterator<char>(in),
                            std::istreambuf_iterator<char>());
    }
    const bool ok = !bodies[0].empty() && bodies[0] == bodies[1];
    report(10, "determinism", ok,
           ok ? "two runs serialized to byte-identical metrics CSVs"
              : "metrics CSVs differ between identical runs");
    fs::remove_all(dir);
}

}  // namespace

int main() {
    criterion_wooden_identity();
    criterion_gradient_oracle();
    criterion_selection_oracle();
    criterion_partition_algebra();
    criterion_disambiguation_invariants();
    const DeskTable table = run_desk_table();
    criterion_directional_reproduction(table);
    criterion_selection_precision(table);
    criterion_ablation_directions(table);
    criterion_degradation_trend(table);
    criterion_determinism();

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
