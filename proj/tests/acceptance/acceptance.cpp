// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Criteria 4-8 share one desk experiment per seed (teacher, rel+irrel
// collection, 1C-Sum scores, five student runs). Budgets and tolerances are
// the constants below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "../support/gradient_check.hpp"
#include "dh/desk.hpp"
#include "dh/distill.hpp"
#include "dh/errors.hpp"
#include "dh/ioformat.hpp"
#include "dh/report.hpp"
#include "dh/sampler.hpp"
#include "dh/scores.hpp"

using namespace dh;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr std::size_t kCollectionSize = 20000;
constexpr std::size_t kPseudoEpochs = 100;
constexpr std::size_t kShallowPseudoEpochs = 1000;
constexpr double kLowBudget = 0.10;

constexpr double kRatioTolerance = 1e-12;
constexpr double kIqprTolerance = 1e-9;
constexpr double kGradientTolerance = 1e-4;
constexpr std::size_t kGradientInstances = 20;
constexpr std::size_t kImportanceSamples = 100000;
constexpr double kImportanceSigmas = 4.0;
constexpr double kTeacherFloor = 95.0;
constexpr double kStudentGap = 2.0;
constexpr double kShallowGap = 5.0;
constexpr double kShallowVanillaSlack = 2.0;

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- 1 -------------------------------------------------------------------

Verdict sampling_law() {
    Prng rng(101);
    double worst_ratio = 0.0, worst_iqpr = 0.0;
    bool uniform_exact = true;
    for (std::size_t n : {2u, 10u, 1000u}) {
        for (int trial = 0; trial < 20; ++trial) {
            Vector s(n);
            for (double& v : s) v = 3.0 * rng.normal();
            for (double iqpr : {1.0, 5.0, 25.0, 100.0}) {
                const auto plan = build_plan(ScoreVector{ScoreId::one_c_sum, s}, iqpr);
                const auto& q = plan.probabilities();
                if (iqpr == 1.0)
                    for (double x : q) uniform_exact = uniform_exact && x == 1.0 / static_cast<double>(n);
                const std::size_t pairs = n <= 10 ? n * n : 10000;
                for (std::size_t k = 0; k < pairs; ++k) {
                    const std::size_t i = n <= 10 ? k / n : rng.index(n), j = n <= 10 ? k % n : rng.index(n);
                    const double want = std::exp(plan.lambda() * (s[i] - s[j]));
                    worst_ratio = std::max(worst_ratio, std::abs(q[i] / q[j] - want) / std::max(1.0, want));
                }
            }
        }
    }
    // Sizes whose quartile positions (n - 1) / 4 and 3 (n - 1) / 4 are integers.
    for (std::size_t n : {5u, 9u, 1001u}) {
        for (int trial = 0; trial < 20; ++trial) {
            Vector s(n);
            for (double& v : s) v = rng.normal();
            Vector sorted = s;
            std::sort(sorted.begin(), sorted.end());
            const double q1 = sorted[(n - 1) / 4], q3 = sorted[3 * (n - 1) / 4];
            std::size_t i1 = 0, i3 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (s[i] == q1) i1 = i;
                if (s[i] == q3) i3 = i;
            }
            for (double iqpr : {1.0, 5.0, 25.0, 100.0}) {
                const auto plan = build_plan(ScoreVector{ScoreId::one_c_sum, s}, iqpr);
                const double ratio = plan.probabilities()[i3] / plan.probabilities()[i1];
                worst_iqpr = std::max(worst_iqpr, std::abs(ratio - iqpr) / iqpr);
            }
        }
    }
    const bool pass = worst_ratio <= kRatioTolerance && worst_iqpr <= kIqprTolerance && uniform_exact;
    return {pass, fmt("max ratio-law error %.2e (tol %.0e), max IQPR error %.2e (tol %.0e), IQPR=1 uniform %s",
                      worst_ratio, kRatioTolerance, worst_iqpr, kIqprTolerance, uniform_exact ? "exact" : "NOT exact")};
}

// --- 2 -------------------------------------------------------------------

Verdict gradients() {
    struct Case {
        const char* name;
        DistillMode mode;
        std::vector<std::size_t> widths;
    };
    const Case cases[] = {
        {"vanilla", DistillMode::vanilla, {5, 9, 6}},
        {"fixed-linear P", DistillMode::fixed_linear, {5, 9, 4}},
        {"fixed-linear I", DistillMode::fixed_linear, {5, 9, 7}},
    };
    Prng rng(202);
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        std::size_t checked = 0;
        double worst = 0.0;
        for (int trial = 0; trial < 200 && checked < 25; ++trial) {
            const auto r = gradcheck::check_instance(rng, c.mode, c.widths, 4, 7, 2.0);
            if (r.skipped) continue;
            worst = std::max(worst, r.max_relative_error);
            ++checked;
        }
        pass = pass && checked >= kGradientInstances && worst < kGradientTolerance;
        detail += fmt("%s %zu inst max rel err %.1e; ", c.name, checked, worst);
    }
    return {pass, detail + fmt("tol %.0e", kGradientTolerance)};
}

// --- 3 -------------------------------------------------------------------

Verdict importance_sampling() {
    const auto task = desk::task("gauss3");
    const auto spec = desk::collection("rel+irrel", task, kImportanceSamples);
    Prng rng = Prng(303).derive("datagen");
    const auto collection = generate_collection(spec, task, rng);
    Vector weighted(collection.size());
    for (std::size_t i = 0; i < collection.size(); ++i) {
        const double u = oracle_log_odds(collection[i].features, task, spec);
        weighted[i] = importance_weight(1.0, u, spec.pi).value * collection[i].features[0];
    }
    const auto direct_samples = generate_task_data(task, kImportanceSamples, rng);
    Vector direct(direct_samples.size());
    for (std::size_t i = 0; i < direct.size(); ++i) direct[i] = direct_samples[i].features[0];
    const double n = static_cast<double>(kImportanceSamples);
    const double est = mean(weighted), ref = mean(direct);
    const double se = std::sqrt(std::pow(population_stddev(weighted), 2) / n + std::pow(population_stddev(direct), 2) / n);
    const double z = std::abs(est - ref) / se;
    return {z <= kImportanceSigmas,
            fmt("beta-weighted %.4f vs direct %.4f (analytic %.4f), |diff| = %.2f combined SE (limit %.0f)", est, ref,
                task.means[1][0] / 3.0, z, kImportanceSigmas)};
}

// --- 4-8 -----------------------------------------------------------------

struct SeedRun {
    std::uint64_t seed = 0;
    double teacher = 0.0, bayes = 0.0;
    RunReport fl1, fl5, van1, shallow_fl, shallow_van;
    SelectionMetrics sel[3];  // IQPR 1, 5, 25
};

double bayes_accuracy(const GaussianMixtureTask& task, std::span<const TaggedSample> data) {
    std::size_t ok = 0;
    for (const auto& s : data) {
        std::size_t best = 0;
        double best_l = -INFINITY;
        for (std::size_t k = 0; k < task.class_count(); ++k) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < task.dim(); ++j) d2 += std::pow(s.features[j] - task.means[k][j], 2);
            const double l = std::log(task.weights[k]) - static_cast<double>(task.dim()) * std::log(task.stds[k]) -
                             d2 / (2.0 * task.stds[k] * task.stds[k]);
            if (l > best_l) {
                best_l = l;
                best = k;
            }
        }
        ok += static_cast<int>(best) == *s.label;
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(data.size());
}

SeedRun run_seed(std::uint64_t seed) {
    SeedRun r;
    r.seed = seed;
    const auto task = desk::task("gauss3");
    Prng g = Prng(seed).derive("datagen");
    const auto train = generate_task_data(task, desk::kTrainSize, g);
    const auto val = generate_task_data(task, desk::kValSize, g);
    const auto test = generate_task_data(task, desk::kTestSize, g);
    const auto teacher = train_teacher(train, val, desk::teacher_widths(task.dim()), desk::teacher_config(seed)).params;
    r.teacher = evaluate(teacher, test);
    Prng bayes_rng = Prng(seed).derive("bayes");
    r.bayes = bayes_accuracy(task, generate_task_data(task, 100000, bayes_rng));

    auto collection = generate_collection(desk::collection("rel+irrel", task, kCollectionSize), task, g);
    auto [pool, hold] = split_holdout(std::move(collection), desk::kCollectionHoldout);
    const auto pool_cache = build_cache(teacher, pool);
    const auto hold_cache = build_cache(teacher, hold);
    const auto scores = score_one_c_sum(pool_cache, teacher.head);
    std::vector<SourceTag> tags(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) tags[i] = pool[i].tag;

    const DistillData data{pool, &pool_cache, hold, &hold_cache, test};
    auto cfg = desk::distill_config(seed);
    cfg.pseudo_epochs = kPseudoEpochs;
    const auto full = desk::student_widths(task.dim());
    const auto shallow = desk::shallow_widths(task.dim());
    auto run = [&](double iqpr, DistillMode mode, const std::vector<std::size_t>& widths, const DistillConfig& c) {
        return distill_student(teacher, data, build_plan(scores, iqpr), c, mode, widths).report;
    };
    r.fl1 = run(1.0, DistillMode::fixed_linear, full, cfg);
    r.fl5 = run(5.0, DistillMode::fixed_linear, full, cfg);
    r.van1 = run(1.0, DistillMode::vanilla, full, cfg);
    auto long_cfg = cfg;
    long_cfg.pseudo_epochs = kShallowPseudoEpochs;
    r.shallow_fl = run(1.0, DistillMode::fixed_linear, shallow, long_cfg);
    r.shallow_van = run(1.0, DistillMode::vanilla, shallow, long_cfg);

    // Selection metrics over the draws of a full training budget.
    int slot = 0;
    for (double iqpr : {1.0, 5.0, 25.0}) {
        auto plan = build_plan(scores, iqpr);
        Prng rng = Prng(seed).derive("sampler");
        for (std::size_t k = 0; k < kPseudoEpochs * cfg.pseudo_epoch_size; ++k) plan.draw(rng);
        r.sel[slot++] = compute_metrics(plan, tags);
    }
    return r;
}

double average(const std::vector<SeedRun>& runs, const std::function<double(const SeedRun&)>& f) {
    double s = 0.0;
    for (const auto& r : runs) s += f(r);
    return s / static_cast<double>(runs.size());
}

Verdict distillation_quality(const std::vector<SeedRun>& runs) {
    bool each_teacher = true;
    for (const auto& r : runs) each_teacher = each_teacher && r.teacher >= kTeacherFloor;
    const double t = average(runs, [](auto& r) { return r.teacher; });
    const double s = average(runs, [](auto& r) { return r.fl1.best_accuracy; });
    const double b = average(runs, [](auto& r) { return r.bayes; });
    return {each_teacher && s >= t - kStudentGap,
            fmt("teacher %.2f%% (every seed >= %.0f: %s), Bayes %.2f%%, fixed-linear student %.2f%% (floor %.2f%%)", t,
                kTeacherFloor, each_teacher ? "yes" : "no", b, s, t - kStudentGap)};
}

Verdict fixed_linear_vs_vanilla(const std::vector<SeedRun>& runs) {
    int wins = 0;
    std::string detail;
    for (const auto& r : runs) {
        const double fl = r.fl1.accuracy_at_fraction(kLowBudget), van = r.van1.accuracy_at_fraction(kLowBudget);
        wins += fl >= van;
        detail += fmt("seed %llu %.2f vs %.2f; ", static_cast<unsigned long long>(r.seed), fl, van);
    }
    return {wins >= 2, detail + fmt("fixed-linear >= vanilla at 10%% on %d/3 seeds", wins)};
}

Verdict biasing_direction(const std::vector<SeedRun>& runs) {
    bool pass = true;
    std::string detail;
    for (const auto& r : runs) {
        const auto& s = r.sel;
        const bool ok = *s[1].irrelevant_proportion < *s[0].irrelevant_proportion &&
                        s[2].skip_ratio > s[1].skip_ratio && s[1].skip_ratio > s[0].skip_ratio &&
                        s[1].uniformity <= s[0].uniformity && s[2].uniformity <= s[1].uniformity;
        pass = pass && ok;
        detail += fmt("seed %llu irr %.1f/%.1f/%.1f skip %.1f/%.1f/%.1f unif %.3f/%.3f/%.3f; ",
                      static_cast<unsigned long long>(r.seed), *s[0].irrelevant_proportion,
                      *s[1].irrelevant_proportion, *s[2].irrelevant_proportion, s[0].skip_ratio, s[1].skip_ratio,
                      s[2].skip_ratio, s[0].uniformity, s[1].uniformity, s[2].uniformity);
    }
    return {pass, detail + "(IQPR 1/5/25)"};
}

Verdict convergence_direction(const std::vector<SeedRun>& runs) {
    const double a5 = average(runs, [](auto& r) { return r.fl5.accuracy_at_fraction(kLowBudget); });
    const double a1 = average(runs, [](auto& r) { return r.fl1.accuracy_at_fraction(kLowBudget); });
    const double f5 = average(runs, [](auto& r) { return r.fl5.best_accuracy; });
    const double f1 = average(runs, [](auto& r) { return r.fl1.best_accuracy; });
    return {a5 >= a1, fmt("accuracy at 10%% budget: IQPR 5 %.2f%% vs IQPR 1 %.2f%% (full budget %.2f%% vs %.2f%%)", a5,
                          a1, f5, f1)};
}

Verdict shallow_student(const std::vector<SeedRun>& runs) {
    const double sfl = average(runs, [](auto& r) { return r.shallow_fl.best_accuracy; });
    const double svan = average(runs, [](auto& r) { return r.shallow_van.best_accuracy; });
    const double full = average(runs, [](auto& r) { return r.fl1.best_accuracy; });
    return {sfl <= full - kShallowGap && sfl <= svan + kShallowVanillaSlack,
            fmt("shallow fixed-linear %.2f%%, full fixed-linear %.2f%% (need gap >= %.0f), shallow vanilla %.2f%% "
                "(need shallow fixed-linear <= vanilla + %.0f)",
                sfl, full, kShallowGap, svan, kShallowVanillaSlack)};
}

// --- 9 -------------------------------------------------------------------

std::size_t count_structured_failures(const io::Bytes& good, const std::function<void(std::span<const std::uint8_t>)>& decode,
                                      Prng& rng, std::size_t& unstructured) {
    std::size_t rejected = 0;
    auto attempt = [&](std::span<const std::uint8_t> b) {
        try {
            decode(b);
        } catch (const FormatError&) {
            ++rejected;
        } catch (...) {
            ++unstructured;
        }
    };
    for (std::size_t cut = 0; cut < good.size(); cut += 1 + good.size() / 200) attempt(std::span(good.data(), cut));
    for (int trial = 0; trial < 1000; ++trial) {
        io::Bytes bad = good;
        bad[rng.index(bad.size())] ^= static_cast<std::uint8_t>(1u << rng.index(8));
        if (trial % 3 == 0) bad[rng.index(std::min<std::size_t>(bad.size(), 24))] = static_cast<std::uint8_t>(rng.index(256));
        attempt(bad);
    }
    return rejected;
}

Verdict determinism_and_formats() {
    const auto task = desk::task("gauss3");
    auto stage = [&](std::uint64_t seed) {
        std::vector<io::Bytes> out;
        Prng g = Prng(seed).derive("datagen");
        const auto train = generate_task_data(task, 800, g);
        const auto val = generate_task_data(task, 200, g);
        const auto test = generate_task_data(task, 300, g);
        auto coll = generate_collection(desk::collection("rel+irrel", task, 1000), task, g);
        auto [pool, hold] = split_holdout(std::move(coll), 0.1);
        out.push_back(io::encode_collection(train, 3));
        out.push_back(io::encode_collection(pool, 3));
        auto tc = desk::teacher_config(seed);
        tc.epochs = 3;
        const auto teacher = train_teacher(train, val, desk::teacher_widths(task.dim()), tc).params;
        out.push_back(io::encode_model(teacher));
        const auto cache = build_cache(teacher, pool);
        out.push_back(io::encode_cache(cache));
        const auto scores = score_one_c_sum(cache, teacher.head);
        out.push_back(io::encode_scores(scores));
        auto plan = build_plan(scores, 5.0);
        out.push_back(io::encode_distribution(plan));
        auto dc = desk::distill_config(seed);
        dc.pseudo_epochs = 4;
        dc.pseudo_epoch_size = 100;
        const auto res = distill_student(teacher, DistillData{pool, &cache, hold, nullptr, test}, plan, dc,
                                         DistillMode::fixed_linear, desk::student_widths(task.dim()));
        out.push_back(io::encode_model(res.student.to_network()));
        const auto curve = run_curve_csv(res.report);
        out.emplace_back(curve.begin(), curve.end());
        auto drawn = SamplingPlan::from_probabilities(plan.probabilities(), plan.lambda(), plan.iqpr(), res.draw_counts);
        out.push_back(io::encode_distribution(drawn));
        return out;
    };
    const auto a = stage(909), b = stage(909);
    const bool rerun_identical = a == b;

    // Round trips: decode then encode reproduces the bytes for every format.
    bool round_trips = io::encode_collection(io::decode_collection(a[1]).samples, 3) == a[1] &&
                       io::encode_model(io::decode_model(a[2])) == a[2] &&
                       io::encode_cache(io::decode_cache(a[3])) == a[3] &&
                       io::encode_scores(io::decode_scores(a[4])) == a[4] &&
                       io::encode_distribution(io::decode_distribution(a[8])) == a[8];

    Prng rng(910);
    std::size_t unstructured = 0, rejected = 0;
    rejected += count_structured_failures(a[1], [](auto s) { io::decode_collection(s); }, rng, unstructured);
    rejected += count_structured_failures(a[2], [](auto s) { io::decode_model(s); }, rng, unstructured);
    rejected += count_structured_failures(a[3], [](auto s) { io::decode_cache(s); }, rng, unstructured);
    rejected += count_structured_failures(a[4], [](auto s) { io::decode_scores(s); }, rng, unstructured);
    rejected += count_structured_failures(a[8], [](auto s) { io::decode_distribution(s); }, rng, unstructured);
    return {rerun_identical && round_trips && unstructured == 0,
            fmt("rerun of all stages %s, 5 formats round-trip %s, malformed inputs: %zu FormatError, %zu other",
                rerun_identical ? "bit-identical" : "DIFFERS", round_trips ? "exactly" : "NOT exactly", rejected,
                unstructured)};
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    int failures = 0;
    auto report = [&](int id, const char* name, const Verdict& v) {
        std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    };
    auto guarded = [&](int id, const char* name, const std::function<Verdict()>& f) {
        try {
            report(id, name, f());
        } catch (const std::exception& e) {
            report(id, name, {false, std::string("exception: ") + e.what()});
        }
    };

    guarded(1, "sampling law", sampling_law);
    guarded(2, "gradient correctness", gradients);
    guarded(3, "importance-sampling oracle", importance_sampling);

    std::vector<SeedRun> runs;
    try {
        for (auto seed : kSeeds) {
            runs.push_back(run_seed(seed));
            const auto& r = runs.back();
            std::printf("  seed %llu: teacher %.2f%% Bayes %.2f%% | fl@1 %.2f/%.2f fl@5 %.2f/%.2f van@1 %.2f/%.2f "
                        "(10%%/best) | shallow fl %.2f van %.2f\n",
                        static_cast<unsigned long long>(r.seed), r.teacher, r.bayes,
                        r.fl1.accuracy_at_fraction(kLowBudget), r.fl1.best_accuracy,
                        r.fl5.accuracy_at_fraction(kLowBudget), r.fl5.best_accuracy,
                        r.van1.accuracy_at_fraction(kLowBudget), r.van1.best_accuracy, r.shallow_fl.best_accuracy,
                        r.shallow_van.best_accuracy);
            std::fflush(stdout);
        }
    } catch (const std::exception& e) {
        std::printf("  desk experiment failed: %s\n", e.what());
        runs.clear();
    }
    if (runs.size() == std::size(kSeeds)) {
        report(4, "desk distillation quality", distillation_quality(runs));
        report(5, "fixed-linear vs vanilla at low budget", fixed_linear_vs_vanilla(runs));
        report(6, "biasing direction", biasing_direction(runs));
        report(7, "convergence speed direction", convergence_direction(runs));
        report(8, "shallow student failure", shallow_student(runs));
    } else {
        for (int id = 4; id <= 8; ++id) report(id, "desk experiment", {false, "experiment did not complete"});
    }

    guarded(9, "determinism and format integrity", determinism_and_formats);

    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("%d of 9 criteria failed (%.1f s)\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
