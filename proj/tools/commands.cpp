#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dh/config.hpp"
#include "dh/datagen.hpp"
#include "dh/desk.hpp"
#include "dh/distill.hpp"
#include "dh/errors.hpp"
#include "dh/ioformat.hpp"
#include "dh/models.hpp"
#include "dh/report.hpp"
#include "dh/sampler.hpp"
#include "dh/scores.hpp"

#ifndef DHKD_VERSION
#define DHKD_VERSION "0.0.0"
#endif

namespace dhkd {

namespace fs = std::filesystem;
using namespace dh;

namespace {

using Clock = std::chrono::steady_clock;

std::string or_default(const std::string& value, const fs::path& fallback) {
    return value.empty() ? fallback.string() : value;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

Manifest base_manifest(const std::string& subcommand, const Resolved& config) {
    Manifest m;
    m.set("subcommand", subcommand);
    m.set("tool_version", DHKD_VERSION);
    for (const auto& [k, v] : config) m.set("config." + k, v);
    return m;
}

void finish_manifest(Manifest& m, Clock::time_point start, const fs::path& path) {
    m.set("wall_clock_seconds", format_double(std::chrono::duration<double>(Clock::now() - start).count()));
    m.write(path);
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<std::size_t> with_input(std::size_t dim, const std::vector<std::size_t>& tail) {
    std::vector<std::size_t> w{dim};
    w.insert(w.end(), tail.begin(), tail.end());
    return w;
}

void require_labels(const io::Collection& c, const std::string& what) {
    for (const auto& s : c.samples) {
        if (!s.label) throw InvalidArgument(what + " contains unlabeled samples");
        if (*s.label < 0 || static_cast<std::uint32_t>(*s.label) >= c.class_count) {
            throw InvalidArgument(what + " has a label outside [0, K)");
        }
    }
}

}  // namespace

fs::path output_root() {
    const char* env = std::getenv("DHKD_OUT");
    return env && *env ? fs::path(env) : fs::path("dhkd_out");
}

void Manifest::write(const fs::path& path) const { write_text(path, format_key_values(values)); }

fs::path manifest_for_file(const fs::path& file) { return fs::path(file.string() + ".manifest"); }
fs::path manifest_for_dir(const fs::path& dir) { return dir / "manifest.txt"; }

std::map<std::string, std::string> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

int run_gen(const GenOptions& o, const Resolved& config) {
    const auto start = Clock::now();
    GaussianMixtureTask task;
    CollectionSpec spec;
    try {
        task = desk::task(o.task);
        spec = desk::collection(o.collection, task, o.n);
        if (o.ori || o.rel || o.irrel) {
            spec.ori_fraction = o.ori.value_or(0.0);
            spec.rel_fraction = o.rel.value_or(0.0);
            spec.irrel_fraction = o.irrel.value_or(0.0);
            spec.validate(task);
        }
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (o.n < 2) throw UsageError("--n must be >= 2 so that a validation split remains");
    if (!(o.holdout > 0.0 && o.holdout < 1.0)) throw UsageError("--holdout must lie in (0, 1)");

    const fs::path out = or_default(o.out, output_root());
    fs::create_directories(out);

    Prng rng = Prng(o.seed).derive("datagen");
    const auto train = generate_task_data(task, o.train_size ? o.train_size : desk::kTrainSize, rng);
    const auto val = generate_task_data(task, o.val_size ? o.val_size : desk::kValSize, rng);
    const auto test = generate_task_data(task, o.test_size ? o.test_size : desk::kTestSize, rng);
    auto [pool, holdout] = split_holdout(generate_collection(spec, task, rng), o.holdout);
    if (pool.empty()) throw UsageError("--holdout leaves no samples in the collection");

    const auto k = static_cast<std::uint32_t>(task.class_count());
    io::write_collection(out / "task_train.dhuc", train, k);
    io::write_collection(out / "task_val.dhuc", val, k);
    io::write_collection(out / "task_test.dhuc", test, k);
    io::write_collection(out / "collection.dhuc", pool, k);
    io::write_collection(out / "collection_val.dhuc", holdout, k);

    const auto counts = component_counts(spec);
    std::cout << "collection " << o.collection << ": ori=" << counts.ori << " rel=" << counts.rel
              << " irrel=" << counts.irrel << " (train pool " << pool.size() << ", validation " << holdout.size()
              << ")\n";
    std::cout << "task " << o.task << ": train=" << train.size() << " val=" << val.size() << " test=" << test.size()
              << "\n";

    Manifest m = base_manifest("gen", config);
    m.set("seed", std::to_string(o.seed));
    m.set("count.ori", std::to_string(counts.ori));
    m.set("count.rel", std::to_string(counts.rel));
    m.set("count.irrel", std::to_string(counts.irrel));
    for (const char* name : {"task_train", "task_val", "task_test", "collection", "collection_val"}) {
        m.set(std::string("output.") + name, (out / (std::string(name) + ".dhuc")).string());
    }
    finish_manifest(m, start, manifest_for_dir(out));
    return 0;
}

int run_teach(const TeachOptions& o, const Resolved& config) {
    const auto start = Clock::now();
    const fs::path root = output_root();
    const fs::path train_path = or_default(o.train, root / "task_train.dhuc");
    const fs::path val_path = or_default(o.val, root / "task_val.dhuc");
    const fs::path out = or_default(o.out, root / "teacher.dhnm");

    const auto train = io::read_collection(train_path);
    const auto val = io::read_collection(val_path);
    require_labels(train, train_path.string());
    require_labels(val, val_path.string());
    if (train.dim() != val.dim() || train.class_count != val.class_count) {
        throw CrossFileError(train_path.string() + " and " + val_path.string() + " disagree on D or K");
    }

    TeacherConfig cfg = desk::teacher_config(o.seed);
    if (o.epochs) cfg.epochs = o.epochs;
    if (o.batch_size) cfg.batch_size = o.batch_size;
    if (o.lr > 0.0) cfg.learning_rate = o.lr;
    if (o.momentum > 0.0) cfg.momentum = o.momentum;
    if (o.weight_decay > 0.0) cfg.weight_decay = o.weight_decay;
    const auto widths = o.widths.empty() ? desk::teacher_widths(train.dim()) : with_input(train.dim(), o.widths);

    const auto result = train_teacher(train.samples, val.samples, widths, cfg);
    ensure_parent(out);
    io::write_model(out, result.params);

    std::cout << "teacher " << join(widths) << " -> " << train.class_count << ": best validation accuracy "
              << fixed(result.best_val_accuracy) << "% at epoch " << result.best_epoch << "\n";
    Manifest m = base_manifest("teach", config);
    m.set("seed", std::to_string(o.seed));
    m.set("input.train", train_path.string());
    m.set("input.val", val_path.string());
    m.set("output.model", out.string());
    m.set("best_val_accuracy", format_double(result.best_val_accuracy));
    m.set("best_epoch", std::to_string(result.best_epoch));
    if (!o.test.empty()) {
        const auto test = io::read_collection(o.test);
        require_labels(test, o.test);
        io::check_model_collection(result.params, test);
        const double acc = evaluate(result.params, test.samples);
        std::cout << "test accuracy " << fixed(acc) << "%\n";
        m.set("input.test", o.test);
        m.set("test_accuracy", format_double(acc));
    }
    finish_manifest(m, start, manifest_for_file(out));
    return 0;
}

int run_score(const ScoreOptions& o, const Resolved& config) {
    const auto start = Clock::now();
    const fs::path root = output_root();
    const fs::path model_path = or_default(o.model, root / "teacher.dhnm");
    const fs::path coll_path = or_default(o.collection, root / "collection.dhuc");
    const ScoreId id = parse_score_id(o.score);
    const fs::path out = or_default(o.out, root / ("scores_" + std::string(score_name(id)) + ".dhsc"));
    const fs::path cache_out = or_default(o.cache_out, root / "cache.dhtc");

    const auto model = io::read_model(model_path);
    const auto coll = io::read_collection(coll_path);
    io::check_model_collection(model, coll);

    const auto cache = build_cache(model, coll.samples);
    const auto scores = compute_scores(id, cache, model.head);
    ensure_parent(out);
    ensure_parent(cache_out);
    io::write_cache(cache_out, cache);
    io::write_scores(out, scores);

    std::cout << score_name(id) << " over " << coll.size() << " samples";
    double sum[3] = {0, 0, 0};
    std::size_t count[3] = {0, 0, 0};
    for (std::size_t i = 0; i < coll.size(); ++i) {
        const auto tag = coll.samples[i].tag;
        if (tag == SourceTag::unknown) continue;
        sum[static_cast<int>(tag)] += scores.values[i];
        ++count[static_cast<int>(tag)];
    }
    for (int t = 0; t < 3; ++t) {
        if (count[t]) {
            std::cout << ", mean " << tag_name(static_cast<SourceTag>(t)) << " " << fixed(sum[t] / count[t], 4);
        }
    }
    std::cout << "\n";

    Manifest m = base_manifest("score", config);
    m.set("score", std::string(score_name(id)));
    m.set("input.model", model_path.string());
    m.set("input.collection", coll_path.string());
    m.set("output.scores", out.string());
    m.set("output.cache", cache_out.string());
    finish_manifest(m, start, manifest_for_file(out));
    Manifest cm = m;
    finish_manifest(cm, start, manifest_for_file(cache_out));
    return 0;
}

int run_sample(const SampleOptions& o, const Resolved& config) {
    const auto start = Clock::now();
    if (!(o.iqpr >= 1.0)) throw UsageError("--iqpr must be >= 1");
    const fs::path root = output_root();
    const fs::path scores_path = or_default(o.scores, root / "scores_1c-sum.dhsc");
    const auto scores = io::read_scores(scores_path);
    const std::string score = std::string(score_name(scores.id));
    const fs::path out =
        or_default(o.out, root / ("dist_" + score + "_iqpr" + format_double(o.iqpr) + ".dhqd"));
    const fs::path metrics_out = or_default(o.metrics_out, fs::path(out.string() + ".metrics"));

    std::vector<SourceTag> tags;
    if (!o.collection.empty()) {
        const auto coll = io::read_collection(o.collection);
        io::check_sample_count("score file " + scores_path.string(), scores.values.size(), coll);
        tags = coll.tags();
    }

    SamplingPlan plan = build_plan(scores, o.iqpr);
    const std::uint64_t draws = o.draws ? o.draws : 20 * static_cast<std::uint64_t>(plan.size());
    Prng rng = Prng(o.seed).derive("sampler");
    for (std::uint64_t d = 0; d < draws; ++d) plan.draw(rng);
    const auto metrics = compute_metrics(plan, tags);

    ensure_parent(out);
    io::write_distribution(out, plan);
    auto report = metrics_summary(metrics);
    report["lambda"] = format_double(plan.lambda());
    report["iqpr"] = format_double(plan.iqpr());
    report["fallback_uniform"] = plan.fallback_uniform() ? "1" : "0";
    report["saturated"] = std::to_string(plan.saturated());
    report["score"] = score;
    write_text(metrics_out, format_key_values(report));

    std::cout << "iqpr " << format_double(o.iqpr) << " lambda " << fixed(plan.lambda(), 6) << " draws " << draws
              << "\n";
    std::cout << "skip_ratio " << fixed(metrics.skip_ratio) << "  uniformity " << fixed(metrics.uniformity);
    if (metrics.irrelevant_proportion) std::cout << "  irrelevant_proportion " << fixed(*metrics.irrelevant_proportion);
    std::cout << "\n";

    Manifest m = base_manifest("sample", config);
    m.set("seed", std::to_string(o.seed));
    m.set("score", score);
    m.set("iqpr", format_double(o.iqpr));
    m.set("input.scores", scores_path.string());
    if (!o.collection.empty()) m.set("input.collection", o.collection);
    m.set("output.distribution", out.string());
    m.set("output.metrics", metrics_out.string());
    finish_manifest(m, start, manifest_for_file(out));
    return 0;
}

int run_distill(const DistillOptions& o, const Resolved& config) {
    const auto start = Clock::now();
    const fs::path root = output_root();
    const fs::path teacher_path = or_default(o.teacher, root / "teacher.dhnm");
    const fs::path coll_path = or_default(o.collection, root / "collection.dhuc");
    const fs::path val_path = or_default(o.val_collection, root / "collection_val.dhuc");
    const fs::path test_path = or_default(o.test, root / "task_test.dhuc");
    const fs::path dist_path = or_default(o.dist, root / "dist_1c-sum_iqpr1.dhqd");
    const DistillMode mode = parse_mode(o.method);

    DistillConfig cfg;
    cfg.temperature = o.tau;
    cfg.learning_rate = o.lr;
    cfg.lr_decay = o.lr_decay;
    cfg.patience = o.patience;
    cfg.pseudo_epoch_size = o.pseudo_epoch_size;
    cfg.pseudo_epochs = o.pseudo_epochs;
    cfg.batch_size = o.batch_size;
    cfg.seed = o.seed;
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    const auto teacher = io::read_model(teacher_path);
    const auto coll = io::read_collection(coll_path);
    const auto val = io::read_collection(val_path);
    const auto test = io::read_collection(test_path);
    require_labels(test, test_path.string());
    io::check_model_collection(teacher, coll);
    io::check_model_collection(teacher, val);
    io::check_model_collection(teacher, test);
    const SamplingPlan plan = io::read_distribution(dist_path);
    io::check_sample_count("distribution " + dist_path.string(), plan.size(), coll);

    std::optional<TeacherCache> cache;
    if (!o.cache.empty()) {
        cache = io::read_cache(o.cache);
        io::check_cache_collection(*cache, coll);
        io::check_cache_model(*cache, teacher);
    }

    const auto gen_manifest = read_manifest(manifest_for_dir(coll_path.parent_path()));
    const auto dist_manifest = read_manifest(manifest_for_file(dist_path));
    auto lookup = [](const std::map<std::string, std::string>& kv, const std::string& key, const std::string& dflt) {
        const auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    };
    const std::string collection_name =
        o.collection_name.empty() ? lookup(gen_manifest, "config.collection", "custom") : o.collection_name;
    const std::string score = lookup(dist_manifest, "score", "unknown");
    const std::string iqpr = format_double(plan.iqpr());

    const fs::path out = or_default(o.out, root / "runs" /
                                               (collection_name + "_" + std::string(mode_name(mode)) + "_" + score +
                                                "_iqpr" + iqpr + "_seed" + std::to_string(o.seed)));
    fs::create_directories(out);

    DistillData data{coll.samples, cache ? &*cache : nullptr, val.samples, nullptr, test.samples};
    DistillResult result = o.init_from_teacher
                               ? distill_student(teacher, clone_teacher(teacher, mode), data, plan, cfg)
                               : distill_student(teacher, data, plan, cfg, mode,
                                                 o.widths.empty() ? desk::student_widths(coll.dim())
                                                                  : with_input(coll.dim(), o.widths));

    io::write_model(out / "student.dhnm", result.student.to_network());
    io::write_distribution(out / "draws.dhqd",
                           SamplingPlan::from_probabilities(plan.probabilities(), plan.lambda(), plan.iqpr(),
                                                            result.draw_counts));
    write_text(out / "curve.csv", run_curve_csv(result.report));
    auto summary = run_summary(result.report);
    summary["collection"] = collection_name;
    summary["method"] = std::string(mode_name(mode));
    summary["score"] = score;
    summary["iqpr"] = iqpr;
    write_text(out / "summary.txt", format_key_values(summary));

    const auto& r = result.report;
    std::cout << "initial validation loss " << format_double(r.initial_val_loss) << ", initial test accuracy "
              << fixed(r.initial_test_accuracy) << "%\n";
    if (!r.test_accuracy.empty()) {
        std::cout << "accuracy @10% " << fixed(r.accuracy_at_fraction(0.10)) << "%, final "
                  << fixed(r.final_accuracy) << "%, best-by-validation " << fixed(r.best_accuracy) << "% (pseudo-epoch "
                  << r.best_pseudo_epoch << ")\n";
    }
    if (r.selection) {
        std::cout << "selection: skip_ratio " << fixed(r.selection->skip_ratio) << "  uniformity "
                  << fixed(r.selection->uniformity);
        if (r.selection->irrelevant_proportion) {
            std::cout << "  irrelevant_proportion " << fixed(*r.selection->irrelevant_proportion);
        }
        std::cout << "\n";
    }

    Manifest m = base_manifest("distill", config);
    m.set("seed", std::to_string(o.seed));
    m.set("input.teacher", teacher_path.string());
    m.set("input.collection", coll_path.string());
    m.set("input.val_collection", val_path.string());
    m.set("input.test", test_path.string());
    m.set("input.distribution", dist_path.string());
    if (!o.cache.empty()) m.set("input.cache", o.cache);
    for (const char* name : {"student.dhnm", "draws.dhqd", "curve.csv", "summary.txt"}) {
        m.set(std::string("output.") + name, (out / name).string());
    }
    finish_manifest(m, start, manifest_for_dir(out));
    return 0;
}

int run_eval(const EvalOptions& o) {
    const fs::path root = output_root();
    const fs::path model_path = or_default(o.model, root / "teacher.dhnm");
    const fs::path data_path = or_default(o.data, root / "task_test.dhuc");
    const auto model = io::read_model(model_path);
    const auto data = io::read_collection(data_path);
    require_labels(data, data_path.string());
    io::check_model_collection(model, data);
    std::cout << "accuracy " << fixed(evaluate(model, data.samples)) << "%\n";
    return 0;
}

int run_report(const ReportOptions& o) {
    std::vector<fs::path> dirs;
    for (const auto& r : o.runs) {
        for (auto& d : find_runs(r)) dirs.push_back(std::move(d));
    }
    if (dirs.empty()) {
        std::cerr << "error: no completed runs found\n";
        return 1;
    }
    std::vector<BudgetRow> rows;
    for (const auto& d : dirs) {
        for (auto& row : budget_rows(load_run(d))) rows.push_back(std::move(row));
    }
    const std::string csv = report_csv(rows, aggregate(rows));
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_text(o.out, csv);
        std::cout << "wrote " << rows.size() << " rows from " << dirs.size() << " runs to " << o.out << "\n";
    }
    return 0;
}

}  // namespace dhkd
