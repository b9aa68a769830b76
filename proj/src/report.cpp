#include "dh/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "dh/errors.hpp"
#include "dh/numerics.hpp"

namespace dh {

namespace fs = std::filesystem;

std::string format_double(double value) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw InvalidArgument("cannot format number");
    return std::string(buf, end);
}

std::string run_curve_csv(const RunReport& report) {
    std::string out = "pseudo_epoch,val_loss,test_acc,lr\n";
    const double lr0 = report.learning_rate.empty() ? 0.0 : report.learning_rate.front();
    out += "0," + format_double(report.initial_val_loss) + "," + format_double(report.initial_test_accuracy) +
           "," + format_double(lr0) + "\n";
    for (std::size_t e = 0; e < report.val_loss.size(); ++e) {
        out += std::to_string(e + 1) + "," + format_double(report.val_loss[e]) + "," +
               format_double(report.test_accuracy[e]) + "," + format_double(report.learning_rate[e]) + "\n";
    }
    return out;
}

std::map<std::string, std::string> metrics_summary(const SelectionMetrics& m) {
    std::map<std::string, std::string> out{
        {"skip_ratio", format_double(m.skip_ratio)},
        {"uniformity", format_double(m.uniformity)},
        {"selected", std::to_string(m.selected)},
        {"draws", std::to_string(m.draws)},
    };
    if (m.irrelevant_proportion) out["irrelevant_proportion"] = format_double(*m.irrelevant_proportion);
    return out;
}

std::map<std::string, std::string> run_summary(const RunReport& report) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : report.config) out[k] = v;
    out["pseudo_epochs_trained"] = std::to_string(report.test_accuracy.size());
    out["initial_val_loss"] = format_double(report.initial_val_loss);
    out["initial_test_accuracy"] = format_double(report.initial_test_accuracy);
    out["final_accuracy"] = format_double(report.final_accuracy);
    out["best_accuracy"] = format_double(report.best_accuracy);
    out["best_pseudo_epoch"] = std::to_string(report.best_pseudo_epoch);
    if (!report.test_accuracy.empty()) {
        for (double f : kBudgetFractions) {
            out["accuracy_at_" + format_double(f)] = format_double(report.accuracy_at_fraction(f));
        }
    }
    if (report.selection) {
        for (const auto& [k, v] : metrics_summary(*report.selection)) out["selection_" + k] = v;
    }
    return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + line + "'");
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

namespace {

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidArgument(what + ": bad number '" + s + "'");
    return v;
}

std::uint64_t to_uint(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidArgument(what + ": bad integer '" + s + "'");
    return v;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const fs::path& where) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InvalidArgument(where.string() + ": missing key '" + key + "'");
    return it->second;
}

}  // namespace

std::vector<CurvePoint> parse_run_curve(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("pseudo_epoch,", 0) != 0) {
        throw InvalidArgument("curve csv: missing header");
    }
    std::vector<CurvePoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) throw InvalidArgument("curve csv: expected 4 columns in '" + line + "'");
        out.push_back({to_uint(cells[0], "pseudo_epoch"), to_double(cells[1], "val_loss"),
                       to_double(cells[2], "test_acc"), to_double(cells[3], "lr")});
    }
    return out;
}

double RunRecord::accuracy_at_fraction(double fraction) const {
    RunReport r;
    r.test_accuracy = test_accuracy;
    return r.accuracy_at_fraction(fraction);
}

RunRecord load_run(const fs::path& dir) {
    const auto summary_path = dir / "summary.txt";
    const auto kv = parse_key_values(slurp(summary_path));
    RunRecord run;
    run.collection = require(kv, "collection", summary_path);
    run.method = require(kv, "method", summary_path);
    run.score = require(kv, "score", summary_path);
    run.iqpr = to_double(require(kv, "iqpr", summary_path), "iqpr");
    run.seed = to_uint(require(kv, "seed", summary_path), "seed");
    for (const auto& p : parse_run_curve(slurp(dir / "curve.csv"))) {
        if (p.pseudo_epoch > 0) run.test_accuracy.push_back(p.test_accuracy);
    }
    if (run.test_accuracy.empty()) throw InvalidArgument(dir.string() + ": run has no trained pseudo-epochs");
    return run;
}

std::vector<fs::path> find_runs(const fs::path& root) {
    std::vector<fs::path> out;
    auto is_run = [](const fs::path& d) { return fs::exists(d / "summary.txt") && fs::exists(d / "curve.csv"); };
    if (!fs::is_directory(root)) return out;
    if (is_run(root)) out.push_back(root);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_directory() && is_run(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<BudgetRow> budget_rows(const RunRecord& run) {
    std::vector<BudgetRow> rows;
    for (double f : kBudgetFractions) {
        rows.push_back({run.collection, run.method, run.score, run.iqpr, run.seed, f, run.accuracy_at_fraction(f)});
    }
    return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<BudgetRow>& rows) {
    using Key = std::tuple<std::string, std::string, std::string, double, double>;
    std::map<Key, Vector> groups;
    for (const auto& r : rows) {
        groups[{r.collection, r.method, r.score, r.iqpr, r.budget_fraction}].push_back(r.accuracy);
    }
    std::vector<AggregateRow> out;
    for (const auto& [key, acc] : groups) {
        const auto& [collection, method, score, iqpr, fraction] = key;
        out.push_back({collection, method, score, iqpr, fraction, acc.size(), mean(acc), population_stddev(acc)});
    }
    return out;
}

std::string report_csv(const std::vector<BudgetRow>& rows, const std::vector<AggregateRow>& groups) {
    std::string out = "kind,collection,method,score,iqpr,seed,budget_fraction,accuracy,std,runs\n";
    for (const auto& r : rows) {
        out += "run," + r.collection + "," + r.method + "," + r.score + "," + format_double(r.iqpr) + "," +
               std::to_string(r.seed) + "," + format_double(r.budget_fraction) + "," + format_double(r.accuracy) +
               ",,\n";
    }
    for (const auto& g : groups) {
        out += "mean," + g.collection + "," + g.method + "," + g.score + "," + format_double(g.iqpr) + ",," +
               format_double(g.budget_fraction) + "," + format_double(g.mean) + "," + format_double(g.std) + "," +
               std::to_string(g.runs) + "\n";
    }
    return out;
}

}  // namespace dh
