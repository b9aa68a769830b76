#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dh/distill.hpp"
#include "dh/sampler.hpp"

namespace dh {

inline constexpr std::array<double, 6> kBudgetFractions{0.025, 0.05, 0.10, 0.25, 0.50, 1.0};

/// pseudo_epoch,val_loss,test_acc,lr with row 0 holding the untrained student.
std::string run_curve_csv(const RunReport& report);

/// Headline numbers, selection metrics and config echo as key/value pairs.
std::map<std::string, std::string> run_summary(const RunReport& report);

std::map<std::string, std::string> metrics_summary(const SelectionMetrics& metrics);

/// Round-trip-safe decimal text for a double.
std::string format_double(double value);

/// Parses key=value lines (no comments, no validation of keys).
std::map<std::string, std::string> parse_key_values(const std::string& text);

struct CurvePoint {
    std::size_t pseudo_epoch = 0;
    double val_loss = 0.0;
    double test_accuracy = 0.0;
    double learning_rate = 0.0;
};

std::vector<CurvePoint> parse_run_curve(const std::string& csv);

/// One finished distillation run as found on disk.
struct RunRecord {
    std::string collection;
    std::string method;
    std::string score;
    double iqpr = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> test_accuracy;  // per trained pseudo-epoch

    double accuracy_at_fraction(double fraction) const;
};

/// Reads `summary.txt` and `curve.csv` from a run directory.
RunRecord load_run(const std::filesystem::path& dir);

/// Run directories below `root` (including `root` itself), sorted by path.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root);

struct BudgetRow {
    std::string collection;
    std::string method;
    std::string score;
    double iqpr = 1.0;
    std::uint64_t seed = 0;
    double budget_fraction = 1.0;
    double accuracy = 0.0;
};

struct AggregateRow {
    std::string collection;
    std::string method;
    std::string score;
    double iqpr = 1.0;
    double budget_fraction = 1.0;
    std::size_t runs = 0;
    double mean = 0.0;
    double std = 0.0;  // population
};

std::vector<BudgetRow> budget_rows(const RunRecord& run);
std::vector<AggregateRow> aggregate(const std::vector<BudgetRow>& rows);

/// kind,collection,method,score,iqpr,seed,budget_fraction,accuracy,std,runs
std::string report_csv(const std::vector<BudgetRow>& rows, const std::vector<AggregateRow>& groups);

}  // namespace dh
