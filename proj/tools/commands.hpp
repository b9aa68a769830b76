#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dhkd {

/// Bad flag values or combinations; exits with status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Default location for outputs: $DHKD_OUT, else ./dhkd_out.
std::filesystem::path output_root();

/// Key/value record written next to every output.
struct Manifest {
    std::map<std::string, std::string> values;

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    void write(const std::filesystem::path& path) const;
};

/// Manifest of a file output lives at `<file>.manifest`; of a directory output at `<dir>/manifest.txt`.
std::filesystem::path manifest_for_file(const std::filesystem::path& file);
std::filesystem::path manifest_for_dir(const std::filesystem::path& dir);
/// Empty map when the manifest does not exist.
std::map<std::string, std::string> read_manifest(const std::filesystem::path& path);

struct GenOptions {
    std::string task = "gauss3";
    std::string collection = "rel+irrel";
    std::size_t n = 20000;
    std::optional<double> ori, rel, irrel;
    double holdout = 0.10;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    std::size_t test_size = 0;
    std::uint64_t seed = 1;
    std::string out;
};

struct TeachOptions {
    std::string train, val, test, out;
    std::vector<std::size_t> widths;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
};

struct ScoreOptions {
    std::string model, collection, score = "1c-sum", out, cache_out;
};

struct SampleOptions {
    std::string scores, collection, out, metrics_out;
    double iqpr = 1.0;
    std::uint64_t draws = 0;
    std::uint64_t seed = 1;
};

struct DistillOptions {
    std::string teacher, collection, val_collection, test, dist, cache, out;
    std::string method = "fixed-linear";
    std::string collection_name;
    std::vector<std::size_t> widths;
    double tau = 2.0;
    double lr = 0.01;
    double lr_decay = 0.4;
    std::size_t patience = 20;
    std::size_t pseudo_epoch_size = 500;
    std::size_t pseudo_epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    bool init_from_teacher = false;
};

struct EvalOptions {
    std::string model, data;
};

struct ReportOptions {
    std::vector<std::string> runs;
    std::string out;
};

// Each returns the process exit status. `config` is the resolved option set echoed into manifests.
using Resolved = std::map<std::string, std::string>;

int run_gen(const GenOptions& o, const Resolved& config);
int run_teach(const TeachOptions& o, const Resolved& config);
int run_score(const ScoreOptions& o, const Resolved& config);
int run_sample(const SampleOptions& o, const Resolved& config);
int run_distill(const DistillOptions& o, const Resolved& config);
int run_eval(const EvalOptions& o);
int run_report(const ReportOptions& o);

}  // namespace dhkd
