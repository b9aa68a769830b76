#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dh/numerics.hpp"

namespace dh {

/// Isotropic Gaussian mixture with one component per class.
struct GaussianMixtureTask {
    std::vector<Vector> means;  // K means of dimension D
    Vector stds;                // K per-class standard deviations
    Vector weights;             // K mixing weights

    std::size_t class_count() const noexcept { return means.size(); }
    std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }

    /// Throws InvalidArgument if there are fewer than `min_components` means,
    /// D < 2, shapes disagree, means collide, stds are not positive or weights
    /// are not a probability vector.
    void validate(std::size_t min_components = 2) const;
};

enum class SourceTag : std::uint8_t { ori = 0, rel = 1, irrel = 2, unknown = 255 };

std::string_view tag_name(SourceTag tag) noexcept;

struct TaggedSample {
    Vector features;
    std::optional<int> label;
    SourceTag tag = SourceTag::unknown;

    bool operator==(const TaggedSample&) const = default;
};

using Samples = std::vector<TaggedSample>;

/// Composition of an unlabeled collection. Relevant samples are the task
/// mixture translated by `rel_shift`; irrelevant samples come from
/// `irrel_task`. `pi` is the prior p(s = i) used by the log-odds oracle.
struct CollectionSpec {
    double ori_fraction = 0.0;
    double rel_fraction = 0.0;
    double irrel_fraction = 0.0;
    Vector rel_shift;
    GaussianMixtureTask irrel_task;
    std::size_t n = 0;
    double pi = 0.5;

    void validate(const GaussianMixtureTask& task) const;
};

struct ComponentCounts {
    std::size_t ori = 0;
    std::size_t rel = 0;
    std::size_t irrel = 0;
};

/// Largest-remainder apportionment of n over the three fractions.
ComponentCounts component_counts(const CollectionSpec& spec);

Samples generate_task_data(const GaussianMixtureTask& task, std::size_t n, Prng& rng);

/// Unlabeled, tagged and shuffled. Tags are for metrics only.
Samples generate_collection(const CollectionSpec& spec, const GaussianMixtureTask& task, Prng& rng);

/// log rho(x) for the task mixture.
double mixture_log_density(const GaussianMixtureTask& task, std::span<const double> x);
/// log rho_O(x) for the collection mixture induced by `spec`.
double collection_log_density(const CollectionSpec& spec, const GaussianMixtureTask& task,
                              std::span<const double> x);

/// ln[p(s=i|x) / (1 - p(s=i|x))] from the two log densities and the prior.
/// Throws DegenerateInput when both densities underflow.
double log_odds(double log_rho_in, double log_rho_out, double pi);

double oracle_log_odds(std::span<const double> x, const GaussianMixtureTask& task, const CollectionSpec& spec);

struct ImportanceWeight {
    double value;
    bool saturated;  // exp overflowed; value is DBL_MAX
};

/// beta = ((1 - pi) / pi) * exp(lambda * u).
ImportanceWeight importance_weight(double lambda, double u, double pi);

/// Splits off the trailing `fraction` of samples (rounded, at least one) as a held-out set.
std::pair<Samples, Samples> split_holdout(Samples samples, double fraction);

}  // namespace dh
