#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "dh/datagen.hpp"
#include "dh/models.hpp"
#include "dh/numerics.hpp"

namespace dh {

/// Teacher logits and latents for every collection sample, row-major.
class TeacherCache {
public:
    TeacherCache() = default;
    TeacherCache(std::size_t n, std::size_t classes, std::size_t latent_dim);

    std::size_t size() const noexcept { return n_; }
    std::size_t class_count() const noexcept { return classes_; }
    std::size_t latent_dim() const noexcept { return latent_dim_; }

    std::span<double> logits(std::size_t i) { return {logits_.data() + i * classes_, classes_}; }
    std::span<const double> logits(std::size_t i) const { return {logits_.data() + i * classes_, classes_}; }
    std::span<double> latent(std::size_t i) { return {latents_.data() + i * latent_dim_, latent_dim_}; }
    std::span<const double> latent(std::size_t i) const { return {latents_.data() + i * latent_dim_, latent_dim_}; }

    /// Throws InvalidArgument on non-finite entries.
    void validate() const;

    bool operator==(const TeacherCache&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t classes_ = 0;
    std::size_t latent_dim_ = 0;
    std::vector<double> logits_;
    std::vector<double> latents_;
};

/// One teacher forward pass per sample.
TeacherCache build_cache(const NetworkParams& teacher, std::span<const TaggedSample> samples);

enum class ScoreId : std::uint8_t { t1000 = 0, one_c_sum = 1 };

std::string_view score_name(ScoreId id) noexcept;
/// Accepts "t1000", "1c-sum", "one_c_sum". Throws InvalidArgument otherwise.
ScoreId parse_score_id(std::string_view name);

struct ScoreVector {
    ScoreId id = ScoreId::t1000;
    Vector values;

    bool operator==(const ScoreVector&) const = default;
};

inline constexpr double kOdinTemperature = 1000.0;

/// max_j softmax(logits / 1000)_j for one sample.
double t1000(std::span<const double> logits);

ScoreVector score_t1000(const TeacherCache& cache);

/// Raw per-sample 1C-Sum ingredients, each oriented higher = more in-distribution.
struct OneCSumComponents {
    Vector t1000;
    Vector neg_entropy;      // -H(softmax(logits))
    Vector head_cosine;      // cos(latent, W row of the top logit); 0 for an all-zero latent
};

OneCSumComponents one_c_sum_components(const TeacherCache& cache, const Dense& head);

/// Sum of population z-scores; components with (numerically) zero spread contribute 0.
Vector sum_of_standardized(std::span<const Vector> components);

ScoreVector score_one_c_sum(const TeacherCache& cache, const Dense& head);

ScoreVector compute_scores(ScoreId id, const TeacherCache& cache, const Dense& head);

}  // namespace dh
