#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dh/datagen.hpp"
#include "dh/numerics.hpp"
#include "dh/scores.hpp"

namespace dh {

struct LambdaCalibration {
    double lambda = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    bool fallback_uniform = false;  // quartiles coincide, lambda forced to 0
};

/// lambda = ln(iqpr) / (Q3 - Q1) over the score quartiles.
LambdaCalibration calibrate_lambda(std::span<const double> scores, double iqpr);

inline constexpr double kExponentClamp = 700.0;

/// Selection distribution q = softmax(lambda * scores) plus draw bookkeeping.
class SamplingPlan {
public:
    SamplingPlan() = default;

    /// Calibrates lambda from `iqpr`.
    static SamplingPlan from_iqpr(ScoreVector scores, double iqpr);
    /// Uses the given lambda directly; `iqpr` is only recorded.
    static SamplingPlan from_lambda(ScoreVector scores, double lambda, double iqpr = 0.0);
    /// Restores a plan from stored probabilities (no scores available).
    static SamplingPlan from_probabilities(Vector q, double lambda, double iqpr,
                                           std::vector<std::uint64_t> draw_counts = {});

    std::size_t size() const noexcept { return q_.size(); }
    const ScoreVector& scores() const noexcept { return scores_; }
    double iqpr() const noexcept { return iqpr_; }
    double lambda() const noexcept { return lambda_; }
    bool fallback_uniform() const noexcept { return fallback_; }
    /// Number of samples whose exponent lambda * (score - top score) was clamped at -700.
    std::size_t saturated() const noexcept { return saturated_; }
    const Vector& probabilities() const noexcept { return q_; }
    const std::vector<std::uint64_t>& draw_counts() const noexcept { return draw_counts_; }
    std::uint64_t total_draws() const noexcept;

    std::size_t draw(Prng& rng);
    void reset_counts();

private:
    void rebuild_sampler();

    ScoreVector scores_;
    double iqpr_ = 1.0;
    double lambda_ = 0.0;
    bool fallback_ = false;
    std::size_t saturated_ = 0;
    Vector q_;
    std::vector<std::uint64_t> draw_counts_;
    std::optional<CategoricalSampler> sampler_;
};

SamplingPlan build_plan(const ScoreVector& scores, double iqpr);

/// n_batches batches of batch_size with-replacement draws; updates plan.draw_counts.
std::vector<std::vector<std::size_t>> draw_batches(SamplingPlan& plan, std::size_t batch_size,
                                                   std::size_t n_batches, Prng& rng);

struct SelectionMetrics {
    double skip_ratio = 0.0;                   // percent never selected
    double uniformity = 0.0;                   // normalized entropy over selected samples
    std::optional<double> irrelevant_proportion;  // percent of selected tagged irrel
    std::size_t selected = 0;
    std::uint64_t draws = 0;
};

/// `tags` may be empty (no tag information) or have one entry per sample.
SelectionMetrics compute_metrics(std::span<const std::uint64_t> draw_counts, std::span<const SourceTag> tags);
SelectionMetrics compute_metrics(const SamplingPlan& plan, std::span<const SourceTag> tags);

}  // namespace dh
