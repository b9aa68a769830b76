#include "dh/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "dh/errors.hpp"

namespace dh {

LambdaCalibration calibrate_lambda(std::span<const double> scores, double iqpr) {
    if (!(iqpr >= 1.0) || !std::isfinite(iqpr)) throw InvalidArgument("calibrate_lambda: iqpr must be >= 1");
    if (scores.size() < 2) throw InvalidArgument("calibrate_lambda: need at least 2 scores");
    if (!all_finite(scores)) throw InvalidArgument("calibrate_lambda: non-finite score");
    LambdaCalibration cal;
    cal.q1 = quantile(scores, 0.25);
    cal.q3 = quantile(scores, 0.75);
    if (!(cal.q3 > cal.q1)) {
        cal.fallback_uniform = true;
        return cal;
    }
    cal.lambda = std::log(iqpr) / (cal.q3 - cal.q1);
    return cal;
}

SamplingPlan SamplingPlan::from_iqpr(ScoreVector scores, double iqpr) {
    const LambdaCalibration cal = calibrate_lambda(scores.values, iqpr);
    if (cal.fallback_uniform && iqpr > 1.0) {
        std::cerr << "warning: score quartiles coincide; falling back to uniform sampling\n";
    }
    SamplingPlan plan = from_lambda(std::move(scores), cal.lambda, iqpr);
    plan.fallback_ = cal.fallback_uniform;
    return plan;
}

SamplingPlan SamplingPlan::from_lambda(ScoreVector scores, double lambda, double iqpr) {
    if (scores.values.empty()) throw InvalidArgument("sampling plan needs at least one score");
    if (!all_finite(scores.values)) throw InvalidArgument("sampling plan: non-finite score");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("sampling plan: lambda must be >= 0");
    SamplingPlan plan;
    plan.iqpr_ = iqpr;
    plan.lambda_ = lambda;
    const std::size_t n = scores.values.size();
    // Exponents are taken relative to the top score so that only samples whose
    // probability would underflow are affected by the clamp.
    const double top = *std::max_element(scores.values.begin(), scores.values.end());
    Vector logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = lambda * (scores.values[i] - top);
        if (a < -kExponentClamp) {
            a = -kExponentClamp;
            ++plan.saturated_;
        }
        logits[i] = a;
    }
    if (plan.saturated_ > 0) {
        std::cerr << "warning: " << plan.saturated_ << " scaled scores clamped at -" << kExponentClamp
                  << " below the top score\n";
    }
    plan.q_ = lambda == 0.0 ? Vector(n, 1.0 / static_cast<double>(n)) : softmax(logits);
    plan.scores_ = std::move(scores);
    plan.draw_counts_.assign(n, 0);
    plan.rebuild_sampler();
    return plan;
}

SamplingPlan SamplingPlan::from_probabilities(Vector q, double lambda, double iqpr,
                                              std::vector<std::uint64_t> draw_counts) {
    validate_probabilities(q);
    if (!draw_counts.empty() && draw_counts.size() != q.size()) {
        throw InvalidArgument("sampling plan: draw counts length != probabilities length");
    }
    SamplingPlan plan;
    plan.iqpr_ = iqpr;
    plan.lambda_ = lambda;
    plan.draw_counts_ = draw_counts.empty() ? std::vector<std::uint64_t>(q.size(), 0) : std::move(draw_counts);
    plan.q_ = std::move(q);
    plan.rebuild_sampler();
    return plan;
}

void SamplingPlan::rebuild_sampler() { sampler_.emplace(q_); }

std::uint64_t SamplingPlan::total_draws() const noexcept {
    std::uint64_t t = 0;
    for (auto c : draw_counts_) t += c;
    return t;
}

std::size_t SamplingPlan::draw(Prng& rng) {
    if (!sampler_) throw InvalidState("sampling plan is empty");
    const std::size_t i = sampler_->draw(rng);
    ++draw_counts_[i];
    return i;
}

void SamplingPlan::reset_counts() { std::fill(draw_counts_.begin(), draw_counts_.end(), 0); }

SamplingPlan build_plan(const ScoreVector& scores, double iqpr) { return SamplingPlan::from_iqpr(scores, iqpr); }

std::vector<std::vector<std::size_t>> draw_batches(SamplingPlan& plan, std::size_t batch_size,
                                                   std::size_t n_batches, Prng& rng) {
    if (batch_size == 0) throw InvalidArgument("draw_batches: batch size must be >= 1");
    std::vector<std::vector<std::size_t>> batches(n_batches, std::vector<std::size_t>(batch_size));
    for (auto& batch : batches) {
        for (auto& idx : batch) idx = plan.draw(rng);
    }
    return batches;
}

SelectionMetrics compute_metrics(std::span<const std::uint64_t> draw_counts, std::span<const SourceTag> tags) {
    if (!tags.empty() && tags.size() != draw_counts.size()) {
        throw InvalidArgument("compute_metrics: tags length != collection size");
    }
    SelectionMetrics m;
    std::size_t selected_irrel = 0;
    bool any_irrel = false;
    for (std::size_t i = 0; i < draw_counts.size(); ++i) {
        m.draws += draw_counts[i];
        const bool irrel = !tags.empty() && tags[i] == SourceTag::irrel;
        any_irrel = any_irrel || irrel;
        if (draw_counts[i] > 0) {
            ++m.selected;
            if (irrel) ++selected_irrel;
        }
    }
    if (m.draws == 0) throw InvalidState("compute_metrics: no draws recorded");
    const auto n = static_cast<double>(draw_counts.size());
    m.skip_ratio = 100.0 * (n - static_cast<double>(m.selected)) / n;
    if (m.selected > 1) {
        double h = 0.0;
        const auto total = static_cast<double>(m.draws);
        for (auto c : draw_counts) {
            if (c == 0) continue;
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
        m.uniformity = std::clamp(h / std::log(static_cast<double>(m.selected)), 0.0, 1.0);
    }
    if (any_irrel) {
        m.irrelevant_proportion = 100.0 * static_cast<double>(selected_irrel) / static_cast<double>(m.selected);
    }
    return m;
}

SelectionMetrics compute_metrics(const SamplingPlan& plan, std::span<const SourceTag> tags) {
    return compute_metrics(plan.draw_counts(), tags);
}

}  // namespace dh
