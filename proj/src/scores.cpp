#include "dh/scores.hpp"

#include <cmath>
#include <string>

#include "dh/errors.hpp"

namespace dh {

TeacherCache::TeacherCache(std::size_t n, std::size_t classes, std::size_t latent_dim)
    : n_(n), classes_(classes), latent_dim_(latent_dim), logits_(n * classes, 0.0), latents_(n * latent_dim, 0.0) {}

void TeacherCache::validate() const {
    if (!all_finite(logits_) || !all_finite(latents_)) throw InvalidArgument("teacher cache has non-finite entries");
}

TeacherCache build_cache(const NetworkParams& teacher, std::span<const TaggedSample> samples) {
    teacher.validate();
    TeacherCache cache(samples.size(), teacher.class_count(), teacher.latent_dim());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].features.size() != teacher.input_dim()) {
            throw InvalidArgument("build_cache: sample " + std::to_string(i) + " has dimension " +
                                  std::to_string(samples[i].features.size()) + ", teacher expects " +
                                  std::to_string(teacher.input_dim()));
        }
        const ForwardRecord rec = forward(teacher, samples[i].features);
        std::copy(rec.logits.begin(), rec.logits.end(), cache.logits(i).begin());
        std::copy(rec.latent().begin(), rec.latent().end(), cache.latent(i).begin());
    }
    return cache;
}

std::string_view score_name(ScoreId id) noexcept { return id == ScoreId::t1000 ? "t1000" : "1c-sum"; }

ScoreId parse_score_id(std::string_view name) {
    if (name == "t1000") return ScoreId::t1000;
    if (name == "1c-sum" || name == "one_c_sum") return ScoreId::one_c_sum;
    throw InvalidArgument("unknown score '" + std::string(name) + "' (expected t1000 or 1c-sum)");
}

double t1000(std::span<const double> logits) {
    const Vector p = softmax(logits, kOdinTemperature);
    return p[argmax(p)];
}

namespace {

void check_cache(const TeacherCache& cache) {
    if (cache.class_count() < 2) throw InvalidArgument("scores need at least 2 classes");
    if (cache.size() == 0) throw InvalidArgument("scores need a non-empty cache");
    cache.validate();
}

}  // namespace

ScoreVector score_t1000(const TeacherCache& cache) {
    check_cache(cache);
    ScoreVector out{ScoreId::t1000, Vector(cache.size())};
    for (std::size_t i = 0; i < cache.size(); ++i) out.values[i] = t1000(cache.logits(i));
    return out;
}

OneCSumComponents one_c_sum_components(const TeacherCache& cache, const Dense& head) {
    check_cache(cache);
    if (head.out_dim() != cache.class_count() || head.in_dim() != cache.latent_dim()) {
        throw InvalidArgument("1c-sum: head shape does not match cache");
    }
    const std::size_t n = cache.size();
    OneCSumComponents c{Vector(n), Vector(n), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto logits = cache.logits(i);
        c.t1000[i] = t1000(logits);
        c.neg_entropy[i] = -entropy(softmax(logits));
        const auto z = cache.latent(i);
        const auto top = head.weight.row(argmax(logits));
        try {
            c.head_cosine[i] = cosine_similarity(z, top);
        } catch (const DegenerateInput&) {
            c.head_cosine[i] = 0.0;
        }
    }
    return c;
}

Vector sum_of_standardized(std::span<const Vector> components) {
    if (components.empty()) throw InvalidArgument("sum_of_standardized: no components");
    const std::size_t n = components.front().size();
    if (n < 2) throw InvalidArgument("standardization needs at least 2 samples");
    Vector total(n, 0.0);
    for (const Vector& comp : components) {
        if (comp.size() != n) throw InvalidArgument("sum_of_standardized: length mismatch");
        const double m = mean(comp);
        const double sd = population_stddev(comp);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) continue;
        for (std::size_t i = 0; i < n; ++i) total[i] += (comp[i] - m) / sd;
    }
    return total;
}

ScoreVector score_one_c_sum(const TeacherCache& cache, const Dense& head) {
    if (cache.size() < 2) throw InvalidArgument("1c-sum needs at least 2 samples");
    OneCSumComponents c = one_c_sum_components(cache, head);
    const Vector parts[3] = {std::move(c.t1000), std::move(c.neg_entropy), std::move(c.head_cosine)};
    return {ScoreId::one_c_sum, sum_of_standardized(parts)};
}

ScoreVector compute_scores(ScoreId id, const TeacherCache& cache, const Dense& head) {
    return id == ScoreId::t1000 ? score_t1000(cache) : score_one_c_sum(cache, head);
}

}  // namespace dh
