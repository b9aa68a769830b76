#include "dh/datagen.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <string>

#include "dh/errors.hpp"

namespace dh {

void GaussianMixtureTask::validate(std::size_t min_components) const {
    const std::size_t k = class_count();
    if (k < std::max<std::size_t>(min_components, 1)) {
        throw InvalidArgument("mixture needs at least " + std::to_string(min_components) + " components");
    }
    if (dim() < 2) throw InvalidArgument("task feature dimension must be >= 2");
    if (stds.size() != k || weights.size() != k) throw InvalidArgument("task stds/weights length != class count");
    for (const auto& m : means) {
        if (m.size() != dim() || !all_finite(m)) throw InvalidArgument("task means must share a finite dimension");
    }
    for (double s : stds) {
        if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("task stds must be positive");
    }
    validate_probabilities(weights);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            if (means[i] == means[j]) throw InvalidArgument("task means must be pairwise distinct");
        }
    }
}

std::string_view tag_name(SourceTag tag) noexcept {
    switch (tag) {
        case SourceTag::ori: return "ori";
        case SourceTag::rel: return "rel";
        case SourceTag::irrel: return "irrel";
        case SourceTag::unknown: break;
    }
    return "unknown";
}

void CollectionSpec::validate(const GaussianMixtureTask& task) const {
    task.validate();
    for (double f : {ori_fraction, rel_fraction, irrel_fraction}) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("collection fractions must lie in [0, 1]");
    }
    if (std::abs(ori_fraction + rel_fraction + irrel_fraction - 1.0) > 1e-9) {
        throw InvalidArgument("collection fractions must sum to 1");
    }
    if (n < 1) throw InvalidArgument("collection size must be >= 1");
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("pi must lie in (0, 1)");
    if (rel_fraction > 0.0 && rel_shift.size() != task.dim()) {
        throw InvalidArgument("rel_shift dimension != task dimension");
    }
    if (irrel_fraction > 0.0) {
        irrel_task.validate(1);
        if (irrel_task.dim() != task.dim()) throw InvalidArgument("irrelevant task dimension != task dimension");
    }
}

ComponentCounts component_counts(const CollectionSpec& spec) {
    const double fractions[3] = {spec.ori_fraction, spec.rel_fraction, spec.irrel_fraction};
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = fractions[i] * static_cast<double>(spec.n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (int i = 0; assigned < spec.n; i = (i + 1) % 3) {
        if (fractions[order[i]] > 0.0) {
            ++counts[order[i]];
            ++assigned;
        }
    }
    return {counts[0], counts[1], counts[2]};
}

namespace {

Vector draw_from(const GaussianMixtureTask& task, std::size_t cls, std::span<const double> shift, Prng& rng) {
    Vector x(task.dim());
    for (std::size_t d = 0; d < x.size(); ++d) {
        x[d] = task.means[cls][d] + (shift.empty() ? 0.0 : shift[d]) + task.stds[cls] * rng.normal();
    }
    return x;
}

void append_mixture(Samples& out, const GaussianMixtureTask& task, std::size_t n, std::span<const double> shift,
                    SourceTag tag, bool labeled, Prng& rng) {
    const CategoricalSampler classes(task.weights);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = classes.draw(rng);
        TaggedSample s;
        s.features = draw_from(task, cls, shift, rng);
        if (labeled) s.label = static_cast<int>(cls);
        s.tag = tag;
        out.push_back(std::move(s));
    }
}

double log_sum_exp(std::span<const double> v) {
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double x : v) s += std::exp(x - top);
    return top + std::log(s);
}

double shifted_mixture_log_density(const GaussianMixtureTask& task, std::span<const double> x,
                                   std::span<const double> shift) {
    if (x.size() != task.dim()) throw InvalidArgument("density: feature dimension mismatch");
    const double dim = static_cast<double>(task.dim());
    Vector terms(task.class_count());
    for (std::size_t k = 0; k < task.class_count(); ++k) {
        double sq = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - task.means[k][d] - (shift.empty() ? 0.0 : shift[d]);
            sq += diff * diff;
        }
        const double var = task.stds[k] * task.stds[k];
        terms[k] = std::log(task.weights[k]) - 0.5 * sq / var - 0.5 * dim * std::log(2.0 * std::numbers::pi * var);
    }
    return log_sum_exp(terms);
}

}  // namespace

Samples generate_task_data(const GaussianMixtureTask& task, std::size_t n, Prng& rng) {
    task.validate();
    if (n < 1) throw InvalidArgument("generate_task_data: n must be >= 1");
    Samples out;
    out.reserve(n);
    append_mixture(out, task, n, {}, SourceTag::ori, true, rng);
    return out;
}

Samples generate_collection(const CollectionSpec& spec, const GaussianMixtureTask& task, Prng& rng) {
    spec.validate(task);
    const ComponentCounts counts = component_counts(spec);
    Samples out;
    out.reserve(spec.n);
    append_mixture(out, task, counts.ori, {}, SourceTag::ori, false, rng);
    append_mixture(out, task, counts.rel, spec.rel_shift, SourceTag::rel, false, rng);
    if (counts.irrel > 0) append_mixture(out, spec.irrel_task, counts.irrel, {}, SourceTag::irrel, false, rng);
    // Fisher-Yates with our own index draw keeps the order reproducible across standard libraries.
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[rng.index(i)]);
    }
    return out;
}

double mixture_log_density(const GaussianMixtureTask& task, std::span<const double> x) {
    return shifted_mixture_log_density(task, x, {});
}

double collection_log_density(const CollectionSpec& spec, const GaussianMixtureTask& task,
                              std::span<const double> x) {
    std::vector<double> terms;
    if (spec.ori_fraction > 0.0) terms.push_back(std::log(spec.ori_fraction) + mixture_log_density(task, x));
    if (spec.rel_fraction > 0.0) {
        terms.push_back(std::log(spec.rel_fraction) + shifted_mixture_log_density(task, x, spec.rel_shift));
    }
    if (spec.irrel_fraction > 0.0) {
        terms.push_back(std::log(spec.irrel_fraction) + mixture_log_density(spec.irrel_task, x));
    }
    if (terms.empty()) throw InvalidArgument("collection has no components");
    return log_sum_exp(terms);
}

double log_odds(double log_rho_in, double log_rho_out, double pi) {
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("log_odds: pi must lie in (0, 1)");
    const double underflow = std::log(DBL_MIN);
    if (log_rho_in < underflow && log_rho_out < underflow) {
        throw DegenerateInput("log_odds: both densities underflow");
    }
    if (std::isnan(log_rho_in) || std::isnan(log_rho_out)) throw InvalidArgument("log_odds: NaN density");
    return std::log(pi) - std::log1p(-pi) + log_rho_in - log_rho_out;
}

double oracle_log_odds(std::span<const double> x, const GaussianMixtureTask& task, const CollectionSpec& spec) {
    return log_odds(mixture_log_density(task, x), collection_log_density(spec, task, x), spec.pi);
}

ImportanceWeight importance_weight(double lambda, double u, double pi) {
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("importance_weight: pi must lie in (0, 1)");
    if (!std::isfinite(u) || !std::isfinite(lambda)) throw InvalidArgument("importance_weight: non-finite input");
    const double log_beta = std::log1p(-pi) - std::log(pi) + lambda * u;
    if (log_beta >= std::log(DBL_MAX)) return {DBL_MAX, true};
    return {std::exp(log_beta), false};
}

std::pair<Samples, Samples> split_holdout(Samples samples, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split_holdout: fraction must lie in (0, 1)");
    if (samples.size() < 2) throw InvalidArgument("split_holdout: need at least 2 samples");
    auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
    held = std::clamp<std::size_t>(held, 1, samples.size() - 1);
    Samples tail(std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(held)),
                 std::make_move_iterator(samples.end()));
    samples.resize(samples.size() - held);
    return {std::move(samples), std::move(tail)};
}

}  // namespace dh
