#include "dh/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dh/errors.hpp"

namespace dh {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw InvalidArgument("Matrix: value count " + std::to_string(values_.size()) +
                              " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

Prng::Prng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Prng Prng::derive(std::string_view key) const {
    return Prng(splitmix64(seed_ ^ splitmix64(fnv1a(key))));
}

std::size_t Prng::index(std::size_t n) {
    if (n == 0) throw InvalidArgument("Prng::index: empty range");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

namespace {

void check_softmax_args(std::span<const double> v, double temperature) {
    if (v.empty()) throw InvalidArgument("softmax: empty input");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvalidArgument("softmax: temperature must be positive and finite");
    }
    if (!all_finite(v)) throw InvalidArgument("softmax: non-finite input");
}

}  // namespace

Vector softmax(std::span<const double> v, double temperature) {
    check_softmax_args(v, temperature);
    const double top = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp((v[i] - top) / temperature);
        total += out[i];
    }
    for (double& x : out) x /= total;
    return out;
}

Vector log_softmax(std::span<const double> v, double temperature) {
    check_softmax_args(v, temperature);
    const double top = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = (v[i] - top) / temperature;
        total += std::exp(out[i]);
    }
    const double log_total = std::log(total);
    for (double& x : out) x -= log_total;
    return out;
}

double entropy(std::span<const double> p) {
    if (p.empty()) throw InvalidArgument("entropy: empty input");
    double total = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("entropy: negative or non-finite entry");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("entropy: entries do not sum to 1");
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log(x);
    }
    return std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw InvalidArgument("cosine_similarity: length mismatch");
    if (!all_finite(a) || !all_finite(b)) throw InvalidArgument("cosine_similarity: non-finite input");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw DegenerateInput("cosine_similarity: zero-norm input");
    return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double quantile(std::span<const double> v, double fraction) {
    if (v.empty()) throw InvalidArgument("quantile: empty input");
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("quantile: fraction outside [0, 1]");
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = fraction * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

void validate_probabilities(std::span<const double> q) {
    if (q.empty()) throw InvalidArgument("probability vector is empty");
    double total = 0.0;
    for (double x : q) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("probability vector has a negative or non-finite entry");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidArgument("probability vector sums to " + std::to_string(total));
    }
}

CategoricalSampler::CategoricalSampler(std::span<const double> q) {
    validate_probabilities(q);
    cumulative_.resize(q.size());
    double running = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        running += q[i];
        cumulative_[i] = running;
    }
    // Last non-empty bucket absorbs the rounding slack so every u in [0,1) lands.
    for (std::size_t i = q.size(); i-- > 0;) {
        if (q[i] > 0.0) {
            for (std::size_t j = i; j < q.size(); ++j) cumulative_[j] = std::numeric_limits<double>::infinity();
            break;
        }
    }
}

std::size_t CategoricalSampler::draw(Prng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::size_t>(it - cumulative_.begin());
}

std::vector<std::size_t> sample_categorical(std::span<const double> q, std::size_t n_draws, Prng& rng) {
    if (n_draws == 0) throw InvalidArgument("sample_categorical: n_draws must be >= 1");
    const CategoricalSampler sampler(q);
    std::vector<std::size_t> out(n_draws);
    for (auto& idx : out) idx = sampler.draw(rng);
    return out;
}

double mean(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("mean: empty input");
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
}

double population_stddev(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace dh
