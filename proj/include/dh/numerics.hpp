#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dh {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Seeded generator. Streams for different sub-keys are derived by hashing
/// the key into the parent seed (splitmix64 finalizer), so "teacher-init",
/// "sampler", ... never share state. Engine is mt19937_64.
class Prng {
public:
    explicit Prng(std::uint64_t seed);

    Prng derive(std::string_view key) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal() { return normal_(engine_); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

bool all_finite(std::span<const double> v) noexcept;

/// Numerically stable softmax of v / temperature.
Vector softmax(std::span<const double> v, double temperature = 1.0);
/// log softmax(v / temperature), same stabilization.
Vector log_softmax(std::span<const double> v, double temperature = 1.0);

/// Shannon entropy in nats, 0 ln 0 = 0.
double entropy(std::span<const double> p);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Linear interpolation between order statistics at fraction * (n - 1).
double quantile(std::span<const double> v, double fraction);

/// First index of the maximum.
std::size_t argmax(std::span<const double> v);

/// Throws InvalidArgument unless q is a probability vector within 1e-9.
void validate_probabilities(std::span<const double> q);

/// Inverse-CDF sampler over a fixed probability vector.
class CategoricalSampler {
public:
    explicit CategoricalSampler(std::span<const double> q);

    std::size_t draw(Prng& rng) const;
    std::size_t size() const noexcept { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

std::vector<std::size_t> sample_categorical(std::span<const double> q, std::size_t n_draws, Prng& rng);

double mean(std::span<const double> v);
/// Population standard deviation (divides by n).
double population_stddev(std::span<const double> v);

}  // namespace dh
