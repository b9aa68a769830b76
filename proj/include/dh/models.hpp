#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dh/datagen.hpp"
#include "dh/numerics.hpp"

namespace dh {

/// Affine map y = weight * x + bias; weight is (out x in).
struct Dense {
    Matrix weight;
    Vector bias;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }
    bool operator==(const Dense&) const = default;
};

/// Rectified MLP feature extractor followed by a linear head:
///   z = relu(... relu(W1 x + b1) ...),  logits = W z + b.
/// The same struct doubles as a gradient container.
struct NetworkParams {
    std::vector<Dense> extractor;
    Dense head;

    std::size_t input_dim() const noexcept { return extractor.front().in_dim(); }
    std::size_t latent_dim() const noexcept { return head.in_dim(); }
    std::size_t class_count() const noexcept { return head.out_dim(); }
    /// Layer widths [D, hidden..., p].
    std::vector<std::size_t> widths() const;

    /// Throws InvalidArgument on broken chaining or non-finite values.
    void validate() const;
    NetworkParams zeros_like() const;
    /// this += alpha * other (shapes must match).
    void add_scaled(const NetworkParams& other, double alpha);
    void scale(double alpha);
    /// Weight matrices only (biases excluded), this += alpha * other.
    void add_scaled_weights(const NetworkParams& other, double alpha);
    std::size_t parameter_count() const noexcept;

    bool operator==(const NetworkParams&) const = default;
};

struct ForwardRecord {
    Vector input;
    std::vector<Vector> pre_activations;  // one per extractor layer
    std::vector<Vector> activations;      // relu(pre_activation); back() is the latent
    Vector logits;

    const Vector& latent() const { return activations.back(); }
};

ForwardRecord forward(const NetworkParams& params, std::span<const double> x);
/// Latent only; the head is not evaluated.
ForwardRecord forward_extractor(const NetworkParams& params, std::span<const double> x);
Vector predict_logits(const NetworkParams& params, std::span<const double> x);

struct Gradients {
    NetworkParams params;  // same layout as the network
    Vector input;
};

/// Reverse-mode gradients given dLoss/dlogits.
Gradients backward_from_logits(const NetworkParams& params, const ForwardRecord& record,
                               std::span<const double> logit_grad);
/// Reverse-mode gradients given dLoss/dlatent; head gradients are zero.
Gradients backward_from_latent(const NetworkParams& params, const ForwardRecord& record,
                               std::span<const double> latent_grad);

/// He-normal weights (variance 2 / fan_in), zero biases.
NetworkParams init_params(std::span<const std::size_t> widths, std::size_t class_count, Prng& rng);

struct TeacherConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
};

struct TeacherResult {
    NetworkParams params;
    double best_val_accuracy = 0.0;       // percent
    std::size_t best_epoch = 0;           // 0 = initial params
    std::vector<double> val_accuracy;     // per epoch
    std::vector<double> train_loss;       // mean cross-entropy per epoch
};

/// Cross-entropy SGD with momentum and weight decay, best-by-validation selection.
TeacherResult train_teacher(std::span<const TaggedSample> train, std::span<const TaggedSample> val,
                            std::span<const std::size_t> widths, const TeacherConfig& config);

/// Percentage of argmax-correct predictions.
double evaluate(const NetworkParams& params, std::span<const TaggedSample> data);

}  // namespace dh
