#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dh/datagen.hpp"
#include "dh/models.hpp"
#include "dh/numerics.hpp"
#include "dh/sampler.hpp"
#include "dh/scores.hpp"

namespace dh {

enum class DistillMode { fixed_linear, vanilla };

std::string_view mode_name(DistillMode mode) noexcept;
/// Accepts "fixed-linear" / "fixed_linear" / "vanilla".
DistillMode parse_mode(std::string_view name);

struct KdLoss {
    double loss;
    Vector grad;  // d loss / d student logits
};

/// Softened cross-entropy -sum_j pt_j ln ps_j with p = softmax(logits / tau).
KdLoss vanilla_kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                       double temperature);

struct LatentLoss {
    double loss;
    Vector grad_latent;                    // d loss / d z_s
    std::optional<Matrix> grad_projection;  // d loss / d P, absent for the identity
};

/// ||P z_s - z_t||^2. A null projection means the identity (requires p_s == p_t).
LatentLoss fixed_linear_loss(std::span<const double> student_latent, std::span<const double> teacher_latent,
                             const Matrix* projection);

/// Student network. In fixed-linear mode `net.head` holds the teacher head and
/// is never updated; logits are W_t (P z_s) + b_t. Without a projection P is
/// the identity. In vanilla mode the head is the student's own.
struct StudentModel {
    DistillMode mode = DistillMode::fixed_linear;
    NetworkParams net;
    std::optional<Matrix> projection;  // p_t x p_s

    Vector logits(std::span<const double> x) const;
    /// Plain network with the projection folded into the head (W_t P, b_t).
    NetworkParams to_network() const;
};

/// Fresh student with extractor widths [D, ..., p_s].
StudentModel make_student(const NetworkParams& teacher, std::span<const std::size_t> widths, DistillMode mode,
                          Prng& rng);
/// Student whose extractor is a copy of the teacher's (P = identity).
StudentModel clone_teacher(const NetworkParams& teacher, DistillMode mode);

struct DistillConfig {
    double temperature = 2.0;
    double learning_rate = 0.01;
    double lr_decay = 0.4;
    std::size_t patience = 20;
    std::size_t pseudo_epoch_size = 500;
    std::size_t pseudo_epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RunReport {
    std::vector<double> val_loss;        // per pseudo-epoch
    std::vector<double> test_accuracy;   // per pseudo-epoch, percent
    std::vector<double> learning_rate;   // rate used during each pseudo-epoch
    double initial_val_loss = 0.0;
    double initial_test_accuracy = 0.0;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;          // accuracy of the returned (best-by-validation) student
    std::size_t best_pseudo_epoch = 0;
    std::optional<SelectionMetrics> selection;
    std::vector<std::pair<std::string, std::string>> config;

    /// Test accuracy after round-up(fraction * pseudo_epochs) pseudo-epochs.
    double accuracy_at_fraction(double fraction) const;
};

struct DistillData {
    std::span<const TaggedSample> collection;
    const TeacherCache* collection_cache = nullptr;  // built on the fly when null
    std::span<const TaggedSample> validation;
    const TeacherCache* validation_cache = nullptr;
    std::span<const TaggedSample> test;              // labeled
};

struct DistillResult {
    StudentModel student;
    RunReport report;
    std::vector<std::uint64_t> draw_counts;
};

DistillResult distill_student(const NetworkParams& teacher, StudentModel initial, const DistillData& data,
                              const SamplingPlan& plan, const DistillConfig& config);

DistillResult distill_student(const NetworkParams& teacher, const DistillData& data, const SamplingPlan& plan,
                              const DistillConfig& config, DistillMode mode,
                              std::span<const std::size_t> student_widths);

/// Mean distillation loss of `student` over samples with cached teacher outputs.
double distillation_loss(const StudentModel& student, std::span<const TaggedSample> samples,
                         const TeacherCache& cache, double temperature);

double evaluate(const StudentModel& student, std::span<const TaggedSample> data);

}  // namespace dh
