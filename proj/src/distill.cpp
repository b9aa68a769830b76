#include "dh/distill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dh/errors.hpp"
#include "dh/kernels.hpp"

namespace dh {

std::string_view mode_name(DistillMode mode) noexcept {
    return mode == DistillMode::fixed_linear ? "fixed-linear" : "vanilla";
}

DistillMode parse_mode(std::string_view name) {
    if (name == "fixed-linear" || name == "fixed_linear") return DistillMode::fixed_linear;
    if (name == "vanilla") return DistillMode::vanilla;
    throw InvalidArgument("unknown distillation method '" + std::string(name) + "'");
}

KdLoss vanilla_kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                       double temperature) {
    if (teacher_logits.size() != student_logits.size() || teacher_logits.empty()) {
        throw InvalidArgument("vanilla_kd_loss: logit lengths differ");
    }
    const Vector pt = softmax(teacher_logits, temperature);
    const Vector log_ps = log_softmax(student_logits, temperature);
    KdLoss out{0.0, Vector(pt.size())};
    for (std::size_t j = 0; j < pt.size(); ++j) {
        out.loss -= pt[j] * log_ps[j];
        out.grad[j] = (std::exp(log_ps[j]) - pt[j]) / temperature;
    }
    return out;
}

LatentLoss fixed_linear_loss(std::span<const double> student_latent, std::span<const double> teacher_latent,
                             const Matrix* projection) {
    if (!all_finite(student_latent) || !all_finite(teacher_latent)) {
        throw InvalidArgument("fixed_linear_loss: non-finite latent");
    }
    Vector residual(teacher_latent.size());
    if (projection) {
        if (projection->rows() != teacher_latent.size() || projection->cols() != student_latent.size()) {
            throw InvalidArgument("fixed_linear_loss: projection shape does not match latents");
        }
        kernels::gemv(*projection, student_latent, {}, residual);
    } else {
        if (student_latent.size() != teacher_latent.size()) {
            throw InvalidArgument("fixed_linear_loss: identity projection needs equal latent sizes");
        }
        std::copy(student_latent.begin(), student_latent.end(), residual.begin());
    }
    LatentLoss out{0.0, Vector(student_latent.size()), std::nullopt};
    for (std::size_t i = 0; i < residual.size(); ++i) {
        residual[i] -= teacher_latent[i];
        out.loss += residual[i] * residual[i];
    }
    if (projection) {
        kernels::gemv_t(*projection, residual, out.grad_latent);
        for (double& g : out.grad_latent) g *= 2.0;
        out.grad_projection.emplace(projection->rows(), projection->cols());
        kernels::ger(2.0, residual, student_latent, *out.grad_projection);
    } else {
        for (std::size_t i = 0; i < residual.size(); ++i) out.grad_latent[i] = 2.0 * residual[i];
    }
    return out;
}

Vector StudentModel::logits(std::span<const double> x) const {
    if (!projection) return predict_logits(net, x);
    const ForwardRecord rec = forward_extractor(net, x);
    Vector projected(projection->rows());
    kernels::gemv(*projection, rec.latent(), {}, projected);
    Vector out(net.head.out_dim());
    kernels::gemv(net.head.weight, projected, net.head.bias, out);
    return out;
}

NetworkParams StudentModel::to_network() const {
    if (!projection) return net;
    NetworkParams folded = net;
    const Matrix& w = net.head.weight;
    const Matrix& p = *projection;
    Matrix wp(w.rows(), p.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t k = 0; k < w.cols(); ++k) {
            for (std::size_t c = 0; c < p.cols(); ++c) wp(r, c) += w(r, k) * p(k, c);
        }
    }
    folded.head.weight = std::move(wp);
    return folded;
}

StudentModel make_student(const NetworkParams& teacher, std::span<const std::size_t> widths, DistillMode mode,
                          Prng& rng) {
    teacher.validate();
    if (widths.size() < 2 || widths.front() != teacher.input_dim()) {
        throw InvalidArgument("make_student: student widths must start at the teacher input dimension");
    }
    StudentModel s;
    s.mode = mode;
    s.net = init_params(widths, teacher.class_count(), rng);
    if (mode == DistillMode::fixed_linear) {
        s.net.head = teacher.head;
        const std::size_t ps = widths.back();
        const std::size_t pt = teacher.latent_dim();
        if (ps != pt) {
            Matrix p(pt, ps);
            const double scale = std::sqrt(1.0 / static_cast<double>(ps));
            for (double& v : p.values()) v = scale * rng.normal();
            s.projection = std::move(p);
        }
    }
    return s;
}

StudentModel clone_teacher(const NetworkParams& teacher, DistillMode mode) {
    teacher.validate();
    return StudentModel{mode, teacher, std::nullopt};
}

void DistillConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw InvalidArgument("lr decay factor must lie in (0, 1)");
    if (patience == 0) throw InvalidArgument("patience must be >= 1");
    if (pseudo_epoch_size == 0) throw InvalidArgument("pseudo-epoch size must be >= 1");
    if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
}

double RunReport::accuracy_at_fraction(double fraction) const {
    if (test_accuracy.empty()) throw InvalidState("run report has no pseudo-epochs");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("budget fraction must lie in (0, 1]");
    const auto n = static_cast<double>(test_accuracy.size());
    auto idx = static_cast<std::size_t>(std::ceil(fraction * n - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, test_accuracy.size());
    return test_accuracy[idx - 1];
}

namespace {

// Loss of one sample; when `grads` is given, accumulates parameter gradients
// (and projection gradient) scaled by `weight`.
double sample_loss(const StudentModel& student, std::span<const double> x, std::span<const double> teacher_logits,
                   std::span<const double> teacher_latent, double temperature, NetworkParams* grads,
                   Matrix* grad_projection, double weight) {
    if (student.mode == DistillMode::vanilla) {
        const ForwardRecord rec = forward(student.net, x);
        KdLoss kd = vanilla_kd_loss(teacher_logits, rec.logits, temperature);
        if (grads) grads->add_scaled(backward_from_logits(student.net, rec, kd.grad).params, weight);
        return kd.loss;
    }
    const ForwardRecord rec = forward_extractor(student.net, x);
    const Matrix* proj = student.projection ? &*student.projection : nullptr;
    LatentLoss fl = fixed_linear_loss(rec.latent(), teacher_latent, proj);
    if (grads) {
        grads->add_scaled(backward_from_latent(student.net, rec, fl.grad_latent).params, weight);
        if (grad_projection && fl.grad_projection) {
            kernels::axpy(weight, fl.grad_projection->values(), grad_projection->values());
        }
    }
    return fl.loss;
}

void check_cache_for(const TeacherCache& cache, std::span<const TaggedSample> samples, const NetworkParams& teacher,
                     const char* what) {
    if (cache.size() != samples.size() || cache.class_count() != teacher.class_count() ||
        cache.latent_dim() != teacher.latent_dim()) {
        throw InvalidArgument(std::string("distill: ") + what + " cache does not match samples/teacher");
    }
}

}  // namespace

double distillation_loss(const StudentModel& student, std::span<const TaggedSample> samples,
                         const TeacherCache& cache, double temperature) {
    if (samples.empty()) throw InvalidArgument("distillation_loss: no samples");
    if (cache.size() != samples.size()) throw InvalidArgument("distillation_loss: cache size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        total += sample_loss(student, samples[i].features, cache.logits(i), cache.latent(i), temperature, nullptr,
                             nullptr, 0.0);
    }
    return total / static_cast<double>(samples.size());
}

double evaluate(const StudentModel& student, std::span<const TaggedSample> data) {
    return evaluate(student.to_network(), data);
}

DistillResult distill_student(const NetworkParams& teacher, StudentModel student, const DistillData& data,
                              const SamplingPlan& plan, const DistillConfig& config) {
    config.validate();
    teacher.validate();
    if (data.collection.empty()) throw InvalidArgument("distill: empty collection");
    if (data.validation.empty()) throw InvalidArgument("distill: empty validation collection");
    if (data.test.empty()) throw InvalidArgument("distill: empty test set");
    if (plan.size() != data.collection.size()) {
        throw InvalidArgument("distill: sampling plan covers " + std::to_string(plan.size()) +
                              " samples, collection has " + std::to_string(data.collection.size()));
    }
    if (student.net.input_dim() != teacher.input_dim() || student.net.class_count() != teacher.class_count()) {
        throw InvalidArgument("distill: student does not match teacher input/class dimensions");
    }
    if (student.mode == DistillMode::fixed_linear) {
        const std::size_t projected = student.projection ? student.projection->rows() : student.net.latent_dim();
        if (projected != teacher.latent_dim()) throw InvalidArgument("distill: projection does not reach teacher latent");
    }

    TeacherCache own_collection_cache, own_validation_cache;
    const TeacherCache* collection_cache = data.collection_cache;
    if (!collection_cache) {
        own_collection_cache = build_cache(teacher, data.collection);
        collection_cache = &own_collection_cache;
    }
    const TeacherCache* validation_cache = data.validation_cache;
    if (!validation_cache) {
        own_validation_cache = build_cache(teacher, data.validation);
        validation_cache = &own_validation_cache;
    }
    check_cache_for(*collection_cache, data.collection, teacher, "collection");
    check_cache_for(*validation_cache, data.validation, teacher, "validation");

    SamplingPlan sampling = plan;
    sampling.reset_counts();
    Prng sampler_rng = Prng(config.seed).derive("sampler");

    DistillResult result;
    RunReport& report = result.report;
    report.initial_val_loss = distillation_loss(student, data.validation, *validation_cache, config.temperature);
    report.initial_test_accuracy = evaluate(student, data.test);

    StudentModel best = student;
    double best_val = report.initial_val_loss;
    report.best_accuracy = report.initial_test_accuracy;
    double lr = config.learning_rate;
    std::size_t stall = 0;

    const bool train_projection = student.mode == DistillMode::fixed_linear && student.projection.has_value();
    for (std::size_t epoch = 1; epoch <= config.pseudo_epochs; ++epoch) {
        std::size_t remaining = config.pseudo_epoch_size;
        while (remaining > 0) {
            const std::size_t batch = std::min(remaining, config.batch_size);
            remaining -= batch;
            NetworkParams grads = student.net.zeros_like();
            std::optional<Matrix> grad_proj;
            if (train_projection) grad_proj.emplace(student.projection->rows(), student.projection->cols());
            const double weight = 1.0 / static_cast<double>(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t i = sampling.draw(sampler_rng);
                sample_loss(student, data.collection[i].features, collection_cache->logits(i),
                            collection_cache->latent(i), config.temperature, &grads,
                            grad_proj ? &*grad_proj : nullptr, weight);
            }
            if (student.mode == DistillMode::fixed_linear) {
                // Frozen head: only the extractor (and P) move.
                for (std::size_t l = 0; l < grads.extractor.size(); ++l) {
                    kernels::axpy(-lr, grads.extractor[l].weight.values(), student.net.extractor[l].weight.values());
                    kernels::axpy(-lr, grads.extractor[l].bias, student.net.extractor[l].bias);
                }
                if (grad_proj) kernels::axpy(-lr, grad_proj->values(), student.projection->values());
            } else {
                student.net.add_scaled(grads, -lr);
            }
        }

        const double val = distillation_loss(student, data.validation, *validation_cache, config.temperature);
        const double acc = evaluate(student, data.test);
        report.val_loss.push_back(val);
        report.test_accuracy.push_back(acc);
        report.learning_rate.push_back(lr);
        if (!std::isfinite(val)) throw InvalidState("distill: validation loss diverged at pseudo-epoch " + std::to_string(epoch));
        if (val < best_val) {
            best_val = val;
            best = student;
            report.best_accuracy = acc;
            report.best_pseudo_epoch = epoch;
            stall = 0;
        } else if (++stall >= config.patience) {
            lr *= config.lr_decay;
            stall = 0;
        }
    }
    report.final_accuracy = report.test_accuracy.empty() ? report.initial_test_accuracy : report.test_accuracy.back();

    std::vector<SourceTag> tags(data.collection.size());
    for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = data.collection[i].tag;
    if (sampling.total_draws() > 0) report.selection = compute_metrics(sampling, tags);

    report.config = {
        {"method", std::string(mode_name(student.mode))},
        {"tau", std::to_string(config.temperature)},
        {"lr", std::to_string(config.learning_rate)},
        {"lr_decay", std::to_string(config.lr_decay)},
        {"patience", std::to_string(config.patience)},
        {"pseudo_epoch_size", std::to_string(config.pseudo_epoch_size)},
        {"pseudo_epochs", std::to_string(config.pseudo_epochs)},
        {"batch_size", std::to_string(config.batch_size)},
        {"seed", std::to_string(config.seed)},
        {"lambda", std::to_string(plan.lambda())},
        {"iqpr", std::to_string(plan.iqpr())},
    };
    result.student = std::move(best);
    result.draw_counts = sampling.draw_counts();
    return result;
}

DistillResult distill_student(const NetworkParams& teacher, const DistillData& data, const SamplingPlan& plan,
                              const DistillConfig& config, DistillMode mode,
                              std::span<const std::size_t> student_widths) {
    Prng init_rng = Prng(config.seed).derive("student-init");
    return distill_student(teacher, make_student(teacher, student_widths, mode, init_rng), data, plan, config);
}

}  // namespace dh
