#include "dh/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "dh/errors.hpp"
#include "dh/kernels.hpp"

namespace dh {

std::vector<std::size_t> NetworkParams::widths() const {
    std::vector<std::size_t> w;
    if (extractor.empty()) return w;
    w.push_back(extractor.front().in_dim());
    for (const auto& layer : extractor) w.push_back(layer.out_dim());
    return w;
}

void NetworkParams::validate() const {
    if (extractor.empty()) throw InvalidArgument("network has no extractor layers");
    std::size_t expected_in = extractor.front().in_dim();
    auto check = [](const Dense& layer, std::size_t in, const char* what) {
        if (layer.in_dim() != in || layer.bias.size() != layer.out_dim() || layer.out_dim() == 0) {
            throw InvalidArgument(std::string("network: ") + what + " shape does not chain");
        }
        if (!all_finite(layer.weight.values()) || !all_finite(layer.bias)) {
            throw InvalidArgument(std::string("network: ") + what + " has non-finite parameters");
        }
    };
    for (const auto& layer : extractor) {
        check(layer, expected_in, "extractor layer");
        expected_in = layer.out_dim();
    }
    check(head, expected_in, "head");
    if (head.out_dim() < 2) throw InvalidArgument("network: class count must be >= 2");
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z;
    for (const auto& layer : extractor) {
        z.extractor.push_back({Matrix(layer.out_dim(), layer.in_dim()), Vector(layer.out_dim(), 0.0)});
    }
    z.head = {Matrix(head.out_dim(), head.in_dim()), Vector(head.out_dim(), 0.0)};
    return z;
}

namespace {

void add_dense(Dense& dst, const Dense& src, double alpha) {
    if (dst.weight.rows() != src.weight.rows() || dst.weight.cols() != src.weight.cols()) {
        throw InvalidArgument("add_scaled: shape mismatch");
    }
    kernels::axpy(alpha, src.weight.values(), dst.weight.values());
    kernels::axpy(alpha, src.bias, dst.bias);
}

}  // namespace

void NetworkParams::add_scaled(const NetworkParams& other, double alpha) {
    if (other.extractor.size() != extractor.size()) throw InvalidArgument("add_scaled: depth mismatch");
    for (std::size_t i = 0; i < extractor.size(); ++i) add_dense(extractor[i], other.extractor[i], alpha);
    add_dense(head, other.head, alpha);
}

void NetworkParams::scale(double alpha) {
    auto scale_dense = [alpha](Dense& d) {
        for (double& v : d.weight.values()) v *= alpha;
        for (double& v : d.bias) v *= alpha;
    };
    for (auto& layer : extractor) scale_dense(layer);
    scale_dense(head);
}

void NetworkParams::add_scaled_weights(const NetworkParams& other, double alpha) {
    if (other.extractor.size() != extractor.size()) throw InvalidArgument("add_scaled_weights: depth mismatch");
    for (std::size_t i = 0; i < extractor.size(); ++i) {
        kernels::axpy(alpha, other.extractor[i].weight.values(), extractor[i].weight.values());
    }
    kernels::axpy(alpha, other.head.weight.values(), head.weight.values());
}

std::size_t NetworkParams::parameter_count() const noexcept {
    std::size_t n = head.weight.size() + head.bias.size();
    for (const auto& layer : extractor) n += layer.weight.size() + layer.bias.size();
    return n;
}

ForwardRecord forward_extractor(const NetworkParams& params, std::span<const double> x) {
    if (params.extractor.empty() || x.size() != params.input_dim()) {
        throw InvalidArgument("forward: input has length " + std::to_string(x.size()) + ", expected " +
                              std::to_string(params.extractor.empty() ? 0 : params.input_dim()));
    }
    ForwardRecord rec;
    rec.input.assign(x.begin(), x.end());
    rec.pre_activations.reserve(params.extractor.size());
    rec.activations.reserve(params.extractor.size());
    std::span<const double> current = rec.input;
    for (const auto& layer : params.extractor) {
        Vector pre(layer.out_dim());
        kernels::gemv(layer.weight, current, layer.bias, pre);
        Vector act(pre.size());
        std::transform(pre.begin(), pre.end(), act.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
        rec.pre_activations.push_back(std::move(pre));
        rec.activations.push_back(std::move(act));
        current = rec.activations.back();
    }
    return rec;
}

ForwardRecord forward(const NetworkParams& params, std::span<const double> x) {
    ForwardRecord rec = forward_extractor(params, x);
    if (params.head.in_dim() != rec.latent().size()) throw InvalidArgument("forward: head does not match latent");
    rec.logits.resize(params.head.out_dim());
    kernels::gemv(params.head.weight, rec.latent(), params.head.bias, rec.logits);
    return rec;
}

Vector predict_logits(const NetworkParams& params, std::span<const double> x) {
    return forward(params, x).logits;
}

namespace {

void check_record(const NetworkParams& params, const ForwardRecord& record) {
    if (record.activations.size() != params.extractor.size() ||
        record.pre_activations.size() != params.extractor.size() || record.input.size() != params.input_dim()) {
        throw InvalidArgument("backward: record does not match network");
    }
    for (std::size_t i = 0; i < params.extractor.size(); ++i) {
        if (record.activations[i].size() != params.extractor[i].out_dim()) {
            throw InvalidArgument("backward: record does not match network");
        }
    }
}

// Propagates dLoss/dlatent down through the rectified extractor into `grads`.
void backprop_extractor(const NetworkParams& params, const ForwardRecord& record, Vector delta, Gradients& grads) {
    for (std::size_t l = params.extractor.size(); l-- > 0;) {
        const Vector& pre = record.pre_activations[l];
        for (std::size_t i = 0; i < delta.size(); ++i) {
            if (!(pre[i] > 0.0)) delta[i] = 0.0;
        }
        const Vector& below = l == 0 ? record.input : record.activations[l - 1];
        Dense& g = grads.params.extractor[l];
        kernels::ger(1.0, delta, below, g.weight);
        g.bias = delta;
        Vector next(below.size());
        kernels::gemv_t(params.extractor[l].weight, delta, next);
        delta = std::move(next);
    }
    grads.input = std::move(delta);
}

}  // namespace

Gradients backward_from_logits(const NetworkParams& params, const ForwardRecord& record,
                               std::span<const double> logit_grad) {
    check_record(params, record);
    if (logit_grad.size() != params.class_count()) throw InvalidArgument("backward: logit gradient length mismatch");
    Gradients grads{params.zeros_like(), {}};
    kernels::ger(1.0, logit_grad, record.latent(), grads.params.head.weight);
    grads.params.head.bias.assign(logit_grad.begin(), logit_grad.end());
    Vector delta(params.latent_dim());
    kernels::gemv_t(params.head.weight, logit_grad, delta);
    backprop_extractor(params, record, std::move(delta), grads);
    return grads;
}

Gradients backward_from_latent(const NetworkParams& params, const ForwardRecord& record,
                               std::span<const double> latent_grad) {
    check_record(params, record);
    if (latent_grad.size() != params.extractor.back().out_dim()) throw InvalidArgument("backward: latent gradient length mismatch");
    Gradients grads{params.zeros_like(), {}};
    backprop_extractor(params, record, Vector(latent_grad.begin(), latent_grad.end()), grads);
    return grads;
}

namespace {

Dense he_dense(std::size_t in, std::size_t out, Prng& rng) {
    Dense d{Matrix(out, in), Vector(out, 0.0)};
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : d.weight.values()) w = scale * rng.normal();
    return d;
}

}  // namespace

NetworkParams init_params(std::span<const std::size_t> widths, std::size_t class_count, Prng& rng) {
    if (widths.size() < 2) throw InvalidArgument("init_params: need at least input and latent widths");
    if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
        throw InvalidArgument("init_params: widths must be positive");
    }
    if (class_count < 2) throw InvalidArgument("init_params: class count must be >= 2");
    NetworkParams p;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) p.extractor.push_back(he_dense(widths[i], widths[i + 1], rng));
    p.head = he_dense(widths.back(), class_count, rng);
    return p;
}

double evaluate(const NetworkParams& params, std::span<const TaggedSample> data) {
    if (data.empty()) throw InvalidArgument("evaluate: empty data");
    std::size_t correct = 0;
    for (const auto& s : data) {
        if (!s.label) throw InvalidArgument("evaluate: unlabeled sample");
        if (argmax(predict_logits(params, s.features)) == static_cast<std::size_t>(*s.label)) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

TeacherResult train_teacher(std::span<const TaggedSample> train, std::span<const TaggedSample> val,
                            std::span<const std::size_t> widths, const TeacherConfig& config) {
    if (train.empty() || val.empty()) throw InvalidArgument("train_teacher: empty train or validation data");
    std::set<int> labels;
    int max_label = 0;
    for (const auto& s : train) {
        if (!s.label || *s.label < 0) throw InvalidArgument("train_teacher: training data must be labeled");
        labels.insert(*s.label);
        max_label = std::max(max_label, *s.label);
    }
    if (labels.size() < 2) throw InvalidArgument("train_teacher: need at least 2 classes in training data");
    if (config.batch_size == 0) throw InvalidArgument("train_teacher: batch size must be >= 1");

    Prng root(config.seed);
    Prng init_rng = root.derive("teacher-init");
    Prng order_rng = root.derive("teacher-order");
    const auto class_count = static_cast<std::size_t>(max_label) + 1;

    TeacherResult result;
    result.params = init_params(widths, class_count, init_rng);
    result.best_val_accuracy = evaluate(result.params, val);
    NetworkParams params = result.params;
    NetworkParams velocity = params.zeros_like();

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            NetworkParams grad = params.zeros_like();
            for (std::size_t b = start; b < end; ++b) {
                const auto& s = train[order[b]];
                const ForwardRecord rec = forward(params, s.features);
                Vector probs = softmax(rec.logits);
                const auto y = static_cast<std::size_t>(*s.label);
                loss_sum -= std::log(std::max(probs[y], 1e-300));
                probs[y] -= 1.0;
                grad.add_scaled(backward_from_logits(params, rec, probs).params, 1.0);
            }
            // v <- momentum * v + (mean gradient + weight_decay * w);  w <- w - lr * v
            grad.scale(1.0 / static_cast<double>(end - start));
            grad.add_scaled_weights(params, config.weight_decay);
            velocity.scale(config.momentum);
            velocity.add_scaled(grad, 1.0);
            params.add_scaled(velocity, -config.learning_rate);
        }
        result.train_loss.push_back(loss_sum / static_cast<double>(train.size()));
        const double acc = evaluate(params, val);
        result.val_accuracy.push_back(acc);
        if (acc > result.best_val_accuracy) {
            result.best_val_accuracy = acc;
            result.best_epoch = epoch;
            result.params = params;
        }
    }
    return result;
}

}  // namespace dh
