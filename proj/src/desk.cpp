#include "dh/desk.hpp"

#include "dh/errors.hpp"

namespace dh::desk {

namespace {

constexpr std::size_t kDim = 8;

Vector axis(std::size_t i, double scale, std::size_t dim = kDim) {
    Vector v(dim, 0.0);
    v[i] = scale;
    return v;
}

}  // namespace

GaussianMixtureTask task(std::string_view name) {
    if (name != "gauss3") throw InvalidArgument("unknown task '" + std::string(name) + "'");
    GaussianMixtureTask t;
    t.means = {Vector(kDim, 0.0), axis(0, 1.0), axis(1, 4.0)};
    t.stds = {0.5, 1.5, 0.7};
    t.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    t.validate();
    return t;
}

std::vector<std::string> task_names() { return {"gauss3"}; }

CollectionSpec collection(std::string_view name, const GaussianMixtureTask& task, std::size_t n) {
    CollectionSpec spec;
    spec.n = n;
    spec.rel_shift = Vector(task.dim(), 0.0);
    spec.rel_shift[task.dim() - 1] = 0.5;
    // Compact clusters on the class 0 / class 2 and class 0 / class 1 boundaries.
    spec.irrel_task.means = {axis(1, 1.66, task.dim()), axis(1, -1.48, task.dim())};
    spec.irrel_task.stds = {0.6, 0.6};
    spec.irrel_task.weights = {0.5, 0.5};
    if (name == "ori") {
        spec.ori_fraction = 1.0;
    } else if (name == "rel") {
        spec.rel_fraction = 1.0;
    } else if (name == "irrel") {
        spec.irrel_fraction = 1.0;
    } else if (name == "ori+rel") {
        spec.ori_fraction = 0.21;
        spec.rel_fraction = 0.79;
    } else if (name == "ori+irrel") {
        spec.ori_fraction = 0.16;
        spec.irrel_fraction = 0.84;
    } else if (name == "rel+irrel") {
        spec.rel_fraction = 0.42;
        spec.irrel_fraction = 0.58;
    } else {
        throw InvalidArgument("unknown collection '" + std::string(name) + "'");
    }
    spec.validate(task);
    return spec;
}

std::vector<std::string> collection_names() { return {"ori", "rel", "irrel", "ori+rel", "ori+irrel", "rel+irrel"}; }

std::vector<std::size_t> teacher_widths(std::size_t dim) { return {dim, 64, 32}; }
std::vector<std::size_t> student_widths(std::size_t dim) { return {dim, 32, 16}; }
std::vector<std::size_t> shallow_widths(std::size_t dim) { return {dim, 4}; }

TeacherConfig teacher_config(std::uint64_t seed) {
    TeacherConfig c;
    c.seed = seed;
    return c;
}

DistillConfig distill_config(std::uint64_t seed) {
    DistillConfig c;
    c.seed = seed;
    return c;
}

}  // namespace dh::desk
