#pragma once

// Desk-scale experiment presets: the synthetic task, the collection
// compositions and the network and training sizes used by the pipeline.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dh/datagen.hpp"
#include "dh/distill.hpp"
#include "dh/models.hpp"

namespace dh::desk {

/// "gauss3": three classes in 8 dimensions with unequal spreads.
GaussianMixtureTask task(std::string_view name);
std::vector<std::string> task_names();

/// "ori", "rel", "irrel", "ori+rel", "ori+irrel", "rel+irrel".
CollectionSpec collection(std::string_view name, const GaussianMixtureTask& task, std::size_t n);
std::vector<std::string> collection_names();

inline constexpr std::size_t kTrainSize = 6000;
inline constexpr std::size_t kValSize = 1500;
inline constexpr std::size_t kTestSize = 3000;
inline constexpr double kCollectionHoldout = 0.10;

std::vector<std::size_t> teacher_widths(std::size_t dim);
std::vector<std::size_t> student_widths(std::size_t dim);
/// One hidden layer of width teacher latent / 8.
std::vector<std::size_t> shallow_widths(std::size_t dim);

TeacherConfig teacher_config(std::uint64_t seed);
DistillConfig distill_config(std::uint64_t seed);

}  // namespace dh::desk
