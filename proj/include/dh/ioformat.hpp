#pragma once

// Binary pipeline files. All little-endian, all versioned:
//
//   DHUC collection    magic | u32 version | u32 N | u32 D | u32 K
//                      N x ( D x f32 features | i32 label (-1 unlabeled) | u8 tag )
//   DHTC teacher cache magic | u32 version | u32 N | u32 K | u32 P
//                      N x ( K x f32 logits | P x f32 latent )
//   DHSC scores        magic | u32 version | u8 score id | u32 N | N x f64
//   DHQD distribution  magic | u32 version | u32 N | f64 lambda | f64 iqpr
//                      N x f64 q | N x u64 draw count
//   DHNM model         magic | u32 version | u32 L | L x u32 widths | u32 K
//                      per extractor layer: weight (row-major f32) then bias (f32),
//                      then head weight and head bias
//
// Readers check the declared sizes against the byte count before touching the
// payload and report the failing byte offset.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dh/datagen.hpp"
#include "dh/models.hpp"
#include "dh/sampler.hpp"
#include "dh/scores.hpp"

namespace dh::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kCollectionHeaderBytes = 20;
inline constexpr std::size_t kCacheHeaderBytes = 20;

using Bytes = std::vector<std::uint8_t>;

struct Collection {
    Samples samples;
    std::uint32_t class_count = 0;

    std::size_t size() const noexcept { return samples.size(); }
    std::size_t dim() const noexcept { return samples.empty() ? 0 : samples.front().features.size(); }
    std::vector<SourceTag> tags() const;
};

Bytes encode_collection(std::span<const TaggedSample> samples, std::uint32_t class_count);
Collection decode_collection(std::span<const std::uint8_t> bytes);

Bytes encode_cache(const TeacherCache& cache);
TeacherCache decode_cache(std::span<const std::uint8_t> bytes);

Bytes encode_scores(const ScoreVector& scores);
ScoreVector decode_scores(std::span<const std::uint8_t> bytes);

/// Stores q, lambda, iqpr and draw counts of a plan.
Bytes encode_distribution(const SamplingPlan& plan);
/// Rejects q that is not a probability vector within 1e-9.
SamplingPlan decode_distribution(std::span<const std::uint8_t> bytes);

Bytes encode_model(const NetworkParams& params);
NetworkParams decode_model(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Collection read_collection(const std::filesystem::path& path);
void write_collection(const std::filesystem::path& path, std::span<const TaggedSample> samples,
                      std::uint32_t class_count);
TeacherCache read_cache(const std::filesystem::path& path);
void write_cache(const std::filesystem::path& path, const TeacherCache& cache);
ScoreVector read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const ScoreVector& scores);
SamplingPlan read_distribution(const std::filesystem::path& path);
void write_distribution(const std::filesystem::path& path, const SamplingPlan& plan);
NetworkParams read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const NetworkParams& params);

// Cross-file checks; all throw CrossFileError naming both sides.
void check_model_collection(const NetworkParams& model, const Collection& collection);
void check_cache_collection(const TeacherCache& cache, const Collection& collection);
void check_cache_model(const TeacherCache& cache, const NetworkParams& model);
void check_sample_count(std::string_view what, std::size_t n, const Collection& collection);

}  // namespace dh::io
