#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reponet/types.hpp"

namespace reponet {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Index-aligned inputs and labels.
struct LabeledBatch {
  Matrix inputs;  // N x input_dim
  Labels labels;  // N, in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
};

struct IdxOptions {
  // EMNIST stores every image transposed relative to MNIST.
  bool transpose = false;
  // Keep only the first `limit` samples (0 = all).
  std::size_t limit = 0;
};

/// Reads an IDX image file (magic 0x803, count x rows x cols, uint8 pixels) and
/// the matching label file (magic 0x801). Either file may be gzip-compressed.
/// Pixels are scaled by 1/255.
LabeledBatch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const IdxOptions& options = {});

/// Writes `data` as uncompressed IDX; pixels are rounded to the nearest /255.
void write_idx(const LabeledBatch& data, int rows, int cols, const std::filesystem::path& images,
               const std::filesystem::path& labels);

/// K isotropic Gaussian clusters centred at separation * (simplex vertex
/// directions padded or truncated to `dim`).
LabeledBatch make_blobs(int num_classes, int dim, int per_class, double spread, double separation,
                        std::uint64_t seed);

/// Deterministic permutation of [0, n) for (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

/// Shuffled mini-batch index sets covering every sample once; the last one may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

LabeledBatch gather(const LabeledBatch& data, const std::vector<std::size_t>& indices);

std::vector<LabeledBatch> batches(const LabeledBatch& data, std::size_t batch_size,
                                  std::uint64_t seed, std::uint64_t epoch);

/// CSV with header `label,x0,...` and 17 significant digits.
void export_csv(const LabeledBatch& data, const std::filesystem::path& path);

}  // namespace reponet
