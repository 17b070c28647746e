#include "reponet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

#include "reponet/polytope.hpp"

namespace reponet {

namespace {

// gzread passes uncompressed files through unchanged, so one reader covers both.
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes;
  std::uint8_t chunk[1 << 16];
  for (;;) {
    const int got = gzread(file, chunk, sizeof(chunk));
    if (got < 0) {
      int errnum = 0;
      const std::string msg = gzerror(file, &errnum);
      gzclose(file);
      throw Error(ErrorCode::kIo, "read error in '" + path.string() + "': " + msg);
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), chunk, chunk + got);
  }
  gzclose(file);
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& os, std::uint32_t value) {
  const char b[4] = {static_cast<char>(value >> 24), static_cast<char>(value >> 16),
                     static_cast<char>(value >> 8), static_cast<char>(value)};
  os.write(b, 4);
}

void require_header(const std::vector<std::uint8_t>& bytes, std::size_t header,
                    std::uint32_t magic, const std::filesystem::path& path) {
  if (bytes.size() < 4) {
    throw Error(ErrorCode::kTruncated, "'" + path.string() + "' is too short for an IDX header");
  }
  const std::uint32_t got = read_be32(bytes, 0);
  if (got != magic) {
    throw Error(ErrorCode::kBadMagic, fmt::format("'{}' has magic 0x{:08x}, expected 0x{:08x}",
                                                  path.string(), got, magic));
  }
  if (bytes.size() < header) {
    throw Error(ErrorCode::kTruncated, "'" + path.string() + "' has a truncated IDX header");
  }
}

}  // namespace

LabeledBatch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const IdxOptions& options) {
  const auto image_bytes = read_all(images);
  const auto label_bytes = read_all(labels);
  require_header(image_bytes, 16, kIdxImageMagic, images);
  require_header(label_bytes, 8, kIdxLabelMagic, labels);

  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (count != label_count) {
    throw Error(ErrorCode::kCountMismatch,
                fmt::format("{} images but {} labels", count, label_count));
  }
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < 16 + count * pixels) {
    throw Error(ErrorCode::kTruncated,
                fmt::format("'{}' holds {} pixel bytes, header promises {}", images.string(),
                            image_bytes.size() - 16, count * pixels));
  }
  if (label_bytes.size() < 8 + count) {
    throw Error(ErrorCode::kTruncated,
                fmt::format("'{}' holds {} labels, header promises {}", labels.string(),
                            label_bytes.size() - 8, count));
  }

  const std::size_t n = options.limit > 0 ? std::min(options.limit, count) : count;
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "IDX files contain no samples");

  LabeledBatch out;
  out.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = image_bytes.data() + 16 + i * pixels;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t from = options.transpose ? c * rows + r : r * cols + c;
        out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r * cols + c)) =
            src[from] / 255.0;
      }
    }
    out.labels[i] = label_bytes[8 + i];
  }
  out.num_classes = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
  return out;
}

void write_idx(const LabeledBatch& data, int rows, int cols, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  if (rows < 1 || cols < 1 || data.input_dim() != rows * cols) {
    throw Error(ErrorCode::kDimension,
                fmt::format("cannot store {} inputs as {}x{} images", data.input_dim(), rows, cols));
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error(ErrorCode::kIo, "cannot create IDX output files");

  write_be32(img, kIdxImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  write_be32(lab, kIdxLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));

  std::vector<char> buffer(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    for (Eigen::Index k = 0; k < data.inputs.cols(); ++k) {
      const double v = std::clamp(data.inputs(i, k), 0.0, 1.0);
      buffer[static_cast<std::size_t>(k)] = static_cast<char>(std::lround(v * 255.0));
    }
    img.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const int y = data.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y > 255) throw Error(ErrorCode::kLabel, "IDX labels must fit in one byte");
    lab.put(static_cast<char>(y));
  }
  if (!img || !lab) throw Error(ErrorCode::kIo, "failed writing IDX output files");
}

LabeledBatch make_blobs(int num_classes, int dim, int per_class, double spread, double separation,
                        std::uint64_t seed) {
  if (num_classes < 2) {
    throw Error(ErrorCode::kInvalidClassCount, "blobs need at least 2 classes");
  }
  if (dim < 1) throw Error(ErrorCode::kDimension, "blob dimension must be at least 1");
  if (per_class < 1) throw Error(ErrorCode::kEmptyDataset, "blobs need at least 1 sample per class");
  if (!(spread > 0.0) || !(separation > 0.0)) {
    throw Error(ErrorCode::kConfig, "blob spread and separation must be positive");
  }

  const Matrix directions = make_simplex(num_classes).rows;
  const Eigen::Index shared = std::min<Eigen::Index>(dim, directions.cols());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  LabeledBatch out;
  out.num_classes = num_classes;
  out.inputs.resize(static_cast<Eigen::Index>(num_classes) * per_class, dim);
  out.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    Vector mean = Vector::Zero(dim);
    mean.head(shared) = separation * directions.row(c).head(shared).transpose();
    for (int p = 0; p < per_class; ++p, ++row) {
      for (int k = 0; k < dim; ++k) out.inputs(row, k) = mean(k) + noise(rng);
      out.labels.push_back(c);
    }
  }
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw Error(ErrorCode::kConfig, "batch size must be at least 1");
  const auto perm = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

LabeledBatch gather(const LabeledBatch& data, const std::vector<std::size_t>& indices) {
  LabeledBatch out;
  out.num_classes = data.num_classes;
  out.inputs.resize(static_cast<Eigen::Index>(indices.size()), data.inputs.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) =
        data.inputs.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(data.labels[indices[i]]);
  }
  return out;
}

std::vector<LabeledBatch> batches(const LabeledBatch& data, std::size_t batch_size,
                                  std::uint64_t seed, std::uint64_t epoch) {
  std::vector<LabeledBatch> out;
  for (const auto& idx : batch_indices(data.size(), batch_size, seed, epoch)) {
    out.push_back(gather(data, idx));
  }
  return out;
}

void export_csv(const LabeledBatch& data, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  os << "label";
  for (Eigen::Index k = 0; k < data.inputs.cols(); ++k) os << ",x" << k;
  os << '\n';
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    os << data.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < data.inputs.cols(); ++k) {
      os << fmt::format(",{:.17g}", data.inputs(i, k));
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace reponet
