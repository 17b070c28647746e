#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "reponet/data.hpp"
#include "reponet/io.hpp"
#include "reponet/network.hpp"

namespace reponet {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

/// Maps library errors onto process exit codes.
int exit_code_for(const Error& error);

struct BlobSpec {
  int dim = 2;
  int per_class = 100;
  double spread = 1.0;
  double separation = 6.0;
};

struct IdxSpec {
  std::filesystem::path images;
  std::filesystem::path labels;
  bool transpose = false;  // EMNIST orientation
  std::size_t limit = 0;
};

using DatasetSpec = std::variant<BlobSpec, IdxSpec>;

/// Fully resolved training run. `margin` stays empty in the file form when
/// it was "max"; parse_run_config resolves it against the head's polytope.
struct RunConfig {
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch_size = 512;
  double lr = 0.0005;
  std::vector<int> hidden_widths;  // layers before the embedding layer
  PolytopeKind kind = PolytopeKind::kSimplex;
  int classes = 0;
  bool trainable = false;
  LossKind loss;
  bool margin_was_max = false;
  DatasetSpec dataset;
  std::filesystem::path output_dir = "out";
  // Directory of the config file; relative paths above are taken from here.
  std::filesystem::path base_dir;

  int embed_dim() const { return embedding_dim(kind, classes); }
  /// hidden_widths followed by the embedding width.
  std::vector<int> layer_widths() const;
  TrainConfig train_config() const;
  DatasetSpec resolved_dataset() const;
  std::filesystem::path resolved_output_dir() const;
};

/// Unknown keys are kConfig errors. Paths are kept as written and resolved
/// against `base_dir` on use.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {});
/// The resolved snapshot (margin as a number, every default spelled out).
Json run_config_to_json(const RunConfig& config);

/// Sub-seed for one consumer of the run seed (data, init, shuffling).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

LabeledBatch load_dataset(const DatasetSpec& spec, int classes, std::uint64_t seed);

/// Builds the model for the config (fixed polytope head unless `trainable`).
MlpModel build_model(const RunConfig& config, int input_dim);

/// Geometry of `features` against the model's classifier: polytope rows and
/// phi for a fixed head; unit-normalized rows and the polytope's phi otherwise.
GeometryReport model_geometry(const MlpModel& model, double phi, const Matrix& features,
                              const Labels& labels);

int cmd_gen_weights(const std::string& kind, int classes, const std::filesystem::path& out,
                    std::ostream& log);
int cmd_check(const std::filesystem::path& weights, double tol, std::ostream& log);
int cmd_train(const std::filesystem::path& config, std::ostream& log,
              std::optional<std::uint64_t> seed_override = std::nullopt);

struct EvalRequest {
  std::filesystem::path checkpoint;
  // Empty = regenerate the blobs recorded in the checkpoint's config.
  std::optional<DatasetSpec> dataset;
  // Run seed the blobs are regenerated from (default: the checkpoint's).
  std::optional<std::uint64_t> seed;
  std::filesystem::path report;  // empty = <checkpoint dir>/eval_geometry.json
};
int cmd_eval(const EvalRequest& request, std::ostream& log);

}  // namespace reponet
