#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "reponet/losses.hpp"
#include "reponet/polytope.hpp"
#include "reponet/types.hpp"

namespace reponet {

struct LabeledBatch;

inline constexpr double kPreluInitSlope = 0.25;

/// Affine map followed by a per-unit PReLU.
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Vector slope;   // out, PReLU negative-side slopes
};

/// Polytope head, never touched by the optimizer.
struct FixedHead {
  ClassifierWeights weights;
};

/// Learnable baseline head. Rows are unit-normalized inside the normalized
/// losses; `use_bias` adds a per-class bias (plain cross-entropy only).
struct TrainableHead {
  Matrix weights;  // K x d
  Vector bias;     // K
  bool use_bias = false;
};

using Head = std::variant<FixedHead, TrainableHead>;

struct MlpModel {
  int input_dim = 0;
  std::vector<DenseLayer> layers;
  Head head;
  // Bumped by every optimizer step; forward caches remember the value they saw.
  std::uint64_t version = 0;

  int embed_dim() const;
  int num_classes() const;
  bool fixed_head() const { return std::holds_alternative<FixedHead>(head); }
  /// K x d classifier rows as stored (unnormalized for a trainable head).
  const Matrix& classifier_rows() const;
};

/// Head specification for init_model.
struct TrainableHeadSpec {
  int num_classes = 0;
  int dim = 0;
  bool use_bias = false;
};
using HeadSpec = std::variant<ClassifierWeights, TrainableHeadSpec>;

/// He-normal weights (variance 2 / fan_in), zero biases, PReLU slopes 0.25.
/// `widths` lists every layer's output size; the last one is the embedding
/// dimension and must equal the head's d.
MlpModel init_model(int input_dim, const std::vector<int>& widths, const HeadSpec& head,
                    std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> pre_activations; // affine output of each layer
  std::uint64_t model_version = 0;
  std::size_t num_layers = 0;
};

struct ForwardResult {
  Matrix features;  // N x d, last PReLU output
  Matrix logits;    // N x K, raw f.w (+ b when the head uses a bias)
  ForwardCache cache;
};

ForwardResult forward(const MlpModel& model, const Matrix& batch);

/// Same shapes as the trainable parameters of the model.
struct ModelGradients {
  std::vector<DenseLayer> layers;
  Matrix head_weights;  // empty for a fixed head
  Vector head_bias;
};

/// Backpropagates d loss / d features through the PReLU/affine stack.
/// Throws kCache when the cache was produced by a different model state.
ModelGradients backward(const MlpModel& model, const ForwardCache& cache,
                        const Matrix& grad_features);

/// Loss on features produced by `model`, including the head gradient for a
/// trainable classifier (through row normalization for the normalized losses).
LossResult head_loss(const MlpModel& model, const LossKind& loss, const Matrix& features,
                     const Labels& labels, Matrix* grad_head_weights = nullptr,
                     Vector* grad_head_bias = nullptr);

/// forward + head_loss + backward on one batch.
struct StepResult {
  LossResult loss;
  ModelGradients grads;
  Matrix features;
};
StepResult compute_gradients(const MlpModel& model, const LossKind& loss, const Matrix& batch,
                             const Labels& labels);

struct AdamState {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  ModelGradients first;   // m
  ModelGradients second;  // v
};

/// Zero moments shaped like the trainable parameters of `model`.
AdamState init_adam(const MlpModel& model, double lr = 0.0005);

/// One bias-corrected Adam update. The fixed head is never written.
void adam_step(MlpModel& model, const ModelGradients& grads, AdamState& state);

/// Argmax cosine similarity between features and classifier rows (argmax of
/// logits for a biased trainable head); ties go to the lowest class index.
Labels predict_from_features(const MlpModel& model, const Matrix& features);
Labels predict(const MlpModel& model, const Matrix& batch);

struct TrainConfig {
  LossKind loss = LossKind::angular_margin(0.0);
  int epochs = 10;
  int batch_size = 512;
  double lr = 0.0005;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam training with a seeded reshuffle every epoch.
TrainResult train(MlpModel model, const LabeledBatch& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace reponet
