#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "giam/models.hpp"

namespace giam {

/// Class labels per node (-1 = unlabeled) plus disjoint index masks.
struct LabeledSplit {
  std::vector<int> labels;
  std::size_t classes = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  /// Throws when masks overlap or reference unlabeled nodes.
  void validate() const;
};

/// Stratified random split of the labeled nodes into train/validation/test of
/// the given sizes: each class enters every mask in proportion to its size
/// (up to rounding). The remainder of the labeled nodes goes to test.
LabeledSplit make_split(const std::vector<int>& labels, std::size_t train_count,
                        std::size_t validation_count, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.005;
  double dropout_rate = 0.5;
  std::size_t patience = 50;
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  ModelParams best_params;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean over the mask of -log softmax(logits)[label].
double cross_entropy(const Matrix& logits, const LabeledSplit& split,
                     const std::vector<std::size_t>& mask);

/// Same loss written in terms of the classifier and embeddings: logits = H C.
double cross_entropy(const Matrix& classifier, const Matrix& embeddings, const LabeledSplit& split,
                     const std::vector<std::size_t>& mask);

/// d loss / d logits: (softmax - onehot) / |mask| on masked rows, zero elsewhere.
Matrix cross_entropy_gradient(const Matrix& logits, const LabeledSplit& split,
                              const std::vector<std::size_t>& mask);

double accuracy(const Matrix& logits, const LabeledSplit& split, const std::vector<std::size_t>& mask);

/// Gradients of every parameter block given d loss / d logits.
ModelParams backward(const ModelContext& ctx, const ModelConfig& cfg, const ModelParams& params,
                     const ForwardResult& fwd, const Matrix& dlogits);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

LossAndGradient loss_and_gradient(const ModelContext& ctx, const ModelConfig& cfg,
                                  const ModelParams& params, const LabeledSplit& split,
                                  const std::vector<std::size_t>& mask, DropoutSource drop = {});

struct AdamState {
  ModelParams first;
  ModelParams second;
  std::size_t step = 0;

  static AdamState for_params(const ModelParams& p);
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

/// Full-batch training with early stopping on validation loss. Returns the
/// parameters of the best validation epoch.
TrainHistory train(const ModelContext& ctx, const ModelConfig& cfg, const LabeledSplit& split,
                   const TrainConfig& tcfg, std::optional<ModelParams> initial = std::nullopt);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Central differences against analytic gradients of the mask loss. Blocks
/// larger than `sample_limit` are checked on a random subsample of that size.
/// Ratios use a denominator of at least 1e4 times the quotient's round-off
/// (4 ulp of the loss over epsilon), the smallest resolvable gradient.
GradientCheck finite_difference_check(const ModelContext& ctx, const ModelConfig& cfg,
                                      const ModelParams& params, const LabeledSplit& split,
                                      const std::vector<std::size_t>& mask, double epsilon,
                                      std::size_t sample_limit = 200, std::uint64_t seed = 7);

}  // namespace giam
