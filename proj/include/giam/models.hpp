#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "giam/hin_graph.hpp"
#include "giam/propagation.hpp"
#include "giam/sparse_matrix.hpp"

namespace giam {

using FeatureBlock = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Raw features, one block per node type, rows in canonical order within
/// the type.
struct FeatureSet {
  std::vector<FeatureBlock> blocks;

  /// Identity blocks for every type.
  static FeatureSet one_hot(const std::vector<TypeRange>& ranges);
  std::size_t raw_dim(std::size_t type) const { return static_cast<std::size_t>(blocks[type].cols()); }
  std::size_t node_count() const;
};

enum class Variant { gcn, giam1, giam2, giam, giam3 };
enum class Activation { identity, relu, elu };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::giam2;
  std::size_t hidden = 64;
  std::size_t heads = 8;
  std::size_t layers = 2;  // naive model depth
  std::size_t classes = 2;
  Activation activation = Activation::identity;
  double leaky_slope = 0.01;

  /// Width of one attention head (hidden split evenly across heads).
  std::size_t head_width() const;
};

/// Every trainable block. Unused blocks stay empty for a given variant.
struct ModelParams {
  std::vector<Matrix> projections;       // per node type: raw_dim x hidden
  std::vector<Matrix> weights;           // gcn: W0, W1; giam1: one per layer; giam2/giam3: W
  Matrix classifier;                     // C: embedding width x classes
  std::vector<Matrix> head_projections;  // giam: per head, hidden x head_width
  Matrix attention;                      // giam: (groups * heads) x (2 * head_width)
  Matrix metapath_logits;                // giam3: 1 x paths

  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;
  std::vector<std::string> block_names() const;
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
};

/// Propagation operators split into column groups: per direct meta-path for
/// the naive model, per endpoint node type for the improved model.
struct Grouping {
  std::vector<std::string> labels;
  std::vector<SparseRowMatrix> operators;
};

struct GroupedEmbedding {
  std::vector<std::string> labels;
  std::vector<Matrix> blocks;

  /// Blocks side by side in group order.
  Matrix concatenated() const;
};

/// Graph artifacts a variant needs; built once, shared by every epoch.
struct ModelContext {
  Variant variant = Variant::giam2;
  std::vector<TypeRange> type_ranges;
  FeatureSet features;
  SparseRowMatrix normalized;        // gcn
  Grouping grouping;                 // giam1 (meta-path split of the normalized adjacency), giam2/giam (S split by type)
  std::vector<SparseRowMatrix> metapath_states;  // giam3
  std::vector<std::string> metapath_labels;

  std::size_t node_count() const;
};

ModelContext make_gcn_context(const AugmentedAdjacency& aug, FeatureSet features,
                              std::vector<TypeRange> ranges);
ModelContext make_naive_context(const HinGraph& graph, const AugmentedAdjacency& aug,
                                FeatureSet features);
ModelContext make_improved_context(Variant variant, const PropagationState& s,
                                   FeatureSet features, std::vector<TypeRange> ranges,
                                   const std::vector<std::string>& type_names);
ModelContext make_metapath_context(std::vector<PropagationState> states,
                                   std::vector<std::string> labels, FeatureSet features);

ModelParams init_params(const ModelContext& ctx, const ModelConfig& cfg, std::mt19937_64& rng);

// --- individual stages -----------------------------------------------------

Matrix apply_activation(Activation a, const Matrix& z);
/// Elementwise derivative of the activation evaluated at pre-activation z.
Matrix activation_derivative(Activation a, const Matrix& z);

Matrix row_softmax(const Matrix& logits);

Matrix project_features(const FeatureSet& features, const ModelParams& params,
                        const std::vector<TypeRange>& ranges);

/// softmax(Ahat * relu(Ahat * H0 * W0) * W1)
Matrix gcn_forward(const AugmentedAdjacency& aug, const Matrix& h0, const ModelParams& params);

/// Groups every stored entry of the normalized adjacency by the ordered pair
/// (source type, endpoint type); self-loops land in the (t, t) group.
Grouping naive_grouping(const HinGraph& graph, const AugmentedAdjacency& aug);

GroupedEmbedding intra_aggregate(const Grouping& grouping, const Matrix& h);
Matrix inter_concatenate(const GroupedEmbedding& grouped);

/// H(k) = act((Ahat o H(k-1)) W(k-1)) for each layer weight in params.
Matrix naive_forward(const Grouping& grouping, const Matrix& h0, const ModelParams& params,
                     Activation activation);

/// Splits S column-wise by endpoint node type.
Grouping split_by_type(const SparseRowMatrix& s, const std::vector<TypeRange>& ranges,
                       const std::vector<std::string>& type_names);

GroupedEmbedding grouped_propagate(const PropagationState& s, const Matrix& h0,
                                   const std::vector<TypeRange>& ranges);

/// act((S o H0) W)
Matrix improved_forward(const Grouping& grouping, const Matrix& h0, const Matrix& weight,
                        Activation activation);

double leaky_relu(double x, double slope);

/// leaky(mu^T [W h_u || W h_v])
double attention_score(const Vector& h_u, const Vector& h_v, const Vector& mu, const Matrix& w,
                       double slope = 0.01);

/// Softmax over a non-empty neighborhood; throws on empty input.
Vector attention_weights(const Vector& scores);

/// act(sum_v alpha_v W h_v); rows of projected_neighbors are W h_v.
Vector attention_aggregate(const Vector& alpha, const Matrix& projected_neighbors,
                           Activation activation);

/// Concatenation of per-head outputs.
Vector multi_head(const std::vector<Vector>& heads);

/// Concatenated multi-head node-level attention over each group's support.
Matrix giam_forward(const Grouping& grouping, const Matrix& h0, const ModelParams& params,
                    const ModelConfig& cfg);

/// Derived single-type graph over the first type of the candidate paths,
/// joined by the union of their adjacencies; then the constrained walk.
PropagationState candidate_metapath_state(const HinGraph& graph,
                                          const std::vector<MetaPath>& candidates,
                                          std::size_t steps);

/// Union adjacency of the candidate paths with the diagonal removed.
SparseRowMatrix candidate_adjacency(const HinGraph& graph, const std::vector<MetaPath>& candidates);

/// Softmax of the global logits weights a convex combination of the
/// per-path embeddings.
Matrix giam3_forward(const std::vector<Matrix>& per_path, const Matrix& logits);

// --- full pass with cached intermediates -------------------------------------

/// Inverted dropout driven by an explicit stream.
struct DropoutSource {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

Matrix dropout(const Matrix& m, double rate, std::mt19937_64& rng, Matrix* mask_out = nullptr);

struct AttentionCache {
  Matrix projected;               // Y = X W_k
  std::vector<double> preact;     // per stored entry, before the leaky rectifier
  std::vector<double> alpha;      // softmax weights
  std::vector<double> alpha_mask; // scaled keep mask (1 when dropout is off)
  Matrix pre_output;              // n x head_width before the activation
};

struct ForwardCache {
  Matrix projected;       // X, before dropout
  Matrix feature_mask;    // scaled keep mask on X (empty when dropout is off)
  Matrix input;           // X after dropout
  std::vector<Matrix> layer_inputs;   // giam1 per layer input H(l); gcn: {Ahat X}
  std::vector<Matrix> concatenated;   // giam1 per layer concat; giam2 single concat
  std::vector<Matrix> preactivations; // gcn: Z1; giam1 per layer; giam2: Z; giam3 per path
  std::vector<Matrix> path_outputs;   // giam3 per path E_m
  std::vector<Matrix> path_inputs;    // giam3 per path S_m X
  std::vector<AttentionCache> attention;  // giam: group-major, head-minor
  Matrix gcn_hidden;  // relu(Z1)
  Matrix gcn_propagated_hidden;  // Ahat relu(Z1)
};

struct ForwardResult {
  Matrix embeddings;
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const ModelContext& ctx, const ModelConfig& cfg, const ModelParams& params,
                      DropoutSource dropout = {});

}  // namespace giam
