#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "giam/sparse_matrix.hpp"

namespace giam {

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

/// Labels must lie in [0, classes). Classes with neither predictions nor
/// truths contribute an F1 of zero to the macro mean.
F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& truth,
                   std::size_t classes);

/// Mutual information over the arithmetic mean of the two entropies; zero
/// when either partition has a single block.
double nmi(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Adjusted Rand index (hypergeometric null).
double ari(const std::vector<int>& predicted, const std::vector<int>& truth);

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

/// Best-inertia Lloyd run over `restarts` k-means++ seedings. Rows of
/// `points` are observations.
KMeansResult kmeans(const Matrix& points, std::size_t k, const KMeansOptions& options = {});

struct ProbeOptions {
  double regularization = 1.0;  // inverse strength, as in C of a penalized logistic loss
  double tolerance = 1e-6;
  std::size_t max_iterations = 500;
  std::size_t max_split_retries = 100;
};

/// L2-penalized multinomial logistic regression with an unpenalized bias.
class LinearProbe {
 public:
  void fit(const Matrix& x, const std::vector<int>& y, std::size_t classes,
           const ProbeOptions& options = {});
  std::vector<int> predict(const Matrix& x) const;
  const Matrix& weights() const { return weights_; }

 private:
  Matrix weights_;  // (dim + 1) x classes, last row is the bias
};

struct ProbeScore {
  double macro_mean = 0.0;
  double micro_mean = 0.0;
  double macro_stddev = 0.0;
  double micro_stddev = 0.0;
};

/// Stratified split at `ratio`, probe fit on the train side, F1 on the rest;
/// averaged over `repeats`. Only rows with label >= 0 take part.
ProbeScore linear_probe(const Matrix& embeddings, const std::vector<int>& labels, double ratio,
                        std::size_t repeats, std::uint64_t seed, const ProbeOptions& options = {});

inline const std::vector<double> kProbeRatios = {0.05, 0.10, 0.20, 0.40, 0.60, 0.80};

struct ClusterScore {
  double nmi_mean = 0.0;
  double nmi_stddev = 0.0;
  double ari_mean = 0.0;
  double ari_stddev = 0.0;
};

/// k-means with K = number of classes, repeated with derived seeds.
ClusterScore cluster_scores(const Matrix& embeddings, const std::vector<int>& labels,
                            std::size_t repeats, std::uint64_t seed);

struct EvalReport {
  std::vector<double> ratios;
  std::vector<ProbeScore> probe;
  ClusterScore clustering;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
};

EvalReport evaluate_embeddings(const Matrix& embeddings, const std::vector<int>& labels,
                               const std::vector<double>& ratios, std::size_t repeats,
                               std::uint64_t seed);

}  // namespace giam
