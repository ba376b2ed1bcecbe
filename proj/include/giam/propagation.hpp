#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/hin_graph.hpp"
#include "giam/sparse_matrix.hpp"

namespace giam {

/// Row-stochastic one-step walk matrix D^{-1}(A + I).
struct TransitionMatrix {
  SparseRowMatrix matrix;
};

/// Transition matrix of the degree-preserving null model. Every row equals
/// d_v / sum(d), so only the degree vector is kept.
class NullTransition {
 public:
  NullTransition(Vector degrees, double total_degree);

  double operator()(std::size_t /*u*/, std::size_t v) const {
    return degrees_(static_cast<Eigen::Index>(v)) / total_degree_;
  }
  /// The shared row q.
  Vector row() const { return degrees_ / total_degree_; }
  const Vector& degrees() const { return degrees_; }
  double total_degree() const { return total_degree_; }
  std::size_t size() const { return static_cast<std::size_t>(degrees_.size()); }

 private:
  Vector degrees_;
  double total_degree_;
};

struct PropagationState {
  SparseRowMatrix matrix;
  std::size_t step = 0;
  bool constrained = false;
};

TransitionMatrix transition(const AugmentedAdjacency& aug);
NullTransition null_transition(const AugmentedAdjacency& aug);

/// P^k, with P^0 = I.
PropagationState unconstrained_walk(const TransitionMatrix& p, std::size_t steps);

/// One step of the null-constrained walk: S' = max(S P - S Q, 0), then row
/// renormalization. A row that clips to all zeros becomes its own indicator.
PropagationState constrained_step(const PropagationState& s, const TransitionMatrix& p,
                                  const NullTransition& q);

PropagationState constrained_walk(const TransitionMatrix& p, const NullTransition& q,
                                  std::size_t steps);

class EigenSolverError : public std::runtime_error {
 public:
  EigenSolverError(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

struct SpectrumResult {
  std::vector<double> eigenvalues;  // ascending
  std::size_t c_max = 0;
};

/// Graphs at or below this size use a dense symmetric eigensolver.
inline constexpr std::size_t kDenseSpectrumLimit = 5000;

/// Smallest c_max eigenvalues of M = I - P, computed on the similar symmetric
/// matrix I - D^{-1/2}(A + I)D^{-1/2}.
SpectrumResult markov_spectrum(const TransitionMatrix& p, const AugmentedAdjacency& aug,
                               std::size_t c_max);

/// Forces the iterative path regardless of size (used by tests).
SpectrumResult markov_spectrum_iterative(const AugmentedAdjacency& aug, std::size_t c_max,
                                         std::size_t max_iterations = 20000,
                                         double tolerance = 1e-8);

/// Eigenvalues below this are treated as exact zeros.
inline constexpr double kZeroEigenvalue = 1e-8;

struct MixingWindow {
  std::size_t c = 0;
  std::optional<double> t_enter;  // nullopt = unbounded
  std::optional<double> t_exit;
};

MixingWindow mixing_window(const SpectrumResult& spectrum, std::size_t c);

}  // namespace giam
