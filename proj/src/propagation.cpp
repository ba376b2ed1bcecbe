#include "giam/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace giam {

NullTransition::NullTransition(Vector degrees, double total_degree)
    : degrees_(std::move(degrees)), total_degree_(total_degree) {
  if (!(total_degree_ > 0.0)) throw std::invalid_argument("null model needs positive total degree");
}

TransitionMatrix transition(const AugmentedAdjacency& aug) {
  const std::size_t n = aug.matrix.rows();
  std::vector<std::vector<std::size_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cs = aug.matrix.row_cols(r);
    const auto vs = aug.matrix.row_values(r);
    const double d = aug.degrees(static_cast<Eigen::Index>(r));
    cols[r].assign(cs.begin(), cs.end());
    vals[r].resize(cs.size());
    for (std::size_t k = 0; k < cs.size(); ++k) vals[r][k] = vs[k] / d;
  }
  return {SparseRowMatrix::from_rows(n, std::move(cols), std::move(vals))};
}

NullTransition null_transition(const AugmentedAdjacency& aug) {
  return NullTransition(aug.degrees, aug.total_degree);
}

PropagationState unconstrained_walk(const TransitionMatrix& p, std::size_t steps) {
  PropagationState z{SparseRowMatrix::identity(p.matrix.rows()), 0, false};
  for (std::size_t k = 0; k < steps; ++k) {
    z.matrix = sparse_product(z.matrix, p.matrix);
    z.step = k + 1;
  }
  return z;
}

PropagationState constrained_step(const PropagationState& s, const TransitionMatrix& p,
                                  const NullTransition& q) {
  const SparseRowMatrix walked = sparse_product(s.matrix, p.matrix);
  const std::size_t n = walked.rows();
  std::vector<std::vector<std::size_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto cs = walked.row_cols(u);
    const auto vs = walked.row_values(u);
    // Columns outside the support of S P have (S P)_uv = 0 < q_v and clip.
    double total = 0.0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const double excess = vs[k] - q(u, cs[k]);
      if (excess > 0.0) {
        cols[u].push_back(cs[k]);
        vals[u].push_back(excess);
        total += excess;
      }
    }
    if (cols[u].empty()) {
      cols[u].push_back(u);
      vals[u].push_back(1.0);
      continue;
    }
    for (double& v : vals[u]) v /= total;
  }
  return {SparseRowMatrix::from_rows(n, std::move(cols), std::move(vals)), s.step + 1, true};
}

PropagationState constrained_walk(const TransitionMatrix& p, const NullTransition& q,
                                  std::size_t steps) {
  if (steps < 1) throw std::invalid_argument("constrained_walk needs at least one step");
  PropagationState s{SparseRowMatrix::identity(p.matrix.rows()), 0, true};
  for (std::size_t k = 0; k < steps; ++k) s = constrained_step(s, p, q);
  return s;
}

namespace {

void check_c_max(std::size_t n, std::size_t c_max) {
  if (c_max < 1 || c_max > n) {
    throw std::invalid_argument("c_max must lie in [1, " + std::to_string(n) + "], got " +
                                std::to_string(c_max));
  }
}

}  // namespace

SpectrumResult markov_spectrum(const TransitionMatrix& p, const AugmentedAdjacency& aug,
                               std::size_t c_max) {
  const std::size_t n = p.matrix.rows();
  check_c_max(n, c_max);
  if (n > kDenseSpectrumLimit) return markov_spectrum_iterative(aug, c_max);

  const Matrix sym = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
                     normalized_adjacency(aug).to_dense();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw EigenSolverError("dense symmetric eigensolve failed to converge", 0, 0.0);
  }
  SpectrumResult out;
  out.c_max = c_max;
  out.eigenvalues.reserve(c_max);
  for (std::size_t i = 0; i < c_max; ++i) {
    out.eigenvalues.push_back(solver.eigenvalues()(static_cast<Eigen::Index>(i)));
  }
  return out;
}

SpectrumResult markov_spectrum_iterative(const AugmentedAdjacency& aug, std::size_t c_max,
                                         std::size_t max_iterations, double tolerance) {
  const std::size_t n = aug.matrix.rows();
  check_c_max(n, c_max);
  const SparseRowMatrix norm = normalized_adjacency(aug);
  // Subspace iteration on B = I + N, whose top eigenvalues 2 - lambda map to
  // the bottom of the generator spectrum.
  const auto block = static_cast<Eigen::Index>(std::min(n, c_max + std::max<std::size_t>(4, c_max)));
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  Matrix x(static_cast<Eigen::Index>(n), block);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);

  auto apply = [&](const Matrix& v) { Matrix out = multiply(norm, v); out += v; return out; };

  double worst = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    Eigen::HouseholderQR<Matrix> qr(apply(x));
    x = qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(n), block);
    const Matrix bx = apply(x);
    const Matrix small = x.transpose() * bx;
    Eigen::SelfAdjointEigenSolver<Matrix> ritz(0.5 * (small + small.transpose()));
    // Ascending order in B means descending in lambda; reverse to keep the top.
    const Matrix vecs = ritz.eigenvectors().rowwise().reverse();
    const Vector vals = ritz.eigenvalues().reverse();
    x = x * vecs;
    const Matrix residual = bx * vecs - x * vals.asDiagonal();
    worst = 0.0;
    for (std::size_t i = 0; i < c_max; ++i) {
      worst = std::max(worst, residual.col(static_cast<Eigen::Index>(i)).norm());
    }
    if (worst < tolerance) {
      SpectrumResult out;
      out.c_max = c_max;
      for (std::size_t i = 0; i < c_max; ++i) {
        out.eigenvalues.push_back(std::max(0.0, 2.0 - vals(static_cast<Eigen::Index>(i))));
      }
      std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
      return out;
    }
  }
  std::ostringstream msg;
  msg << "subspace iteration did not converge after " << max_iterations
      << " iterations (max residual " << worst << ", tolerance " << tolerance << ")";
  throw EigenSolverError(msg.str(), max_iterations, worst);
}

MixingWindow mixing_window(const SpectrumResult& spectrum, std::size_t c) {
  if (c < 2 || c + 1 > spectrum.eigenvalues.size()) {
    throw std::out_of_range("mixing window needs 2 <= c <= " +
                            std::to_string(spectrum.eigenvalues.size()) + " - 1, got c = " +
                            std::to_string(c));
  }
  auto reciprocal = [](double lambda) -> std::optional<double> {
    if (lambda < kZeroEigenvalue) return std::nullopt;
    return 1.0 / lambda;
  };
  return {c, reciprocal(spectrum.eigenvalues[c]), reciprocal(spectrum.eigenvalues[c - 1])};
}

}  // namespace giam
