#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "giam/propagation.hpp"
#include "giam/synthetic.hpp"
#include "oracles.hpp"

using namespace giam;

namespace {

AugmentedAdjacency aug_of(const oracle::Dense& a) { return augment(oracle::to_sparse(a)); }

oracle::Dense complete(std::size_t n) {
  oracle::Dense a = oracle::zeros(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) a[u][v] = u == v ? 0.0 : 1.0;
  return a;
}

const oracle::Dense kPath = {{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};

}  // namespace

TEST_CASE("transition on the path graph") {
  const TransitionMatrix p = transition(aug_of(kPath));
  CHECK(p.matrix.at(0, 0) == doctest::Approx(0.5));
  CHECK(p.matrix.at(0, 1) == doctest::Approx(0.5));
  CHECK(p.matrix.at(0, 2) == 0.0);
  for (std::size_t v = 0; v < 3; ++v) CHECK(p.matrix.at(1, v) == doctest::Approx(1.0 / 3.0));
  for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(p.matrix.row_sum(r) - 1.0) <= 1e-12);
}

TEST_CASE("transition of an isolated node and of K3") {
  CHECK(transition(aug_of({{0}})).matrix.at(0, 0) == 1.0);
  const TransitionMatrix k3 = transition(aug_of(complete(3)));
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v) CHECK(k3.matrix.at(u, v) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("null transition closed form") {
  const NullTransition q = null_transition(aug_of(kPath));
  for (std::size_t u = 0; u < 3; ++u) {
    CHECK(q(u, 0) == doctest::Approx(2.0 / 7.0));
    CHECK(q(u, 1) == doctest::Approx(3.0 / 7.0));
    CHECK(q(u, 2) == doctest::Approx(2.0 / 7.0));
  }
  const NullTransition reg = null_transition(aug_of(complete(5)));
  for (std::size_t v = 0; v < 5; ++v) CHECK(reg(2, v) == doctest::Approx(0.2));
}

TEST_CASE("unconstrained walk small cases") {
  const TransitionMatrix p = transition(aug_of(kPath));
  CHECK(unconstrained_walk(p, 0).matrix == SparseRowMatrix::identity(3));
  CHECK(unconstrained_walk(p, 1).matrix == p.matrix);
  CHECK(unconstrained_walk(p, 2).matrix.at(0, 2) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("unconstrained walk equals repeated sparse products") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_graph(30 + static_cast<std::size_t>(t), 0.1, rng);
    const TransitionMatrix p = transition(aug_of(a));
    SparseRowMatrix chain = SparseRowMatrix::identity(a.size());
    for (std::size_t k = 1; k <= 5; ++k) {
      chain = sparse_product(chain, p.matrix);
      CHECK(oracle::max_abs_diff(oracle::from(unconstrained_walk(p, k).matrix), oracle::from(chain)) <= 1e-12);
    }
  }
}

TEST_CASE("constrained step on K3 falls back to the identity") {
  const AugmentedAdjacency aug = aug_of(complete(3));
  const PropagationState s = constrained_step({SparseRowMatrix::identity(3), 0, true}, transition(aug), null_transition(aug));
  CHECK(s.matrix == SparseRowMatrix::identity(3));
  CHECK(constrained_walk(transition(aug), null_transition(aug), 1).matrix == SparseRowMatrix::identity(3));
  CHECK_THROWS(constrained_walk(transition(aug), null_transition(aug), 0));
}

TEST_CASE("constrained walk matches the dense explicit-Q oracle") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 15; ++t) {
    const auto a = oracle::random_graph(25, 0.15, rng);
    const AugmentedAdjacency aug = aug_of(a);
    for (std::size_t k : {1u, 2u, 5u}) {
      const PropagationState s = constrained_walk(transition(aug), null_transition(aug), k);
      CHECK(oracle::max_abs_diff(oracle::from(s.matrix), oracle::constrained(a, k)) <= 1e-10);
    }
  }
}

TEST_CASE("rank-1 identity: S Q equals the broadcast q row") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto a = oracle::random_graph(10, 0.3, rng);
  const NullTransition q = null_transition(aug_of(a));
  oracle::Dense s = oracle::zeros(10, 10);
  for (auto& row : s) {
    double sum = 0.0;
    for (double& x : row) sum += (x = u(rng));
    for (double& x : row) x /= sum;
  }
  const oracle::Dense sq = oracle::multiply(s, oracle::null_matrix(a));
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 10; ++c) CHECK(std::abs(sq[r][c] - q(r, c)) <= 1e-12);
}

TEST_CASE("walks preserve row sums") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 5; ++t) {
    const auto a = oracle::random_graph(100, 0.05, rng);
    const AugmentedAdjacency aug = aug_of(a);
    const TransitionMatrix p = transition(aug);
    const NullTransition q = null_transition(aug);
    PropagationState s{SparseRowMatrix::identity(100), 0, true};
    for (std::size_t k = 1; k <= 50; ++k) {
      s = constrained_step(s, p, q);
      if (k % 10 == 0) {
        for (std::size_t r = 0; r < 100; ++r) CHECK(std::abs(s.matrix.row_sum(r) - 1.0) < 1e-9);
      }
    }
    const PropagationState z = unconstrained_walk(p, 50);
    for (std::size_t r = 0; r < 100; ++r) CHECK(std::abs(z.matrix.row_sum(r) - 1.0) < 1e-9);
  }
}

TEST_CASE("constrained support stays inside unconstrained support") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_graph(40, 0.08, rng);
    const AugmentedAdjacency aug = aug_of(a);
    const TransitionMatrix p = transition(aug);
    for (std::size_t k = 1; k <= 6; ++k) {
      const PropagationState s = constrained_walk(p, null_transition(aug), k);
      const PropagationState z = unconstrained_walk(p, k);
      for (std::size_t r = 0; r < 40; ++r) {
        const auto cols = s.matrix.row_cols(r);
        const bool fallback = cols.size() == 1 && cols[0] == r;
        if (fallback) continue;
        for (std::size_t c : cols) CHECK(z.matrix.at(r, c) > 0.0);
      }
    }
  }
}

TEST_CASE("graph equal to its null model stays put") {
  for (std::size_t n = 3; n <= 20; ++n) {
    const AugmentedAdjacency aug = aug_of(complete(n));
    for (std::size_t k = 1; k <= 10; ++k) {
      CHECK(constrained_walk(transition(aug), null_transition(aug), k).matrix == SparseRowMatrix::identity(n));
    }
  }
}

// One step only clips non-neighbors, so inside mass sits near
// (z_in + 1) / (z_in + z_out + 1) = 15/17; the second step clears 0.9.
TEST_CASE("constrained steps on a Newman graph keep mass inside groups") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    NewmanSpec spec;
    spec.seed = seed;
    const SyntheticGraph g = newman_graph(spec);
    const AugmentedAdjacency aug = augment(g.graph);
    const TransitionMatrix p = transition(aug);
    const NullTransition q = null_transition(aug);
    const PropagationState s1 = constrained_walk(p, q, 1);
    CHECK(mean_within_mass(s1.matrix, g.groups) > 0.85);
    CHECK(mean_within_mass(s1.matrix, g.groups) >= mean_within_mass(unconstrained_walk(p, 1).matrix, g.groups));
    CHECK(mean_within_mass(constrained_step(s1, p, q).matrix, g.groups) > 0.9);
  }
}

TEST_CASE("spectrum agrees with the nonsymmetric dense solve") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_graph(30, 0.15, rng);
    const AugmentedAdjacency aug = aug_of(a);
    const TransitionMatrix p = transition(aug);
    const SpectrumResult spec = markov_spectrum(p, aug, 30);
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(30, 30) - p.matrix.to_dense();
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m);
    std::vector<double> ref;
    for (Eigen::Index i = 0; i < 30; ++i) ref.push_back(solver.eigenvalues()(i).real());
    std::sort(ref.begin(), ref.end());
    REQUIRE(spec.eigenvalues.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(spec.eigenvalues[i] - ref[i]) <= 1e-8);
  }
}

TEST_CASE("component count equals zero-eigenvalue multiplicity") {
  const oracle::Dense two_edges = {{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}};
  const AugmentedAdjacency aug = aug_of(two_edges);
  const SpectrumResult s = markov_spectrum(transition(aug), aug, 3);
  CHECK(std::abs(s.eigenvalues[0]) <= 1e-8);
  CHECK(std::abs(s.eigenvalues[1]) <= 1e-8);
  CHECK(s.eigenvalues[2] > 0.1);
  const MixingWindow w = mixing_window(s, 2);
  CHECK_FALSE(w.t_exit.has_value());
  REQUIRE(w.t_enter.has_value());
}

TEST_CASE("iterative spectrum matches the dense path") {
  NewmanSpec spec;
  spec.seed = 2;
  const SyntheticGraph g = newman_graph(spec);
  const AugmentedAdjacency aug = augment(g.graph);
  const SpectrumResult dense = markov_spectrum(transition(aug), aug, 6);
  const SpectrumResult iter = markov_spectrum_iterative(aug, 6);
  REQUIRE(iter.eigenvalues.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(dense.eigenvalues[i] - iter.eigenvalues[i]) <= 1e-6);
}

TEST_CASE("Newman spectrum shows a gap after the fourth eigenvalue") {
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    NewmanSpec spec;
    spec.seed = seed;
    const SyntheticGraph g = newman_graph(spec);
    const AugmentedAdjacency aug = augment(g.graph);
    const SpectrumResult s = markov_spectrum(transition(aug), aug, 5);
    CHECK(s.eigenvalues[0] <= 1e-8);
    ratios.push_back(s.eigenvalues[4] / s.eigenvalues[3]);
  }
  std::sort(ratios.begin(), ratios.end());
  CHECK(0.5 * (ratios[9] + ratios[10]) >= 2.0);
}

TEST_CASE("mixing window reciprocals and range checks") {
  SpectrumResult s;
  s.eigenvalues = {0.0, 0.5, 1.0};
  s.c_max = 3;
  const MixingWindow w = mixing_window(s, 2);
  CHECK(*w.t_enter == doctest::Approx(1.0));
  CHECK(*w.t_exit == doctest::Approx(2.0));
  CHECK_THROWS(mixing_window(s, 1));
  CHECK_THROWS(mixing_window(s, 3));
}
