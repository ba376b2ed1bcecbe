#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "giam/models.hpp"
#include "giam/synthetic.hpp"
#include "oracles.hpp"

using namespace giam;

namespace {

std::vector<TypeRange> single(std::size_t n) { return {TypeRange{0, n}}; }

FeatureBlock sparse_block(const Matrix& m) { return m.sparseView(); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Author a1 -> papers p1, p2; plus a lone venue.
HinGraph author_toy() {
  return build_graph({{"a1", "A", ""}, {"p1", "P", ""}, {"p2", "P", ""}, {"v1", "V", ""}},
                     {{"a1", "p1", ""}, {"a1", "p2", ""}});
}

}  // namespace

TEST_CASE("project_features shapes and linearity") {
  FeatureSet fs;
  fs.blocks.push_back(sparse_block(Matrix::Identity(3, 3)));
  ModelParams p;
  p.projections.push_back(Matrix::Identity(3, 3));
  CHECK(project_features(fs, p, single(3)).isApprox(Matrix::Identity(3, 3)));

  std::mt19937_64 rng(1);
  FeatureSet two;
  two.blocks.push_back(sparse_block(random_matrix(2, 3, rng)));
  two.blocks.push_back(sparse_block(random_matrix(4, 5, rng)));
  ModelParams q;
  q.projections = {random_matrix(3, 4, rng), random_matrix(5, 4, rng)};
  const std::vector<TypeRange> ranges = {{0, 2}, {2, 6}};
  const Matrix out = project_features(two, q, ranges);
  CHECK(out.rows() == 6);
  CHECK(out.cols() == 4);

  FeatureSet zero;
  zero.blocks = {FeatureBlock(2, 3), FeatureBlock(4, 5)};
  CHECK(project_features(zero, q, ranges).isZero());

  q.projections[1] = random_matrix(4, 4, rng);
  CHECK_THROWS(project_features(two, q, ranges));
}

TEST_CASE("gcn forward on a single self-looped node") {
  const AugmentedAdjacency aug = augment(SparseRowMatrix(1, 1));
  ModelParams p;
  p.weights = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  Matrix h0(1, 2);
  h0 << 1, 0;
  const Matrix out = gcn_forward(aug, h0, p);
  CHECK(out(0, 0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)));
  CHECK(out(0, 1) == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)));

  p.weights = {Matrix::Zero(2, 2), Matrix::Zero(2, 3)};
  const Matrix uniform = gcn_forward(aug, h0, p);
  for (int c = 0; c < 3; ++c) CHECK(uniform(0, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("naive grouping on the author toy") {
  const HinGraph g = author_toy();
  const AugmentedAdjacency aug = augment(g);
  const Grouping grouping = naive_grouping(g, aug);
  // A-A (self), A-P, P-A, P-P (self), V-V (self)
  CHECK(grouping.labels == std::vector<std::string>{"A-A", "A-P", "P-A", "P-P", "V-V"});
  Matrix h = Matrix::Zero(4, 2);
  h(1, 0) = 1.0;  // p1
  h(2, 1) = 1.0;  // p2
  const GroupedEmbedding e = intra_aggregate(grouping, h);
  const double d_a = 3.0, d_p = 2.0;
  const Matrix& ap = e.blocks[1];
  CHECK(ap(0, 0) == doctest::Approx(1.0 / std::sqrt(d_a * d_p)));
  CHECK(ap(0, 1) == doctest::Approx(1.0 / std::sqrt(d_a * d_p)));
  CHECK(e.blocks[0].row(0).isZero());
  // the isolated venue only sees itself through its own-type group
  CHECK(e.blocks[4](3, 0) == 0.0);
  for (std::size_t b = 0; b < 4; ++b) CHECK(e.blocks[b].row(3).isZero());
  CHECK(inter_concatenate(e).cols() == 10);
}

TEST_CASE("single-type naive model reduces to one GCN propagation") {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_graph(12, 0.3, rng);
  std::vector<NodeRecord> nodes;
  std::vector<EdgeRecord> edges;
  for (std::size_t i = 0; i < 12; ++i) nodes.push_back({std::to_string(i), "N", ""});
  for (std::size_t u = 0; u < 12; ++u)
    for (std::size_t v = u + 1; v < 12; ++v)
      if (a[u][v] != 0.0) edges.push_back({std::to_string(u), std::to_string(v), ""});
  const HinGraph g = build_graph(nodes, edges);
  const AugmentedAdjacency aug = augment(g);
  const Grouping grouping = naive_grouping(g, aug);
  REQUIRE(grouping.operators.size() == 1);
  const Matrix h0 = random_matrix(12, 4, rng);
  ModelParams p;
  p.weights = {Matrix::Identity(4, 4)};
  const Matrix one = naive_forward(grouping, h0, p, Activation::identity);
  const Matrix ref = multiply(normalized_adjacency(aug), h0);
  CHECK((one - ref).cwiseAbs().maxCoeff() <= 1e-10);

  // two layers against the gcn skeleton without the relu
  const Matrix w0 = random_matrix(4, 4, rng), w1 = random_matrix(4, 4, rng);
  p.weights = {w0, w1};
  const SparseRowMatrix a_hat = normalized_adjacency(aug);
  const Matrix skeleton = multiply(a_hat, multiply(a_hat, h0) * w0) * w1;
  CHECK((naive_forward(grouping, h0, p, Activation::identity) - skeleton).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("concatenation order permutes column blocks only") {
  std::mt19937_64 rng(3);
  GroupedEmbedding e;
  e.labels = {"x", "y"};
  e.blocks = {random_matrix(3, 4, rng), random_matrix(3, 4, rng)};
  GroupedEmbedding swapped = e;
  std::swap(swapped.blocks[0], swapped.blocks[1]);
  const Matrix a = e.concatenated(), b = swapped.concatenated();
  CHECK(a.leftCols(4) == b.rightCols(4));
  CHECK(a.rightCols(4) == b.leftCols(4));
}

TEST_CASE("grouped propagate: type blocks sum to S H") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_graph(20, 0.2, rng);
    const AugmentedAdjacency aug = augment(oracle::to_sparse(a));
    const PropagationState s = constrained_walk(transition(aug), null_transition(aug), 3);
    const Matrix h0 = random_matrix(20, 5, rng);
    const std::vector<TypeRange> ranges = {{0, 7}, {7, 12}, {12, 20}};
    const GroupedEmbedding e = grouped_propagate(s, h0, ranges);
    REQUIRE(e.blocks.size() == 3);
    Matrix sum = Matrix::Zero(20, 5);
    for (const auto& b : e.blocks) sum += b;
    const auto ref = oracle::multiply(oracle::from(s.matrix), oracle::from(h0));
    CHECK(oracle::max_abs_diff(oracle::from(sum), ref) <= 1e-12);
  }
}

TEST_CASE("grouped propagate with S = I keeps each node in its own type block") {
  const std::vector<TypeRange> ranges = {{0, 2}, {2, 5}};
  const Matrix h0 = Matrix::Identity(5, 5);
  const GroupedEmbedding e = grouped_propagate({SparseRowMatrix::identity(5), 0, false}, h0, ranges);
  CHECK(e.blocks[0].topRows(2) == h0.topRows(2));
  CHECK(e.blocks[0].bottomRows(3).isZero());
  CHECK(e.blocks[1].bottomRows(3) == h0.bottomRows(3));
  CHECK(e.blocks[1].topRows(2).isZero());
}

TEST_CASE("improved forward reduces to P^k H W") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 10 + static_cast<std::size_t>(t) * 4;
    const auto a = oracle::random_graph(n, 0.2, rng);
    const AugmentedAdjacency aug = augment(oracle::to_sparse(a));
    const std::size_t k = 1 + static_cast<std::size_t>(t % 5);
    const PropagationState z = unconstrained_walk(transition(aug), k);
    const Matrix h0 = random_matrix(static_cast<Eigen::Index>(n), 3, rng);
    const Matrix w = random_matrix(3, 2, rng);
    const Grouping grouping = split_by_type(z.matrix, single(n), {"N"});
    const Matrix out = improved_forward(grouping, h0, w, Activation::identity);
    const auto ref = oracle::multiply(oracle::multiply(oracle::power(oracle::walk_matrix(a), k), oracle::from(h0)),
                                      oracle::from(w));
    CHECK(oracle::max_abs_diff(oracle::from(out), ref) <= 1e-10);
  }
}

TEST_CASE("improved forward with identity S and W returns the features") {
  const Matrix h0 = Matrix::Random(4, 4);
  const Grouping grouping = split_by_type(SparseRowMatrix::identity(4), single(4), {"N"});
  CHECK(improved_forward(grouping, h0, Matrix::Identity(4, 4), Activation::identity).isApprox(h0));
}

TEST_CASE("attention primitives") {
  Vector mu(4);
  mu << 1, 0, 0, 1;
  Vector hu(2), hv(2);
  hu << 1, 0;
  hv << 0, 1;
  CHECK(attention_score(hu, hv, mu, Matrix::Identity(2, 2)) == doctest::Approx(2.0));
  CHECK(attention_score(hu, hv, Vector::Zero(4), Matrix::Identity(2, 2)) == 0.0);
  CHECK(leaky_relu(-2.0, 0.01) == doctest::Approx(-0.02));

  CHECK(attention_weights(Vector::Constant(1, 3.0))(0) == doctest::Approx(1.0));
  const Vector eq = attention_weights(Vector::Zero(4));
  for (int i = 0; i < 4; ++i) CHECK(eq(i) == doctest::Approx(0.25));
  Vector s(2);
  s << 0.0, std::log(3.0);
  const Vector w = attention_weights(s);
  CHECK(w(0) == doctest::Approx(0.25));
  CHECK(w(1) == doctest::Approx(0.75));
  CHECK_THROWS(attention_weights(Vector(0)));

  Matrix nbrs(2, 2);
  nbrs << 1, 0, 0, 1;
  Vector alpha(2);
  alpha << 0.25, 0.75;
  const Vector agg = attention_aggregate(alpha, nbrs, Activation::identity);
  CHECK(agg(0) == doctest::Approx(0.25));
  CHECK(agg(1) == doctest::Approx(0.75));

  CHECK(multi_head({agg}) == agg);
  const Vector twice = multi_head({agg, agg});
  CHECK(twice.size() == 4);
  CHECK(twice.head(2) == twice.tail(2));
  CHECK_THROWS(multi_head({}));
}

TEST_CASE("zero attention parameters give uniform weights over the S support") {
  std::mt19937_64 rng(6);
  const auto a = oracle::random_graph(20, 0.2, rng);
  const AugmentedAdjacency aug = augment(oracle::to_sparse(a));
  const PropagationState s = constrained_walk(transition(aug), null_transition(aug), 2);
  const std::vector<TypeRange> ranges = {{0, 8}, {8, 20}};
  const Grouping grouping = split_by_type(s.matrix, ranges, {"A", "B"});
  const Matrix h0 = random_matrix(20, 6, rng);

  ModelConfig cfg;
  cfg.variant = Variant::giam;
  cfg.hidden = 6;
  cfg.heads = 2;
  ModelParams p;
  const Matrix w0 = random_matrix(6, 3, rng), w1 = random_matrix(6, 3, rng);
  p.head_projections = {w0, w1};
  p.attention = Matrix::Zero(4, 6);
  const Matrix out = giam_forward(grouping, h0, p, cfg);
  REQUIRE(out.cols() == 12);

  // oracle: row-uniformized support of each group, then improved_forward per head
  for (std::size_t gi = 0; gi < 2; ++gi) {
    const SparseRowMatrix& op = grouping.operators[gi];
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < op.rows(); ++r) {
      const auto cs = op.row_cols(r);
      for (std::size_t c : cs) t.push_back({r, c, 1.0 / static_cast<double>(cs.size())});
    }
    const SparseRowMatrix uniform = SparseRowMatrix::from_triplets(op.rows(), op.cols(), t);
    const Grouping one{{"g"}, {uniform}};
    const Matrix h_w0 = improved_forward(one, h0, w0, Activation::identity);
    const Matrix h_w1 = improved_forward(one, h0, w1, Activation::identity);
    CHECK((out.middleCols(static_cast<Eigen::Index>(gi) * 6, 3) - h_w0).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((out.middleCols(static_cast<Eigen::Index>(gi) * 6 + 3, 3) - h_w1).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("attention weights per node and group sum to one") {
  std::mt19937_64 rng(7);
  const auto a = oracle::random_graph(15, 0.3, rng);
  const AugmentedAdjacency aug = augment(oracle::to_sparse(a));
  const PropagationState s = constrained_walk(transition(aug), null_transition(aug), 2);
  ModelContext ctx = make_improved_context(Variant::giam, s, FeatureSet::one_hot(single(15)), single(15), {"N"});
  ModelConfig cfg;
  cfg.variant = Variant::giam;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.classes = 3;
  const ModelParams p = init_params(ctx, cfg, rng);
  const ForwardResult fwd = forward(ctx, cfg, p);
  for (std::size_t slot = 0; slot < fwd.cache.attention.size(); ++slot) {
    const auto& cache = fwd.cache.attention[slot];
    const SparseRowMatrix& op = ctx.grouping.operators[slot / cfg.heads];
    std::size_t flat = 0;
    for (std::size_t r = 0; r < op.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < op.row_cols(r).size(); ++k) sum += cache.alpha[flat + k];
      flat += op.row_cols(r).size();
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("forward passes are permutation equivariant") {
  std::mt19937_64 rng(8);
  const std::size_t n = 20;
  const auto a = oracle::random_graph(n, 0.2, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  oracle::Dense b = oracle::zeros(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) b[perm[u]][perm[v]] = a[u][v];
  const Matrix x = random_matrix(static_cast<Eigen::Index>(n), 4, rng);
  Matrix xp(x.rows(), x.cols());
  for (std::size_t u = 0; u < n; ++u) xp.row(static_cast<Eigen::Index>(perm[u])) = x.row(static_cast<Eigen::Index>(u));

  for (Variant v : {Variant::gcn, Variant::giam2, Variant::giam}) {
    auto build = [&](const oracle::Dense& adj, const Matrix& feats) {
      const AugmentedAdjacency aug = augment(oracle::to_sparse(adj));
      FeatureSet fs;
      fs.blocks.push_back(sparse_block(feats));
      if (v == Variant::gcn) return make_gcn_context(aug, fs, single(n));
      return make_improved_context(v, constrained_walk(transition(aug), null_transition(aug), 3), fs, single(n), {"N"});
    };
    const ModelContext c1 = build(a, x), c2 = build(b, xp);
    ModelConfig cfg;
    cfg.variant = v;
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.classes = 3;
    cfg.activation = Activation::elu;
    std::mt19937_64 init(9);
    const ModelParams p = init_params(c1, cfg, init);
    const Matrix o1 = forward(c1, cfg, p).logits, o2 = forward(c2, cfg, p).logits;
    for (std::size_t u = 0; u < n; ++u) {
      CHECK((o1.row(static_cast<Eigen::Index>(u)) - o2.row(static_cast<Eigen::Index>(perm[u]))).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("giam3 combination") {
  const Matrix e1 = Matrix::Constant(2, 2, 1.0), e2 = Matrix::Constant(2, 2, 3.0);
  CHECK(giam3_forward({e1, e2}, Matrix::Zero(1, 2)).isApprox(Matrix::Constant(2, 2, 2.0)));
  Matrix big(1, 2);
  big << 50.0, -50.0;
  CHECK((giam3_forward({e1, e2}, big) - e1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS(giam3_forward({e1}, Matrix::Zero(1, 2)));
}

TEST_CASE("candidate meta-path state") {
  // movies m1, m2 share d1; m2, m3 share actor a1
  const HinGraph g = build_graph(
      {{"m1", "M", ""}, {"m2", "M", ""}, {"m3", "M", ""}, {"d1", "D", ""}, {"a1", "A", ""}},
      {{"m1", "d1", ""}, {"m2", "d1", ""}, {"m2", "a1", ""}, {"m3", "a1", ""}});
  const SparseRowMatrix adj = candidate_adjacency(g, {MetaPath::parse("M-D-M"), MetaPath::parse("M-A-M")});
  CHECK(adj.rows() == 3);
  CHECK(adj == adj.transpose());
  CHECK(adj.at(0, 1) == 1.0);
  CHECK(adj.at(1, 2) == 1.0);
  CHECK(adj.at(0, 2) == 0.0);
  CHECK(adj.at(0, 0) == 0.0);
  const AugmentedAdjacency aug = augment(adj);
  for (std::size_t i = 0; i < 3; ++i) CHECK(aug.matrix.at(i, i) == 1.0);
  const PropagationState s = candidate_metapath_state(g, {MetaPath::parse("M-D-M")}, 3);
  CHECK(s.matrix.rows() == 3);
  CHECK_THROWS_AS(candidate_adjacency(g, {MetaPath::parse("M-D")}), SchemaError);
  const HinGraph lonely = build_graph({{"m1", "M", ""}, {"d1", "D", ""}}, {{"m1", "d1", ""}});
  CHECK_THROWS(candidate_adjacency(lonely, {MetaPath::parse("M-D-M")}));
}

TEST_CASE("giam1 groups for a DBLP-like schema") {
  const HinGraph g = build_graph(
      {{"a", "A", ""}, {"p", "P", ""}, {"t", "T", ""}, {"v", "V", ""}},
      {{"a", "p", ""}, {"p", "t", ""}, {"p", "v", ""}});
  const Grouping grouping = naive_grouping(g, augment(g));
  const std::vector<std::string> expect = {"A-A", "A-P", "P-A", "P-P", "P-T", "P-V", "T-P", "T-T", "V-P", "V-V"};
  CHECK(grouping.labels == expect);
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(10);
  const Matrix ones = Matrix::Ones(1, 1000);
  CHECK(dropout(ones, 0.0, rng) == ones);
  const Matrix d = dropout(ones, 0.5, rng);
  for (Eigen::Index i = 0; i < d.size(); ++i) CHECK((d(i) == 0.0 || d(i) == 2.0));
  Matrix acc = Matrix::Zero(1, 5);
  const Matrix x = (Matrix(1, 5) << 1, 2, 3, 4, 5).finished();
  for (int i = 0; i < 10000; ++i) acc += dropout(x, 0.5, rng);
  acc /= 10000.0;
  for (int i = 0; i < 5; ++i) CHECK(std::abs(acc(i) - x(i)) / x(i) <= 0.02 * 2);
  CHECK_THROWS(dropout(ones, 1.0, rng));
}

TEST_CASE("evaluation-mode forward is deterministic") {
  NewmanSpec spec;
  const SyntheticGraph g = newman_graph(spec);
  const AugmentedAdjacency aug = augment(g.graph);
  const ModelContext ctx = make_improved_context(Variant::giam2, constrained_walk(transition(aug), null_transition(aug), 4),
                                                 FeatureSet::one_hot(g.graph.type_ranges()), g.graph.type_ranges(), {"N"});
  ModelConfig cfg;
  cfg.classes = 4;
  std::mt19937_64 rng(1);
  const ModelParams p = init_params(ctx, cfg, rng);
  CHECK(forward(ctx, cfg, p).logits == forward(ctx, cfg, p).logits);
}
