#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "giam/synthetic.hpp"

using namespace giam;

namespace {

struct DegreeSplit {
  double inside = 0.0;
  double outside = 0.0;
};

DegreeSplit mean_degrees(const SyntheticGraph& g) {
  DegreeSplit d;
  for (const auto& e : g.graph.edges()) {
    (g.groups[e.u] == g.groups[e.v] ? d.inside : d.outside) += 2.0;
  }
  const double n = static_cast<double>(g.graph.node_count());
  d.inside /= n;
  d.outside /= n;
  return d;
}

}  // namespace

TEST_CASE("Newman defaults") {
  const SyntheticGraph g = newman_graph(NewmanSpec{});
  CHECK(g.graph.node_count() == 128);
  CHECK(g.group_count == 4);
  std::map<int, int> sizes;
  for (int x : g.groups) ++sizes[x];
  for (auto [k, v] : sizes) CHECK(v == 32);
  for (std::size_t i = 0; i < 128; ++i) CHECK(g.graph.node_id(i) == std::to_string(i));
}

TEST_CASE("Newman realized degrees stay within tolerance") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    NewmanSpec spec;
    spec.seed = seed;
    const DegreeSplit d = mean_degrees(newman_graph(spec));
    CHECK(std::abs(d.inside - 14.0) <= 1.5);
    CHECK(std::abs(d.outside - 2.0) <= 1.0);
  }
}

TEST_CASE("Newman is deterministic per seed") {
  NewmanSpec spec;
  spec.seed = 9;
  const SyntheticGraph a = newman_graph(spec), b = newman_graph(spec);
  CHECK(a.graph.adjacency() == b.graph.adjacency());
  spec.seed = 10;
  CHECK_FALSE(newman_graph(spec).graph.adjacency() == a.graph.adjacency());
}

TEST_CASE("Newman with no cross edges splits into its groups") {
  NewmanSpec spec;
  spec.z_out = 0.0;
  const SyntheticGraph g = newman_graph(spec);
  CHECK(mean_degrees(g).outside == 0.0);
  const AugmentedAdjacency aug = augment(g.graph);
  const SpectrumResult s = markov_spectrum(transition(aug), aug, 5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(s.eigenvalues[i]) <= 1e-8);
  CHECK(s.eigenvalues[4] > 1e-3);
}

TEST_CASE("Newman parameter validation") {
  NewmanSpec spec;
  spec.groups = 3;  // 128 is not divisible by 3
  CHECK_THROWS(spec.validate());
  spec = NewmanSpec{};
  spec.z_in = 40.0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("power-law samples stay in range and follow the exponent") {
  const auto xs = sample_power_law(200000, 2.5, 10, 50, 3);
  std::map<std::size_t, double> freq;
  for (std::size_t x : xs) {
    CHECK(x >= 10);
    CHECK(x <= 50);
    freq[x] += 1.0;
  }
  // p(10) / p(20) = 2^2.5
  CHECK(freq[10] / freq[20] == doctest::Approx(std::pow(2.0, 2.5)).epsilon(0.1));
  std::size_t below = 0, above = 0;
  for (std::size_t x : xs) (x < 20 ? below : above) += 1;
  CHECK(below > above);
}

TEST_CASE("planted power-law without mixing has no cross edges") {
  PlantedPowerLawSpec spec;
  spec.mixing = 0.0;
  const SyntheticGraph g = planted_powerlaw_graph(spec);
  CHECK(g.graph.node_count() == 1000);
  CHECK(mean_degrees(g).outside == 0.0);
}

TEST_CASE("planted power-law community sizes and mixing") {
  std::vector<double> largest;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PlantedPowerLawSpec spec;
    spec.seed = seed;
    const SyntheticGraph g = planted_powerlaw_graph(spec);
    std::map<int, std::size_t> sizes;
    for (int x : g.groups) ++sizes[x];
    std::size_t big = 0, total = 0;
    for (auto [k, v] : sizes) {
      CHECK(v >= 20);
      CHECK(v <= 100);
      big = std::max(big, v);
      total += v;
    }
    CHECK(total == 1000);
    largest.push_back(static_cast<double>(big));
    const DegreeSplit d = mean_degrees(g);
    CHECK(d.outside / (d.inside + d.outside) == doctest::Approx(0.1).epsilon(0.5));
  }
  std::sort(largest.begin(), largest.end());
  const double median = 0.5 * (largest[9] + largest[10]);
  CHECK(median >= 80.0);
  CHECK(median <= 120.0);
}

TEST_CASE("planted power-law is deterministic and simple") {
  PlantedPowerLawSpec spec;
  spec.seed = 4;
  const SyntheticGraph a = planted_powerlaw_graph(spec), b = planted_powerlaw_graph(spec);
  CHECK(a.graph.adjacency() == b.graph.adjacency());
  for (std::size_t r = 0; r < a.graph.node_count(); ++r) CHECK(a.graph.adjacency().at(r, r) == 0.0);
}

TEST_CASE("report at k = 0 is the identity") {
  PlantedPowerLawSpec spec;
  const SyntheticGraph g = planted_powerlaw_graph(spec);
  ReportOptions opt;
  opt.compute_nmi = false;
  for (const ReportRow& r : propagation_report(g, {0}, opt)) {
    CHECK(r.hub_zero_fraction == 1.0);
    CHECK(r.hub_within_mass == 1.0);
    CHECK(r.hub_out_mass == 0.0);
    CHECK(r.mean_within_mass == 1.0);
  }
  CHECK(zero_fraction(SparseRowMatrix::identity(5), 2) == 1.0);
}

TEST_CASE("constrained rows keep more mass inside the planted groups") {
  PlantedPowerLawSpec spec;
  spec.seed = 2;
  const SyntheticGraph g = planted_powerlaw_graph(spec);
  ReportOptions opt;
  opt.compute_nmi = false;
  const auto rows = propagation_report(g, {2, 6, 10}, opt);
  std::map<std::size_t, const ReportRow*> con, unc;
  for (const auto& r : rows) (r.walk == "constrained" ? con : unc)[r.k] = &r;
  REQUIRE(con.size() == 3);
  REQUIRE(unc.size() == 3);
  for (std::size_t k : {2u, 6u, 10u}) {
    CHECK(con[k]->mean_within_mass >= unc[k]->mean_within_mass);
    CHECK(con[k]->hub_zero_fraction >= unc[k]->hub_zero_fraction);
    CHECK(con[k]->hub_within_mass + con[k]->hub_out_mass == doctest::Approx(1.0));
  }
  CHECK(hub_node(g) < g.graph.node_count());
}

TEST_CASE("within mass helpers") {
  const SparseRowMatrix m = SparseRowMatrix::from_triplets(2, 3, {{0, 0, 0.25}, {0, 1, 0.75}, {1, 2, 1.0}});
  const std::vector<int> groups = {0, 1, 1};
  CHECK(within_mass(m, 0, groups) == doctest::Approx(0.25));
  CHECK(within_mass(m, 1, groups) == doctest::Approx(1.0));
  CHECK(zero_fraction(m, 0) == doctest::Approx(0.5));
}
