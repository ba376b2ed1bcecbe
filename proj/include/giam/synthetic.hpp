#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/hin_graph.hpp"
#include "giam/propagation.hpp"

namespace giam {

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-type benchmark graph with its planted groups. Node i has id
/// std::to_string(i) and canonical index i.
struct SyntheticGraph {
  HinGraph graph;
  std::vector<int> groups;
  std::size_t group_count = 0;
};

struct NewmanSpec {
  std::size_t n = 128;
  std::size_t groups = 4;
  double z_in = 14.0;
  double z_out = 2.0;
  std::uint64_t seed = 1;
  std::size_t max_retries = 100;

  void validate() const;
};

/// Independent edges: p_in = z_in / (group_size - 1), p_out = z_out / (n - group_size).
/// Redraws until the realized mean intra degree is within 1.5 of z_in and
/// the mean cross degree within 1 of z_out.
SyntheticGraph newman_graph(const NewmanSpec& spec);

struct PlantedPowerLawSpec {
  std::size_t n = 1000;
  double degree_exponent = 2.5;
  double community_exponent = 1.5;
  double mixing = 0.1;
  std::size_t min_degree = 10;
  std::size_t max_degree = 50;
  std::size_t min_community = 20;
  std::size_t max_community = 100;
  std::uint64_t seed = 1;
  std::size_t max_repair_rounds = 200;

  void validate() const;
};

/// Truncated power-law degrees and community sizes; each node sends a
/// (1 - mixing) share of its stubs inside its community and the rest
/// across. Self-loops and multi-edges are removed by stub swaps.
SyntheticGraph planted_powerlaw_graph(const PlantedPowerLawSpec& spec);

/// Samples from a discrete power law p(x) ~ x^-exponent on [lo, hi].
std::vector<std::size_t> sample_power_law(std::size_t count, double exponent, std::size_t lo,
                                          std::size_t hi, std::uint64_t seed);

struct ReportRow {
  std::string walk;  // "unconstrained" or "constrained"
  std::size_t k = 0;
  std::size_t hub = 0;
  double hub_zero_fraction = 0.0;  // exact zeros among the n - 1 off-diagonal entries
  double hub_within_mass = 0.0;
  double hub_out_mass = 0.0;
  double mean_within_mass = 0.0;   // averaged over all rows
  double row_nmi = 0.0;            // k-means on propagation rows vs planted groups
};

struct ReportOptions {
  std::size_t kmeans_restarts = 10;
  std::uint64_t seed = 0;
  bool compute_nmi = true;
};

/// Max-degree node of the largest planted group.
std::size_t hub_node(const SyntheticGraph& g);

double zero_fraction(const SparseRowMatrix& m, std::size_t row);
double within_mass(const SparseRowMatrix& m, std::size_t row, const std::vector<int>& groups);
double mean_within_mass(const SparseRowMatrix& m, const std::vector<int>& groups);
double row_cluster_nmi(const SparseRowMatrix& m, const std::vector<int>& groups,
                       std::size_t group_count, std::size_t restarts, std::uint64_t seed);

std::vector<ReportRow> propagation_report(const SyntheticGraph& g, const std::vector<std::size_t>& k_list,
                                          const ReportOptions& options = {});

}  // namespace giam
