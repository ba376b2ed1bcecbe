#include "giam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "giam/evaluation.hpp"

namespace giam {

namespace {

SyntheticGraph assemble(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                        std::vector<int> groups) {
  std::vector<NodeRecord> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = {std::to_string(i), "N", std::to_string(groups[i])};
  std::vector<EdgeRecord> recs;
  recs.reserve(edges.size());
  for (auto [u, v] : edges) recs.push_back({std::to_string(u), std::to_string(v), "N-N"});
  SyntheticGraph g;
  g.graph = build_graph(nodes, recs);
  g.group_count = groups.empty() ? 0 : static_cast<std::size_t>(*std::max_element(groups.begin(), groups.end()) + 1);
  g.groups = std::move(groups);
  return g;
}

}  // namespace

void NewmanSpec::validate() const {
  if (groups == 0 || n % groups != 0) throw std::invalid_argument("n must be divisible by groups");
  if (n / groups < 2) throw std::invalid_argument("groups need at least two nodes");
  if (!(z_in + z_out < static_cast<double>(n))) throw std::invalid_argument("z_in + z_out must be < n");
  if (z_in < 0.0 || z_out < 0.0) throw std::invalid_argument("mean degrees must be non-negative");
  if (z_in > static_cast<double>(n / groups - 1)) throw std::invalid_argument("z_in exceeds group size - 1");
  if (groups > 1 && z_out > static_cast<double>(n - n / groups)) {
    throw std::invalid_argument("z_out exceeds the number of cross-group partners");
  }
}

SyntheticGraph newman_graph(const NewmanSpec& spec) {
  spec.validate();
  const std::size_t size = spec.n / spec.groups;
  const double p_in = spec.z_in / static_cast<double>(size - 1);
  const double p_out = spec.groups > 1 ? spec.z_out / static_cast<double>(spec.n - size) : 0.0;
  std::vector<int> groups(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) groups[i] = static_cast<int>(i / size);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  double intra = 0.0, cross = 0.0;
  for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::size_t in_edges = 0, out_edges = 0;
    for (std::size_t u = 0; u < spec.n; ++u) {
      for (std::size_t v = u + 1; v < spec.n; ++v) {
        const bool same = groups[u] == groups[v];
        if (coin(rng) < (same ? p_in : p_out)) {
          edges.emplace_back(u, v);
          ++(same ? in_edges : out_edges);
        }
      }
    }
    intra = 2.0 * static_cast<double>(in_edges) / static_cast<double>(spec.n);
    cross = 2.0 * static_cast<double>(out_edges) / static_cast<double>(spec.n);
    if (std::abs(intra - spec.z_in) <= 1.5 && std::abs(cross - spec.z_out) <= 1.0) {
      return assemble(spec.n, edges, groups);
    }
  }
  std::ostringstream msg;
  msg << "newman generator exhausted " << spec.max_retries << " retries (last mean intra degree "
      << intra << ", cross degree " << cross << ")";
  throw GeneratorError(msg.str());
}

void PlantedPowerLawSpec::validate() const {
  if (!(degree_exponent > 1.0) || !(community_exponent > 1.0)) {
    throw std::invalid_argument("power-law exponents must exceed 1");
  }
  if (mixing < 0.0 || mixing >= 1.0) throw std::invalid_argument("mixing must lie in [0, 1)");
  if (min_degree < 1 || min_degree > max_degree) throw std::invalid_argument("bad degree bounds");
  if (min_community < 2 || min_community > max_community) throw std::invalid_argument("bad community bounds");
  if (min_community > n) throw std::invalid_argument("min_community exceeds n");
}

std::vector<std::size_t> sample_power_law(std::size_t count, double exponent, std::size_t lo,
                                          std::size_t hi, std::uint64_t seed) {
  std::vector<double> weights;
  for (std::size_t x = lo; x <= hi; ++x) weights.push_back(std::pow(static_cast<double>(x), -exponent));
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(count);
  for (auto& v : out) v = lo + dist(rng);
  return out;
}

namespace {

using EdgeKey = std::pair<std::size_t, std::size_t>;

EdgeKey key(std::size_t a, std::size_t b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

/// Pairs consecutive stubs, then repairs self-loops, duplicates, and pairs
/// rejected by `allowed` through random double swaps.
template <typename Allowed>
// Returns {pairs, pairs left unrepaired}; the unrepaired ones are dropped.
std::pair<std::size_t, std::size_t> wire(std::vector<std::size_t> stubs, std::set<EdgeKey>& edges,
                                         std::mt19937_64& rng, std::size_t max_rounds, Allowed allowed) {
  if (stubs.size() < 2) return {0, 0};
  std::shuffle(stubs.begin(), stubs.end(), rng);
  const std::size_t pairs = stubs.size() / 2;
  auto valid = [&](std::size_t a, std::size_t b) {
    return a != b && allowed(a, b) && !edges.contains(key(a, b));
  };
  std::vector<std::size_t> bad;
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t a = stubs[2 * p], b = stubs[2 * p + 1];
    if (valid(a, b)) {
      edges.insert(key(a, b));
    } else {
      bad.push_back(p);
    }
  }
  std::uniform_int_distribution<std::size_t> any(0, pairs - 1);
  for (std::size_t round = 0; round < max_rounds && !bad.empty(); ++round) {
    std::vector<std::size_t> still;
    for (std::size_t p : bad) {
      bool fixed = false;
      for (int tries = 0; tries < 50 && !fixed; ++tries) {
        const std::size_t q = any(rng);
        if (q == p) continue;
        std::size_t& a = stubs[2 * p];
        std::size_t& b = stubs[2 * p + 1];
        std::size_t& c = stubs[2 * q];
        std::size_t& d = stubs[2 * q + 1];
        const bool q_live = std::find(bad.begin(), bad.end(), q) == bad.end() &&
                            std::find(still.begin(), still.end(), q) == still.end();
        if (!q_live) continue;
        edges.erase(key(c, d));
        if (valid(a, c) && valid(b, d) && key(a, c) != key(b, d)) {
          edges.insert(key(a, c));
          edges.insert(key(b, d));
          std::swap(b, c);
          fixed = true;
        } else {
          edges.insert(key(c, d));
        }
      }
      if (!fixed) still.push_back(p);
    }
    bad = std::move(still);
  }
  return {pairs, bad.size()};
}

}  // namespace

SyntheticGraph planted_powerlaw_graph(const PlantedPowerLawSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto degrees = sample_power_law(spec.n, spec.degree_exponent, spec.min_degree, spec.max_degree, rng());

  // Community sizes: draw until the total reaches n, then trim or merge the tail.
  std::vector<std::size_t> sizes;
  {
    std::size_t total = 0;
    std::uint64_t s = rng();
    while (total < spec.n) {
      const auto draw = sample_power_law(1, spec.community_exponent, spec.min_community,
                                         spec.max_community, s++)[0];
      sizes.push_back(draw);
      total += draw;
    }
    const std::size_t excess = total - spec.n;
    if (sizes.back() >= excess + spec.min_community || sizes.size() == 1) {
      sizes.back() -= excess;
    } else {
      // Too small after trimming: drop it and spread its remaining members.
      std::size_t deficit = sizes.back() - excess;
      sizes.pop_back();
      std::sort(sizes.begin(), sizes.end());
      for (std::size_t i = 0; deficit > 0; i = (i + 1) % sizes.size(), --deficit) ++sizes[i];
    }
    std::sort(sizes.rbegin(), sizes.rend());
  }
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != spec.n) {
    throw GeneratorError("community sizes do not sum to n");
  }

  // Nodes are laid out community by community, largest first. Degrees are
  // dealt so that each node's internal share fits inside its community.
  std::vector<int> groups;
  for (std::size_t c = 0; c < sizes.size(); ++c) groups.insert(groups.end(), sizes[c], static_cast<int>(c));
  {
    std::sort(degrees.rbegin(), degrees.rend());
    std::vector<std::size_t> slot_begin(sizes.size(), 0), filled(sizes.size(), 0);
    for (std::size_t c = 1; c < sizes.size(); ++c) slot_begin[c] = slot_begin[c - 1] + sizes[c - 1];
    std::vector<std::size_t> placed(spec.n);
    for (std::size_t d : degrees) {
      const auto need = static_cast<std::size_t>(std::lround((1.0 - spec.mixing) * static_cast<double>(d)));
      std::vector<std::size_t> fits, open;
      for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (filled[c] == sizes[c]) continue;
        open.push_back(c);
        if (sizes[c] - 1 >= need) fits.push_back(c);
      }
      const auto& choices = fits.empty() ? open : fits;
      const std::size_t c = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
      placed[slot_begin[c] + filled[c]++] = d;
    }
    degrees = std::move(placed);
  }

  std::vector<std::size_t> internal(spec.n), external(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t cap = sizes[static_cast<std::size_t>(groups[i])] - 1;
    internal[i] = std::min(cap, static_cast<std::size_t>(std::lround((1.0 - spec.mixing) * static_cast<double>(degrees[i]))));
    external[i] = spec.mixing > 0.0 ? degrees[i] - std::min(degrees[i], internal[i]) : 0;
  }

  std::set<EdgeKey> edges;
  std::size_t pairs = 0, dropped = 0;
  std::size_t begin = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    std::vector<std::size_t> stubs;
    for (std::size_t i = begin; i < begin + sizes[c]; ++i) stubs.insert(stubs.end(), internal[i], i);
    if (stubs.size() % 2 == 1) {
      // Move one stub of the highest-degree member outward to fix parity.
      const std::size_t v = *std::max_element(stubs.begin(), stubs.end(), [&](std::size_t a, std::size_t b) {
        return internal[a] < internal[b];
      });
      stubs.erase(std::find(stubs.begin(), stubs.end(), v));
      if (spec.mixing > 0.0) ++external[v];
    }
    const auto [p, d] = wire(std::move(stubs), edges, rng, spec.max_repair_rounds,
                             [](std::size_t, std::size_t) { return true; });
    pairs += p;
    dropped += d;
    begin += sizes[c];
  }
  if (spec.mixing > 0.0) {
    std::vector<std::size_t> stubs;
    for (std::size_t i = 0; i < spec.n; ++i) stubs.insert(stubs.end(), external[i], i);
    if (stubs.size() % 2 == 1) stubs.pop_back();
    const auto [p, d] = wire(std::move(stubs), edges, rng, spec.max_repair_rounds,
                             [&](std::size_t a, std::size_t b) { return groups[a] != groups[b]; });
    pairs += p;
    dropped += d;
  }
  // A few dense small communities cannot be wired simply; dropping up to 1%
  // of all stub pairs is tolerated, more means the degrees are not graphical.
  if (dropped * 100 > pairs) {
    throw GeneratorError("could not repair " + std::to_string(dropped) + " of " + std::to_string(pairs) +
                         " stub pairs into a simple graph");
  }
  std::vector<std::pair<std::size_t, std::size_t>> edge_list(edges.begin(), edges.end());
  return assemble(spec.n, edge_list, std::move(groups));
}

std::size_t hub_node(const SyntheticGraph& g) {
  std::vector<std::size_t> sizes(g.group_count, 0);
  for (int grp : g.groups) ++sizes[static_cast<std::size_t>(grp)];
  const auto largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<std::size_t> degree(g.graph.node_count(), 0);
  for (const auto& e : g.graph.edges()) {
    ++degree[e.u];
    ++degree[e.v];
  }
  std::size_t best = g.graph.node_count();
  for (std::size_t i = 0; i < g.graph.node_count(); ++i) {
    if (g.groups[i] != largest) continue;
    if (best == g.graph.node_count() || degree[i] > degree[best]) best = i;
  }
  return best;
}

double zero_fraction(const SparseRowMatrix& m, std::size_t row) {
  const auto cs = m.row_cols(row);
  std::size_t off_nonzero = 0;
  for (std::size_t c : cs) {
    if (c != row) ++off_nonzero;
  }
  const double off = static_cast<double>(m.cols() - 1);
  return off > 0.0 ? (off - static_cast<double>(off_nonzero)) / off : 0.0;
}

double within_mass(const SparseRowMatrix& m, std::size_t row, const std::vector<int>& groups) {
  const auto cs = m.row_cols(row);
  const auto vs = m.row_values(row);
  double mass = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    if (groups[cs[k]] == groups[row]) mass += vs[k];
  }
  return mass;
}

double mean_within_mass(const SparseRowMatrix& m, const std::vector<int>& groups) {
  double total = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) total += within_mass(m, r, groups);
  return m.rows() ? total / static_cast<double>(m.rows()) : 0.0;
}

double row_cluster_nmi(const SparseRowMatrix& m, const std::vector<int>& groups,
                       std::size_t group_count, std::size_t restarts, std::uint64_t seed) {
  KMeansOptions opt;
  opt.restarts = restarts;
  opt.seed = seed;
  return nmi(kmeans(m.to_dense(), group_count, opt).labels, groups);
}

std::vector<ReportRow> propagation_report(const SyntheticGraph& g, const std::vector<std::size_t>& k_list,
                                          const ReportOptions& options) {
  const AugmentedAdjacency aug = augment(g.graph);
  const TransitionMatrix p = transition(aug);
  const NullTransition q = null_transition(aug);
  const std::size_t hub = hub_node(g);
  std::vector<std::size_t> ks = k_list;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  std::vector<ReportRow> rows;
  auto describe = [&](const char* walk, std::size_t k, const SparseRowMatrix& m) {
    ReportRow r;
    r.walk = walk;
    r.k = k;
    r.hub = hub;
    r.hub_zero_fraction = zero_fraction(m, hub);
    r.hub_within_mass = within_mass(m, hub, g.groups);
    r.hub_out_mass = m.row_sum(hub) - r.hub_within_mass;
    r.mean_within_mass = mean_within_mass(m, g.groups);
    if (options.compute_nmi && g.group_count >= 2) {
      r.row_nmi = row_cluster_nmi(m, g.groups, g.group_count, options.kmeans_restarts, options.seed);
    }
    return r;
  };

  PropagationState z{SparseRowMatrix::identity(aug.matrix.rows()), 0, false};
  PropagationState s{SparseRowMatrix::identity(aug.matrix.rows()), 0, true};
  for (std::size_t k : ks) {
    while (z.step < k) {
      z.matrix = sparse_product(z.matrix, p.matrix);
      ++z.step;
    }
    while (s.step < k) s = constrained_step(s, p, q);
    rows.push_back(describe("unconstrained", k, z.matrix));
    rows.push_back(describe("constrained", k, s.matrix));
  }
  return rows;
}

}  // namespace giam
