#include "vclt/community_detection.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace vclt {

namespace {

constexpr double kSweepEpsilon = 1e-9;
constexpr int kMaxSweeps = 100000;

// Aggregated working graph. Adjacency entries hold A_ij; a vertex's self
// entry holds the full A_ii, i.e. twice the edge mass collapsed into it.
struct LocalGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> degree;
  double two_m = 0.0;

  double self_weight(int v) const {
    for (const auto& [u, w] : adj[v]) {
      if (u == v) return w;
    }
    return 0.0;
  }
};

LocalGraph from_confusion(const ConfusionGraph& graph) {
  LocalGraph g;
  g.n = graph.n_categories;
  g.adj.resize(g.n);
  g.degree.assign(g.n, 0.0);
  for (const auto& [key, w] : graph.edges) {
    if (w <= 0.0) continue;
    g.adj[key.first].emplace_back(key.second, w);
    g.adj[key.second].emplace_back(key.first, w);
    g.degree[key.first] += w;
    g.degree[key.second] += w;
  }
  for (auto& nbrs : g.adj) {
    std::sort(nbrs.begin(), nbrs.end());
  }
  for (double d : g.degree) g.two_m += d;
  return g;
}

std::vector<int> canonical_ids(const std::vector<int>& assignment) {
  std::vector<int> remap(assignment.size(), -1);
  std::vector<int> out(assignment.size());
  int next = 0;
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    int& slot = remap[assignment[v]];
    if (slot < 0) slot = next++;
    out[v] = slot;
  }
  return out;
}

struct SweepResult {
  std::vector<int> community_of;  // canonical
  double modularity = 0.0;
};

// Local-move phase: visit vertices in ascending id, move each to the
// neighboring community with the largest strictly positive gain (ties to the
// lowest community id), and repeat until a whole sweep gains < epsilon.
SweepResult local_moves(const LocalGraph& g) {
  const double m = g.two_m / 2.0;
  std::vector<int> comm(g.n);
  std::iota(comm.begin(), comm.end(), 0);
  std::vector<double> sigma_tot(g.n, 0.0);
  std::vector<double> sigma_in(g.n, 0.0);
  for (int v = 0; v < g.n; ++v) {
    sigma_tot[v] = g.degree[v];
    sigma_in[v] = g.self_weight(v);
  }

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double sweep_gain = 0.0;
    for (int v = 0; v < g.n; ++v) {
      const int cur = comm[v];
      const double k_v = g.degree[v];
      double self_w = 0.0;
      std::map<int, double> weight_to;  // community -> sum of A_vj, j != v
      for (const auto& [u, w] : g.adj[v]) {
        if (u == v) {
          self_w = w;
        } else {
          weight_to[comm[u]] += w;
        }
      }
      const double w_cur = weight_to.count(cur) ? weight_to[cur] : 0.0;
      sigma_tot[cur] -= k_v;
      sigma_in[cur] -= 2.0 * w_cur + self_w;

      auto gain = [&](int c, double w_to_c) {
        return w_to_c / m - sigma_tot[c] * k_v / (2.0 * m * m);
      };
      int best_comm = cur;
      double best_gain = gain(cur, w_cur);
      const double stay_gain = best_gain;
      for (const auto& [c, w_to_c] : weight_to) {
        if (c == cur) continue;
        double gn = gain(c, w_to_c);
        if (gn > best_gain) {
          best_gain = gn;
          best_comm = c;
        }
      }
      const double w_best = weight_to.count(best_comm) ? weight_to[best_comm] : 0.0;
      sigma_tot[best_comm] += k_v;
      sigma_in[best_comm] += 2.0 * w_best + self_w;
      comm[v] = best_comm;
      if (best_comm != cur) sweep_gain += best_gain - stay_gain;
    }
    if (sweep_gain < kSweepEpsilon) break;
  }

  double q = 0.0;
  for (int c = 0; c < g.n; ++c) {
    if (sigma_tot[c] == 0.0 && sigma_in[c] == 0.0) continue;
    double tot = sigma_tot[c] / g.two_m;
    q += sigma_in[c] / g.two_m - tot * tot;
  }
  return {canonical_ids(comm), q};
}

LocalGraph aggregate(const LocalGraph& g, const std::vector<int>& comm,
                     int n_communities) {
  std::vector<std::map<int, double>> acc(n_communities);
  for (int v = 0; v < g.n; ++v) {
    for (const auto& [u, w] : g.adj[v]) {
      if (u == v) {
        acc[comm[v]][comm[v]] += w;  // A_ii carries its factor already
      } else {
        acc[comm[v]][comm[u]] += w;  // each direction visited once
      }
    }
  }
  LocalGraph out;
  out.n = n_communities;
  out.adj.resize(n_communities);
  out.degree.assign(n_communities, 0.0);
  for (int c = 0; c < n_communities; ++c) {
    for (const auto& [u, w] : acc[c]) {
      out.adj[c].emplace_back(u, w);
      out.degree[c] += w;
    }
  }
  for (double d : out.degree) out.two_m += d;
  return out;
}

std::vector<std::vector<int>> group_members(const std::vector<int>& community_of) {
  int n_comms = 0;
  for (int c : community_of) n_comms = std::max(n_comms, c + 1);
  std::vector<std::vector<int>> communities(n_comms);
  for (int v = 0; v < static_cast<int>(community_of.size()); ++v) {
    communities[community_of[v]].push_back(v);
  }
  return communities;
}

void check_partition(const ConfusionGraph& graph, const Partition& partition) {
  if (static_cast<int>(partition.community_of.size()) != graph.n_categories) {
    throw InvariantError("partition covers " +
                         std::to_string(partition.community_of.size()) +
                         " vertices, graph has " +
                         std::to_string(graph.n_categories));
  }
  const int n_comms = partition.n_communities();
  std::vector<int> seen(graph.n_categories, 0);
  for (int c = 0; c < n_comms; ++c) {
    if (partition.communities[c].empty()) {
      throw InvariantError("community " + std::to_string(c) + " is empty");
    }
    for (int v : partition.communities[c]) {
      if (v < 0 || v >= graph.n_categories || seen[v]++ ||
          partition.community_of[v] != c) {
        throw InvariantError("partition is inconsistent at vertex " +
                             std::to_string(v));
      }
    }
  }
  for (int v = 0; v < graph.n_categories; ++v) {
    if (!seen[v]) {
      throw InvariantError("vertex " + std::to_string(v) + " not covered");
    }
  }
}

double modularity_of_assignment(const ConfusionGraph& graph,
                                const std::vector<int>& community_of,
                                int n_communities) {
  std::vector<double> degree(graph.n_categories, 0.0);
  double m = 0.0;
  for (const auto& [key, w] : graph.edges) {
    degree[key.first] += w;
    degree[key.second] += w;
    m += w;
  }
  if (m <= 0.0) {
    throw NumericError("modularity undefined: graph has zero total edge weight");
  }
  std::vector<double> sigma_in(n_communities, 0.0);
  std::vector<double> sigma_tot(n_communities, 0.0);
  for (const auto& [key, w] : graph.edges) {
    if (community_of[key.first] == community_of[key.second]) {
      sigma_in[community_of[key.first]] += 2.0 * w;
    }
  }
  for (int v = 0; v < graph.n_categories; ++v) {
    sigma_tot[community_of[v]] += degree[v];
  }
  double q = 0.0;
  const double two_m = 2.0 * m;
  for (int c = 0; c < n_communities; ++c) {
    double tot = sigma_tot[c] / two_m;
    q += sigma_in[c] / two_m - tot * tot;
  }
  return q;
}

}  // namespace

double modularity(const ConfusionGraph& graph, const Partition& partition) {
  check_partition(graph, partition);
  return modularity_of_assignment(graph, partition.community_of,
                                  partition.n_communities());
}

Partition make_partition(const ConfusionGraph& graph, std::vector<int> community_of) {
  if (static_cast<int>(community_of.size()) != graph.n_categories) {
    throw InvariantError("assignment size does not match vertex count");
  }
  Partition p;
  p.community_of = canonical_ids(community_of);
  p.communities = group_members(p.community_of);
  if (graph.total_edge_mass() > 0.0) {
    p.modularity =
        modularity_of_assignment(graph, p.community_of, p.n_communities());
  }
  return p;
}

PartitionHierarchy louvain_hierarchy(const ConfusionGraph& graph) {
  if (graph.n_categories < 1) throw InvariantError("empty graph");
  LocalGraph g = from_confusion(graph);
  if (g.two_m <= 0.0) {
    throw NumericError("community detection needs at least one positive-weight edge");
  }

  PartitionHierarchy hierarchy;
  std::vector<int> cat_to_vertex(graph.n_categories);
  std::iota(cat_to_vertex.begin(), cat_to_vertex.end(), 0);

  while (true) {
    SweepResult sweep = local_moves(g);
    int n_comms = 0;
    for (int c : sweep.community_of) n_comms = std::max(n_comms, c + 1);
    if (n_comms == g.n) break;  // nothing merged; the pass emits no level

    std::vector<int> expanded(graph.n_categories);
    for (int cat = 0; cat < graph.n_categories; ++cat) {
      expanded[cat] = sweep.community_of[cat_to_vertex[cat]];
    }
    Partition level;
    level.community_of = canonical_ids(expanded);
    level.communities = group_members(level.community_of);
    level.modularity = sweep.modularity;
    hierarchy.levels.push_back(std::move(level));

    g = aggregate(g, sweep.community_of, n_comms);
    for (int cat = 0; cat < graph.n_categories; ++cat) {
      cat_to_vertex[cat] = sweep.community_of[cat_to_vertex[cat]];
    }
    if (g.n == 1) break;
  }
  return hierarchy;
}

Partition brute_force_best_partition(const ConfusionGraph& graph) {
  const int n = graph.n_categories;
  if (n > 10) {
    throw UsageError("brute-force partition search limited to 10 vertices, got " +
                     std::to_string(n));
  }
  if (n < 1) throw InvariantError("empty graph");
  if (graph.total_edge_mass() <= 0.0) {
    throw NumericError("modularity undefined: graph has zero total edge weight");
  }

  // Restricted growth strings enumerate every set partition exactly once,
  // in lexicographic order.
  std::vector<int> a(n, 0);
  std::vector<int> best;
  double best_q = 0.0;
  int best_comms = 0;
  while (true) {
    int n_comms = *std::max_element(a.begin(), a.end()) + 1;
    double q = modularity_of_assignment(graph, a, n_comms);
    bool take = best.empty();
    if (!take && q > best_q + 1e-12) take = true;
    if (!take && std::abs(q - best_q) <= 1e-12 && n_comms < best_comms) take = true;
    if (take) {
      best = a;
      best_q = q;
      best_comms = n_comms;
    }
    // next restricted growth string
    int i = n - 1;
    for (; i > 0; --i) {
      int prefix_max = *std::max_element(a.begin(), a.begin() + i);
      if (a[i] <= prefix_max) {
        ++a[i];
        std::fill(a.begin() + i + 1, a.end(), 0);
        break;
      }
      a[i] = 0;
    }
    if (i == 0) break;
  }

  Partition p;
  p.community_of = best;  // restricted growth strings are already canonical
  p.communities = group_members(p.community_of);
  p.modularity = best_q;
  return p;
}

void write_hierarchy(const PartitionHierarchy& hierarchy, int n_categories,
                     std::ostream& out) {
  out << "# vclt-hierarchy v1 N=" << n_categories
      << " levels=" << hierarchy.n_levels() << "\n";
  for (int i = 0; i < hierarchy.n_levels(); ++i) {
    const Partition& level = hierarchy.levels[i];
    out << "level " << (i + 1) << " Q=" << format_double(level.modularity) << "\n";
    for (int c = 0; c < level.n_communities(); ++c) {
      out << "community " << c << ":";
      for (int v : level.communities[c]) out << " " << v;
      out << "\n";
    }
  }
}

void write_hierarchy_file(const PartitionHierarchy& hierarchy, int n_categories,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  write_hierarchy(hierarchy, n_categories, out);
}

PartitionHierarchy read_hierarchy(std::istream& in, int& n_categories) {
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw FormatError("hierarchy file: empty");
  {
    std::istringstream hs(line);
    std::string hash, magic, version, npart, lpart;
    hs >> hash >> magic >> version >> npart >> lpart;
    if (hash != "#" || magic != "vclt-hierarchy" || version != "v1" ||
        npart.rfind("N=", 0) != 0 || lpart.rfind("levels=", 0) != 0) {
      throw FormatError("hierarchy line 1: expected '# vclt-hierarchy v1 N=<n> levels=<k>'");
    }
    n_categories = static_cast<int>(parse_long(npart.substr(2), "hierarchy header"));
    if (n_categories < 1) throw FormatError("hierarchy header: N must be >= 1");
  }

  PartitionHierarchy hierarchy;
  std::vector<int> community_of;
  std::vector<std::vector<int>> communities;
  double q = 0.0;
  bool in_level = false;

  auto flush_level = [&]() {
    if (!in_level) return;
    Partition p;
    p.communities = communities;
    p.community_of.assign(n_categories, -1);
    for (int c = 0; c < static_cast<int>(communities.size()); ++c) {
      for (int v : communities[c]) {
        if (v < 0 || v >= n_categories) {
          throw FormatError("hierarchy: category index " + std::to_string(v) +
                            " out of range");
        }
        if (p.community_of[v] != -1) {
          throw FormatError("hierarchy: category " + std::to_string(v) +
                            " listed twice in one level");
        }
        p.community_of[v] = c;
      }
    }
    for (int v = 0; v < n_categories; ++v) {
      if (p.community_of[v] == -1) {
        throw FormatError("hierarchy: category " + std::to_string(v) +
                          " missing from a level");
      }
    }
    p.modularity = q;
    hierarchy.levels.push_back(std::move(p));
    communities.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "hierarchy line " + std::to_string(line_no);
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "level") {
      flush_level();
      int idx = 0;
      std::string qpart;
      ls >> idx >> qpart;
      if (!ls || qpart.rfind("Q=", 0) != 0) {
        throw FormatError(where + ": expected 'level <i> Q=<q>'");
      }
      q = parse_double(qpart.substr(2), where);
      in_level = true;
    } else if (keyword == "community") {
      if (!in_level) throw FormatError(where + ": community before any level");
      std::string idx_colon;
      ls >> idx_colon;
      std::vector<int> members;
      long v = 0;
      while (ls >> v) members.push_back(static_cast<int>(v));
      if (members.empty()) throw FormatError(where + ": empty community");
      std::sort(members.begin(), members.end());
      communities.push_back(std::move(members));
    } else {
      throw FormatError(where + ": unknown keyword '" + keyword + "'");
    }
  }
  flush_level();
  return hierarchy;
}

PartitionHierarchy read_hierarchy_file(const std::string& path, int& n_categories) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "' for reading");
  return read_hierarchy(in, n_categories);
}

}  // namespace vclt
