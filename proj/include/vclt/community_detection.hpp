#pragma once

#include <iosfwd>
#include <vector>

#include "vclt/confusion_graph.hpp"

namespace vclt {

// One partition of the graph's vertices. Community ids are canonical: they
// are renumbered by first appearance in vertex order, members sorted.
struct Partition {
  std::vector<int> community_of;             // vertex -> community id
  std::vector<std::vector<int>> communities; // community id -> sorted members
  double modularity = 0.0;

  int n_communities() const { return static_cast<int>(communities.size()); }
  bool operator==(const Partition&) const = default;
};

// Fine-to-coarse chain of partitions, one per aggregation pass. Every level's
// communities are exact unions of the previous level's, and each level's
// communities double as the label sets over original categories.
struct PartitionHierarchy {
  std::vector<Partition> levels;  // levels[0] is the finest

  int n_levels() const { return static_cast<int>(levels.size()); }
  bool operator==(const PartitionHierarchy&) const = default;
};

// Weighted-graph modularity
//   Q = (1/2m) * sum_ij [A_ij - k_i k_j / 2m] * delta(c_i, c_j).
// Throws NumericError when the total edge weight is zero.
double modularity(const ConfusionGraph& graph, const Partition& partition);

// Louvain-style hierarchy: local-move sweeps in ascending vertex order (ties
// on gain go to the lowest community id) followed by graph aggregation,
// repeated until a pass merges nothing. Deterministic; modularity is
// non-decreasing level to level. A pass that merges nothing emits no level.
PartitionHierarchy louvain_hierarchy(const ConfusionGraph& graph);

// Exhaustive search over all set partitions; only for graphs with <= 10
// vertices. Ties on modularity go to fewer communities, then to the
// lexicographically smallest assignment.
Partition brute_force_best_partition(const ConfusionGraph& graph);

// Builds the canonical Partition for an explicit assignment (used by tests
// and readers); validates coverage.
Partition make_partition(const ConfusionGraph& graph, std::vector<int> community_of);

// Hierarchy file: "# vclt-hierarchy v1 N=<n> levels=<k>", then per level
// "level <i> Q=<q>" followed by "community <id>: <cat> <cat> ..." lines.
void write_hierarchy(const PartitionHierarchy& hierarchy, int n_categories,
                     std::ostream& out);
void write_hierarchy_file(const PartitionHierarchy& hierarchy, int n_categories,
                          const std::string& path);
PartitionHierarchy read_hierarchy(std::istream& in, int& n_categories);
PartitionHierarchy read_hierarchy_file(const std::string& path, int& n_categories);

}  // namespace vclt
