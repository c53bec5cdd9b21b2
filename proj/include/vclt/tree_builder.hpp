#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vclt/community_detection.hpp"

namespace vclt {

struct TreeNode {
  int node_id = -1;
  int level = 0;                // 1 = root layer, grows toward the leaves
  std::vector<int> label_set;   // sorted category indices
  std::optional<int> parent;
  std::vector<int> children;    // sorted node ids
  std::string name;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const TreeNode&) const = default;
};

// Label tree assembled from a partition hierarchy: one leaf per category,
// one internal node per community per level, and a root covering everything.
struct LabelTree {
  int n_categories = 0;
  std::vector<TreeNode> nodes;           // indexed by node_id
  std::vector<std::vector<int>> layers;  // layers[0] = root layer

  const TreeNode& node(int id) const { return nodes.at(id); }
  int root_id() const;
  int n_layers() const { return static_cast<int>(layers.size()); }
  int n_nodes() const { return static_cast<int>(nodes.size()); }
  std::vector<std::pair<int, int>> edges() const;  // (parent, child) pairs

  bool operator==(const LabelTree&) const = default;
};

// Builds the tree bottom-up: leaves get ids 0..N-1 in category order, then
// community nodes per hierarchy level fine to coarse. When the coarsest
// level still has several communities a synthetic root is added above them.
LabelTree build_vclt(const PartitionHierarchy& hierarchy,
                     std::vector<std::string> category_names = {});

// Returns one message per violated structural invariant; empty means valid.
std::vector<std::string> validate_tree(const LabelTree& tree);

// JSON tree file:
//   { "n_categories": N, "nodes": [ {"id", "level", "labels", "parent",
//     "children", "name"}, ... ] }
void write_tree(const LabelTree& tree, std::ostream& out);
void write_tree_file(const LabelTree& tree, const std::string& path);
LabelTree read_tree(std::istream& in);
LabelTree read_tree_file(const std::string& path);

}  // namespace vclt
