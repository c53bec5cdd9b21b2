#include "vclt/tree_builder.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

namespace vclt {

int LabelTree::root_id() const {
  for (const TreeNode& n : nodes) {
    if (!n.parent.has_value()) return n.node_id;
  }
  throw InvariantError("tree has no root");
}

std::vector<std::pair<int, int>> LabelTree::edges() const {
  std::vector<std::pair<int, int>> out;
  for (const TreeNode& n : nodes) {
    for (int c : n.children) out.emplace_back(n.node_id, c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

LabelTree build_vclt(const PartitionHierarchy& hierarchy,
                     std::vector<std::string> category_names) {
  if (hierarchy.levels.empty()) {
    throw InvariantError("cannot build a tree from an empty hierarchy");
  }
  const int k = hierarchy.n_levels();
  const int n_categories =
      static_cast<int>(hierarchy.levels[0].community_of.size());
  if (n_categories < 1) throw InvariantError("hierarchy covers no categories");
  if (!category_names.empty() &&
      static_cast<int>(category_names.size()) != n_categories) {
    throw UsageError("category_names size does not match category count");
  }

  // every level must partition the full category set
  for (int i = 0; i < k; ++i) {
    const Partition& level = hierarchy.levels[i];
    std::vector<int> seen(n_categories, 0);
    for (const auto& comm : level.communities) {
      for (int cat : comm) {
        if (cat < 0 || cat >= n_categories || seen[cat]++) {
          throw InvariantError("hierarchy level " + std::to_string(i + 1) +
                               " does not partition the categories");
        }
      }
    }
    for (int cat = 0; cat < n_categories; ++cat) {
      if (!seen[cat]) {
        throw InvariantError("hierarchy level " + std::to_string(i + 1) +
                             " does not cover category " + std::to_string(cat));
      }
    }
  }
  // strict coarsening: each level's communities are unions of the previous
  for (int i = 1; i < k; ++i) {
    const Partition& fine = hierarchy.levels[i - 1];
    const Partition& coarse = hierarchy.levels[i];
    if (coarse.n_communities() >= fine.n_communities()) {
      throw InvariantError("hierarchy level " + std::to_string(i + 1) +
                           " does not coarsen level " + std::to_string(i));
    }
    for (const auto& comm : fine.communities) {
      int target = coarse.community_of[comm[0]];
      for (int cat : comm) {
        if (coarse.community_of[cat] != target) {
          throw InvariantError("hierarchy level " + std::to_string(i + 1) +
                               " splits a level-" + std::to_string(i) +
                               " community");
        }
      }
    }
  }

  const bool synthetic_root = hierarchy.levels[k - 1].n_communities() > 1;
  const int n_internal_layers = k + (synthetic_root ? 1 : 0);
  const int leaf_layer = n_internal_layers + 1;

  LabelTree tree;
  tree.n_categories = n_categories;
  tree.layers.assign(leaf_layer, {});

  auto leaf_name = [&](int cat) {
    return category_names.empty() ? "cat" + std::to_string(cat)
                                  : category_names[cat];
  };

  for (int cat = 0; cat < n_categories; ++cat) {
    TreeNode leaf;
    leaf.node_id = cat;
    leaf.level = leaf_layer;
    leaf.label_set = {cat};
    leaf.name = leaf_name(cat);
    tree.nodes.push_back(std::move(leaf));
    tree.layers[leaf_layer - 1].push_back(cat);
  }

  int next_id = n_categories;
  // node id of the community that currently owns each category, one level down
  std::vector<int> owner(n_categories);
  std::iota(owner.begin(), owner.end(), 0);

  for (int i = 0; i < k; ++i) {
    const Partition& level = hierarchy.levels[i];
    const int layer = leaf_layer - 1 - i;  // fine levels sit deeper
    std::vector<int> new_owner(n_categories, -1);
    for (int c = 0; c < level.n_communities(); ++c) {
      TreeNode node;
      node.node_id = next_id++;
      node.level = layer;
      node.label_set = level.communities[c];
      node.name = "level" + std::to_string(layer);
      std::set<int> child_ids;
      for (int cat : level.communities[c]) child_ids.insert(owner[cat]);
      node.children.assign(child_ids.begin(), child_ids.end());
      for (int child : node.children) {
        tree.nodes[child].parent = node.node_id;
      }
      for (int cat : level.communities[c]) new_owner[cat] = node.node_id;
      tree.layers[layer - 1].push_back(node.node_id);
      tree.nodes.push_back(std::move(node));
    }
    owner = std::move(new_owner);
  }

  if (synthetic_root) {
    TreeNode root;
    root.node_id = next_id++;
    root.level = 1;
    root.label_set.resize(n_categories);
    std::iota(root.label_set.begin(), root.label_set.end(), 0);
    root.name = "root";
    std::set<int> child_ids(owner.begin(), owner.end());
    root.children.assign(child_ids.begin(), child_ids.end());
    for (int child : root.children) tree.nodes[child].parent = root.node_id;
    tree.layers[0].push_back(root.node_id);
    tree.nodes.push_back(std::move(root));
  }

  return tree;
}

std::vector<std::string> validate_tree(const LabelTree& tree) {
  std::vector<std::string> violations;
  auto flag = [&](const std::string& msg) { violations.push_back(msg); };

  if (tree.nodes.empty()) {
    flag("tree has no nodes");
    return violations;
  }
  for (int id = 0; id < tree.n_nodes(); ++id) {
    if (tree.nodes[id].node_id != id) {
      flag("node at index " + std::to_string(id) + " has id " +
           std::to_string(tree.nodes[id].node_id));
      return violations;
    }
  }

  std::vector<int> roots;
  for (const TreeNode& n : tree.nodes) {
    if (!n.parent.has_value()) roots.push_back(n.node_id);
  }
  if (roots.size() != 1) {
    flag("multiple roots: expected exactly one parentless node, found " +
         std::to_string(roots.size()));
  }

  int n_leaves = 0;
  std::vector<int> leaf_of_category(tree.n_categories, -1);
  for (const TreeNode& n : tree.nodes) {
    const std::string who = "node " + std::to_string(n.node_id);
    if (n.label_set.empty()) flag(who + ": empty label set");
    if (n.is_leaf()) {
      ++n_leaves;
      if (n.label_set.size() != 1) {
        flag(who + ": leaf label set must have exactly one category");
      } else {
        int cat = n.label_set[0];
        if (cat < 0 || cat >= tree.n_categories) {
          flag(who + ": leaf category out of range");
        } else if (leaf_of_category[cat] != -1) {
          flag(who + ": category " + std::to_string(cat) +
               " already owned by leaf " + std::to_string(leaf_of_category[cat]));
        } else {
          leaf_of_category[cat] = n.node_id;
        }
      }
    } else {
      std::set<int> from_children;
      for (int c : n.children) {
        if (c < 0 || c >= tree.n_nodes()) {
          flag(who + ": child id " + std::to_string(c) + " out of range");
          continue;
        }
        const TreeNode& child = tree.nodes[c];
        if (!child.parent.has_value() || *child.parent != n.node_id) {
          flag(who + ": child " + std::to_string(c) + " does not point back");
        }
        if (child.level != n.level + 1) {
          flag(who + ": child " + std::to_string(c) +
               " is on layer " + std::to_string(child.level) + ", expected " +
               std::to_string(n.level + 1));
        }
        from_children.insert(child.label_set.begin(), child.label_set.end());
      }
      std::set<int> own(n.label_set.begin(), n.label_set.end());
      if (own != from_children) {
        flag(who + ": label set is not the union of its children's label sets");
      }
    }
  }
  if (n_leaves != tree.n_categories) {
    flag("leaf count " + std::to_string(n_leaves) + " != category count " +
         std::to_string(tree.n_categories));
  }
  for (int cat = 0; cat < tree.n_categories; ++cat) {
    if (leaf_of_category[cat] == -1) {
      flag("category " + std::to_string(cat) + " has no leaf");
    }
  }

  // reachability from the root, and acyclicity via the visit count
  if (roots.size() == 1) {
    std::vector<int> stack = {roots[0]};
    std::vector<char> visited(tree.n_nodes(), 0);
    int n_visited = 0;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (id < 0 || id >= tree.n_nodes() || visited[id]) continue;
      visited[id] = 1;
      ++n_visited;
      for (int c : tree.nodes[id].children) stack.push_back(c);
    }
    if (n_visited != tree.n_nodes()) {
      flag("tree is not fully connected from the root (" +
           std::to_string(n_visited) + " of " + std::to_string(tree.n_nodes()) +
           " reachable)");
    }
    if (tree.nodes[roots[0]].level != 1) {
      flag("root must sit on layer 1");
    }
  }

  // layers listing must agree with the per-node levels
  for (int li = 0; li < tree.n_layers(); ++li) {
    for (int id : tree.layers[li]) {
      if (id < 0 || id >= tree.n_nodes() || tree.nodes[id].level != li + 1) {
        flag("layer list " + std::to_string(li + 1) + " disagrees with node " +
             std::to_string(id));
      }
    }
  }
  return violations;
}

void write_tree(const LabelTree& tree, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["n_categories"] = tree.n_categories;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const TreeNode& n : tree.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.node_id;
    jn["level"] = n.level;
    jn["labels"] = n.label_set;
    if (n.parent.has_value()) {
      jn["parent"] = *n.parent;
    } else {
      jn["parent"] = nullptr;
    }
    jn["children"] = n.children;
    jn["name"] = n.name;
    doc["nodes"].push_back(std::move(jn));
  }
  out << doc.dump(2) << "\n";
}

void write_tree_file(const LabelTree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  write_tree(tree, out);
}

LabelTree read_tree(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("tree file: ") + e.what());
  }
  LabelTree tree;
  try {
    tree.n_categories = doc.at("n_categories").get<int>();
    const auto& nodes = doc.at("nodes");
    tree.nodes.resize(nodes.size());
    int max_level = 0;
    for (const auto& jn : nodes) {
      TreeNode n;
      n.node_id = jn.at("id").get<int>();
      n.level = jn.at("level").get<int>();
      n.label_set = jn.at("labels").get<std::vector<int>>();
      std::sort(n.label_set.begin(), n.label_set.end());
      if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<int>();
      n.children = jn.at("children").get<std::vector<int>>();
      std::sort(n.children.begin(), n.children.end());
      if (jn.contains("name")) n.name = jn.at("name").get<std::string>();
      if (n.node_id < 0 || n.node_id >= static_cast<int>(nodes.size())) {
        throw FormatError("tree file: node id " + std::to_string(n.node_id) +
                          " out of range");
      }
      if (n.parent.has_value() &&
          (*n.parent < 0 || *n.parent >= static_cast<int>(nodes.size()))) {
        throw FormatError("tree file: node " + std::to_string(n.node_id) +
                          " has dangling parent " + std::to_string(*n.parent));
      }
      max_level = std::max(max_level, n.level);
      tree.nodes[n.node_id] = std::move(n);
    }
    tree.layers.assign(max_level, {});
    for (const TreeNode& n : tree.nodes) {
      if (n.level < 1) {
        throw FormatError("tree file: node " + std::to_string(n.node_id) +
                          " has layer " + std::to_string(n.level));
      }
      tree.layers[n.level - 1].push_back(n.node_id);
    }
    for (auto& layer : tree.layers) std::sort(layer.begin(), layer.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tree file: ") + e.what());
  }
  auto violations = validate_tree(tree);
  if (!violations.empty()) {
    throw FormatError("tree file: " + violations.front());
  }
  return tree;
}

LabelTree read_tree_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "' for reading");
  return read_tree(in);
}

}  // namespace vclt
