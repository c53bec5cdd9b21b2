#pragma once

#include <iosfwd>
#include <map>

#include "vclt/node_trainer.hpp"
#include "vclt/tree_builder.hpp"

namespace vclt {

// Per-dimension z-score parameters, fitted on the training set and applied
// to every vector before any kernel evaluation.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // > 0

  static Standardization fit(const Matrix& x);
  std::vector<double> apply(std::span<const double> x) const;
  Matrix apply(const Matrix& x) const;
  void validate() const;

  bool operator==(const Standardization&) const = default;
};

// A label tree plus everything needed to run it: one scorer per child of
// every multi-child sibling group, the standardization, the kernel bank and
// the support-vector rows the scorers index into.
struct TreeModel {
  LabelTree tree;
  std::map<int, NodeClassifier> classifiers;
  Standardization standardization;
  std::vector<KernelSpec> kernel_bank;
  Matrix support_features;
};

struct Prediction {
  int label = -1;
  std::vector<int> path;  // node ids, root to leaf
  // one entry per internal node visited: the child scores in child order
  // (empty for single-child pass-throughs)
  std::vector<std::vector<double>> scores_along_path;
};

// Top-down traversal: score the children at each multi-child node, descend
// into the argmax child (ties to the lowest node id), pass through single
// children without scoring, stop at a leaf.
Prediction predict(const TreeModel& model, std::span<const double> x_raw);

// Macro average over classes of per-class top-1 accuracy, in percent.
// Every class must appear in the test set.
double mean_accuracy(const TreeModel& model, const Matrix& x,
                     std::span<const int> labels);

struct EvaluationReport {
  int n_samples = 0;
  int n_classes = 0;
  double mean_accuracy_pct = 0.0;
  double pooled_accuracy_pct = 0.0;
  std::vector<int> per_class_correct;
  std::vector<int> per_class_total;
  std::vector<double> per_class_accuracy_pct;
  // routing_accuracy_pct[l] = share of samples whose predicted path at layer
  // l+2 still contains the true label; index 0 is the decision at the root
  std::vector<double> routing_accuracy_pct;
  std::map<std::pair<int, int>, int> confusion;  // (true, predicted) -> count
};

EvaluationReport evaluate_report(const TreeModel& model, const Matrix& x,
                                 std::span<const int> labels);
void write_report(const EvaluationReport& report, std::ostream& out);

// Trains the whole tree breadth-first, parents strictly before children so
// the inter-level refinement can see each group's parent scorer. Single-child
// groups are recorded as pass-throughs. `stats`, when given, receives one
// entry per sibling group in training order.
struct GroupTrainStats {
  int parent_id = -1;
  std::vector<int> child_ids;
  int n_samples = 0;
  bool pass_through = false;
  bool refined = false;
  int violations_before_refine = 0;
  int violations_after_refine = 0;
  std::vector<double> round_dual_objectives;
  std::vector<std::vector<double>> round_weights;
  std::vector<double> final_dual_objectives;
};

TreeModel train_tree(const LabelTree& tree, const Matrix& x_raw,
                     std::span<const int> labels,
                     const std::vector<KernelSpec>& bank,
                     const TrainingConfig& cfg, int threads = 1,
                     std::vector<GroupTrainStats>* stats = nullptr);

// Model bundle: JSON at `path` plus a binary support-vector table at
// `path`.sv (magic "VCLTSV1", u32 count, u32 dim, float32 rows,
// little-endian).
void write_model(const TreeModel& model, const std::string& path);
TreeModel read_model(const std::string& path);

}  // namespace vclt
