#pragma once

#include <optional>
#include <vector>

#include "vclt/kernel.hpp"

namespace vclt {

// Kernel-expansion scorer for one tree node: f(x) = sum_i coef_i K(x_i, x) + b.
// sv_indices are rows of whichever feature matrix the owner associates with
// this scorer (the sibling group's samples right after training, the model's
// support-vector table once bundled).
struct NodeClassifier {
  int node_id = -1;
  int level = 0;
  std::vector<int> sv_indices;
  std::vector<double> dual_coefs;  // alpha_i * y_i, |coef| <= C
  double bias = 0.0;
  KernelCombination kernel;

  bool operator==(const NodeClassifier&) const = default;
};

struct TrainingConfig {
  double C = 1.0;
  double lambda = 1.0;   // folded into the kernel-weight regularizer scale
  double rho = 0.1;      // inter-level hinge penalty weight
  int mkl_iters = 5;     // kernel-weight updates between dual solves
  int refine_epochs = 20;
  double tol = 1e-6;     // KKT gap tolerance of the dual solver

  void validate() const;
};

// Training samples of one sibling group: all samples whose category lies in
// the parent's label set, targeted by the child slot that owns the category.
struct SiblingGroupSamples {
  Matrix features;
  std::vector<int> targets;  // child slot per sample, in [0, n_children)
  int n_children = 0;
};

// A previously trained scorer plus the feature matrix its support-vector
// indices refer to; used to evaluate the parent-level score of each sample.
struct ParentScorer {
  const NodeClassifier* classifier = nullptr;
  const Matrix* features = nullptr;
};

struct SiblingGroupResult {
  std::vector<NodeClassifier> scorers;  // one per child slot
  // sum of per-scorer dual objectives after each dual solve (one entry per
  // solve; non-increasing across kernel-weight rounds)
  std::vector<double> round_dual_objectives;
  // kernel weights going into each solve (uniform first, then one per update)
  std::vector<std::vector<double>> round_weights;
  std::vector<double> final_dual_objectives;  // per scorer, last solve
  int violations_before_refine = 0;
  int violations_after_refine = 0;
  bool refined = false;
};

// One-vs-rest multi-kernel training over a sibling group:
//  (a) solve each child's soft-margin kernel SVM dual at fixed weights d,
//  (b) move d to the norm-proportional fixed point of the weight-scaled
//      regularizer, renormalized onto the simplex,
// alternating for cfg.mkl_iters rounds (plus a closing solve so coefficients
// match the final weights). When a parent scorer is given and rho > 0, a
// projected sub-gradient refinement nudges each sample's own-child score
// above its parent-level score; the best iterate by violation count is kept,
// so refinement never increases the violation count.
SiblingGroupResult train_sibling_group(const SiblingGroupSamples& samples,
                                       const std::vector<KernelSpec>& bank,
                                       const ParentScorer* parent,
                                       const TrainingConfig& cfg, int threads = 1);

double score(const NodeClassifier& classifier, const Matrix& features,
             std::span<const double> x);

// Soft-margin SVM dual on a precomputed Gram matrix:
//   max  sum a_i - 1/2 sum a_i a_j y_i y_j K_ij,  0 <= a_i <= C, y'a = 0,
// solved by maximal-violating-pair coordinate steps (ties to lower index).
struct SvmDualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
};

SvmDualSolution solve_svm_dual(const Matrix& gram, std::span<const int> y,
                               double C, double tol);

}  // namespace vclt
