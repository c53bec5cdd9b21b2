#include "vclt/node_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vclt/tree_classifier.hpp"

namespace vclt {

namespace {

constexpr double kCoefEpsilon = 1e-12;

void snap_to_bounds(double& a, double C) {
  if (a < kCoefEpsilon) a = 0.0;
  if (a > C - kCoefEpsilon * std::max(1.0, C)) a = C;
}

Matrix combine_grams(std::span<const Matrix> grams, std::span<const double> d) {
  Matrix out(grams[0].rows(), grams[0].cols());
  for (std::size_t m = 0; m < grams.size(); ++m) {
    if (d[m] == 0.0) continue;
    const auto& src = grams[m].data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += d[m] * src[i];
  }
  return out;
}

double quadratic_form(const Matrix& gram, std::span<const double> beta) {
  double acc = 0.0;
  const std::size_t n = gram.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (beta[i] == 0.0) continue;
    double row_acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) row_acc += gram(i, j) * beta[j];
    acc += beta[i] * row_acc;
  }
  return acc;
}

// s = gram * beta + bias
std::vector<double> expansion_scores(const Matrix& gram,
                                     std::span<const double> beta, double bias) {
  const std::size_t n = gram.rows();
  std::vector<double> s(n, bias);
  for (std::size_t j = 0; j < n; ++j) {
    if (beta[j] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) s[i] += gram(i, j) * beta[j];
  }
  return s;
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw UsageError("C must be > 0");
  if (!(lambda > 0.0)) throw UsageError("lambda must be > 0");
  if (!(rho >= 0.0)) throw UsageError("rho must be >= 0");
  if (mkl_iters < 0) throw UsageError("mkl_iters must be >= 0");
  if (refine_epochs < 0) throw UsageError("refine_epochs must be >= 0");
  if (!(tol > 0.0)) throw UsageError("tol must be > 0");
}

SvmDualSolution solve_svm_dual(const Matrix& gram, std::span<const int> y,
                               double C, double tol) {
  const int n = static_cast<int>(y.size());
  if (gram.rows() != y.size() || gram.cols() != y.size()) {
    throw InvariantError("gram matrix does not match label count");
  }
  SvmDualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // d/da of 1/2 a'Qa - e'a at a = 0

  const int max_iters = 100000 + 50 * n;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    int i = -1, j = -1;
    double up_val = -std::numeric_limits<double>::infinity();
    double low_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      const double v = -y[k] * grad[k];
      const bool in_up = (y[k] > 0 && sol.alpha[k] < C) || (y[k] < 0 && sol.alpha[k] > 0.0);
      const bool in_low = (y[k] < 0 && sol.alpha[k] < C) || (y[k] > 0 && sol.alpha[k] > 0.0);
      if (in_up && v > up_val) {
        up_val = v;
        i = k;
      }
      if (in_low && v < low_val) {
        low_val = v;
        j = k;
      }
    }
    if (i < 0 || j < 0 || up_val - low_val <= tol) break;

    double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
    quad = std::max(quad, 1e-12);
    double step = (up_val - low_val) / quad;
    const double headroom_i = y[i] > 0 ? C - sol.alpha[i] : sol.alpha[i];
    const double headroom_j = y[j] > 0 ? sol.alpha[j] : C - sol.alpha[j];
    step = std::min({step, headroom_i, headroom_j});
    if (!(step > 0.0)) break;

    // step along y_i e_i - y_j e_j, which keeps y'a fixed
    sol.alpha[i] += y[i] * step;
    sol.alpha[j] -= y[j] * step;
    snap_to_bounds(sol.alpha[i], C);
    snap_to_bounds(sol.alpha[j], C);
    for (int k = 0; k < n; ++k) {
      grad[k] += y[k] * step * (gram(k, i) - gram(k, j));
    }
  }
  sol.iterations = iter;

  double free_sum = 0.0;
  int free_count = 0;
  double up_val = -std::numeric_limits<double>::infinity();
  double low_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const double v = -y[k] * grad[k];
    if (sol.alpha[k] > 0.0 && sol.alpha[k] < C) {
      free_sum += v;
      ++free_count;
    }
    const bool in_up = (y[k] > 0 && sol.alpha[k] < C) || (y[k] < 0 && sol.alpha[k] > 0.0);
    const bool in_low = (y[k] < 0 && sol.alpha[k] < C) || (y[k] > 0 && sol.alpha[k] > 0.0);
    if (in_up) up_val = std::max(up_val, v);
    if (in_low) low_val = std::min(low_val, v);
  }
  if (free_count > 0) {
    sol.bias = free_sum / free_count;
  } else if (std::isfinite(up_val) && std::isfinite(low_val)) {
    sol.bias = 0.5 * (up_val + low_val);
  }

  double objective = 0.0;
  for (int k = 0; k < n; ++k) objective += 0.5 * sol.alpha[k] * (1.0 - grad[k]);
  sol.dual_objective = objective;
  return sol;
}

double score(const NodeClassifier& classifier, const Matrix& features,
             std::span<const double> x) {
  if (classifier.sv_indices.size() != classifier.dual_coefs.size()) {
    throw InvariantError("scorer has mismatched support vectors and coefficients");
  }
  if (classifier.sv_indices.empty()) return classifier.bias;
  classifier.kernel.validate();
  if (x.size() != features.cols()) {
    throw InvariantError("feature vector has dimension " +
                         std::to_string(x.size()) + ", scorer expects " +
                         std::to_string(features.cols()));
  }
  double acc = classifier.bias;
  for (std::size_t s = 0; s < classifier.sv_indices.size(); ++s) {
    const int idx = classifier.sv_indices[s];
    if (idx < 0 || static_cast<std::size_t>(idx) >= features.rows()) {
      throw InvariantError("support-vector index " + std::to_string(idx) +
                           " out of range");
    }
    double k = 0.0;
    for (std::size_t m = 0; m < classifier.kernel.specs.size(); ++m) {
      if (classifier.kernel.weights[m] == 0.0) continue;
      k += classifier.kernel.weights[m] *
           eval_kernel(classifier.kernel.specs[m], features.row(idx), x);
    }
    acc += classifier.dual_coefs[s] * k;
  }
  return acc;
}

SiblingGroupResult train_sibling_group(const SiblingGroupSamples& samples,
                                       const std::vector<KernelSpec>& bank,
                                       const ParentScorer* parent,
                                       const TrainingConfig& cfg, int threads) {
  cfg.validate();
  const int n = static_cast<int>(samples.features.rows());
  const int n_children = samples.n_children;
  if (n_children < 2) {
    throw UsageError("sibling group training needs at least 2 children");
  }
  if (static_cast<int>(samples.targets.size()) != n || n == 0) {
    throw InvariantError("sibling group has " + std::to_string(n) +
                         " feature rows and " + std::to_string(samples.targets.size()) +
                         " targets");
  }
  std::vector<int> counts(n_children, 0);
  for (int t : samples.targets) {
    if (t < 0 || t >= n_children) {
      throw InvariantError("target child " + std::to_string(t) + " out of range");
    }
    ++counts[t];
  }
  for (int j = 0; j < n_children; ++j) {
    if (counts[j] == 0) {
      throw InvariantError("child " + std::to_string(j) + " has no training samples");
    }
  }
  for (double v : samples.features.data()) {
    if (!std::isfinite(v)) throw FormatError("non-finite training feature");
  }
  if (bank.empty()) throw UsageError("kernel bank is empty");
  for (const KernelSpec& spec : bank) {
    if (spec.kind == KernelKind::gaussian && spec.gamma_auto) {
      throw UsageError("kernel bank must be resolved before training");
    }
    spec.validate();
  }

  const int n_kernels = static_cast<int>(bank.size());
  std::vector<Matrix> grams;
  grams.reserve(n_kernels);
  for (const KernelSpec& spec : bank) {
    grams.push_back(gram_matrix(spec, samples.features, threads));
  }

  std::vector<std::vector<int>> ys(n_children, std::vector<int>(n));
  for (int j = 0; j < n_children; ++j) {
    for (int i = 0; i < n; ++i) ys[j][i] = samples.targets[i] == j ? 1 : -1;
  }

  SiblingGroupResult result;
  std::vector<double> d(n_kernels, 1.0 / n_kernels);
  result.round_weights.push_back(d);

  std::vector<SvmDualSolution> sols(n_children);
  Matrix combined;
  for (int round = 0; round <= cfg.mkl_iters; ++round) {
    combined = combine_grams(grams, d);
    double total = 0.0;
    for (int j = 0; j < n_children; ++j) {
      sols[j] = solve_svm_dual(combined, ys[j], cfg.C, cfg.tol);
      total += sols[j].dual_objective;
    }
    result.round_dual_objectives.push_back(total);
    if (round == cfg.mkl_iters) break;

    // fixed point of the 1/d_m-scaled regularizer: d_m proportional to the
    // norm of the m-th kernel's share of the group's functions
    std::vector<double> strength(n_kernels, 0.0);
    for (int m = 0; m < n_kernels; ++m) {
      double q = 0.0;
      for (int j = 0; j < n_children; ++j) {
        std::vector<double> beta(n);
        for (int i = 0; i < n; ++i) beta[i] = sols[j].alpha[i] * ys[j][i];
        q += quadratic_form(grams[m], beta);
      }
      strength[m] = d[m] * std::sqrt(std::max(q, 0.0));
    }
    double strength_sum = std::accumulate(strength.begin(), strength.end(), 0.0);
    if (strength_sum > 0.0) {
      for (int m = 0; m < n_kernels; ++m) d[m] = strength[m] / strength_sum;
    }
    result.round_weights.push_back(d);
  }

  for (int j = 0; j < n_children; ++j) {
    result.final_dual_objectives.push_back(sols[j].dual_objective);
  }

  std::vector<std::vector<double>> betas(n_children, std::vector<double>(n, 0.0));
  std::vector<double> biases(n_children, 0.0);
  for (int j = 0; j < n_children; ++j) {
    for (int i = 0; i < n; ++i) betas[j][i] = sols[j].alpha[i] * ys[j][i];
    biases[j] = sols[j].bias;
  }

  if (parent != nullptr && parent->classifier != nullptr && parent->features != nullptr) {
    std::vector<double> parent_scores(n);
    for (int i = 0; i < n; ++i) {
      parent_scores[i] = score(*parent->classifier, *parent->features,
                               samples.features.row(i));
    }

    auto own_scores = [&](const std::vector<std::vector<double>>& b,
                          const std::vector<double>& bs) {
      std::vector<std::vector<double>> per_child(n_children);
      for (int j = 0; j < n_children; ++j) {
        per_child[j] = expansion_scores(combined, b[j], bs[j]);
      }
      return per_child;
    };
    auto count_violations = [&](const std::vector<std::vector<double>>& per_child,
                                double* mass_out) {
      int count = 0;
      double mass = 0.0;
      for (int i = 0; i < n; ++i) {
        const double own = per_child[samples.targets[i]][i];
        if (own < parent_scores[i]) {
          ++count;
          mass += parent_scores[i] - own;
        }
      }
      if (mass_out) *mass_out = mass;
      return count;
    };

    double mass0 = 0.0;
    auto scores0 = own_scores(betas, biases);
    const int before = count_violations(scores0, &mass0);
    result.violations_before_refine = before;
    result.violations_after_refine = before;

    if (cfg.rho > 0.0 && cfg.refine_epochs > 0) {
      result.refined = true;
      auto best_betas = betas;
      auto best_biases = biases;
      int best_count = before;
      double best_mass = mass0;

      for (int epoch = 1; epoch <= cfg.refine_epochs; ++epoch) {
        const double eta = 0.01 / epoch;
        for (int j = 0; j < n_children; ++j) {
          std::vector<double> s = expansion_scores(combined, betas[j], biases[j]);
          // direction w of the kernel-space subgradient K (beta - C y 1_hinge
          // - rho 1_interlevel); the bias picks up the plain hinge counts
          std::vector<double> w = betas[j];
          double bias_grad = 0.0;
          for (int i = 0; i < n; ++i) {
            if (ys[j][i] * s[i] < 1.0) {
              w[i] -= cfg.C * ys[j][i];
              bias_grad -= cfg.C * ys[j][i];
            }
            if (samples.targets[i] == j && s[i] < parent_scores[i]) {
              w[i] -= cfg.rho;
              bias_grad -= cfg.rho;
            }
          }
          std::vector<double> grad = expansion_scores(combined, w, 0.0);
          for (int i = 0; i < n; ++i) {
            betas[j][i] = std::clamp(betas[j][i] - eta * grad[i], -cfg.C, cfg.C);
          }
          biases[j] -= eta * bias_grad;
        }
        double mass = 0.0;
        auto scores_now = own_scores(betas, biases);
        const int count = count_violations(scores_now, &mass);
        if (count < best_count || (count == best_count && mass < best_mass)) {
          best_count = count;
          best_mass = mass;
          best_betas = betas;
          best_biases = biases;
        }
      }
      betas = best_betas;
      biases = best_biases;
      result.violations_after_refine = best_count;
    }
  }

  result.scorers.resize(n_children);
  for (int j = 0; j < n_children; ++j) {
    NodeClassifier& clf = result.scorers[j];
    clf.kernel.specs = bank;
    clf.kernel.weights = d;
    clf.bias = biases[j];
    for (int i = 0; i < n; ++i) {
      if (std::abs(betas[j][i]) > kCoefEpsilon) {
        clf.sv_indices.push_back(i);
        clf.dual_coefs.push_back(betas[j][i]);
      }
    }
  }
  return result;
}

TreeModel train_tree(const LabelTree& tree, const Matrix& x_raw,
                     std::span<const int> labels,
                     const std::vector<KernelSpec>& bank,
                     const TrainingConfig& cfg, int threads,
                     std::vector<GroupTrainStats>* stats) {
  cfg.validate();
  {
    auto violations = validate_tree(tree);
    if (!violations.empty()) {
      throw InvariantError("tree is not well-formed: " + violations.front());
    }
  }
  if (x_raw.rows() != labels.size() || x_raw.rows() == 0) {
    throw UsageError("training data needs one label per feature row");
  }
  for (int label : labels) {
    if (label < 0 || label >= tree.n_categories) {
      throw InvariantError("training label " + std::to_string(label) +
                           " has no matching tree leaf");
    }
  }

  TreeModel model;
  model.tree = tree;
  model.standardization = Standardization::fit(x_raw);
  Matrix standardized = model.standardization.apply(x_raw);
  model.kernel_bank = resolve_kernel_bank(bank, standardized);

  for (const auto& layer : tree.layers) {
    for (int node_id : layer) {
      const TreeNode& node = tree.node(node_id);
      if (node.is_leaf()) continue;
      GroupTrainStats gs;
      gs.parent_id = node_id;
      gs.child_ids = node.children;

      if (node.children.size() == 1) {
        gs.pass_through = true;
        if (stats) stats->push_back(std::move(gs));
        continue;
      }

      std::vector<int> slot_of(tree.n_categories, -1);
      for (int slot = 0; slot < static_cast<int>(node.children.size()); ++slot) {
        for (int cat : tree.node(node.children[slot]).label_set) {
          slot_of[cat] = slot;
        }
      }
      std::vector<int> global_rows;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (slot_of[labels[i]] >= 0) global_rows.push_back(static_cast<int>(i));
      }
      SiblingGroupSamples group;
      group.n_children = static_cast<int>(node.children.size());
      group.features = Matrix(global_rows.size(), standardized.cols());
      group.targets.reserve(global_rows.size());
      for (std::size_t r = 0; r < global_rows.size(); ++r) {
        auto src = standardized.row(global_rows[r]);
        std::copy(src.begin(), src.end(), group.features.row(r).begin());
        group.targets.push_back(slot_of[labels[global_rows[r]]]);
      }
      gs.n_samples = static_cast<int>(global_rows.size());

      ParentScorer parent_scorer;
      const ParentScorer* parent = nullptr;
      auto parent_it = model.classifiers.find(node_id);
      if (parent_it != model.classifiers.end()) {
        parent_scorer.classifier = &parent_it->second;
        parent_scorer.features = &standardized;
        parent = &parent_scorer;
      }

      SiblingGroupResult result;
      try {
        result = train_sibling_group(group, model.kernel_bank, parent, cfg, threads);
      } catch (const InvariantError& e) {
        throw InvariantError("node " + std::to_string(node_id) + ": " + e.what());
      }

      for (int slot = 0; slot < group.n_children; ++slot) {
        NodeClassifier clf = std::move(result.scorers[slot]);
        clf.node_id = node.children[slot];
        clf.level = tree.node(node.children[slot]).level;
        for (int& idx : clf.sv_indices) idx = global_rows[idx];
        model.classifiers.emplace(clf.node_id, std::move(clf));
      }
      gs.refined = result.refined;
      gs.violations_before_refine = result.violations_before_refine;
      gs.violations_after_refine = result.violations_after_refine;
      gs.round_dual_objectives = std::move(result.round_dual_objectives);
      gs.round_weights = std::move(result.round_weights);
      gs.final_dual_objectives = std::move(result.final_dual_objectives);
      if (stats) stats->push_back(std::move(gs));
    }
  }

  // compact the support-vector table to the rows any scorer still uses
  std::vector<int> used;
  for (const auto& [node_id, clf] : model.classifiers) {
    used.insert(used.end(), clf.sv_indices.begin(), clf.sv_indices.end());
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::vector<int> compact_of(standardized.rows(), -1);
  model.support_features = Matrix(used.size(), standardized.cols());
  for (std::size_t r = 0; r < used.size(); ++r) {
    compact_of[used[r]] = static_cast<int>(r);
    auto src = standardized.row(used[r]);
    std::copy(src.begin(), src.end(), model.support_features.row(r).begin());
  }
  for (auto& [node_id, clf] : model.classifiers) {
    for (int& idx : clf.sv_indices) idx = compact_of[idx];
  }
  return model;
}

}  // namespace vclt
