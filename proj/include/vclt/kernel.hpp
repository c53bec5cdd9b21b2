#pragma once

#include <string>
#include <vector>

#include "vclt/common.hpp"

namespace vclt {

enum class KernelKind { linear, polynomial, gaussian };

// One kernel in the bank. Gaussian specs may start in "auto" mode
// (gamma resolved as 1 / (dim * mean feature variance) on the training set).
struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  int degree = 2;        // polynomial only
  double coef0 = 1.0;    // polynomial only
  double gamma = 0.0;    // gaussian only; must be > 0 once resolved
  bool gamma_auto = false;

  // "linear" | "poly:<degree>:<coef0>" | "rbf:auto" | "rbf:<gamma>"
  static KernelSpec parse(std::string_view token);
  std::string to_string() const;
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

// Convex combination sum_m d_m K_m with d on the probability simplex.
struct KernelCombination {
  std::vector<KernelSpec> specs;
  std::vector<double> weights;

  void validate() const;
  bool operator==(const KernelCombination&) const = default;
};

double eval_kernel(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y);
double combined_kernel(const KernelCombination& comb, std::span<const double> x,
                       std::span<const double> y);

// Symmetric Gram matrix over the rows of X. Rows may be computed on several
// threads; the result does not depend on the schedule.
Matrix gram_matrix(const KernelSpec& spec, const Matrix& x, int threads = 1);
Matrix gram_matrix(const KernelCombination& comb, const Matrix& x, int threads = 1);

// Comma-separated bank, e.g. "linear,poly:2:1,rbf:auto".
std::vector<KernelSpec> parse_kernel_bank(std::string_view text);
std::string kernel_bank_to_string(std::span<const KernelSpec> bank);

// gamma = 1 / (dim * mean per-dimension variance); falls back to 1/dim when
// the data has no variance.
double auto_gamma(const Matrix& x);
std::vector<KernelSpec> resolve_kernel_bank(std::vector<KernelSpec> bank,
                                            const Matrix& training_features);

}  // namespace vclt
