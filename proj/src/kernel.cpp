#include "vclt/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace vclt {

namespace {

constexpr double kSimplexTolerance = 1e-9;

void check_dims(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvariantError("kernel arguments have dimensions " +
                         std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Eval>
Matrix gram_impl(const Matrix& x, int threads, Eval&& eval) {
  const std::size_t n = x.rows();
  Matrix gram(n, n);
  auto fill_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        gram(i, j) = eval(x.row(i), x.row(j));
      }
    }
  };
  if (threads <= 1 || n < 64) {
    fill_rows(0, n);
  } else {
    const int n_threads = std::min<int>(threads, static_cast<int>(n));
    std::vector<std::thread> pool;
    std::size_t chunk = (n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      std::size_t begin = t * chunk;
      std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(fill_rows, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) gram(i, j) = gram(j, i);
  }
  return gram;
}

}  // namespace

KernelSpec KernelSpec::parse(std::string_view token) {
  auto parts = split(token, ':');
  KernelSpec spec;
  if (parts[0] == "linear") {
    if (parts.size() != 1) throw UsageError("linear kernel takes no parameters");
    spec.kind = KernelKind::linear;
    return spec;
  }
  if (parts[0] == "poly") {
    spec.kind = KernelKind::polynomial;
    if (parts.size() > 1) {
      spec.degree = static_cast<int>(parse_long(parts[1], "kernel spec"));
    }
    if (parts.size() > 2) spec.coef0 = parse_double(parts[2], "kernel spec");
    if (parts.size() > 3) throw UsageError("poly kernel takes at most 2 parameters");
    spec.validate();
    return spec;
  }
  if (parts[0] == "rbf") {
    spec.kind = KernelKind::gaussian;
    if (parts.size() == 1 || parts[1] == "auto") {
      spec.gamma_auto = true;
      spec.gamma = 0.0;
    } else {
      spec.gamma = parse_double(parts[1], "kernel spec");
      spec.validate();
    }
    if (parts.size() > 2) throw UsageError("rbf kernel takes at most 1 parameter");
    return spec;
  }
  throw UsageError("unknown kernel '" + std::string(token) +
                   "' (expected linear, poly:<d>:<c>, rbf:<g> or rbf:auto)");
}

std::string KernelSpec::to_string() const {
  switch (kind) {
    case KernelKind::linear:
      return "linear";
    case KernelKind::polynomial: {
      std::ostringstream os;
      os << "poly:" << degree << ":" << format_double(coef0);
      return os.str();
    }
    case KernelKind::gaussian:
      return gamma_auto ? "rbf:auto" : "rbf:" + format_double(gamma);
  }
  return "?";
}

void KernelSpec::validate() const {
  if (kind == KernelKind::polynomial && degree < 1) {
    throw InvariantError("polynomial kernel needs degree >= 1");
  }
  if (kind == KernelKind::gaussian && !gamma_auto &&
      !(gamma > 0.0 && std::isfinite(gamma))) {
    throw InvariantError("gaussian kernel needs gamma > 0");
  }
}

void KernelCombination::validate() const {
  if (specs.size() != weights.size() || specs.empty()) {
    throw InvariantError("kernel combination needs one weight per kernel");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvariantError("kernel weights must be >= 0");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw InvariantError("kernel weights must sum to 1, got " + format_double(sum));
  }
  for (const KernelSpec& s : specs) s.validate();
}

double eval_kernel(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y) {
  check_dims(x, y);
  switch (spec.kind) {
    case KernelKind::linear:
      return dot(x, y);
    case KernelKind::polynomial:
      return std::pow(dot(x, y) + spec.coef0, spec.degree);
    case KernelKind::gaussian:
      if (!(spec.gamma > 0.0)) {
        throw InvariantError("gaussian kernel evaluated with unresolved gamma");
      }
      return std::exp(-spec.gamma * squared_distance(x, y));
  }
  throw InvariantError("unknown kernel kind");
}

double combined_kernel(const KernelCombination& comb, std::span<const double> x,
                       std::span<const double> y) {
  comb.validate();
  double acc = 0.0;
  for (std::size_t m = 0; m < comb.specs.size(); ++m) {
    if (comb.weights[m] == 0.0) continue;
    acc += comb.weights[m] * eval_kernel(comb.specs[m], x, y);
  }
  return acc;
}

Matrix gram_matrix(const KernelSpec& spec, const Matrix& x, int threads) {
  return gram_impl(x, threads, [&](std::span<const double> a,
                                   std::span<const double> b) {
    return eval_kernel(spec, a, b);
  });
}

Matrix gram_matrix(const KernelCombination& comb, const Matrix& x, int threads) {
  comb.validate();
  return gram_impl(x, threads, [&](std::span<const double> a,
                                   std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t m = 0; m < comb.specs.size(); ++m) {
      if (comb.weights[m] == 0.0) continue;
      acc += comb.weights[m] * eval_kernel(comb.specs[m], a, b);
    }
    return acc;
  });
}

std::vector<KernelSpec> parse_kernel_bank(std::string_view text) {
  std::vector<KernelSpec> bank;
  for (const std::string& token : split(text, ',')) {
    if (token.empty()) continue;
    bank.push_back(KernelSpec::parse(token));
  }
  if (bank.empty()) throw UsageError("kernel bank is empty");
  return bank;
}

std::string kernel_bank_to_string(std::span<const KernelSpec> bank) {
  std::string out;
  for (const KernelSpec& s : bank) {
    if (!out.empty()) out += ",";
    out += s.to_string();
  }
  return out;
}

double auto_gamma(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) return 1.0;
  double mean_var = 0.0;
  for (std::size_t d = 0; d < x.cols(); ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, d);
    mean /= static_cast<double>(x.rows());
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double c = x(i, d) - mean;
      var += c * c;
    }
    mean_var += var / static_cast<double>(x.rows());
  }
  mean_var /= static_cast<double>(x.cols());
  if (!(mean_var > 0.0)) return 1.0 / static_cast<double>(x.cols());
  return 1.0 / (static_cast<double>(x.cols()) * mean_var);
}

std::vector<KernelSpec> resolve_kernel_bank(std::vector<KernelSpec> bank,
                                            const Matrix& training_features) {
  double gamma = 0.0;
  bool computed = false;
  for (KernelSpec& spec : bank) {
    if (spec.kind == KernelKind::gaussian && spec.gamma_auto) {
      if (!computed) {
        gamma = auto_gamma(training_features);
        computed = true;
      }
      spec.gamma = gamma;
      spec.gamma_auto = false;
    }
    spec.validate();
  }
  return bank;
}

}  // namespace vclt
