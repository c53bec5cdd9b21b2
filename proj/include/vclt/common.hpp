#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vclt {

// ---------------------------------------------------------------------------
// Error categories. The CLI maps them to exit codes:
//   UsageError -> 1, FormatError -> 2, InvariantError -> 3, NumericError -> 4
// ---------------------------------------------------------------------------

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles. Small and boring on purpose: the
// pipeline only ever needs row access, fills and matvec-style loops.
// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A labeled feature table as read from / written to feature CSV files.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> sample_ids;
};

// ---------------------------------------------------------------------------
// Number formatting. All file formats serialize doubles with the shortest
// representation that round-trips exactly, so write/read identities and
// byte-identical reruns hold.
// ---------------------------------------------------------------------------

std::string format_double(double value);

// Parses a double; throws FormatError mentioning `context` on failure.
double parse_double(std::string_view text, const std::string& context);
long parse_long(std::string_view text, const std::string& context);

// ---------------------------------------------------------------------------
// Counter-based random draws. Every value is a pure function of
// (seed, stream, index), so generation order never matters and parallel
// producers stay reproducible.
// ---------------------------------------------------------------------------

namespace rng {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Uniform in [0, 1).
double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Standard normal via Box-Muller on two keyed uniforms.
double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace rng

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw FormatError(what + ": non-finite value");
}

}  // namespace vclt
