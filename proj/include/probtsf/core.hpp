#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace probtsf {

// Precondition or configuration violation. Callers surface these as usage errors.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Dense row-major matrix of doubles. Rows index trajectories, columns index
// time or horizon steps throughout the library.
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
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    require(values.size() == cols_, "Matrix::append_row: width mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Parameter containers expose `visit(self, f)` calling f(name, span) for every
// trainable array in a fixed order. The helpers below build on that.

template <class Params>
std::size_t param_count(const Params& p) {
  std::size_t n = 0;
  Params::visit(p, [&](const std::string&, std::span<const double> a) { n += a.size(); });
  return n;
}

template <class Params>
std::vector<double> flatten(const Params& p) {
  std::vector<double> out;
  out.reserve(param_count(p));
  Params::visit(p, [&](const std::string&, std::span<const double> a) {
    out.insert(out.end(), a.begin(), a.end());
  });
  return out;
}

template <class Params>
void assign_flat(Params& p, std::span<const double> flat) {
  require(flat.size() == param_count(p), "assign_flat: size mismatch");
  std::size_t off = 0;
  Params::visit(p, [&](const std::string&, std::span<double> a) {
    for (double& x : a) x = flat[off++];
  });
}

// Zero-valued copy with identical shapes; used as a gradient accumulator.
template <class Params>
Params zeros_like(const Params& p) {
  Params z = p;
  Params::visit(z, [](const std::string&, std::span<double> a) {
    for (double& x : a) x = 0.0;
  });
  return z;
}

template <class Params>
void add_scaled(Params& acc, const Params& g, double scale = 1.0) {
  std::vector<std::span<const double>> src;
  Params::visit(g, [&](const std::string&, std::span<const double> a) { src.push_back(a); });
  std::size_t i = 0;
  Params::visit(acc, [&](const std::string&, std::span<double> a) {
    require(a.size() == src[i].size(), "add_scaled: shape mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * src[i][k];
    ++i;
  });
}

}  // namespace probtsf
