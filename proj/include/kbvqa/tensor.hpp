#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace kbvqa {

// Storage precision. f32 keeps the double buffers but rounds every stored
// value through float; reductions still accumulate in 64-bit.
enum class Precision { f64, f32 };

// Dense row-major tensor. Rank 0 (scalar), 1 and 2 are what the pipeline
// uses; shape dims are always positive.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor zeros(std::vector<int> shape_);
  static Tensor full(std::vector<int> shape_, double v);
  // Row-major values, rows*cols of them.
  static Tensor matrix(int rows, int cols, std::vector<double> values);

  int ndim() const { return static_cast<int>(shape.size()); }
  int numel() const { return static_cast<int>(data.size()); }
  bool is_scalar() const { return shape.empty(); }
  int rows() const;
  int cols() const;

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
  double& at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  void fill(double v);
  bool all_finite() const;

  std::string shape_str() const;
};

int shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Rounds every element through float when p == f32; no-op for f64.
void apply_precision(Tensor& t, Precision p);
double apply_precision(double v, Precision p);

}  // namespace kbvqa
