#include "kbvqa/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kbvqa {

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape dims must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)), data(shape_numel(shape), 0.0) {}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int>(values.size())};
  t.data = std::move(values);
  if (t.data.empty()) throw std::invalid_argument("vector tensor must be non-empty");
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape_) { return Tensor(std::move(shape_)); }

Tensor Tensor::full(std::vector<int> shape_, double v) {
  Tensor t(std::move(shape_));
  t.fill(v);
  return t;
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  if (static_cast<int>(values.size()) != rows * cols)
    throw std::invalid_argument("matrix: expected " + std::to_string(rows * cols) + " values, got " +
                                std::to_string(values.size()));
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  return t;
}

int Tensor::rows() const {
  if (ndim() == 2) return shape[0];
  if (ndim() == 1) return shape[0];
  throw std::logic_error("rows() on tensor of shape " + shape_str());
}

int Tensor::cols() const {
  if (ndim() == 2) return shape[1];
  if (ndim() == 1) return 1;
  throw std::logic_error("cols() on tensor of shape " + shape_str());
}

double& Tensor::at(int r, int c) {
  return data[static_cast<size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return data[static_cast<size_t>(r) * cols() + c];
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

double apply_precision(double v, Precision p) {
  return p == Precision::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

void apply_precision(Tensor& t, Precision p) {
  if (p == Precision::f64) return;
  for (double& x : t.data) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace kbvqa
