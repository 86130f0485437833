#include "lgan/tensor.hpp"

#include <cmath>
#include <sstream>

namespace lgan {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw Error("tensor: data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw Error("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw Error("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error("tensor: item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor take_rows(const Tensor& m, std::span<const std::size_t> idx) {
  const std::size_t d = m.cols();
  Tensor out(Shape{idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m.rows()) throw Error("take_rows: index out of range");
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) = m.at(idx[r], c);
  }
  return out;
}

}  // namespace lgan
