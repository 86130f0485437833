#ifndef LGAN_TENSOR_HPP
#define LGAN_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lgan {

/// Library-wide error type. All failures surface as one of these with a
/// message that names the failing operation.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense n-dimensional array of 64-bit floats, row-major.
/// Rank 0 is a scalar: shape {} with exactly one stored value
/// (the empty product of extents is 1).
class Tensor {
public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_unchecked() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_unchecked() + c]; }

  /// Value of a scalar (rank-0 or single-element) tensor.
  double item() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
  std::size_t cols_unchecked() const { return shape_[1]; }

  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Shape& s);

/// Rows of a rank-2 tensor selected by index, stacked in order.
Tensor take_rows(const Tensor& m, std::span<const std::size_t> idx);

}  // namespace lgan

#endif
