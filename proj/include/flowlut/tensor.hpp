#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace flowlut {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float tensor. Image-like tensors are channel-planar
/// (C x H x W). A tensor may carry a gradient buffer of identical shape; the
/// buffer is allocated on first use and accumulates additively.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // C x H x W accessors.
  float& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  float at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Gradient buffer; allocated (zero-filled) on first access.
  std::span<float> grad();
  std::span<const float> grad() const noexcept { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  void fill(float v);
  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
};

/// Throws ShapeError with `what` as context unless `t` has exactly `shape`.
void expect_shape(const Tensor& t, const Shape& shape, const char* what);

}  // namespace flowlut
