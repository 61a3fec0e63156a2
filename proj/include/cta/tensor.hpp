#ifndef CTA_TENSOR_HPP_
#define CTA_TENSOR_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cta {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage behind a Tensor handle. Values are row-major doubles; grad is
/// allocated (same size as value) only when requires_grad is set.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
};

/// Shared handle to a dense row-major tensor of 64-bit floats.
///
/// Copies of a Tensor alias the same storage. Values produced by an op are
/// not modified afterwards; only leaves (parameters) are updated in place by
/// the optimizer, and grads accumulate during backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(m_node); }
  const Shape& shape() const { return m_node->shape; }
  std::size_t rank() const { return m_node->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return m_node->value.size(); }

  std::span<const double> data() const { return m_node->value; }
  std::span<double> mutable_data() { return m_node->value; }
  const std::vector<double>& values() const { return m_node->value; }

  bool requires_grad() const { return m_node->requires_grad; }
  bool is_leaf() const { return m_node->is_leaf; }
  /// Turns gradient tracking on for a leaf, allocating a zero grad.
  void set_requires_grad(bool on);
  std::span<const double> grad() const { return m_node->grad; }
  std::span<double> mutable_grad() { return m_node->grad; }
  void zero_grad();

  /// Value of a one-element tensor.
  double item() const;
  double operator[](std::size_t flat_index) const { return m_node->value[flat_index]; }

  /// Deep copy of the values, detached from any graph.
  Tensor clone() const;

  const std::shared_ptr<TensorNode>& node() const { return m_node; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : m_node(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> m_node;
};

}  // namespace cta

#endif  // CTA_TENSOR_HPP_
