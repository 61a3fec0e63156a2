#ifndef CTA_SRC_NUMERICS_OP_SUPPORT_HPP_
#define CTA_SRC_NUMERICS_OP_SUPPORT_HPP_

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "cta/tape.hpp"
#include "cta/tensor.hpp"

namespace cta::detail {

/// True when an op over these inputs must be recorded.
inline bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

inline Tensor make_result(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

/// Marks `result` as a tracked intermediate and appends the tape entry.
inline void record(std::string op, std::initializer_list<const Tensor*> inputs,
                   const Tensor& result, std::function<void()> backward) {
  TensorNode* out = result.node().get();
  out->requires_grad = true;
  out->is_leaf = false;
  out->grad.assign(out->value.size(), 0.0);
  Tape::Entry entry;
  entry.op = std::move(op);
  for (const Tensor* t : inputs) {
    if (t->defined()) entry.inputs.push_back(t->node());
  }
  entry.output = result.node();
  entry.backward = std::move(backward);
  active_tape()->record(std::move(entry));
}

/// Grad buffer of an input, or nullptr when it does not need one.
inline double* grad_of(TensorNode* node) {
  return (node != nullptr && node->requires_grad) ? node->grad.data() : nullptr;
}

}  // namespace cta::detail

#endif  // CTA_SRC_NUMERICS_OP_SUPPORT_HPP_
