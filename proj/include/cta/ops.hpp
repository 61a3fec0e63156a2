#ifndef CTA_OPS_HPP_
#define CTA_OPS_HPP_

#include <cstddef>
#include <string_view>
#include <vector>

#include "cta/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the active
// tape when one of its inputs requires a gradient.

namespace cta {

// ---- linear algebra -------------------------------------------------------

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// [m x k] * [k] -> [m].
Tensor matvec(const Tensor& a, const Tensor& x);
/// 2-D transpose.
Tensor transpose(const Tensor& a);

/// Cross-correlation of a [C_in x H x W] map with [C_out x C_in x k x k]
/// kernels. `bias`, when defined, has shape [C_out].
/// Output side is floor((H + 2 * padding - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t padding);
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// x * s where s is a one-element tensor.
Tensor scale(const Tensor& x, const Tensor& s);
Tensor scale(const Tensor& x, double s);
/// [m x n] + [n], the bias row added to every row.
Tensor add_row(const Tensor& x, const Tensor& row);
/// x + s where s is a one-element tensor, added everywhere.
Tensor add_scalar(const Tensor& x, const Tensor& s);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// max(x, 0); the derivative at 0 is taken as 0.
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);
/// One of "sigmoid", "tanh", "relu"; anything else is a ConfigError.
Tensor pointwise(std::string_view name, const Tensor& x);

// ---- reductions & normalisation -------------------------------------------

/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
/// Sum of every element -> one-element tensor of shape [1].
Tensor sum_all(const Tensor& x);
/// [C x H x W] -> [C].
Tensor global_avg_pool_2d(const Tensor& x);
/// One of "sum", "mean", "global_avg_pool_2d" (axis ignored for the last).
Tensor reduce(std::string_view name, const Tensor& x, std::size_t axis = 0);

/// -log(max(p[label], floor)) for a probability vector p.
Tensor neg_log_pick(const Tensor& probs, std::size_t label, double floor);

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
/// Elements [offset, offset + length) of a 1-D tensor.
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
/// Row t of a 2-D tensor as a 1-D tensor.
Tensor row(const Tensor& x, std::size_t t);
/// Stacks equally-shaped 1-D tensors into [count x n].
Tensor stack_rows(const std::vector<Tensor>& rows);

/// P [T x n], Q [U x n] -> [T x U x n] with out[t, u, :] = P[t] + Q[u].
Tensor outer_add(const Tensor& p, const Tensor& q);
/// beta [T x U x n], H [U x n] -> [T x n], out[t] = sum_u beta[t, u] * H[u].
Tensor pairwise_gate_sum(const Tensor& beta, const Tensor& h);

}  // namespace cta

#endif  // CTA_OPS_HPP_
