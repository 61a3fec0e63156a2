#include "cta/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "cta/errors.hpp"
#include "cta/tape.hpp"

namespace cta {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void scan_tape(const Tape& tape) {
  for (const Tape::Entry& e : tape.entries()) {
    if (!all_finite(e.output->value)) {
      throw NumericError("grad_check: non-finite value produced by op '" + e.op + "'");
    }
  }
}

double eval_loss(const LossBuilder& loss) {
  NoGradScope no_grad;
  return loss().item();
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, ParameterList params, double h,
                           const GradCheckOptions& options) {
  if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");
  for (NamedTensor& p : params) {
    if (!p.tensor.requires_grad()) p.tensor.set_requires_grad(true);
    p.tensor.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  double f0 = 0.0;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = loss();
    scan_tape(tape);
    f0 = out.item();
    if (!std::isfinite(f0)) throw NumericError("grad_check: non-finite loss");
    tape.backward(out);
  }
  for (const NamedTensor& p : params) {
    analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = params[pi].tensor;
    const std::size_t n = t.numel();
    std::size_t stride = 1;
    if (options.max_coords_per_tensor > 0 && n > options.max_coords_per_tensor) {
      stride = (n + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = t.mutable_data()[i];
      const double saved = x;
      x = saved + h;
      const double fp = eval_loss(loss);
      x = saved - h;
      const double fm = eval_loss(loss);
      x = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("grad_check: non-finite loss when perturbing " + params[pi].name +
                           "[" + std::to_string(i) + "]");
      }
      const double forward_slope = (fp - f0) / h;
      const double backward_slope = (f0 - fm) / h;
      const double slope_scale =
          std::max({1.0, std::abs(forward_slope), std::abs(backward_slope)});
      if (std::abs(forward_slope - backward_slope) > options.kink_tolerance * slope_scale) {
        result.excluded.push_back({params[pi].name, i});
        continue;
      }
      const double central = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[pi][i] - central) / std::max(1.0, std::abs(central));
      ++result.checked;
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = {params[pi].name, i};
      }
    }
  }
  for (NamedTensor& p : params) p.tensor.zero_grad();
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                           double h, const GradCheckOptions& options) {
  Tensor x = x0.clone();
  x.set_requires_grad(true);
  return grad_check([&] { return f(x); }, ParameterList{{"x", x}}, h, options);
}

}  // namespace cta
