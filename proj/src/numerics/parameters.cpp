#include "cta/parameters.hpp"

namespace cta {

void zero_grads(ParameterList& params) {
  for (NamedTensor& p : params) p.tensor.zero_grad();
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const NamedTensor& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace cta
