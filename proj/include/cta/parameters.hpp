#ifndef CTA_PARAMETERS_HPP_
#define CTA_PARAMETERS_HPP_

#include <string>
#include <vector>

#include "cta/tensor.hpp"

namespace cta {

/// A trainable tensor together with its stable checkpoint name.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

void zero_grads(ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

}  // namespace cta

#endif  // CTA_PARAMETERS_HPP_
