#ifndef CTA_CHECKPOINT_HPP_
#define CTA_CHECKPOINT_HPP_

#include <filesystem>

#include "cta/parameters.hpp"

namespace cta {

// Binary layout, all integers little-endian:
//
//   "CTAK1"                          5 bytes
//   repeated until end of file:
//     u32 name_length, name bytes    UTF-8, no terminator
//     u32 rank, rank x u64 dims
//     prod(dims) x f64 payload

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
ParameterList load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`. Names and shapes must match one to
/// one in order; the first mismatch raises FormatError naming the parameter.
void assign_parameters(ParameterList& params, const ParameterList& loaded);

}  // namespace cta

#endif  // CTA_CHECKPOINT_HPP_
