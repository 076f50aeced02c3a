#pragma once

#include <iosfwd>
#include <string>

#include "sarfuse/nn/params.hpp"

namespace sarfuse::nn {

/// Self-describing parameter container:
///
///   SARFUSE-PARAMS 1
///   metadata <single-line text, usually JSON>
///   tensors <count>
///   <name> f32 <d0>x<d1>... <byte offset> <element count>     (one per tensor)
///   data <byte count>
///   <little-endian float32 payload>
///
/// Tensor payloads follow the ParamStore layout (column-major 2-D views).
struct ParamFile {
  std::string metadata;
  ParamStore params;
};

void write_params(std::ostream& out, const ParamStore& params, const std::string& metadata);
ParamFile read_params(std::istream& in);

}  // namespace sarfuse::nn
