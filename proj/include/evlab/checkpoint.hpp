#pragma once

#include "evlab/optim.hpp"
#include "evlab/tensor.hpp"

#include <map>
#include <string>

namespace evlab {

// Parameter checkpoint file, magic "EVDW":
//   "EVDW" | version u32 | records...
//   record: name_len u16 | name bytes | rank u8 | dims u32 each | payload f64
// All little-endian. Record order follows the parameter list, so identical
// parameter state produces byte-identical files.
namespace checkpoint {

constexpr std::uint32_t kVersion = 1;

void save(const std::string& path, const ParamList& params);
std::map<std::string, Tensor> load(const std::string& path);

// copies stored values into the registered parameters; every parameter must
// be present with a matching shape
void load_into(const std::string& path, ParamList& params);

} // namespace checkpoint

} // namespace evlab
