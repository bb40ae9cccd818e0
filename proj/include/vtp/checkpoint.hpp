#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vtp/tensor.hpp"

namespace vtp {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// "VPRM" container: per parameter, name + rank + shape (u32 each) + raw
/// little-endian f64 values, entries sorted lexicographically by name.
/// Round-trips bit-exactly.
void save_checkpoint(const NamedTensors& params, const std::string& path);

/// Loads values into the matching tensors of `params` (all names must be
/// present with identical shapes).
void load_checkpoint(NamedTensors& params, const std::string& path);

/// Raw read, for tools that inspect checkpoints without a model.
NamedTensors read_checkpoint(const std::string& path);

}  // namespace vtp
