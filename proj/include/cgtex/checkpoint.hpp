#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgtex/tensor.hpp"

namespace cgtex {

// Checkpoint container, bit-exact: magic "CGCN", format version u32 LE,
// tensor count u32 LE; per tensor: name length u16 LE + UTF-8 name, rank u8,
// extents u64 LE each, raw f32 LE data. Tensor order is preserved.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace cgtex
