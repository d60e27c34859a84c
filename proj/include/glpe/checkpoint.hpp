#pragma once

#include <string>
#include <vector>

#include "glpe/layers.hpp"

namespace glpe::checkpoint {

// A checkpoint is a pair of files: <stem>.manifest (text: one line per
// parameter with name, shape, and byte offset) and <stem>.bin (little-endian
// 64-bit floats, concatenated in manifest order). Round trips are bit-exact.
void save(const std::string& stem, const std::vector<NamedParam>& params);

// Reads a checkpoint into fresh tensors.
std::vector<NamedParam> load(const std::string& stem);

// Copies checkpoint values into existing tensors; names, order, and shapes
// must match the manifest exactly.
void load_into(const std::string& stem, const std::vector<NamedParam>& params);

}  // namespace glpe::checkpoint
