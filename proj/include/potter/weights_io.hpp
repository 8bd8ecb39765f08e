// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "potter/params.hpp"

namespace potter {

// POTW container, all integers little-endian:
//   "POTW" u32 version(=1) u32 count
//   per tensor: u16 name_len, name bytes, u8 rank, u64 extents[rank], f64 values
std::string encode_weights(const ParamStore& store);
ParamStore decode_weights(const std::string& bytes);

void save_weights(const std::string& path, const ParamStore& store);
ParamStore load_weights(const std::string& path);

/// Single-tensor files use the same container with count 1.
void save_tensor(const std::string& path, const Tensor& value, const std::string& name = "tensor");
Tensor load_tensor(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace potter
