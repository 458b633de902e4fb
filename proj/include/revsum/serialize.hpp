#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "revsum/tensor.hpp"

namespace revsum::io {

// Little-endian primitives, independent of host byte order.
void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f64(std::ostream& out, double value);
// u64 byte length followed by the raw bytes.
void write_string(std::ostream& out, const std::string& value);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);

// u32 rank, u64 per dimension, then the values as f64 in row-major order.
void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

}  // namespace revsum::io
