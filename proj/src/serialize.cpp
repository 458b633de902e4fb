#include "revsum/serialize.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

#include "revsum/errors.hpp"

namespace revsum::io {

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of binary stream");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 36;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t value) { write_le(out, value); }
void write_u64(std::ostream& out, std::uint64_t value) { write_le(out, value); }
void write_f64(std::ostream& out, double value) {
  write_le(out, std::bit_cast<std::uint64_t>(value));
}

void write_string(std::ostream& out, const std::string& value) {
  write_u64(out, value.size());
  out.write(value.data(), static_cast<std::streamsize>(value.size()));
}

std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

std::string read_string(std::istream& in) {
  const auto length = read_u64(in);
  if (length > kMaxElements) throw FormatError("string length out of range");
  std::string value(length, '\0');
  in.read(value.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError("unexpected end of binary stream");
  return value;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto d : tensor.shape()) write_u64(out, d);
  for (double v : tensor.values()) write_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  const auto rank = read_u32(in);
  if (rank > kMaxRank) {
    throw FormatError("tensor rank " + std::to_string(rank) + " out of range");
  }
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = read_u64(in);
    count *= d;
    if (count > kMaxElements) throw FormatError("tensor too large");
  }
  std::vector<double> values(count);
  for (auto& v : values) v = read_f64(in);
  return Tensor::from(std::move(shape), std::move(values));
}

}  // namespace revsum::io
