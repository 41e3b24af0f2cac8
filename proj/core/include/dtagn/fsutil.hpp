#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dtagn/error.hpp"

namespace dtagn {

std::string read_file_bytes(const std::filesystem::path& path);

// Writes to a temporary file in the target directory, then renames. Partial
// outputs are never left at the destination path.
void atomic_write_file(const std::filesystem::path& path, std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes);

std::string format_fixed(double value, int decimals);
// Shortest decimal forms that reload to the exact same value.
std::string csv_float(float value);
std::string csv_double(double value);

// Little-endian binary encoding used by the model and cache formats.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);  // u32 length + bytes
  void raw(std::string_view s);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32();
  float f32();
  double f64();
  std::string str();
  std::string_view raw(std::size_t n);

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace dtagn
