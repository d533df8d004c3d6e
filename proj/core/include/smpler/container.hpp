#pragma once

// Self-describing tensor container used for body models, checkpoints and
// parameter dumps.
//
// Binary layout, all integers little-endian:
//
//   offset 0   char[8]  magic "SMPLRCTR"
//   offset 8   u32      format version (1)
//   offset 12  u32      field count
//   offset 16  field table, one entry per field:
//                u16 name length, name bytes (UTF-8, no terminator),
//                u8 dtype (1 = f64, 2 = i32, 3 = i64), u8 rank,
//                u64 dims[rank], u64 payload byte offset, u64 payload byte length
//   payloads   raw little-endian values, each starting on an 8-byte boundary
//
// A JSON variant with the same fields is accepted for debugging:
//   {"format": "smpler-container", "version": 1,
//    "fields": [{"name": ..., "dtype": "f64"|"i32"|"i64", "shape": [...],
//                "data": "<base64 of the little-endian payload>"}]}

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "smpler/tensor.hpp"

namespace smpler {

enum class DType : std::uint8_t { kF64 = 1, kI32 = 2, kI64 = 3 };

struct Field {
  DType dtype = DType::kF64;
  Shape shape;
  std::vector<double> f64;       // when dtype == kF64
  std::vector<std::int64_t> ints;  // when dtype is an integer type
};

class Container {
 public:
  void put(const std::string& name, const Tensor& t);
  void put_i32(const std::string& name, const std::vector<std::int32_t>& values);
  void put_i64(const std::string& name, std::int64_t value);
  void put_f64(const std::string& name, double value);

  bool contains(const std::string& name) const { return fields_.count(name) != 0; }
  const Field& field(const std::string& name) const;
  /// f64 field as a tensor; throws InvariantError if absent or of the wrong type.
  Tensor tensor(const std::string& name) const;
  std::vector<std::int32_t> i32(const std::string& name) const;
  std::int64_t i64(const std::string& name) const;
  double f64(const std::string& name) const;

  const std::map<std::string, Field>& fields() const { return fields_; }

  std::vector<std::uint8_t> encode() const;
  static Container decode(const std::vector<std::uint8_t>& bytes);
  std::string encode_json() const;
  static Container decode_json(const std::string& text);

  /// Writes JSON when the path ends in ".json", binary otherwise.
  void save(const std::filesystem::path& path) const;
  /// Sniffs the format from the first byte.
  static Container load(const std::filesystem::path& path);

 private:
  std::map<std::string, Field> fields_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace smpler
