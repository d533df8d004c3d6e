#include "smpler/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "smpler/errors.hpp"

namespace smpler {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'P', 'L', 'R', 'C', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
void store_le(std::uint8_t* dst, T v) {
  std::memcpy(dst, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(dst, dst + sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* src) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::size_t dtype_size(DType d) { return d == DType::kI32 ? 4 : 8; }

const char* dtype_name(DType d) {
  switch (d) {
    case DType::kF64: return "f64";
    case DType::kI32: return "i32";
    case DType::kI64: return "i64";
  }
  return "?";
}

std::size_t element_count(const Field& f) { return f.dtype == DType::kF64 ? f.f64.size() : f.ints.size(); }

std::vector<std::uint8_t> payload_bytes(const Field& f) {
  std::vector<std::uint8_t> out;
  out.reserve(element_count(f) * dtype_size(f.dtype));
  switch (f.dtype) {
    case DType::kF64:
      for (double v : f.f64) put_le(out, std::bit_cast<std::uint64_t>(v));
      break;
    case DType::kI32:
      for (auto v : f.ints) put_le(out, static_cast<std::int32_t>(v));
      break;
    case DType::kI64:
      for (auto v : f.ints) put_le(out, v);
      break;
  }
  return out;
}

void fill_payload(Field& f, const std::uint8_t* p, std::size_t count) {
  switch (f.dtype) {
    case DType::kF64:
      f.f64.resize(count);
      for (std::size_t i = 0; i < count; ++i) f.f64[i] = std::bit_cast<double>(load_le<std::uint64_t>(p + 8 * i));
      break;
    case DType::kI32:
      f.ints.resize(count);
      for (std::size_t i = 0; i < count; ++i) f.ints[i] = load_le<std::int32_t>(p + 4 * i);
      break;
    case DType::kI64:
      f.ints.resize(count);
      for (std::size_t i = 0; i < count; ++i) f.ints[i] = load_le<std::int64_t>(p + 8 * i);
      break;
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    T v = load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::string read_string(std::size_t n) {
    need(n, "field name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() || pos_ > bytes_.size() - n) {
      throw ParseError(std::string("truncated while reading ") + what, pos_);
    }
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put(const std::string& name, const Tensor& t) {
  Field f;
  f.dtype = DType::kF64;
  f.shape = t.shape();
  f.f64.assign(t.values().begin(), t.values().end());
  fields_[name] = std::move(f);
}

void Container::put_i32(const std::string& name, const std::vector<std::int32_t>& values) {
  Field f;
  f.dtype = DType::kI32;
  f.shape = {values.size()};
  f.ints.assign(values.begin(), values.end());
  fields_[name] = std::move(f);
}

void Container::put_i64(const std::string& name, std::int64_t value) {
  Field f;
  f.dtype = DType::kI64;
  f.shape = {1};
  f.ints = {value};
  fields_[name] = std::move(f);
}

void Container::put_f64(const std::string& name, double value) {
  Field f;
  f.dtype = DType::kF64;
  f.shape = {1};
  f.f64 = {value};
  fields_[name] = std::move(f);
}

const Field& Container::field(const std::string& name) const {
  auto it = fields_.find(name);
  if (it == fields_.end()) throw InvariantError("field '" + name + "' present", "missing from container");
  return it->second;
}

Tensor Container::tensor(const std::string& name) const {
  const Field& f = field(name);
  if (f.dtype != DType::kF64) throw InvariantError("field '" + name + "' has dtype f64", dtype_name(f.dtype));
  return Tensor(f.shape, f.f64);
}

std::vector<std::int32_t> Container::i32(const std::string& name) const {
  const Field& f = field(name);
  if (f.dtype != DType::kI32) throw InvariantError("field '" + name + "' has dtype i32", dtype_name(f.dtype));
  return {f.ints.begin(), f.ints.end()};
}

std::int64_t Container::i64(const std::string& name) const {
  const Field& f = field(name);
  if (f.dtype != DType::kI64 || f.ints.size() != 1) {
    throw InvariantError("field '" + name + "' is a scalar i64", dtype_name(f.dtype));
  }
  return f.ints[0];
}

double Container::f64(const std::string& name) const {
  const Field& f = field(name);
  if (f.dtype != DType::kF64 || f.f64.size() != 1) throw InvariantError("field '" + name + "' is a scalar f64", "");
  return f.f64[0];
}

std::vector<std::uint8_t> Container::encode() const {
  std::vector<std::uint8_t> table;
  std::vector<std::size_t> offset_slots;
  for (const auto& [name, f] : fields_) {
    put_le(table, static_cast<std::uint16_t>(name.size()));
    table.insert(table.end(), name.begin(), name.end());
    put_le(table, static_cast<std::uint8_t>(f.dtype));
    put_le(table, static_cast<std::uint8_t>(f.shape.size()));
    for (auto d : f.shape) put_le(table, static_cast<std::uint64_t>(d));
    offset_slots.push_back(table.size());
    put_le(table, std::uint64_t{0});
    put_le(table, static_cast<std::uint64_t>(element_count(f) * dtype_size(f.dtype)));
  }

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(fields_.size()));
  const std::size_t table_at = out.size();
  out.insert(out.end(), table.begin(), table.end());

  std::size_t k = 0;
  for (const auto& [name, f] : fields_) {
    while (out.size() % 8) out.push_back(0);
    store_le(out.data() + table_at + offset_slots[k++], static_cast<std::uint64_t>(out.size()));
    auto p = payload_bytes(f);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Container Container::decode(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(8, "magic");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw ParseError("bad magic", 0);
  (void)r.read_string(8);
  const auto version = r.read<std::uint32_t>("version");
  if (version != kVersion) throw ParseError("unsupported version " + std::to_string(version), 8);
  const auto count = r.read<std::uint32_t>("field count");

  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_at = r.pos();
    const auto len = r.read<std::uint16_t>("name length");
    std::string name = r.read_string(len);
    const auto dtype_raw = r.read<std::uint8_t>("dtype");
    if (dtype_raw < 1 || dtype_raw > 3) throw ParseError("unknown dtype " + std::to_string(dtype_raw), r.pos() - 1);
    Field f;
    f.dtype = static_cast<DType>(dtype_raw);
    const auto rank = r.read<std::uint8_t>("rank");
    std::size_t count_elems = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.read<std::uint64_t>("dimension");
      if (dim > (std::uint64_t{1} << 40)) throw ParseError("dimension too large", r.pos() - 8);
      f.shape.push_back(static_cast<std::size_t>(dim));
      count_elems *= static_cast<std::size_t>(dim);
    }
    const auto offset = r.read<std::uint64_t>("payload offset");
    const auto nbytes = r.read<std::uint64_t>("payload length");
    if (nbytes != count_elems * dtype_size(f.dtype)) {
      throw ParseError("payload length of '" + name + "' does not match its shape", entry_at);
    }
    if (offset > bytes.size() || nbytes > bytes.size() - offset) {
      throw ParseError("payload of '" + name + "' extends past end of file", static_cast<std::size_t>(offset));
    }
    fill_payload(f, bytes.data() + offset, count_elems);
    if (c.fields_.count(name)) throw ParseError("duplicate field '" + name + "'", entry_at);
    c.fields_[std::move(name)] = std::move(f);
  }
  return c;
}

std::string Container::encode_json() const {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& [name, f] : fields_) {
    fields.push_back({{"name", name},
                      {"dtype", dtype_name(f.dtype)},
                      {"shape", f.shape},
                      {"data", base64_encode(payload_bytes(f))}});
  }
  nlohmann::json j = {{"format", "smpler-container"}, {"version", kVersion}, {"fields", fields}};
  return j.dump(1);
}

Container Container::decode_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object() || j.value("format", "") != "smpler-container" || !j.contains("fields")) {
    throw ParseError("not a smpler-container JSON document", 0);
  }
  Container c;
  for (const auto& jf : j["fields"]) {
    try {
      Field f;
      const std::string dt = jf.at("dtype").get<std::string>();
      if (dt == "f64") f.dtype = DType::kF64;
      else if (dt == "i32") f.dtype = DType::kI32;
      else if (dt == "i64") f.dtype = DType::kI64;
      else throw ParseError("unknown dtype " + dt, 0);
      f.shape = jf.at("shape").get<Shape>();
      const auto bytes = base64_decode(jf.at("data").get<std::string>());
      const std::size_t n = shape_size(f.shape);
      if (bytes.size() != n * dtype_size(f.dtype)) {
        throw ParseError("payload length of '" + jf.at("name").get<std::string>() + "' does not match shape", 0);
      }
      fill_payload(f, bytes.data(), n);
      c.fields_[jf.at("name").get<std::string>()] = std::move(f);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed field entry: ") + e.what(), 0);
    }
  }
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  if (path.extension() == ".json") {
    out << encode_json();
  } else {
    const auto bytes = encode();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!bytes.empty() && bytes[0] == '{') return decode_json(std::string(bytes.begin(), bytes.end()));
  return decode(bytes);
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') break;
    if (c == '\n' || c == '\r' || c == ' ') continue;
    const int v = value(c);
    if (v < 0) throw ParseError("invalid base64 character", i);
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace smpler
