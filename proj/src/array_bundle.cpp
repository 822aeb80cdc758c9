#include "handkin/array_bundle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr char kBinaryMagic[8] = {'H', 'K', 'B', 'U', 'N', 'D', 'L', 'E'};
constexpr std::string_view kTextMagic = "HKBUNDLE-TEXT";
constexpr std::uint32_t kVersion = 1;

const char* dtype_name(DType d) {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
  }
  return "?";
}

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  if (s == "i32") return DType::i32;
  throw ParseError("unknown dtype '" + s + "'");
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw ParseError("truncated bundle");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 20)) throw ParseError("implausible string length in bundle");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& is_;
};

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

double store_value(DType dtype, double v) {
  switch (dtype) {
    case DType::f32: return static_cast<double>(static_cast<float>(v));
    case DType::i32: return static_cast<double>(static_cast<std::int32_t>(std::lround(v)));
    case DType::f64: return v;
  }
  return v;
}

}  // namespace

std::size_t NamedArray::size() const { return element_count(shape); }

void ArrayBundle::set_attribute(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of(" \t\n") != std::string::npos)
    throw DomainError("attribute keys must be non-empty without whitespace");
  if (value.find('\n') != std::string::npos)
    throw DomainError("attribute values must be single-line");
  for (auto& [k, v] : attributes_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  attributes_.emplace_back(key, value);
}

bool ArrayBundle::has_attribute(const std::string& key) const {
  return std::any_of(attributes_.begin(), attributes_.end(),
                     [&](const auto& kv) { return kv.first == key; });
}

const std::string& ArrayBundle::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes_)
    if (k == key) return v;
  throw ParseError("bundle has no attribute '" + key + "'");
}

void ArrayBundle::add(NamedArray array) {
  if (array.name.empty() || array.name.find_first_of(" \t\n") != std::string::npos)
    throw DomainError("array names must be non-empty without whitespace");
  if (array.data.size() != element_count(array.shape))
    throw ShapeError("array '" + array.name + "' data size does not match shape");
  for (auto& v : array.data) v = store_value(array.dtype, v);
  for (auto& existing : arrays_) {
    if (existing.name == array.name) {
      existing = std::move(array);
      return;
    }
  }
  arrays_.push_back(std::move(array));
}

void ArrayBundle::add_matrix(const std::string& name, DType dtype, const Eigen::MatrixXd& m) {
  NamedArray a{name, dtype, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, {}};
  a.data.resize(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.data[r * m.cols() + c] = m(r, c);
  add(std::move(a));
}

void ArrayBundle::add_vector(const std::string& name, DType dtype, const std::vector<double>& v) {
  add(NamedArray{name, dtype, {v.size()}, v});
}

bool ArrayBundle::contains(const std::string& name) const {
  return std::any_of(arrays_.begin(), arrays_.end(),
                     [&](const NamedArray& a) { return a.name == name; });
}

const NamedArray& ArrayBundle::at(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw ParseError("bundle has no array '" + name + "'");
}

Eigen::MatrixXd ArrayBundle::matrix(const std::string& name) const {
  const auto& a = at(name);
  if (a.shape.empty()) return Eigen::MatrixXd::Constant(1, 1, a.data.at(0));
  const auto rows = static_cast<Eigen::Index>(a.shape[0]);
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(a.size() / a.shape[0]);
  Eigen::MatrixXd m(rows, a.shape.size() == 1 ? 1 : cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.data[r * m.cols() + c];
  return m;
}

void ArrayBundle::save_binary(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  Writer w(os);
  w.bytes(kBinaryMagic, sizeof(kBinaryMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(attributes_.size()));
  for (const auto& [k, v] : attributes_) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& a : arrays_) {
    w.str(a.name);
    w.u8(static_cast<std::uint8_t>(a.dtype));
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.u64(d);
    for (double v : a.data) {
      switch (a.dtype) {
        case DType::f32: w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
        case DType::f64: w.u64(std::bit_cast<std::uint64_t>(v)); break;
        case DType::i32:
          w.u32(static_cast<std::uint32_t>(static_cast<std::int32_t>(std::lround(v))));
          break;
      }
    }
  }
  if (!os) throw ParseError("write failed for '" + path.string() + "'");
}

ArrayBundle ArrayBundle::load_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  Reader r(is);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kBinaryMagic, 8) != 0)
    throw ParseError("'" + path.string() + "' is not a binary bundle");
  if (r.u32() != kVersion) throw ParseError("unsupported bundle version");
  ArrayBundle b;
  const auto n_attr = r.u32();
  for (std::uint32_t i = 0; i < n_attr; ++i) {
    auto k = r.str();
    auto v = r.str();
    b.attributes_.emplace_back(std::move(k), std::move(v));
  }
  const auto n_arr = r.u32();
  for (std::uint32_t i = 0; i < n_arr; ++i) {
    NamedArray a;
    a.name = r.str();
    const auto dt = r.u8();
    if (dt > 2) throw ParseError("unknown dtype code in bundle");
    a.dtype = static_cast<DType>(dt);
    const auto rank = r.u32();
    if (rank > 8) throw ParseError("implausible array rank in bundle");
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.u64());
    const auto n = element_count(a.shape);
    if (n > (std::size_t{1} << 32)) throw ParseError("implausible array size in bundle");
    a.data.resize(n);
    for (auto& v : a.data) {
      switch (a.dtype) {
        case DType::f32: v = std::bit_cast<float>(r.u32()); break;
        case DType::f64: v = std::bit_cast<double>(r.u64()); break;
        case DType::i32: v = static_cast<std::int32_t>(r.u32()); break;
      }
    }
    b.arrays_.push_back(std::move(a));
  }
  return b;
}

std::string ArrayBundle::to_text() const {
  std::ostringstream os;
  os << kTextMagic << ' ' << kVersion << '\n';
  for (const auto& [k, v] : attributes_) os << "attr " << k << ' ' << v << '\n';
  for (const auto& a : arrays_) {
    os << "array " << a.name << ' ' << dtype_name(a.dtype) << ' ' << a.shape.size();
    for (auto d : a.shape) os << ' ' << d;
    os << '\n';
    const std::size_t row = a.shape.empty() ? 1 : std::max<std::size_t>(a.shape.back(), 1);
    const int digits = a.dtype == DType::f64 ? 17 : kTextDigits;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      os << format_number(a.data[i], digits);
      os << (((i + 1) % row == 0) ? '\n' : ' ');
    }
  }
  return os.str();
}

void ArrayBundle::save_text(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  os << to_text();
}

ArrayBundle ArrayBundle::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  std::uint32_t version = 0;
  if (!(is >> magic >> version) || magic != kTextMagic)
    throw ParseError("not a text bundle");
  if (version != kVersion) throw ParseError("unsupported bundle version");
  ArrayBundle b;
  std::string tag;
  while (is >> tag) {
    if (tag == "attr") {
      std::string key, value;
      is >> key;
      std::getline(is, value);
      const auto first = value.find_first_not_of(' ');
      b.attributes_.emplace_back(key, first == std::string::npos ? "" : value.substr(first));
    } else if (tag == "array") {
      NamedArray a;
      std::string dt;
      std::size_t rank = 0;
      if (!(is >> a.name >> dt >> rank) || rank > 8) throw ParseError("bad array header");
      a.dtype = parse_dtype(dt);
      a.shape.resize(rank);
      for (auto& d : a.shape)
        if (!(is >> d)) throw ParseError("bad array dims for '" + a.name + "'");
      a.data.resize(element_count(a.shape));
      for (auto& v : a.data) {
        std::string tok;
        if (!(is >> tok)) throw ParseError("truncated values for '" + a.name + "'");
        try {
          std::size_t used = 0;
          v = std::stod(tok, &used);
          if (used != tok.size()) throw ParseError("bad number '" + tok + "'");
        } catch (const std::logic_error&) {
          throw ParseError("bad number '" + tok + "' in '" + a.name + "'");
        }
      }
      b.add(std::move(a));
    } else {
      throw ParseError("unexpected token '" + tag + "' in text bundle");
    }
  }
  return b;
}

ArrayBundle ArrayBundle::load_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

ArrayBundle ArrayBundle::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  // The text header also starts with the binary magic, so look one byte further.
  char head[9] = {};
  is.read(head, 9);
  if (is.gcount() == 9 && std::memcmp(head, kBinaryMagic, 8) == 0 && head[8] != '-') return load_binary(path);
  return load_text(path);
}

}  // namespace handkin
