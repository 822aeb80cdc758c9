#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace handkin {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2 };

struct NamedArray {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::size_t> shape;
  std::vector<double> data;  // row-major, held in double regardless of dtype

  std::size_t size() const;
};

// Self-describing container of string attributes and named dense arrays.
//
// Two encodings share one schema:
//  * binary: magic "HKBUNDLE", little-endian u32 version, attributes as
//    length-prefixed strings, then arrays as (name, dtype byte, rank, u64
//    dims, little-endian payload);
//  * text: a "HKBUNDLE-TEXT 1" header line, "attr <key> <value>" lines and
//    "array <name> <dtype> <rank> <dims...>" blocks followed by the values.
// Insertion order of attributes and arrays is preserved on save.
class ArrayBundle {
 public:
  void set_attribute(const std::string& key, const std::string& value);
  bool has_attribute(const std::string& key) const;
  const std::string& attribute(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& attributes() const {
    return attributes_;
  }

  void add(NamedArray array);
  void add_matrix(const std::string& name, DType dtype, const Eigen::MatrixXd& m);
  void add_vector(const std::string& name, DType dtype, const std::vector<double>& v);

  bool contains(const std::string& name) const;
  const NamedArray& at(const std::string& name) const;
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  // 2-D view; a 1-D array becomes a column. Higher ranks flatten trailing dims.
  Eigen::MatrixXd matrix(const std::string& name) const;

  void save_binary(const std::filesystem::path& path) const;
  void save_text(const std::filesystem::path& path) const;
  std::string to_text() const;

  static ArrayBundle load_binary(const std::filesystem::path& path);
  static ArrayBundle load_text(const std::filesystem::path& path);
  static ArrayBundle from_text(const std::string& text);
  // Detects the encoding from the leading magic bytes.
  static ArrayBundle load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> attributes_;
  std::vector<NamedArray> arrays_;
};

}  // namespace handkin
