#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace glmkit {

struct TensorView {
  std::vector<std::size_t> shape;
  std::vector<float> data;  // row-major

  std::size_t element_count() const;
};

// Named-tensor container with the safetensors layout: an 8-byte
// little-endian header length, a JSON header mapping tensor names to
// {dtype, shape, data_offsets} (plus an optional "__metadata__" string
// map), then the raw byte buffer. Only F32 tensors are supported.
class TensorContainer {
 public:
  void put(const std::string& name, std::vector<std::size_t> shape, std::vector<float> data);
  const TensorView& get(const std::string& name) const;  // throws, naming the tensor
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

  void set_metadata(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  void save(const std::string& path) const;
  static TensorContainer load(const std::string& path);

 private:
  std::map<std::string, TensorView> tensors_;  // sorted: deterministic files
  std::map<std::string, std::string> metadata_;
};

}  // namespace glmkit
