#include "glmkit/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace glmkit {

std::size_t TensorView::element_count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void TensorContainer::put(const std::string& name, std::vector<std::size_t> shape,
                          std::vector<float> data) {
  TensorView view{std::move(shape), std::move(data)};
  if (view.element_count() != view.data.size()) {
    throw std::invalid_argument("tensor \"" + name + "\": shape implies " +
                                std::to_string(view.element_count()) + " elements, got " +
                                std::to_string(view.data.size()));
  }
  tensors_[name] = std::move(view);
}

const TensorView& TensorContainer::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::out_of_range("container has no tensor named \"" + name + "\"");
  }
  return it->second;
}

bool TensorContainer::contains(const std::string& name) const {
  return tensors_.count(name) != 0;
}

std::vector<std::string> TensorContainer::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, view] : tensors_) out.push_back(name);
  return out;
}

void TensorContainer::set_metadata(const std::string& key, const std::string& value) {
  metadata_[key] = value;
}

void TensorContainer::save(const std::string& path) const {
  nlohmann::json header;
  if (!metadata_.empty()) header["__metadata__"] = metadata_;
  std::size_t offset = 0;
  for (const auto& [name, view] : tensors_) {
    std::size_t bytes = view.data.size() * sizeof(float);
    header[name] = {{"dtype", "F32"},
                    {"shape", view.shape},
                    {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tensor container " + path);
  std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, view] : tensors_) {
    out.write(reinterpret_cast<const char*>(view.data.data()),
              static_cast<std::streamsize>(view.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("short write on tensor container " + path);
}

TensorContainer TensorContainer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tensor container " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw std::runtime_error(path + " is too short for a tensor container header");
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated header in tensor container " + path);

  std::string buffer((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json header = nlohmann::json::parse(header_str);

  TensorContainer container;
  for (const auto& [name, entry] : header.items()) {
    if (name == "__metadata__") {
      for (const auto& [key, value] : entry.items()) {
        container.metadata_[key] = value.get<std::string>();
      }
      continue;
    }
    std::string dtype = entry.at("dtype").get<std::string>();
    if (dtype != "F32") {
      throw std::runtime_error("tensor \"" + name + "\" has unsupported dtype " + dtype +
                               " (only F32 is supported)");
    }
    TensorView view;
    view.shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0] || offsets[1] > buffer.size()) {
      throw std::runtime_error("tensor \"" + name + "\" has invalid data offsets");
    }
    std::size_t bytes = offsets[1] - offsets[0];
    if (bytes != view.element_count() * sizeof(float)) {
      throw std::runtime_error("tensor \"" + name + "\": data span of " + std::to_string(bytes) +
                               " bytes does not match its shape");
    }
    view.data.resize(bytes / sizeof(float));
    std::memcpy(view.data.data(), buffer.data() + offsets[0], bytes);
    container.tensors_[name] = std::move(view);
  }
  return container;
}

}  // namespace glmkit
