#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "hsdrive/errors.hpp"

namespace hsd {

enum class DType : std::uint8_t { f32 = 0, i8 = 1, i32 = 2 };

std::string_view to_string(DType t);

struct NamedTensor {
  using Payload = std::variant<std::vector<float>, std::vector<std::int8_t>, std::vector<std::int32_t>>;

  std::string name;
  std::vector<std::uint32_t> dims;
  Payload payload;

  NamedTensor() = default;
  template <typename T>
  NamedTensor(std::string n, std::vector<std::uint32_t> d, std::vector<T> values)
      : name(std::move(n)), dims(std::move(d)), payload(std::move(values)) {
    check();
  }

  DType dtype() const { return static_cast<DType>(payload.index()); }
  std::size_t element_count() const;
  /// Throws DataError when the dims product differs from the payload length.
  void check() const;

  /// Typed payload access; WeightError if the tensor holds another dtype.
  template <typename T>
  const std::vector<T>& values() const {
    if (const auto* v = std::get_if<std::vector<T>>(&payload)) return *v;
    throw WeightError("tensor '" + name + "' has dtype " + std::string(to_string(dtype())));
  }

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered named-tensor container with string metadata. Insertion order is
/// preserved so a load/save cycle reproduces the file byte for byte.
class WeightStore {
 public:
  void add(NamedTensor tensor);
  template <typename T>
  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<T> values) {
    add(NamedTensor(std::move(name), std::move(dims), std::move(values)));
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const NamedTensor* find(std::string_view name) const;
  /// WeightError when missing.
  const NamedTensor& get(std::string_view name) const;
  /// WeightError when missing or when the dims differ from `expected`.
  const NamedTensor& get(std::string_view name, const std::vector<std::uint32_t>& expected) const;

  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  void set_meta(std::string key, std::string value);
  std::optional<std::string> meta(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::vector<NamedTensor> tensors_;
  std::vector<std::pair<std::string, std::string>> metadata_;
};

// HSWT container:
//   "HSWT" | u16 version=1 | u16 tensor_count |
//   per tensor: u16 name_len, name, u8 dtype, u8 ndim, u32 dims[ndim], payload |
//   u16 meta_count | per entry: u16 key_len, key, u16 value_len, value
// All integers and payloads little-endian.
std::string serialize_weights(const WeightStore& store);
WeightStore parse_weights(std::string_view bytes);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace hsd
