#include "hsdrive/weights.hpp"

#include <limits>
#include <set>

#include "binary_io.hpp"

namespace hsd {

std::string_view to_string(DType t) {
  switch (t) {
    case DType::f32: return "f32";
    case DType::i8: return "i8";
    case DType::i32: return "i32";
  }
  return "?";
}

std::size_t NamedTensor::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, payload);
}

void NamedTensor::check() const {
  std::uint64_t product = 1;
  for (auto d : dims) product *= d;
  if (product != element_count()) {
    throw DataError("tensor '" + name + "': dims product " + std::to_string(product) + " != payload length " +
                    std::to_string(element_count()));
  }
}

void WeightStore::add(NamedTensor tensor) {
  tensor.check();
  if (contains(tensor.name)) throw WeightError("duplicate tensor name '" + tensor.name + "'");
  tensors_.push_back(std::move(tensor));
}

const NamedTensor* WeightStore::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& WeightStore::get(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw WeightError("missing tensor '" + std::string(name) + "'");
}

const NamedTensor& WeightStore::get(std::string_view name, const std::vector<std::uint32_t>& expected) const {
  const auto& t = get(name);
  if (t.dims != expected) {
    std::string got, want;
    for (auto d : t.dims) got += std::to_string(d) + " ";
    for (auto d : expected) want += std::to_string(d) + " ";
    throw WeightError("tensor '" + std::string(name) + "' has dims [ " + got + "], expected [ " + want + "]");
  }
  return t;
}

void WeightStore::set_meta(std::string key, std::string value) {
  for (auto& [k, v] : metadata_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> WeightStore::meta(std::string_view key) const {
  for (const auto& [k, v] : metadata_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

namespace {

void put_string(detail::ByteWriter& out, std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw DataError("HSWT string too long");
  out.put(static_cast<std::uint16_t>(s.size()));
  out.put_bytes(s);
}

}  // namespace

std::string serialize_weights(const WeightStore& store) {
  const auto& tensors = store.tensors();
  if (tensors.size() > std::numeric_limits<std::uint16_t>::max() ||
      store.metadata().size() > std::numeric_limits<std::uint16_t>::max()) {
    throw DataError("HSWT: too many entries");
  }
  detail::ByteWriter out;
  out.put_bytes("HSWT");
  out.put(std::uint16_t{1});
  out.put(static_cast<std::uint16_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_string(out, t.name);
    out.put(static_cast<std::uint8_t>(t.dtype()));
    if (t.dims.size() > 255) throw DataError("HSWT: too many dimensions");
    out.put(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) out.put(d);
    std::visit([&](const auto& values) {
      for (auto v : values) out.put(v);
    }, t.payload);
  }
  out.put(static_cast<std::uint16_t>(store.metadata().size()));
  for (const auto& [k, v] : store.metadata()) {
    put_string(out, k);
    put_string(out, v);
  }
  return out.bytes();
}

WeightStore parse_weights(std::string_view bytes) {
  detail::ByteReader in(bytes, "HSWT");
  if (in.get_bytes(4) != "HSWT") throw FormatError("HSWT: bad magic");
  const auto version = in.get<std::uint16_t>();
  if (version != 1) throw FormatError("HSWT: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint16_t>();
  WeightStore store;
  std::set<std::string> names;
  for (std::uint16_t n = 0; n < count; ++n) {
    std::string name(in.get_bytes(in.get<std::uint16_t>()));
    if (!names.insert(name).second) throw FormatError("HSWT: duplicate tensor name '" + name + "'");
    const auto dtype = in.get<std::uint8_t>();
    const auto ndim = in.get<std::uint8_t>();
    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t elements = 1;
    for (auto& d : dims) {
      d = in.get<std::uint32_t>();
      elements *= d;
      if (elements > bytes.size()) throw FormatError("HSWT: tensor '" + name + "' larger than file");
    }
    auto read_all = [&]<typename T>(std::vector<T> values) {
      in.require(elements * sizeof(T));
      for (auto& v : values) v = in.get<T>();
      return NamedTensor(name, dims, std::move(values));
    };
    const auto len = static_cast<std::size_t>(elements);
    switch (dtype) {
      case 0: store.add(read_all(std::vector<float>(len))); break;
      case 1: store.add(read_all(std::vector<std::int8_t>(len))); break;
      case 2: store.add(read_all(std::vector<std::int32_t>(len))); break;
      default: throw FormatError("HSWT: unknown dtype code " + std::to_string(dtype));
    }
  }
  const auto meta_count = in.get<std::uint16_t>();
  for (std::uint16_t n = 0; n < meta_count; ++n) {
    std::string key(in.get_bytes(in.get<std::uint16_t>()));
    std::string value(in.get_bytes(in.get<std::uint16_t>()));
    if (store.meta(key)) throw FormatError("HSWT: duplicate metadata key '" + key + "'");
    store.set_meta(std::move(key), std::move(value));
  }
  if (in.remaining() != 0) throw FormatError("HSWT: trailing bytes after metadata");
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize_weights(store));
}

WeightStore load_weights(const std::filesystem::path& path) {
  try {
    return parse_weights(detail::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hsd
