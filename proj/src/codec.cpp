#include "sketchforge/codec.hpp"

#include <fmt/format.h>

#include <limits>

#include "sketchforge/byte_io.hpp"
#include "sketchforge/errors.hpp"

namespace sketchforge::wire {

namespace {
constexpr int64_t kMaxElements = int64_t{1} << 31;
}

size_t Array::expected_size() const {
  size_t n = 1;
  for (int64_t d : dims) n *= static_cast<size_t>(d);
  return n;
}

const Array* Message::find(std::string_view name) const {
  for (const Array& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const Array& Message::array(std::string_view name) const {
  if (const Array* a = find(name)) return *a;
  throw ProtocolError(fmt::format("message has no array '{}'", name));
}

std::string encode(const Message& message) {
  nlohmann::json prelude = message.fields;
  if (!prelude.is_object()) throw InputError("wire prelude must be a JSON object");
  nlohmann::json shapes = nlohmann::json::array();
  for (const Array& a : message.arrays) {
    if (a.dims.empty()) throw InputError(fmt::format("array '{}' has no dimensions", a.name));
    for (int64_t d : a.dims)
      if (d < 1) throw InputError(fmt::format("array '{}' has a non-positive dimension", a.name));
    if (a.values.size() != a.expected_size())
      throw InputError(fmt::format("array '{}' holds {} values for shape of {}", a.name, a.values.size(), a.expected_size()));
    shapes.push_back({{"name", a.name}, {"dims", a.dims}});
  }
  prelude["shapes"] = std::move(shapes);
  std::string out = prelude.dump();
  out.push_back('\n');
  for (const Array& a : message.arrays) bytes::put_f32_array(out, a.values);
  return out;
}

Message decode(std::string_view body) {
  const size_t newline = body.find('\n');
  if (newline == std::string_view::npos) throw ProtocolError("wire body has no prelude terminator");
  nlohmann::json prelude;
  try {
    prelude = nlohmann::json::parse(body.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("wire prelude is not valid JSON: {}", e.what()));
  }
  if (!prelude.is_object()) throw ProtocolError("wire prelude is not a JSON object");
  if (!prelude.contains("shapes") || !prelude["shapes"].is_array()) throw ProtocolError("wire prelude lacks a shapes list");

  Message msg;
  size_t total = 0;
  for (const auto& s : prelude["shapes"]) {
    if (!s.is_object() || !s.contains("name") || !s["name"].is_string() || !s.contains("dims") || !s["dims"].is_array() ||
        s["dims"].empty())
      throw ProtocolError("malformed shape header");
    Array a;
    a.name = s["name"].get<std::string>();
    int64_t count = 1;
    for (const auto& d : s["dims"]) {
      if (!d.is_number_integer()) throw ProtocolError(fmt::format("array '{}' has a non-integer dimension", a.name));
      const auto v = d.get<int64_t>();
      if (v < 1 || v > kMaxElements || count > kMaxElements / v)
        throw ProtocolError(fmt::format("array '{}' has an invalid dimension", a.name));
      count *= v;
      a.dims.push_back(v);
    }
    total += static_cast<size_t>(count);
    if (total > static_cast<size_t>(kMaxElements)) throw ProtocolError("wire payload too large");
    msg.arrays.push_back(std::move(a));
  }
  const std::string_view payload = body.substr(newline + 1);
  if (payload.size() != total * sizeof(float))
    throw ProtocolError(fmt::format("wire payload has {} bytes, shapes declare {}", payload.size(), total * sizeof(float)));

  bytes::Reader in(payload);
  for (Array& a : msg.arrays) {
    a.values.resize(a.expected_size());
    in.get_f32_array(a.values);
  }
  prelude.erase("shapes");
  msg.fields = std::move(prelude);
  return msg;
}

Array image_to_array(std::string name, const Image& image) {
  Array a;
  a.name = std::move(name);
  if (image.channels == 1)
    a.dims = {image.height, image.width};
  else
    a.dims = {image.height, image.width, image.channels};
  a.values.resize(image.size());
  for (size_t i = 0; i < image.size(); ++i) a.values[i] = static_cast<float>(image.data[i]);
  return a;
}

Image array_to_image(const Array& a) {
  if (a.dims.size() != 2 && a.dims.size() != 3)
    throw ProtocolError(fmt::format("array '{}' is not an image (rank {})", a.name, a.dims.size()));
  const int64_t limit = std::numeric_limits<int>::max();
  for (int64_t d : a.dims)
    if (d > limit) throw ProtocolError("image dimension too large");
  Image img(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), a.dims.size() == 3 ? static_cast<int>(a.dims[2]) : 1);
  if (img.size() != a.values.size()) throw ProtocolError("array size does not match its shape");
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = a.values[i];
  return img;
}

}  // namespace sketchforge::wire
