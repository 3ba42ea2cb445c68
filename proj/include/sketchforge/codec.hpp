#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sketchforge/image.hpp"

namespace sketchforge::wire {

// Body layout shared by requests and responses:
//   <JSON prelude>\n<little-endian float32 payloads, concatenated>
// The prelude carries "shapes": [{"name": ..., "dims": [...]}, ...] listing the
// payloads in order; all other prelude keys are message fields.
struct Array {
  std::string name;
  std::vector<int64_t> dims;
  std::vector<float> values;

  size_t expected_size() const;
};

struct Message {
  nlohmann::json fields = nlohmann::json::object();
  std::vector<Array> arrays;

  // Throws ProtocolError when the named array is absent.
  const Array& array(std::string_view name) const;
  const Array* find(std::string_view name) const;
};

std::string encode(const Message& message);
// Throws ProtocolError on a missing prelude, malformed shapes, or a payload
// length that does not match the declared shapes. Never returns partial data.
Message decode(std::string_view body);

Array image_to_array(std::string name, const Image& image);
// HxWxC arrays (or HxW for single-channel) to Image; checks the rank.
Image array_to_image(const Array& array);

}  // namespace sketchforge::wire
