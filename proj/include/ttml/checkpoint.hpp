#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttml/tensor.hpp"

namespace ttml {

// Checkpoint container, readable from any language:
//
//   bytes 0..7   magic "TTNNCKPT"
//   bytes 8..11  format version, uint32 little-endian (currently 1)
//   bytes 12..15 manifest length L, uint32 little-endian
//   bytes 16..   manifest: UTF-8 JSON
//                  { "meta": <free-form object>,
//                    "tensors": [ {"name": str, "shape": [int...]}, ... ] }
//   then one raw little-endian float32 buffer per manifest entry, in order,
//   each of product(shape) elements, densely packed.

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const std::vector<NamedTensor>& tensors);

struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::string> order;  // manifest order
    std::map<std::string, Tensor> tensors;
};

Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ttml
