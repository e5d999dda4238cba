#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mov3d/io.h"
#include "mov3d/tensor.h"

namespace mov3d {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// "VXW1" container:
//   magic "VXW1" | u32 count | count x record
//   record = u32 name_len | name bytes | u32 rank | rank x u32 extent |
//            numel x f32 (little-endian)
// Values are narrowed to float32 on write.
Bytes encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

}  // namespace mov3d
