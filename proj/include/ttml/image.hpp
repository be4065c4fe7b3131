#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ttml/tensor.hpp"

namespace ttml {

// Interleaved 8-bit RGB.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // width * height * 3
};

// Binary PPM (P6), maxval 255 only. Byte-exact: sample v maps to v/255.
ImageU8 decode_ppm(std::span<const uint8_t> bytes);
std::vector<uint8_t> encode_ppm(const ImageU8& img);

// 8-bit non-interlaced PNG; color types 0 (gray), 2 (RGB) and 6 (RGBA,
// alpha dropped). Zlib/DEFLATE decompression is built in.
ImageU8 decode_png(std::span<const uint8_t> bytes);

// Raw zlib stream -> bytes; verifies the adler32 trailer.
std::vector<uint8_t> zlib_inflate(std::span<const uint8_t> bytes);

// Container sniffing: P6 -> PPM, \x89PNG -> PNG, anything else is a
// malformed-container error.
ImageU8 decode_image_bytes(std::span<const uint8_t> bytes);

// bytes -> (H, W, 3) float tensor in [0, 1] (exactly v/255).
Tensor decode_image(std::span<const uint8_t> bytes);

Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t);  // round(v*255), clamped

// Half-pixel-center bilinear resampling; same-size calls copy exactly.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

}  // namespace ttml
