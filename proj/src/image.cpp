#include "ttml/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>

namespace ttml {

// ---------------------------------------------------------------------------
// PPM (P6)
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void malformed(const char* container, size_t offset, const std::string& what) {
    throw DataError(std::string(container) + ": malformed at byte " + std::to_string(offset) +
                    ": " + what);
}

struct PpmCursor {
    std::span<const uint8_t> bytes;
    size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    uint8_t peek() const { return bytes[pos]; }

    void skip_space_and_comments() {
        while (!eof()) {
            const uint8_t c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
                       c == '\f') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int(const char* field) {
        skip_space_and_comments();
        if (eof() || peek() < '0' || peek() > '9')
            malformed("ppm", pos, std::string("expected integer for ") + field);
        long v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > 1 << 30) malformed("ppm", pos, std::string(field) + " out of range");
            ++pos;
        }
        return int(v);
    }
};

}  // namespace

ImageU8 decode_ppm(std::span<const uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        malformed("ppm", 0, "missing P6 signature");
    PpmCursor cur{bytes, 2};
    ImageU8 img;
    img.width = cur.read_int("width");
    img.height = cur.read_int("height");
    const int maxval = cur.read_int("maxval");
    if (img.width <= 0 || img.height <= 0) malformed("ppm", cur.pos, "nonpositive dimensions");
    if (maxval != 255)
        malformed("ppm", cur.pos, "unsupported maxval " + std::to_string(maxval) +
                                      " (only 255 is handled)");
    if (cur.eof()) malformed("ppm", cur.pos, "missing whitespace before payload");
    const uint8_t sep = cur.peek();
    if (!(sep == ' ' || sep == '\t' || sep == '\r' || sep == '\n'))
        malformed("ppm", cur.pos, "expected single whitespace before payload");
    ++cur.pos;
    const size_t need = size_t(img.width) * size_t(img.height) * 3;
    if (bytes.size() - cur.pos < need)
        malformed("ppm", bytes.size(),
                  "truncated payload, need " + std::to_string(need) + " bytes, have " +
                      std::to_string(bytes.size() - cur.pos));
    img.rgb.assign(bytes.begin() + std::ptrdiff_t(cur.pos),
                   bytes.begin() + std::ptrdiff_t(cur.pos + need));
    return img;
}

std::vector<uint8_t> encode_ppm(const ImageU8& img) {
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    return out;
}

// ---------------------------------------------------------------------------
// DEFLATE / zlib
// ---------------------------------------------------------------------------

namespace {

struct BitReader {
    std::span<const uint8_t> bytes;
    size_t pos;      // next byte
    uint32_t buf = 0;
    int nbits = 0;

    uint32_t bits(int n) {
        while (nbits < n) {
            if (pos >= bytes.size()) malformed("zlib", pos, "unexpected end of stream");
            buf |= uint32_t(bytes[pos++]) << nbits;
            nbits += 8;
        }
        const uint32_t v = buf & ((1u << n) - 1);
        buf >>= n;
        nbits -= n;
        return v;
    }

    void align_byte() {
        buf = 0;
        nbits = 0;
    }
};

// Canonical Huffman decoder over code lengths.
struct Huffman {
    std::array<int, 16> count{};       // codes per bit length
    std::vector<int> symbols;          // symbols ordered by (length, symbol)

    explicit Huffman(std::span<const int> lengths) {
        for (int len : lengths)
            if (len) ++count[size_t(len)];
        std::array<int, 16> offs{};
        int total = 0;
        for (int len = 1; len < 16; ++len) {
            offs[size_t(len)] = total;
            total += count[size_t(len)];
        }
        symbols.resize(size_t(total));
        for (size_t s = 0; s < lengths.size(); ++s)
            if (lengths[s]) symbols[size_t(offs[size_t(lengths[s])]++)] = int(s);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= int(br.bits(1));
            const int n = count[size_t(len)];
            if (code - first < n) return symbols[size_t(index + code - first)];
            index += n;
            first = (first + n) << 1;
            code <<= 1;
        }
        malformed("zlib", br.pos, "invalid Huffman code");
    }
};

constexpr int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19, 23, 27,
                              31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                               2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
                               33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
                               1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
constexpr int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};
constexpr int kClOrder[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<uint8_t>& out) {
    for (;;) {
        const int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            if (sym > 285) malformed("zlib", br.pos, "invalid length symbol");
            const int li = sym - 257;
            const int len = kLenBase[li] + int(br.bits(kLenExtra[li]));
            const int ds = dist.decode(br);
            if (ds > 29) malformed("zlib", br.pos, "invalid distance symbol");
            const size_t d = size_t(kDistBase[ds]) + br.bits(kDistExtra[ds]);
            if (d > out.size()) malformed("zlib", br.pos, "distance past window start");
            for (int i = 0; i < len; ++i) out.push_back(out[out.size() - d]);
        }
    }
}

uint32_t adler32(std::span<const uint8_t> data) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < data.size();) {
        // 5552 is the largest run before the sums can overflow 32 bits.
        const size_t run = std::min<size_t>(5552, data.size() - i);
        for (size_t j = 0; j < run; ++j) {
            a += data[i + j];
            b += a;
        }
        a %= 65521;
        b %= 65521;
        i += run;
    }
    return (b << 16) | a;
}

}  // namespace

std::vector<uint8_t> zlib_inflate(std::span<const uint8_t> bytes) {
    if (bytes.size() < 6) malformed("zlib", 0, "stream too short");
    const uint8_t cmf = bytes[0], flg = bytes[1];
    if ((cmf & 0x0f) != 8) malformed("zlib", 0, "compression method is not deflate");
    if ((uint32_t(cmf) * 256 + flg) % 31 != 0) malformed("zlib", 1, "header check failed");
    if (flg & 0x20) malformed("zlib", 1, "preset dictionaries not supported");

    BitReader br{bytes, 2};
    std::vector<uint8_t> out;
    bool final_block = false;
    while (!final_block) {
        final_block = br.bits(1) != 0;
        const uint32_t btype = br.bits(2);
        if (btype == 0) {
            br.align_byte();
            if (br.pos + 4 > bytes.size()) malformed("zlib", br.pos, "truncated stored block");
            const uint32_t len = uint32_t(bytes[br.pos]) | uint32_t(bytes[br.pos + 1]) << 8;
            const uint32_t nlen =
                uint32_t(bytes[br.pos + 2]) | uint32_t(bytes[br.pos + 3]) << 8;
            if ((len ^ 0xffff) != nlen) malformed("zlib", br.pos, "stored block length check");
            br.pos += 4;
            if (br.pos + len > bytes.size())
                malformed("zlib", br.pos, "stored block past end of stream");
            out.insert(out.end(), bytes.begin() + std::ptrdiff_t(br.pos),
                       bytes.begin() + std::ptrdiff_t(br.pos + len));
            br.pos += len;
        } else if (btype == 1) {
            std::vector<int> ll(288), dl(30, 5);
            for (int i = 0; i < 288; ++i)
                ll[size_t(i)] = i < 144 ? 8 : i < 256 ? 9 : i < 280 ? 7 : 8;
            inflate_block(br, Huffman(ll), Huffman(dl), out);
        } else if (btype == 2) {
            const int hlit = int(br.bits(5)) + 257;
            const int hdist = int(br.bits(5)) + 1;
            const int hclen = int(br.bits(4)) + 4;
            std::vector<int> cl(19, 0);
            for (int i = 0; i < hclen; ++i) cl[size_t(kClOrder[i])] = int(br.bits(3));
            const Huffman clh(cl);
            std::vector<int> lengths;
            lengths.reserve(size_t(hlit + hdist));
            while (int(lengths.size()) < hlit + hdist) {
                const int sym = clh.decode(br);
                if (sym < 16) {
                    lengths.push_back(sym);
                } else if (sym == 16) {
                    if (lengths.empty()) malformed("zlib", br.pos, "repeat with no prior length");
                    const int prev = lengths.back();
                    for (uint32_t i = br.bits(2) + 3; i-- > 0;) lengths.push_back(prev);
                } else if (sym == 17) {
                    for (uint32_t i = br.bits(3) + 3; i-- > 0;) lengths.push_back(0);
                } else {
                    for (uint32_t i = br.bits(7) + 11; i-- > 0;) lengths.push_back(0);
                }
            }
            if (int(lengths.size()) != hlit + hdist)
                malformed("zlib", br.pos, "code length overrun");
            inflate_block(br,
                          Huffman(std::span<const int>(lengths.data(), size_t(hlit))),
                          Huffman(std::span<const int>(lengths.data() + hlit, size_t(hdist))),
                          out);
        } else {
            malformed("zlib", br.pos, "reserved block type");
        }
    }

    br.align_byte();
    if (br.pos + 4 > bytes.size()) malformed("zlib", br.pos, "missing adler32 trailer");
    const uint32_t want = uint32_t(bytes[br.pos]) << 24 | uint32_t(bytes[br.pos + 1]) << 16 |
                          uint32_t(bytes[br.pos + 2]) << 8 | uint32_t(bytes[br.pos + 3]);
    if (adler32(out) != want) malformed("zlib", br.pos, "adler32 mismatch");
    return out;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

uint32_t be32(const uint8_t* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
}

}  // namespace

ImageU8 decode_png(std::span<const uint8_t> bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        malformed("png", 0, "missing PNG signature");

    size_t pos = 8;
    uint32_t width = 0, height = 0;
    int color_type = -1, channels = 0;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<uint8_t> idat;

    while (pos + 8 <= bytes.size() && !saw_iend) {
        const uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) malformed("png", pos, "chunk past end of file");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) malformed("png", pos, "IHDR length");
            width = be32(data);
            height = be32(data + 4);
            const int bit_depth = data[8];
            color_type = data[9];
            const int interlace = data[12];
            if (width == 0 || height == 0) malformed("png", pos, "zero dimensions");
            if (bit_depth != 8)
                malformed("png", pos, "unsupported bit depth " + std::to_string(bit_depth));
            if (color_type == 3) malformed("png", pos, "palette images not supported");
            if (color_type != 0 && color_type != 2 && color_type != 6)
                malformed("png", pos, "unsupported color type " + std::to_string(color_type));
            if (interlace != 0) malformed("png", pos, "interlaced images not supported");
            channels = color_type == 0 ? 1 : color_type == 2 ? 3 : 4;
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!saw_ihdr) malformed("png", pos, "IDAT before IHDR");
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        // Ancillary chunks are skipped; CRCs are not verified.
        pos += 12 + len;
    }
    if (!saw_ihdr) malformed("png", pos, "missing IHDR");
    if (idat.empty()) malformed("png", pos, "missing IDAT");

    const std::vector<uint8_t> raw = zlib_inflate(idat);
    const size_t stride = size_t(width) * size_t(channels);
    if (raw.size() != (stride + 1) * height)
        malformed("png", pos, "decompressed size mismatch: got " + std::to_string(raw.size()) +
                                  ", want " + std::to_string((stride + 1) * height));

    std::vector<uint8_t> recon(stride * height);
    const int bpp = channels;
    for (uint32_t y = 0; y < height; ++y) {
        const uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = &raw[(stride + 1) * y + 1];
        uint8_t* dst = &recon[stride * y];
        const uint8_t* up = y ? &recon[stride * (y - 1)] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int left = i >= size_t(bpp) ? dst[i - size_t(bpp)] : 0;
            const int above = up ? up[i] : 0;
            const int corner = (up && i >= size_t(bpp)) ? up[i - size_t(bpp)] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, corner); break;
                default: malformed("png", (stride + 1) * y, "bad filter type");
            }
            dst[i] = uint8_t(v);
        }
    }

    ImageU8 img;
    img.width = int(width);
    img.height = int(height);
    img.rgb.resize(size_t(width) * size_t(height) * 3);
    for (size_t p = 0; p < size_t(width) * size_t(height); ++p) {
        const uint8_t* s = &recon[p * size_t(channels)];
        uint8_t* d = &img.rgb[p * 3];
        if (channels == 1) d[0] = d[1] = d[2] = s[0];
        else { d[0] = s[0]; d[1] = s[1]; d[2] = s[2]; }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Container sniffing and tensor conversion
// ---------------------------------------------------------------------------

ImageU8 decode_image_bytes(std::span<const uint8_t> bytes) {
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    if (bytes.size() >= 4 && bytes[0] == 0x89 && bytes[1] == 'P') return decode_png(bytes);
    malformed("image", 0, "unrecognized container (supported: PPM P6, PNG)");
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t = zeros({img.height, img.width, 3});
    float* p = t.mut();
    for (size_t i = 0; i < img.rgb.size(); ++i) p[i] = float(img.rgb[i]) / 255.0f;
    return t;
}

Tensor decode_image(std::span<const uint8_t> bytes) {
    return image_to_tensor(decode_image_bytes(bytes));
}

ImageU8 tensor_to_image(const Tensor& t) {
    if (t.rank() != 3 || t.shape[2] != 3)
        throw ShapeError("tensor_to_image: need (H,W,3), got " + shape_str(t.shape));
    ImageU8 img;
    img.height = int(t.shape[0]);
    img.width = int(t.shape[1]);
    img.rgb.resize(size_t(t.size()));
    const float* p = t.ptr();
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        const float v = std::min(std::max(p[i], 0.0f), 1.0f);
        img.rgb[i] = uint8_t(std::lround(v * 255.0f));
    }
    return img;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (img.rank() != 3 || img.shape[2] != 3)
        throw ShapeError("resize_bilinear: need (H,W,3), got " + shape_str(img.shape));
    if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output extents must be >= 1");
    const int64_t H = img.shape[0], W = img.shape[1];
    Tensor out = zeros({out_h, out_w, 3});
    const float* src = img.ptr();
    float* dst = out.mut();
    const double sy = double(H) / out_h;
    const double sx = double(W) / out_w;
    for (int64_t y = 0; y < out_h; ++y) {
        const double fy = (double(y) + 0.5) * sy - 0.5;
        int64_t y0 = int64_t(std::floor(fy));
        const float wy = float(fy - double(y0));
        int64_t y1 = std::min(y0 + 1, H - 1);
        y0 = std::max<int64_t>(y0, 0);
        for (int64_t x = 0; x < out_w; ++x) {
            const double fx = (double(x) + 0.5) * sx - 0.5;
            int64_t x0 = int64_t(std::floor(fx));
            const float wx = float(fx - double(x0));
            int64_t x1 = std::min(x0 + 1, W - 1);
            x0 = std::max<int64_t>(x0, 0);
            for (int64_t c = 0; c < 3; ++c) {
                const float v00 = src[(y0 * W + x0) * 3 + c];
                const float v01 = src[(y0 * W + x1) * 3 + c];
                const float v10 = src[(y1 * W + x0) * 3 + c];
                const float v11 = src[(y1 * W + x1) * 3 + c];
                const float top = v00 + wx * (v01 - v00);
                const float bot = v10 + wx * (v11 - v10);
                dst[(y * out_w + x) * 3 + c] = top + wy * (bot - top);
            }
        }
    }
    return out;
}

}  // namespace ttml
