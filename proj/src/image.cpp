#include "oscr/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <zlib.h>

#include "oscr/error.hpp"

namespace oscr {

PixelBounds mask_bounds(Mask const& mask) {
    PixelBounds b{static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), -1, -1};
    for (Eigen::Index y = 0; y < mask.rows(); ++y) {
        for (Eigen::Index x = 0; x < mask.cols(); ++x) {
            if (!mask(y, x)) continue;
            b.min_x = std::min(b.min_x, static_cast<int>(x));
            b.max_x = std::max(b.max_x, static_cast<int>(x));
            b.min_y = std::min(b.min_y, static_cast<int>(y));
            b.max_y = std::max(b.max_y, static_cast<int>(y));
        }
    }
    return b;
}

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 3; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32_be(std::uint8_t const* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_chunk(std::vector<std::uint8_t>& out, char const* type,
               std::vector<std::uint8_t> const& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::size_t const type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(data.size() + 4));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

// Every row uses filter type 0, zlib level 6: output depends only on pixels.
std::vector<std::uint8_t> encode_png_raw(int width, int height, int channels,
                                         std::vector<std::uint8_t> const& pixels) {
    std::size_t const stride = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + y * stride,
                   pixels.begin() + (y + 1) * stride);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw Error(Errc::Io, "png: zlib compression failed");
    }
    packed.resize(packed_size);

    std::vector<std::uint8_t> out(std::begin(kPngSignature), std::end(kPngSignature));
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                       // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);   // color type
    ihdr.push_back(0);                       // compression
    ihdr.push_back(0);                       // filter method
    ihdr.push_back(0);                       // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

std::uint8_t paeth(int a, int b, int c) {
    int const p = a + b - c;
    int const pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

}  // namespace

std::vector<std::uint8_t> encode_png(RgbImage const& image) {
    int const w = image.width(), h = image.height();
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    to_u8(image.channels[c](y, x));
            }
        }
    }
    return encode_png_raw(w, h, 3, pixels);
}

std::vector<std::uint8_t> encode_png(GrayImage const& image) {
    std::vector<std::uint8_t> pixels(image.data(), image.data() + image.size());
    return encode_png_raw(static_cast<int>(image.cols()),
                          static_cast<int>(image.rows()), 1, pixels);
}

std::vector<std::uint8_t> encode_mask_png(Mask const& mask) {
    GrayImage g = mask.select(GrayImage::Constant(mask.rows(), mask.cols(), 255),
                              GrayImage::Zero(mask.rows(), mask.cols()));
    return encode_png(g);
}

DecodedPng decode_png(std::vector<std::uint8_t> const& bytes) {
    if (bytes.size() < 8 || !std::equal(std::begin(kPngSignature),
                                        std::end(kPngSignature), bytes.begin())) {
        throw Error(Errc::ParseError, "not a PNG stream");
    }
    DecodedPng out;
    std::vector<std::uint8_t> packed;
    std::size_t p = 8;
    while (p + 12 <= bytes.size()) {
        std::uint32_t const len = get_u32_be(&bytes[p]);
        std::string const type(bytes.begin() + p + 4, bytes.begin() + p + 8);
        if (p + 12 + len > bytes.size()) throw Error(Errc::ParseError, "truncated PNG chunk");
        std::uint8_t const* data = &bytes[p + 8];
        if (type == "IHDR") {
            out.width = static_cast<int>(get_u32_be(data));
            out.height = static_cast<int>(get_u32_be(data + 4));
            if (data[8] != 8 || (data[9] != 0 && data[9] != 2) || data[12] != 0) {
                throw Error(Errc::ParseError, "only 8-bit non-interlaced gray/RGB PNGs are supported");
            }
            out.channels = data[9] == 2 ? 3 : 1;
        } else if (type == "IDAT") {
            packed.insert(packed.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        p += 12 + len;
    }
    std::size_t const stride = static_cast<std::size_t>(out.width) * out.channels;
    std::vector<std::uint8_t> raw((stride + 1) * out.height);
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (out.channels == 0 ||
        uncompress(raw.data(), &raw_size, packed.data(), static_cast<uLong>(packed.size())) != Z_OK ||
        raw_size != raw.size()) {
        throw Error(Errc::ParseError, "corrupt PNG image data");
    }
    out.pixels.resize(stride * out.height);
    int const bpp = out.channels;
    for (int y = 0; y < out.height; ++y) {
        std::uint8_t const filter = raw[y * (stride + 1)];
        std::uint8_t const* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* row = &out.pixels[y * stride];
        std::uint8_t const* prev = y > 0 ? &out.pixels[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            int const a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
            int const b = prev ? prev[i] : 0;
            int const c = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - bpp] : 0;
            int pred = 0;
            switch (filter) {
                case 0: pred = 0; break;
                case 1: pred = a; break;
                case 2: pred = b; break;
                case 3: pred = (a + b) / 2; break;
                case 4: pred = paeth(a, b, c); break;
                default: throw Error(Errc::ParseError, "bad PNG filter type");
            }
            row[i] = static_cast<std::uint8_t>(src[i] + pred);
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_pfm(DepthMap const& depth) {
    std::string header = "Pf\n" + std::to_string(depth.cols()) + " " +
                         std::to_string(depth.rows()) + "\n-1.0\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + depth.size() * 4);
    for (Eigen::Index y = depth.rows() - 1; y >= 0; --y) {
        for (Eigen::Index x = 0; x < depth.cols(); ++x) {
            double const d = depth(y, x);
            float const f = std::isfinite(d) ? static_cast<float>(d) : 0.0f;
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
        }
    }
    return out;
}

DepthMap decode_pfm(std::vector<std::uint8_t> const& bytes) {
    std::string const head(bytes.begin(),
                           bytes.begin() + std::min<std::size_t>(bytes.size(), 64));
    std::istringstream in(head);
    std::string magic;
    long w = 0, h = 0;
    double scale = 0;
    in >> magic >> w >> h >> scale;
    if (magic != "Pf" || w <= 0 || h <= 0 || scale >= 0) {
        throw Error(Errc::ParseError, "unsupported PFM header");
    }
    in.get();
    auto const offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() != offset + static_cast<std::size_t>(w * h * 4)) {
        throw Error(Errc::ParseError, "PFM payload size mismatch");
    }
    DepthMap depth(h, w);
    std::size_t p = offset;
    for (long y = h - 1; y >= 0; --y) {
        for (long x = 0; x < w; ++x, p += 4) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= std::uint32_t(bytes[p + k]) << (8 * k);
            float f;
            std::memcpy(&f, &bits, 4);
            depth(y, x) = f;
        }
    }
    return depth;
}

namespace {
constexpr char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::vector<std::uint8_t> const& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        std::uint32_t const v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
    }
    if (i + 1 == bytes.size()) {
        std::uint32_t const v = bytes[i] << 16;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        std::uint32_t const v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string const& text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=') break;
        int const v = value(c);
        if (v < 0) throw Error(Errc::ParseError, "invalid base64 character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

}  // namespace oscr
