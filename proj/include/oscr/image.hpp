#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace oscr {

/// Row-major image plane, rows = height, cols = width.
template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Plane<bool>;
using DepthMap = Plane<double>;
using GrayImage = Plane<std::uint8_t>;

struct RgbImage {
    std::array<Plane<double>, 3> channels;

    RgbImage() = default;
    RgbImage(int height, int width, Eigen::Vector3d const& fill) {
        for (int c = 0; c < 3; ++c) {
            channels[c] = Plane<double>::Constant(height, width, fill[c]);
        }
    }

    int height() const { return static_cast<int>(channels[0].rows()); }
    int width() const { return static_cast<int>(channels[0].cols()); }

    Eigen::Vector3d at(int row, int col) const {
        return {channels[0](row, col), channels[1](row, col), channels[2](row, col)};
    }
    void set(int row, int col, Eigen::Vector3d const& v) {
        for (int c = 0; c < 3; ++c) channels[c](row, col) = v[c];
    }
};

/// Pixel-space axis-aligned bounds, inclusive of both ends.
struct PixelBounds {
    int min_x = 0, min_y = 0, max_x = -1, max_y = -1;

    bool empty() const { return max_x < min_x || max_y < min_y; }
    int width() const { return empty() ? 0 : max_x - min_x + 1; }
    int height() const { return empty() ? 0 : max_y - min_y + 1; }
    int largest_side() const { return std::max(width(), height()); }
};

PixelBounds mask_bounds(Mask const& mask);

/// [0,1] value to an 8-bit level, rounding to nearest.
std::uint8_t to_u8(double v);

// Encoders ---------------------------------------------------------------------

std::vector<std::uint8_t> encode_png(RgbImage const& image);
std::vector<std::uint8_t> encode_png(GrayImage const& image);
/// Binary mask as 8-bit grayscale, 0 / 255.
std::vector<std::uint8_t> encode_mask_png(Mask const& mask);

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};
DecodedPng decode_png(std::vector<std::uint8_t> const& bytes);

/// Little-endian 32-bit PFM ("Pf", scale -1), rows stored bottom to top.
/// Non-finite depths are written as 0.
std::vector<std::uint8_t> encode_pfm(DepthMap const& depth);
DepthMap decode_pfm(std::vector<std::uint8_t> const& bytes);

std::string base64_encode(std::vector<std::uint8_t> const& bytes);
std::vector<std::uint8_t> base64_decode(std::string const& text);

}  // namespace oscr
