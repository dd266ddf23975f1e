#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "oscr/image.hpp"
#include "oscr/json_io.hpp"
#include "oscr/scene.hpp"

namespace oscr {

inline constexpr int kDefaultPatchPx = 16;

/// Token sequence [p | x_t | z | v...]. x_t and z share one rows x cols grid.
struct TokenLayout {
    int n_prompt = 0;
    int rows = 0;
    int cols = 0;
    int patch_px = kDefaultPatchPx;
    std::vector<int> appearance;  // sizes of the appended v segments

    static TokenLayout for_image(int n_prompt, ImageSize image, int patch_px = kDefaultPatchPx);

    int n_spatial() const { return rows * cols; }
    int n_appearance() const;
    int total() const { return n_prompt + 2 * n_spatial() + n_appearance(); }

    int x_begin() const { return n_prompt; }
    int z_begin() const { return n_prompt + n_spatial(); }
    int v_begin(std::size_t segment = 0) const;

    bool operator==(TokenLayout const&) const = default;
};

/// rows x cols grid of spatial tokens covered by one box.
using TokenMask = Plane<bool>;

/// A token is set iff any pixel of its patch is set. Throws
/// DimensionMismatch when the image is not a whole number of patches.
TokenMask token_mask_from_pixels(Mask const& pixels, int patch_px = kDefaultPatchPx);

struct AttentionMask {
    TokenLayout layout;
    std::vector<TokenMask> token_masks;  // one per box
    std::vector<NounSpan> noun_spans;
    std::vector<int> appearance_box;     // box index bound to each v segment
    Plane<bool> allowed;                 // query rows x key cols, true = attend

    bool operator==(AttentionMask const& o) const {
        return layout == o.layout && noun_spans == o.noun_spans &&
               appearance_box == o.appearance_box && allowed.cols() == o.allowed.cols() &&
               allowed.rows() == o.allowed.rows() && (allowed == o.allowed).all();
    }
};

/// Throws SpanOverlap, MissingMask, or DimensionMismatch.
AttentionMask build_attention_mask(TokenLayout const& layout,
                                   std::vector<TokenMask> const& token_masks,
                                   std::vector<NounSpan> const& noun_spans);

/// Appends a v segment of n_appearance tokens bound to box `box_index`.
/// Throws NoAppearanceTokens when n_appearance <= 0.
AttentionMask build_personalization_mask(AttentionMask const& base, int box_index,
                                         int n_appearance);

/// Convenience: token masks from the rendered amodal masks, spans from the
/// layout (both in ascending box-id order).
AttentionMask build_attention_mask(SceneLayout const& layout,
                                   std::vector<Mask> const& amodal_masks,
                                   int patch_px = kDefaultPatchPx);

/// "OSM1", uint16 LE rows, uint16 LE cols, then row-major bits, LSB first
/// within each byte, no row padding.
std::vector<std::uint8_t> encode_mask_bits(Plane<bool> const& m);
Plane<bool> decode_mask_bits(std::vector<std::uint8_t> const& bytes);

void export_mask(AttentionMask const& mask, std::filesystem::path const& path);
Plane<bool> import_mask(std::filesystem::path const& path);

/// Allowed-entry counts per (query sector, key sector); sectors p, x_t, z, v.
Json summarize_mask(AttentionMask const& mask);

}  // namespace oscr
