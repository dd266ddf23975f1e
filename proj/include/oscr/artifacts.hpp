#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oscr/json_io.hpp"
#include "oscr/render.hpp"

namespace oscr {

/// Render metadata sidecar: colors, alpha, background, camera, flags.
Json to_json(RenderMeta const& meta);

/// Sidecar describing the PFM depth encoding.
Json depth_sidecar_json();

/// Pairwise amodal intersections as JSON (ids, pixel count, bounds).
Json overlaps_json(RenderOutput const& out);

/// Per-box mask statistics (amodal/visible pixel counts, visibility).
Json mask_stats_json(RenderOutput const& out);

struct EncodedRender {
    std::vector<std::uint8_t> oscr_png;
    std::vector<int> box_ids;
    std::vector<std::vector<std::uint8_t>> amodal_png;
    std::vector<std::vector<std::uint8_t>> visible_png;
    std::vector<std::uint8_t> depth_pfm;
    Json meta;
};

/// Byte encodings shared by every output surface (files, HTTP).
EncodedRender encode_render(RenderOutput const& out);

/// Writes oscr.png, amodal_<id>.png, visible_<id>.png, depth.pfm,
/// depth.json and meta.json into `dir` (created if needed).
void write_render_artifacts(RenderOutput const& out, std::filesystem::path const& dir);

/// Normalized layout depth as an 8-bit grayscale PNG (0 near, 255 far/empty).
std::vector<std::uint8_t> encode_layout_depth_png(LayoutDepth const& depth);

}  // namespace oscr
