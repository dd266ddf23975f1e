#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oscr/image.hpp"
#include "oscr/scene.hpp"

namespace oscr {

struct RenderOptions {
    FaceColorMap colors = default_face_colors();
    double alpha = 0.5;
    Eigen::Vector3d background = Eigen::Vector3d::Ones();
    /// Rasterize only camera-facing faces (at most three per box).
    bool backface_culling = true;
};

struct RenderMeta {
    FaceColorMap colors;
    double alpha = 0.5;
    Eigen::Vector3d background = Eigen::Vector3d::Ones();
    bool backface_culling = true;
    CameraSpec camera;
    double near_plane = kNearPlane;
    /// Set when no box produced a single fragment.
    bool empty_render = false;
};

/// One surface sample of a box face at a pixel center.
struct Fragment {
    std::int32_t pixel;  // row * width + col
    double depth;        // camera-space z, > near plane
    std::int32_t box_id;
    FaceKey face;
};

/// Back-to-front compositing order: farther first; equal depths by ascending
/// box id, then face key.
inline bool composite_before(Fragment const& a, Fragment const& b) {
    if (a.depth != b.depth) return a.depth > b.depth;
    if (a.box_id != b.box_id) return a.box_id < b.box_id;
    return a.face < b.face;
}

/// All fragments of a layout, grouped by pixel and sorted back-to-front
/// within each pixel. Pixel p owns fragments [offsets[p], offsets[p+1]).
struct FragmentBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> offsets;
    std::vector<Fragment> fragments;

    std::span<Fragment const> at(int pixel) const {
        return {fragments.data() + offsets[pixel],
                fragments.data() + offsets[pixel + 1]};
    }
};

/// Rasterizes every box (camera-facing faces only when culling) with a
/// top-left fill rule at pixel centers. Faces crossing the near plane are
/// clipped. Depths come from an exact ray/face-plane intersection, so the
/// result does not depend on box order.
FragmentBuffer rasterize(SceneLayout const& layout, bool backface_culling = true);

struct RenderOutput {
    RgbImage oscr;
    std::vector<int> box_ids;         // ascending; indexes the mask vectors
    std::vector<Mask> amodal_masks;   // full silhouette, ignoring other boxes
    std::vector<Mask> visible_masks;  // pixels where the box owns the nearest fragment
    DepthMap depth;                   // nearest fragment depth, +inf where empty
    RenderMeta meta;

    bool empty_render() const { return meta.empty_render; }
    /// Index into the mask vectors; -1 if absent.
    int index_of(int box_id) const;
};

/// Translucent face-colored box render plus masks and depth.
/// Requires a valid layout and 0 < alpha < 1.
RenderOutput render_oscr(SceneLayout const& layout, RenderOptions const& options = {});
RenderOutput render_oscr(SceneLayout const& layout, FaceColorMap const& colors,
                         double alpha);

/// Sequential alpha-over of `colors` (back-to-front) onto `background`.
Eigen::Vector3d composite_over(std::span<Eigen::Vector3d const> back_to_front,
                               double alpha, Eigen::Vector3d const& background);

struct LayoutDepth {
    Plane<double> image;  // [0,1], nearer = smaller, empty pixels = 1
    double min_depth = 0;
    double max_depth = 0;
    bool empty_render = false;
};

/// Opaque nearest-surface depth map, min-max normalized over covered pixels.
LayoutDepth render_layout_depth(SceneLayout const& layout);

struct Layer {
    int box_id;
    double center_distance;  // meters from the camera position
    Mask mask;               // amodal silhouette
};

/// Flat 2D layer stack, nearest box center first, ties by box id.
std::vector<Layer> render_layer_map(SceneLayout const& layout);

/// Visible area over amodal area, in pixels. Throws OffscreenBox when the box
/// has no amodal pixels (or is unknown).
double visibility_ratio(RenderOutput const& output, int box_id);

struct MaskOverlap {
    int box_a;
    int box_b;
    long pixels;
    PixelBounds bounds;
};

/// Pairwise amodal-mask intersections with at least one pixel.
std::vector<MaskOverlap> amodal_overlaps(RenderOutput const& output);

}  // namespace oscr
