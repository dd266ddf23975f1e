#include "oscr/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oscr {

namespace {

using Vec2d = Eigen::Vector2d;
using Vec3d = Eigen::Vector3d;

bool lex_less(Vec3d const& a, Vec3d const& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
}

bool lex_less(Vec2d const& a, Vec2d const& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    return a.y() < b.y();
}

// Intersection of segment ab with the near plane. Endpoints are taken in a
// canonical order so faces sharing the edge get identical bits.
Vec3d near_intersection(Vec3d a, Vec3d b) {
    if (lex_less(b, a)) std::swap(a, b);
    double const t = (kNearPlane - a.z()) / (b.z() - a.z());
    Vec3d p = a + t * (b - a);
    p.z() = kNearPlane;
    return p;
}

std::vector<Vec3d> clip_near(std::vector<Vec3d> const& poly) {
    std::vector<Vec3d> out;
    std::size_t const n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec3d const& cur = poly[i];
        Vec3d const& next = poly[(i + 1) % n];
        bool const cur_in = cur.z() >= kNearPlane;
        bool const next_in = next.z() >= kNearPlane;
        if (cur_in) out.push_back(cur);
        if (cur_in != next_in) out.push_back(near_intersection(cur, next));
    }
    return out;
}

// Edge function with exact antisymmetry: E(a,b,p) == -E(b,a,p) bitwise.
double edge_function(Vec2d const& a, Vec2d const& b, double px, double py) {
    if (lex_less(b, a)) {
        return -((a.x() - b.x()) * (py - b.y()) - (a.y() - b.y()) * (px - b.x()));
    }
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

struct FaceRaster {
    std::vector<Vec2d> poly;  // screen space, positive signed area
    Vec3d normal_cam;
    double plane_offset;      // normal_cam . point_on_plane
};

void rasterize_face(FaceRaster const& face, CameraPose<double> const& pose,
                    int box_id, FaceKey key, std::vector<Fragment>& out) {
    int const w = pose.image_size.width, h = pose.image_size.height;
    double min_u = face.poly[0].x(), max_u = min_u;
    double min_v = face.poly[0].y(), max_v = min_v;
    for (auto const& p : face.poly) {
        min_u = std::min(min_u, p.x());
        max_u = std::max(max_u, p.x());
        min_v = std::min(min_v, p.y());
        max_v = std::max(max_v, p.y());
    }
    // pixel x covers center x + 0.5
    int const x0 = std::max(0, static_cast<int>(std::ceil(std::max(min_u - 0.5, -1.0))));
    int const x1 = std::min(w - 1, static_cast<int>(std::floor(std::min(max_u - 0.5, double(w)))));
    int const y0 = std::max(0, static_cast<int>(std::ceil(std::max(min_v - 0.5, -1.0))));
    int const y1 = std::min(h - 1, static_cast<int>(std::floor(std::min(max_v - 0.5, double(h)))));
    if (x0 > x1 || y0 > y1) return;

    std::size_t const n = face.poly.size();
    struct EdgeInfo {
        Vec2d a, b;
        bool inclusive;  // top or left edge under the top-left rule
    };
    std::vector<EdgeInfo> edges(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2d const& a = face.poly[i];
        Vec2d const& b = face.poly[(i + 1) % n];
        double const dx = b.x() - a.x(), dy = b.y() - a.y();
        edges[i] = {a, b, (dy == 0.0 && dx > 0.0) || dy < 0.0};
    }

    double const f = pose.focal_px;
    for (int y = y0; y <= y1; ++y) {
        double const py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            double const px = x + 0.5;
            bool inside = true;
            for (auto const& e : edges) {
                double const ef = edge_function(e.a, e.b, px, py);
                if (ef < 0.0 || (ef == 0.0 && !e.inclusive)) {
                    inside = false;
                    break;
                }
            }
            if (!inside) continue;
            Vec3d const ray((px - pose.principal.x()) / f,
                            (py - pose.principal.y()) / f, 1.0);
            double const depth = face.plane_offset / face.normal_cam.dot(ray);
            if (!std::isfinite(depth) || !(depth > kNearPlane)) continue;
            out.push_back({y * w + x, depth, box_id, key});
        }
    }
}

void rasterize_box(OrientedBox const& box, CameraPose<double> const& pose,
                   bool culling, std::vector<Fragment>& out) {
    double const yaw = normalize_yaw(box.yaw);
    Mat3<double> const rot = yaw_rotation(yaw);
    auto const corners = box_corners(box);
    std::array<Vec3d, 8> cam;
    for (int k = 0; k < 8; ++k) cam[k] = pose.to_camera(corners.col(k));

    for (FaceKey key : kAllFaces) {
        Vec3d const n_local = local_normal(key);
        Vec3d const n_world = rot * n_local;
        Vec3d const face_center =
            box.center + rot * (n_local.cwiseProduct(box.dims) / 2.0);
        if (culling && !(n_world.dot(pose.position - face_center) > 0.0)) continue;

        auto const& idx = kFaceCorners[static_cast<std::size_t>(key)];
        std::vector<Vec3d> poly3;
        poly3.reserve(4);
        for (int k : idx) poly3.push_back(cam[k]);
        poly3 = clip_near(poly3);
        if (poly3.size() < 3) continue;

        FaceRaster face;
        face.normal_cam = pose.world_to_camera * n_world;
        face.plane_offset = face.normal_cam.dot(cam[idx[0]]);
        face.poly.reserve(poly3.size());
        for (auto const& p : poly3) {
            face.poly.push_back(pose.principal +
                                pose.focal_px * p.head<2>() / p.z());
        }
        // zero-length edges would reject every pixel on their line
        face.poly.erase(std::unique(face.poly.begin(), face.poly.end()),
                        face.poly.end());
        while (face.poly.size() > 1 && face.poly.front() == face.poly.back()) {
            face.poly.pop_back();
        }
        if (face.poly.size() < 3) continue;
        double area = 0.0;
        for (std::size_t i = 0; i < face.poly.size(); ++i) {
            auto const& a = face.poly[i];
            auto const& b = face.poly[(i + 1) % face.poly.size()];
            area += a.x() * b.y() - b.x() * a.y();
        }
        if (area == 0.0 || !std::isfinite(area)) continue;
        if (area < 0.0) std::reverse(face.poly.begin(), face.poly.end());
        rasterize_face(face, pose, box.id, key, out);
    }
}

}  // namespace

FragmentBuffer rasterize(SceneLayout const& layout, bool backface_culling) {
    auto const pose = camera_pose(layout.camera);
    FragmentBuffer buf;
    buf.width = layout.camera.image_size.width;
    buf.height = layout.camera.image_size.height;
    std::size_t const n_pixels = static_cast<std::size_t>(buf.width) * buf.height;

    std::vector<Fragment> raw;
    for (auto const& box : layout.boxes) {
        rasterize_box(box, pose, backface_culling, raw);
    }

    // counting sort by pixel, then back-to-front within each pixel
    buf.offsets.assign(n_pixels + 1, 0);
    for (auto const& f : raw) ++buf.offsets[f.pixel + 1];
    for (std::size_t p = 0; p < n_pixels; ++p) buf.offsets[p + 1] += buf.offsets[p];
    buf.fragments.resize(raw.size());
    std::vector<std::int32_t> cursor(buf.offsets.begin(), buf.offsets.end() - 1);
    for (auto const& f : raw) buf.fragments[cursor[f.pixel]++] = f;
    for (std::size_t p = 0; p < n_pixels; ++p) {
        auto first = buf.fragments.begin() + buf.offsets[p];
        auto last = buf.fragments.begin() + buf.offsets[p + 1];
        if (last - first > 1) std::sort(first, last, composite_before);
    }
    return buf;
}

int RenderOutput::index_of(int box_id) const {
    auto it = std::lower_bound(box_ids.begin(), box_ids.end(), box_id);
    if (it == box_ids.end() || *it != box_id) return -1;
    return static_cast<int>(it - box_ids.begin());
}

Eigen::Vector3d composite_over(std::span<Eigen::Vector3d const> back_to_front,
                               double alpha, Eigen::Vector3d const& background) {
    Eigen::Vector3d acc = background;
    for (auto const& c : back_to_front) acc = alpha * c + (1.0 - alpha) * acc;
    return acc;
}

RenderOutput render_oscr(SceneLayout const& layout, RenderOptions const& options) {
    require_valid(layout);
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw Error(Errc::ValidationFailed, "alpha must lie in (0, 1)");
    }
    validate_face_colors(options.colors);

    FragmentBuffer const buf = rasterize(layout, options.backface_culling);
    int const w = buf.width, h = buf.height;

    RenderOutput out;
    out.meta.colors = options.colors;
    out.meta.alpha = options.alpha;
    out.meta.background = options.background;
    out.meta.backface_culling = options.backface_culling;
    out.meta.camera = layout.camera;
    out.meta.empty_render = buf.fragments.empty();

    for (auto const& b : layout.boxes) out.box_ids.push_back(b.id);
    std::sort(out.box_ids.begin(), out.box_ids.end());
    out.amodal_masks.assign(out.box_ids.size(), Mask::Constant(h, w, false));
    out.visible_masks.assign(out.box_ids.size(), Mask::Constant(h, w, false));
    out.depth = DepthMap::Constant(h, w, std::numeric_limits<double>::infinity());
    out.oscr = RgbImage(h, w, options.background);

    double const a = options.alpha;
    for (int p = 0; p < w * h; ++p) {
        auto const frags = buf.at(p);
        if (frags.empty()) continue;
        int const row = p / w, col = p % w;
        Vec3d acc = options.background;
        for (auto const& f : frags) {
            acc = a * options.colors[f.face] + (1.0 - a) * acc;
            out.amodal_masks[out.index_of(f.box_id)](row, col) = true;
        }
        Fragment const& nearest = frags.back();
        out.visible_masks[out.index_of(nearest.box_id)](row, col) = true;
        out.depth(row, col) = nearest.depth;
        out.oscr.set(row, col, acc);
    }
    return out;
}

RenderOutput render_oscr(SceneLayout const& layout, FaceColorMap const& colors,
                         double alpha) {
    RenderOptions opts;
    opts.colors = colors;
    opts.alpha = alpha;
    return render_oscr(layout, opts);
}

LayoutDepth render_layout_depth(SceneLayout const& layout) {
    require_valid(layout);
    FragmentBuffer const buf = rasterize(layout, true);
    int const w = buf.width, h = buf.height;
    LayoutDepth out;
    out.image = Plane<double>::Ones(h, w);
    out.empty_render = buf.fragments.empty();
    if (out.empty_render) return out;

    DepthMap nearest = DepthMap::Constant(h, w, std::numeric_limits<double>::infinity());
    out.min_depth = std::numeric_limits<double>::infinity();
    out.max_depth = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < w * h; ++p) {
        auto const frags = buf.at(p);
        if (frags.empty()) continue;
        double const d = frags.back().depth;
        nearest(p / w, p % w) = d;
        out.min_depth = std::min(out.min_depth, d);
        out.max_depth = std::max(out.max_depth, d);
    }
    double const range = out.max_depth - out.min_depth;
    for (int p = 0; p < w * h; ++p) {
        double const d = nearest(p / w, p % w);
        if (!std::isfinite(d)) continue;
        out.image(p / w, p % w) = range > 0 ? (d - out.min_depth) / range : 0.0;
    }
    return out;
}

std::vector<Layer> render_layer_map(SceneLayout const& layout) {
    require_valid(layout);
    FragmentBuffer const buf = rasterize(layout, true);
    int const w = buf.width, h = buf.height;
    auto const pose = camera_pose(layout.camera);

    std::vector<Layer> layers;
    for (auto const& b : layout.boxes) {
        layers.push_back({b.id, (b.center - pose.position).norm(),
                          Mask::Constant(h, w, false)});
    }
    std::sort(layers.begin(), layers.end(), [](Layer const& a, Layer const& b) {
        if (a.center_distance != b.center_distance) {
            return a.center_distance < b.center_distance;
        }
        return a.box_id < b.box_id;
    });
    for (auto const& f : buf.fragments) {
        auto it = std::find_if(layers.begin(), layers.end(),
                               [&](Layer const& l) { return l.box_id == f.box_id; });
        it->mask(f.pixel / w, f.pixel % w) = true;
    }
    return layers;
}

double visibility_ratio(RenderOutput const& output, int box_id) {
    int const i = output.index_of(box_id);
    if (i < 0) {
        throw Error(Errc::OffscreenBox, "unknown box id " + std::to_string(box_id));
    }
    auto const amodal = output.amodal_masks[i].count();
    if (amodal == 0) {
        throw Error(Errc::OffscreenBox,
                    "box " + std::to_string(box_id) + " has no pixels in frame");
    }
    return static_cast<double>(output.visible_masks[i].count()) /
           static_cast<double>(amodal);
}

std::vector<MaskOverlap> amodal_overlaps(RenderOutput const& output) {
    std::vector<MaskOverlap> out;
    for (std::size_t i = 0; i < output.box_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < output.box_ids.size(); ++j) {
            Mask const both = output.amodal_masks[i] && output.amodal_masks[j];
            long const n = both.count();
            if (n == 0) continue;
            out.push_back({output.box_ids[i], output.box_ids[j], n, mask_bounds(both)});
        }
    }
    return out;
}

}  // namespace oscr
