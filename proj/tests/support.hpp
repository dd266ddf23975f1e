#pragma once

// Test-only helpers: layout builders, random scenes, a ray-casting oracle
// independent of the rasterizer, collision oracles and mask configurations.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "oscr/binding.hpp"
#include "oscr/render.hpp"
#include "oscr/scene.hpp"

namespace oscr::testing {

inline OrientedBox make_box(int id, Eigen::Vector3d center, Eigen::Vector3d dims,
                            double yaw = 0.0) {
    OrientedBox b;
    b.id = id;
    b.label = "box" + std::to_string(id);
    b.center = center;
    b.dims = dims;
    b.yaw = normalize_yaw(yaw);
    b.noun_span = {id * 2, id * 2 + 1};
    return b;
}

inline CameraSpec make_camera(double radius, double azimuth, double elevation,
                              int side = 256, double fov_deg = 50.0) {
    CameraSpec c;
    c.radius = radius;
    c.azimuth = azimuth;
    c.elevation = elevation;
    c.fov_deg = fov_deg;
    c.image_size = {side, side};
    return c;
}

/// Layout with a prompt long enough for every box's default noun span.
inline SceneLayout make_layout(std::vector<OrientedBox> boxes, CameraSpec cam) {
    SceneLayout l;
    l.boxes = std::move(boxes);
    l.camera = cam;
    int max_end = 1;
    for (auto const& b : l.boxes) max_end = std::max(max_end, b.noun_span.end);
    for (int i = 0; i < max_end; ++i) l.prompt += (i ? " w" : "w");
    return l;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random valid scene with 1..max_boxes floor boxes (may interpenetrate).
inline SceneLayout random_scene(std::mt19937_64& rng, int max_boxes = 4, int side = 128) {
    int const n = std::uniform_int_distribution<int>(1, max_boxes)(rng);
    std::vector<OrientedBox> boxes;
    for (int i = 0; i < n; ++i) {
        double const r = 3.0 * std::sqrt(uniform(rng, 0, 1));
        double const th = uniform(rng, 0, 2 * std::numbers::pi);
        Eigen::Vector3d dims(uniform(rng, 0.4, 2.5), uniform(rng, 0.4, 2.5),
                             uniform(rng, 0.4, 2.5));
        boxes.push_back(make_box(i * 3 + 1,
                                 {r * std::cos(th), r * std::sin(th), dims.z() / 2},
                                 dims, uniform(rng, 0, 2 * std::numbers::pi)));
    }
    return make_layout(std::move(boxes),
                       make_camera(uniform(rng, 9, 14), uniform(rng, 0, 2 * std::numbers::pi),
                                   uniform(rng, 0.05, 1.2), side));
}

struct RayHit {
    double depth;    // camera-space z of the entry point
    int box_id;
    FaceKey face;    // entry face
    double margin;   // distance of the entry point from the face boundary
};

/// Entry hits of the pixel-center ray through every box, sorted back to
/// front. Boxes grazed within `eps` are reported through `ambiguous`.
inline std::vector<RayHit> cast_pixel(SceneLayout const& layout, double px, double py,
                                      bool* ambiguous = nullptr, double eps = 1e-6) {
    auto const pose = camera_pose(layout.camera);
    Eigen::Vector3d const dir_cam((px - pose.principal.x()) / pose.focal_px,
                                  (py - pose.principal.y()) / pose.focal_px, 1.0);
    Eigen::Vector3d const dir = pose.world_to_camera.transpose() * dir_cam;
    std::vector<RayHit> hits;
    if (ambiguous) *ambiguous = false;
    for (auto const& b : layout.boxes) {
        Eigen::Matrix3d const rot = yaw_rotation(normalize_yaw(b.yaw));
        Eigen::Vector3d const o = rot.transpose() * (pose.position - b.center);
        Eigen::Vector3d const d = rot.transpose() * dir;
        Eigen::Vector3d const half = b.dims / 2;
        double tmin = -1e300, tmax = 1e300;
        int axis = -1;
        bool miss = false;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(d[a]) < 1e-15) {
                if (std::abs(o[a]) > half[a]) miss = true;
                continue;
            }
            double t1 = (-half[a] - o[a]) / d[a];
            double t2 = (half[a] - o[a]) / d[a];
            if (t1 > t2) std::swap(t1, t2);
            if (t1 > tmin) {
                tmin = t1;
                axis = a;
            }
            tmax = std::min(tmax, t2);
        }
        if (miss || axis < 0) continue;
        if (tmax - tmin < eps && tmax - tmin > -eps && ambiguous) *ambiguous = true;
        if (!(tmin < tmax) || tmin <= kNearPlane) continue;
        Eigen::Vector3d const p = o + tmin * d;
        double margin = 1e300;
        for (int a = 0; a < 3; ++a) {
            if (a != axis) margin = std::min(margin, half[a] - std::abs(p[a]));
        }
        margin = std::min(margin, tmax - tmin);
        if (margin < eps && ambiguous) *ambiguous = true;
        FaceKey face;
        bool const positive = d[axis] < 0;
        if (axis == 0) face = positive ? FaceKey::PosX : FaceKey::NegX;
        else if (axis == 1) face = positive ? FaceKey::PosY : FaceKey::NegY;
        else face = positive ? FaceKey::PosZ : FaceKey::NegZ;
        hits.push_back({tmin, b.id, face, margin});
    }
    std::sort(hits.begin(), hits.end(), [](RayHit const& a, RayHit const& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.box_id < b.box_id;
    });
    return hits;
}

/// Analytic pixel bounds of the 8 projected corners (all in front of the
/// camera), in continuous pixel coordinates.
struct AnalyticBounds {
    double min_x, min_y, max_x, max_y;
};

inline AnalyticBounds project_corners(OrientedBox const& box, CameraPose<double> const& pose) {
    auto const c = box_corners(box);
    AnalyticBounds b{1e300, 1e300, -1e300, -1e300};
    for (int k = 0; k < 8; ++k) {
        auto const p = project<double>(c.col(k), pose);
        b.min_x = std::min(b.min_x, p->pixel.x());
        b.max_x = std::max(b.max_x, p->pixel.x());
        b.min_y = std::min(b.min_y, p->pixel.y());
        b.max_y = std::max(b.max_y, p->pixel.y());
    }
    return b;
}

// Collision oracles ---------------------------------------------------------

inline bool inside(OrientedBox const& b, Eigen::Vector3d const& p) {
    Eigen::Vector3d const local = yaw_rotation(b.yaw).transpose() * (p - b.center);
    return (local.array().abs() < b.dims.array() / 2).all();
}

// Monte-Carlo collision oracle: sample the overlap of the two world AABBs.
inline bool monte_carlo_collides(OrientedBox const& a, OrientedBox const& b, int samples,
                                 std::mt19937_64& rng) {
    auto aabb = [](OrientedBox const& o) {
        auto const c = box_corners(o);
        return std::pair<Eigen::Vector3d, Eigen::Vector3d>{c.rowwise().minCoeff(),
                                                          c.rowwise().maxCoeff()};
    };
    auto const [alo, ahi] = aabb(a);
    auto const [blo, bhi] = aabb(b);
    Eigen::Vector3d const lo = alo.cwiseMax(blo), hi = ahi.cwiseMin(bhi);
    if ((lo.array() >= hi.array()).any()) return false;
    for (int i = 0; i < samples; ++i) {
        Eigen::Vector3d const p(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()),
                                uniform(rng, lo.z(), hi.z()));
        if (inside(a, p) && inside(b, p)) return true;
    }
    return false;
}

// Footprint intersection area by polygon clipping, used to locate the
// critical separation independently of the separating-axis code.
inline std::vector<Eigen::Vector2d> footprint(OrientedBox const& b) {
    auto const c = box_corners(b);
    return {c.col(0).head<2>(), c.col(1).head<2>(), c.col(3).head<2>(), c.col(2).head<2>()};
}

inline double signed_area(std::vector<Eigen::Vector2d> const& p) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto const& u = p[i];
        auto const& v = p[(i + 1) % p.size()];
        s += u.x() * v.y() - v.x() * u.y();
    }
    return s / 2;
}

inline double overlap_area(OrientedBox const& a, OrientedBox const& b) {
    auto poly = footprint(b);
    auto clip = footprint(a);
    if (signed_area(clip) < 0) std::reverse(clip.begin(), clip.end());
    for (std::size_t e = 0; e < clip.size() && !poly.empty(); ++e) {
        Eigen::Vector2d const p0 = clip[e], p1 = clip[(e + 1) % clip.size()];
        auto side = [&](Eigen::Vector2d const& q) {
            return (p1 - p0).x() * (q - p0).y() - (p1 - p0).y() * (q - p0).x();
        };
        std::vector<Eigen::Vector2d> out;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            Eigen::Vector2d const s = poly[i], t = poly[(i + 1) % poly.size()];
            double const ds = side(s), dt = side(t);
            if (ds >= 0) out.push_back(s);
            if ((ds >= 0) != (dt >= 0)) out.push_back(s + (t - s) * (ds / (ds - dt)));
        }
        poly = std::move(out);
    }
    return poly.size() < 3 ? 0.0 : std::abs(signed_area(poly));
}

// Separation along `dir` at which the footprints stop overlapping.
inline double critical_separation(OrientedBox a, OrientedBox b, Eigen::Vector2d const& dir) {
    double lo = 0, hi = 50;
    for (int it = 0; it < 80; ++it) {
        double const mid = (lo + hi) / 2;
        b.center.head<2>() = a.center.head<2>() + mid * dir;
        (overlap_area(a, b) > 1e-12 ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
}

inline OrientedBox floor_box(int id, Eigen::Vector2d c, Eigen::Vector3d dims, double yaw) {
    return make_box(id, {c.x(), c.y(), dims.z() / 2}, dims, yaw);
}

// Mask configurations -------------------------------------------------------

inline TokenLayout grid_layout(int n_prompt, int rows, int cols) {
    TokenLayout t;
    t.n_prompt = n_prompt;
    t.rows = rows;
    t.cols = cols;
    return t;
}

inline TokenMask random_token_mask(std::mt19937_64& rng, int rows, int cols, double p) {
    TokenMask m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, 0, 1) < p;
    return m;
}

struct MaskConfig {
    TokenLayout layout;
    std::vector<TokenMask> masks;
    std::vector<NounSpan> spans;
};

inline MaskConfig random_mask_config(std::mt19937_64& rng) {
    MaskConfig c;
    int const rows = std::uniform_int_distribution<int>(1, 6)(rng);
    int const cols = std::uniform_int_distribution<int>(1, 6)(rng);
    int const n_boxes = std::uniform_int_distribution<int>(1, 4)(rng);
    int cursor = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int i = 0; i < n_boxes; ++i) {
        int const len = std::uniform_int_distribution<int>(1, 3)(rng);
        c.spans.push_back({cursor, cursor + len});
        cursor += len + std::uniform_int_distribution<int>(0, 2)(rng);
        c.masks.push_back(random_token_mask(rng, rows, cols, uniform(rng, 0, 1)));
    }
    c.layout = grid_layout(cursor + std::uniform_int_distribution<int>(0, 3)(rng), rows, cols);
    return c;
}

}  // namespace oscr::testing
