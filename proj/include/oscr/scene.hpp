#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "oscr/error.hpp"

namespace oscr {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Points closer to the camera than this (meters, along the optical axis)
/// are not renderable.
inline constexpr double kNearPlane = 1e-3;

inline constexpr double kDefaultFovDeg = 50.0;
inline constexpr int kDefaultImageSide = 512;

// ---------------------------------------------------------------------------
// Faces
// ---------------------------------------------------------------------------

/// Box faces keyed by their outward normal in the box's local frame.
/// The numeric value doubles as the deterministic tie-break key.
enum class FaceKey : std::uint8_t { PosX = 0, NegX, PosY, NegY, PosZ, NegZ };

inline constexpr std::array<FaceKey, 6> kAllFaces = {
    FaceKey::PosX, FaceKey::NegX, FaceKey::PosY,
    FaceKey::NegY, FaceKey::PosZ, FaceKey::NegZ};

std::string_view to_string(FaceKey face) noexcept;
std::optional<FaceKey> face_from_string(std::string_view name) noexcept;

/// Corner indices of each face, counter-clockwise when seen from outside.
/// Corner k has local sign (+ if bit set) x: bit 0, y: bit 1, z: bit 2.
inline constexpr std::array<std::array<int, 4>, 6> kFaceCorners = {{
    {1, 3, 7, 5},  // +X
    {0, 4, 6, 2},  // -X
    {2, 6, 7, 3},  // +Y
    {0, 1, 5, 4},  // -Y
    {4, 5, 7, 6},  // +Z
    {0, 2, 3, 1},  // -Z
}};

template <typename Scalar = double>
Vec3<Scalar> local_normal(FaceKey face) {
    switch (face) {
        case FaceKey::PosX: return Vec3<Scalar>::UnitX();
        case FaceKey::NegX: return -Vec3<Scalar>::UnitX();
        case FaceKey::PosY: return Vec3<Scalar>::UnitY();
        case FaceKey::NegY: return -Vec3<Scalar>::UnitY();
        case FaceKey::PosZ: return Vec3<Scalar>::UnitZ();
        case FaceKey::NegZ: return -Vec3<Scalar>::UnitZ();
    }
    return Vec3<Scalar>::Zero();
}

/// Six distinct RGB colors, one per local face. Fixed for a whole run and
/// serialized alongside every render.
struct FaceColorMap {
    std::array<Eigen::Vector3d, 6> colors;

    Eigen::Vector3d const& operator[](FaceKey face) const {
        return colors[static_cast<std::size_t>(face)];
    }
    Eigen::Vector3d& operator[](FaceKey face) {
        return colors[static_cast<std::size_t>(face)];
    }
    bool operator==(FaceColorMap const&) const = default;
};

/// Front (+Y) red, back cyan, +X green, -X magenta, top blue, bottom yellow.
FaceColorMap default_face_colors();

/// Throws ValidationFailed unless all colors lie in [0,1]^3 and are pairwise
/// distinct.
void validate_face_colors(FaceColorMap const& colors);

// ---------------------------------------------------------------------------
// Boxes and cameras
// ---------------------------------------------------------------------------

/// Reduce to [0, 2pi) and snap to a 2^-30 rad grid so that yaw and
/// yaw + 2pi normalize to the same bits.
template <typename Scalar>
Scalar normalize_yaw(Scalar yaw) {
    constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    Scalar y = std::fmod(yaw, two_pi);
    if (y < 0) y += two_pi;
    y = std::ldexp(std::nearbyint(std::ldexp(y, 30)), -30);
    if (y >= two_pi) y = 0;
    return y;
}

/// Token index range [start, end) of a noun phrase within the prompt.
struct NounSpan {
    int start = 0;
    int end = 0;

    int size() const { return end - start; }
    bool empty() const { return end <= start; }
    bool intersects(NounSpan const& o) const {
        return start < o.end && o.start < end;
    }
    bool operator==(NounSpan const&) const = default;
};

/// Yaw-only oriented box resting in a Z-up world. Yaw 0 means the local +Y
/// face (the front) points along world +Y.
template <typename Scalar>
struct BasicOrientedBox {
    int id = 0;
    std::string label;
    Vec3<Scalar> center = Vec3<Scalar>::Zero();
    Vec3<Scalar> dims = Vec3<Scalar>::Ones();  // width x, depth y, height z
    Scalar yaw = 0;
    NounSpan noun_span;
    bool levitating = false;

    bool operator==(BasicOrientedBox const&) const = default;
};
using OrientedBox = BasicOrientedBox<double>;

template <typename Scalar>
Mat3<Scalar> yaw_rotation(Scalar yaw) {
    return Eigen::AngleAxis<Scalar>(yaw, Vec3<Scalar>::UnitZ())
        .toRotationMatrix();
}

/// The 8 world-space corners as columns; corner k has local sign
/// (x: bit 0, y: bit 1, z: bit 2), set bit = positive half.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 8> box_corners(BasicOrientedBox<Scalar> const& box) {
    Mat3<Scalar> const rot = yaw_rotation(normalize_yaw(box.yaw));
    Vec3<Scalar> const half = box.dims / Scalar(2);
    Eigen::Matrix<Scalar, 3, 8> corners;
    for (int k = 0; k < 8; ++k) {
        Vec3<Scalar> local((k & 1) ? half.x() : -half.x(),
                           (k & 2) ? half.y() : -half.y(),
                           (k & 4) ? half.z() : -half.z());
        corners.col(k) = box.center + rot * local;
    }
    return corners;
}

struct ImageSize {
    int width = kDefaultImageSide;
    int height = kDefaultImageSide;
    bool operator==(ImageSize const&) const = default;
};

/// Camera on the upper hemisphere around the world origin, looking at it.
struct CameraSpec {
    double radius = 10.0;
    double azimuth = 0.0;
    double elevation = 0.0;
    double fov_deg = kDefaultFovDeg;  // horizontal
    ImageSize image_size;

    bool operator==(CameraSpec const&) const = default;
};

/// World-to-camera rigid transform plus pinhole intrinsics. Camera frame is
/// x right, y down, z forward; pixel (0,0) is the top-left corner of the
/// top-left pixel.
template <typename Scalar>
struct CameraPose {
    Vec3<Scalar> position;
    Mat3<Scalar> world_to_camera;  // rows: right, down, forward
    Scalar focal_px;
    Vec2<Scalar> principal;
    ImageSize image_size;

    Vec3<Scalar> to_camera(Vec3<Scalar> const& world) const {
        return world_to_camera * (world - position);
    }
    Vec3<Scalar> right() const { return world_to_camera.row(0).transpose(); }
    Vec3<Scalar> up() const { return -world_to_camera.row(1).transpose(); }
    Vec3<Scalar> forward() const {
        return world_to_camera.row(2).transpose();
    }
};

template <typename Scalar>
Vec3<Scalar> spherical_position(Scalar radius, Scalar azimuth,
                                Scalar elevation) {
    using std::cos;
    using std::sin;
    return radius * Vec3<Scalar>(cos(elevation) * cos(azimuth),
                                 cos(elevation) * sin(azimuth),
                                 sin(elevation));
}

/// Look-at pose with an explicit up hint. Throws DegeneratePose when the
/// hint is parallel to the viewing direction.
template <typename Scalar>
CameraPose<Scalar> camera_pose(CameraSpec const& cam,
                               Vec3<Scalar> const& up_hint) {
    CameraPose<Scalar> pose;
    pose.position = spherical_position<Scalar>(Scalar(cam.radius),
                                               Scalar(cam.azimuth),
                                               Scalar(cam.elevation));
    Vec3<Scalar> const forward = -pose.position.normalized();
    Vec3<Scalar> right = forward.cross(up_hint);
    if (!(right.norm() > Scalar(1e-9) * up_hint.norm())) {
        throw Error(Errc::DegeneratePose,
                    "camera up vector is parallel to the viewing direction "
                    "(elevation " + std::to_string(cam.elevation) + " rad)");
    }
    right.normalize();
    Vec3<Scalar> const up = right.cross(forward);
    pose.world_to_camera.row(0) = right.transpose();
    pose.world_to_camera.row(1) = -up.transpose();
    pose.world_to_camera.row(2) = forward.transpose();

    Scalar const half_fov =
        Scalar(cam.fov_deg) * std::numbers::pi_v<Scalar> / Scalar(360);
    pose.focal_px = (Scalar(cam.image_size.width) / Scalar(2)) /
                    std::tan(half_fov);
    pose.principal = Vec2<Scalar>(Scalar(cam.image_size.width) / Scalar(2),
                                  Scalar(cam.image_size.height) / Scalar(2));
    pose.image_size = cam.image_size;
    return pose;
}

template <typename Scalar = double>
CameraPose<Scalar> camera_pose(CameraSpec const& cam) {
    return camera_pose<Scalar>(cam, Vec3<Scalar>::UnitZ());
}

template <typename Scalar>
struct ProjectedPoint {
    Vec2<Scalar> pixel;
    Scalar depth;
};

/// Pinhole projection; nullopt when the point is at or behind the near plane.
template <typename Scalar>
std::optional<ProjectedPoint<Scalar>> project(Vec3<Scalar> const& world,
                                              CameraPose<Scalar> const& pose) {
    Vec3<Scalar> const p = pose.to_camera(world);
    if (!(p.z() > Scalar(kNearPlane))) return std::nullopt;
    return ProjectedPoint<Scalar>{
        pose.principal + pose.focal_px * p.template head<2>() / p.z(), p.z()};
}

// ---------------------------------------------------------------------------
// Layouts
// ---------------------------------------------------------------------------

struct SceneLayout {
    std::vector<OrientedBox> boxes;
    CameraSpec camera;
    std::string prompt;
    /// Explicit prompt token count; falls back to the whitespace word count.
    std::optional<int> prompt_tokens;

    int prompt_token_count() const;
    OrientedBox const* find_box(int id) const;
    bool operator==(SceneLayout const&) const = default;
};

/// Number of whitespace-separated words.
int count_words(std::string_view text);

struct Violation {
    int box_id = -1;  // -1 for layout-level violations
    std::string code;
    std::string message;
};

/// Checks every type invariant without mutating the layout. Layout-level
/// violations come first, then per-box ones ordered by box id.
std::vector<Violation> validate_layout(SceneLayout const& layout);

/// Throws ValidationFailed summarizing every violation.
void require_valid(SceneLayout const& layout);

std::string describe(std::vector<Violation> const& violations);

}  // namespace oscr
