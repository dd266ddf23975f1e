#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "oscr/scene.hpp"

namespace oscr {

using Json = nlohmann::json;

/// Parses JSON text; syntax errors become ParseError naming the byte offset.
Json parse_json(std::string_view text, std::string_view what = "input");

std::string read_text_file(std::filesystem::path const& path);
void write_text_file(std::filesystem::path const& path, std::string_view text);
void write_binary_file(std::filesystem::path const& path,
                       std::vector<std::uint8_t> const& bytes);

Json load_json_file(std::filesystem::path const& path);

/// Stable pretty serialization used for every emitted JSON file.
std::string dump_json(Json const& j);

/// Throws SchemaError if `obj` is not an object or has a key outside
/// `allowed`. `where` prefixes the message ("layout.boxes[2]").
void require_known_fields(Json const& obj, std::string_view where,
                          std::initializer_list<std::string_view> allowed);

/// Typed accessors that name the offending path on failure.
double get_number(Json const& obj, std::string_view key, std::string_view where);
int get_int(Json const& obj, std::string_view key, std::string_view where);
std::string get_string(Json const& obj, std::string_view key,
                       std::string_view where);
Json const& get_field(Json const& obj, std::string_view key,
                      std::string_view where);

Json to_json(Eigen::Vector3d const& v);
Eigen::Vector3d vec3_from_json(Json const& j, std::string_view where);

// Layout files ----------------------------------------------------------------

Json to_json(CameraSpec const& cam);
CameraSpec camera_from_json(Json const& j, std::string_view where = "camera");

Json to_json(OrientedBox const& box);
OrientedBox box_from_json(Json const& j, std::string_view where);

/// Yaw values are normalized into [0, 2pi) on load.
Json to_json(SceneLayout const& layout);
SceneLayout layout_from_json(Json const& j);
SceneLayout parse_layout(std::string_view text);
SceneLayout load_layout(std::filesystem::path const& path);

Json to_json(FaceColorMap const& colors);
FaceColorMap face_colors_from_json(Json const& j);

}  // namespace oscr
