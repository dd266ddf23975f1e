#include "oscr/json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace oscr {

namespace {

std::string path_of(std::string_view where, std::string_view key) {
    std::string out(where);
    if (!out.empty()) out += '.';
    out += key;
    return out;
}

}  // namespace

Json parse_json(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (Json::parse_error const& e) {
        throw Error(Errc::ParseError,
                    std::string(what) + ": malformed JSON at byte offset " +
                        std::to_string(e.byte) + ": " + e.what());
    }
}

std::string read_text_file(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(std::filesystem::path const& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

void write_binary_file(std::filesystem::path const& path,
                       std::vector<std::uint8_t> const& bytes) {
    write_text_file(path, std::string_view(
                              reinterpret_cast<char const*>(bytes.data()),
                              bytes.size()));
}

Json load_json_file(std::filesystem::path const& path) {
    return parse_json(read_text_file(path), path.string());
}

std::string dump_json(Json const& j) { return j.dump(2) + "\n"; }

void require_known_fields(Json const& obj, std::string_view where,
                          std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
        throw Error(Errc::SchemaError, std::string(where) + ": expected object");
    }
    for (auto const& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(Errc::SchemaError,
                        "unknown field " + path_of(where, key));
        }
    }
}

Json const& get_field(Json const& obj, std::string_view key,
                      std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(Errc::SchemaError, "missing field " + path_of(where, key));
    }
    return *it;
}

double get_number(Json const& obj, std::string_view key, std::string_view where) {
    Json const& v = get_field(obj, key, where);
    if (!v.is_number()) {
        throw Error(Errc::SchemaError,
                    path_of(where, key) + ": expected number");
    }
    return v.get<double>();
}

int get_int(Json const& obj, std::string_view key, std::string_view where) {
    Json const& v = get_field(obj, key, where);
    if (!v.is_number_integer()) {
        throw Error(Errc::SchemaError,
                    path_of(where, key) + ": expected integer");
    }
    return v.get<int>();
}

std::string get_string(Json const& obj, std::string_view key,
                       std::string_view where) {
    Json const& v = get_field(obj, key, where);
    if (!v.is_string()) {
        throw Error(Errc::SchemaError,
                    path_of(where, key) + ": expected string");
    }
    return v.get<std::string>();
}

Json to_json(Eigen::Vector3d const& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(Json const& j, std::string_view where) {
    if (!j.is_array() || j.size() != 3 ||
        !std::all_of(j.begin(), j.end(), [](Json const& e) { return e.is_number(); })) {
        throw Error(Errc::SchemaError,
                    std::string(where) + ": expected array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(CameraSpec const& cam) {
    return Json{{"radius", cam.radius},
                {"azimuth", cam.azimuth},
                {"elevation", cam.elevation},
                {"fov_deg", cam.fov_deg},
                {"width", cam.image_size.width},
                {"height", cam.image_size.height}};
}

CameraSpec camera_from_json(Json const& j, std::string_view where) {
    require_known_fields(j, where,
                         {"radius", "azimuth", "elevation", "fov_deg", "width",
                          "height"});
    CameraSpec cam;
    cam.radius = get_number(j, "radius", where);
    cam.azimuth = get_number(j, "azimuth", where);
    cam.elevation = get_number(j, "elevation", where);
    if (j.contains("fov_deg")) cam.fov_deg = get_number(j, "fov_deg", where);
    if (j.contains("width")) cam.image_size.width = get_int(j, "width", where);
    if (j.contains("height")) cam.image_size.height = get_int(j, "height", where);
    return cam;
}

Json to_json(OrientedBox const& box) {
    Json j{{"id", box.id},
           {"label", box.label},
           {"center", to_json(box.center)},
           {"dims", to_json(box.dims)},
           {"yaw", box.yaw},
           {"noun_span", Json::array({box.noun_span.start, box.noun_span.end})}};
    if (box.levitating) j["levitating"] = true;
    return j;
}

OrientedBox box_from_json(Json const& j, std::string_view where) {
    require_known_fields(j, where,
                         {"id", "label", "center", "dims", "yaw", "noun_span",
                          "levitating"});
    OrientedBox box;
    std::string const w(where);
    box.id = get_int(j, "id", where);
    box.label = get_string(j, "label", where);
    box.center = vec3_from_json(get_field(j, "center", where), w + ".center");
    box.dims = vec3_from_json(get_field(j, "dims", where), w + ".dims");
    box.yaw = normalize_yaw(get_number(j, "yaw", where));
    Json const& span = get_field(j, "noun_span", where);
    if (!span.is_array() || span.size() != 2 || !span[0].is_number_integer() ||
        !span[1].is_number_integer()) {
        throw Error(Errc::SchemaError,
                    w + ".noun_span: expected [start, end) integer pair");
    }
    box.noun_span = {span[0].get<int>(), span[1].get<int>()};
    if (j.contains("levitating")) {
        Json const& lev = j["levitating"];
        if (!lev.is_boolean()) {
            throw Error(Errc::SchemaError, w + ".levitating: expected boolean");
        }
        box.levitating = lev.get<bool>();
    }
    return box;
}

Json to_json(SceneLayout const& layout) {
    Json boxes = Json::array();
    for (auto const& b : layout.boxes) boxes.push_back(to_json(b));
    Json j{{"prompt", layout.prompt},
           {"camera", to_json(layout.camera)},
           {"boxes", std::move(boxes)}};
    if (layout.prompt_tokens) j["prompt_tokens"] = *layout.prompt_tokens;
    return j;
}

SceneLayout layout_from_json(Json const& j) {
    require_known_fields(j, "layout",
                         {"v", "prompt", "camera", "boxes", "prompt_tokens"});
    if (j.contains("v") && !(j["v"].is_number_integer() && j["v"].get<int>() == 1)) {
        throw Error(Errc::SchemaError, "layout.v: unsupported schema version");
    }
    SceneLayout layout;
    layout.prompt = get_string(j, "prompt", "layout");
    layout.camera = camera_from_json(get_field(j, "camera", "layout"), "layout.camera");
    if (j.contains("prompt_tokens")) {
        layout.prompt_tokens = get_int(j, "prompt_tokens", "layout");
    }
    Json const& boxes = get_field(j, "boxes", "layout");
    if (!boxes.is_array()) {
        throw Error(Errc::SchemaError, "layout.boxes: expected array");
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        layout.boxes.push_back(
            box_from_json(boxes[i], "layout.boxes[" + std::to_string(i) + "]"));
    }
    return layout;
}

SceneLayout parse_layout(std::string_view text) {
    return layout_from_json(parse_json(text, "layout"));
}

SceneLayout load_layout(std::filesystem::path const& path) {
    return layout_from_json(load_json_file(path));
}

Json to_json(FaceColorMap const& colors) {
    Json j = Json::object();
    for (FaceKey f : kAllFaces) j[std::string(to_string(f))] = to_json(colors[f]);
    return j;
}

FaceColorMap face_colors_from_json(Json const& j) {
    require_known_fields(j, "colors", {"+X", "-X", "+Y", "-Y", "+Z", "-Z"});
    FaceColorMap m;
    for (FaceKey f : kAllFaces) {
        std::string const key(to_string(f));
        m[f] = vec3_from_json(get_field(j, key, "colors"), "colors." + key);
    }
    validate_face_colors(m);
    return m;
}

}  // namespace oscr
