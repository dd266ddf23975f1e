#include "oscr/scene.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace oscr {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::ParseError: return "ParseError";
        case Errc::SchemaError: return "SchemaError";
        case Errc::ValidationFailed: return "ValidationFailed";
        case Errc::DegeneratePose: return "DegeneratePose";
        case Errc::OffscreenBox: return "OffscreenBox";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::SpanOverlap: return "SpanOverlap";
        case Errc::MissingMask: return "MissingMask";
        case Errc::NoAppearanceTokens: return "NoAppearanceTokens";
        case Errc::NoPairs: return "NoPairs";
        case Errc::EmptyManifest: return "EmptyManifest";
        case Errc::BudgetExhausted: return "BudgetExhausted";
        case Errc::Io: return "Io";
        case Errc::Timeout: return "Timeout";
    }
    return "Unknown";
}

bool Error::is_input_error() const noexcept {
    switch (code_) {
        case Errc::Io:
        case Errc::Timeout:
        case Errc::BudgetExhausted: return false;
        default: return true;
    }
}

std::string_view to_string(FaceKey face) noexcept {
    static constexpr std::array<std::string_view, 6> names = {
        "+X", "-X", "+Y", "-Y", "+Z", "-Z"};
    return names[static_cast<std::size_t>(face)];
}

std::optional<FaceKey> face_from_string(std::string_view name) noexcept {
    for (FaceKey f : kAllFaces) {
        if (to_string(f) == name) return f;
    }
    return std::nullopt;
}

FaceColorMap default_face_colors() {
    FaceColorMap m;
    m[FaceKey::PosX] = {0.0, 1.0, 0.0};
    m[FaceKey::NegX] = {1.0, 0.0, 1.0};
    m[FaceKey::PosY] = {1.0, 0.0, 0.0};
    m[FaceKey::NegY] = {0.0, 1.0, 1.0};
    m[FaceKey::PosZ] = {0.0, 0.0, 1.0};
    m[FaceKey::NegZ] = {1.0, 1.0, 0.0};
    return m;
}

void validate_face_colors(FaceColorMap const& colors) {
    for (FaceKey f : kAllFaces) {
        auto const& c = colors[f];
        if (!((c.array() >= 0.0).all() && (c.array() <= 1.0).all())) {
            throw Error(Errc::ValidationFailed,
                        "face color " + std::string(to_string(f)) +
                            " outside [0,1]");
        }
    }
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = i + 1; j < 6; ++j) {
            if (colors.colors[i] == colors.colors[j]) {
                throw Error(Errc::ValidationFailed,
                            "face colors " + std::string(to_string(kAllFaces[i])) +
                                " and " + std::string(to_string(kAllFaces[j])) +
                                " are identical");
            }
        }
    }
}

int count_words(std::string_view text) {
    int n = 0;
    bool in_word = false;
    for (char ch : text) {
        bool const space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

int SceneLayout::prompt_token_count() const {
    return prompt_tokens ? *prompt_tokens : count_words(prompt);
}

OrientedBox const* SceneLayout::find_box(int id) const {
    auto it = std::find_if(boxes.begin(), boxes.end(),
                           [id](OrientedBox const& b) { return b.id == id; });
    return it == boxes.end() ? nullptr : &*it;
}

std::vector<Violation> validate_layout(SceneLayout const& layout) {
    std::vector<Violation> global;
    auto add = [&](std::string code, std::string message) {
        global.push_back({-1, std::move(code), std::move(message)});
    };

    if (layout.boxes.empty()) add("no boxes", "layout has no boxes");

    CameraSpec const& cam = layout.camera;
    if (!(cam.radius > 0)) add("camera radius", "camera radius must be > 0");
    if (!(cam.elevation >= 0 && cam.elevation <= std::numbers::pi / 2)) {
        add("camera elevation", "camera elevation must lie in [0, pi/2]");
    } else if (cam.elevation == std::numbers::pi / 2) {
        add("DegeneratePose",
            "camera elevation pi/2 makes the up vector parallel to the view");
    }
    if (!std::isfinite(cam.azimuth)) add("camera azimuth", "azimuth not finite");
    if (!(cam.fov_deg > 10 && cam.fov_deg < 120)) {
        add("camera fov", "fov_deg must lie in (10, 120)");
    }
    if (cam.image_size.width <= 0 || cam.image_size.height <= 0) {
        add("image size", "image width and height must be positive");
    }
    int const n_tokens = layout.prompt_token_count();
    if (layout.prompt_tokens && *layout.prompt_tokens < 0) {
        add("prompt tokens", "prompt_tokens must be non-negative");
    }

    std::map<int, std::vector<Violation>> per_box;
    std::map<int, int> id_count;
    for (auto const& b : layout.boxes) ++id_count[b.id];

    for (std::size_t i = 0; i < layout.boxes.size(); ++i) {
        OrientedBox const& b = layout.boxes[i];
        auto& out = per_box[b.id];
        auto bad = [&](std::string code, std::string message) {
            out.push_back({b.id, std::move(code),
                           "box " + std::to_string(b.id) + ": " + message});
        };
        if (id_count[b.id] > 1 && std::none_of(out.begin(), out.end(), [](auto& v) {
                return v.code == "duplicate id";
            })) {
            bad("duplicate id", "id used by more than one box");
        }
        if (!b.center.allFinite() || !b.dims.allFinite() || !std::isfinite(b.yaw)) {
            bad("non-finite", "center, dims and yaw must be finite");
            continue;
        }
        if (!(b.dims.array() > 0).all()) bad("dims", "dims must all be > 0");
        if (b.center.z() < 0 && !b.levitating) {
            bad("below ground", "center.z must be >= 0");
        }
        if (!(b.yaw >= 0 && b.yaw < 2 * std::numbers::pi)) {
            bad("yaw range", "yaw must be normalized into [0, 2pi)");
        }
        if (b.noun_span.empty()) {
            bad("noun span empty", "noun_span must be a nonempty range");
        } else if (b.noun_span.start < 0 || b.noun_span.end > n_tokens) {
            bad("noun span range",
                "noun_span [" + std::to_string(b.noun_span.start) + "," +
                    std::to_string(b.noun_span.end) +
                    ") exceeds prompt token count " + std::to_string(n_tokens));
        }
        for (std::size_t j = 0; j < i; ++j) {
            OrientedBox const& o = layout.boxes[j];
            if (!b.noun_span.empty() && !o.noun_span.empty() &&
                b.noun_span.intersects(o.noun_span)) {
                bad("noun span overlap",
                    "noun_span intersects that of box " + std::to_string(o.id));
            }
        }
    }

    std::vector<Violation> all = std::move(global);
    for (auto& [id, list] : per_box) {
        for (auto& v : list) all.push_back(std::move(v));
    }
    return all;
}

std::string describe(std::vector<Violation> const& violations) {
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].message;
    }
    return os.str();
}

void require_valid(SceneLayout const& layout) {
    auto const violations = validate_layout(layout);
    if (!violations.empty()) {
        throw Error(Errc::ValidationFailed, describe(violations));
    }
}

}  // namespace oscr
