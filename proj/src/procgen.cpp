#include "oscr/procgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oscr/error.hpp"

namespace oscr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

[[noreturn]] void bad_config(std::string const& msg) {
    throw Error(Errc::ValidationFailed, "config: " + msg);
}

Json range_json(double lo, double hi) { return Json::array({lo, hi}); }

Range range_from_json(Json const& j, std::string const& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(Errc::SchemaError, path + ": expected [lo, hi]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

// Templates -------------------------------------------------------------------

std::vector<AssetTemplate> const& default_templates() {
    static std::vector<AssetTemplate> const templates = [] {
        struct Row {
            char const* label;
            double w, d, h;
        };
        Row const rows[] = {
            {"car", 1.8, 4.5, 1.5},          {"jeep", 1.9, 4.2, 1.9},
            {"van", 2.0, 5.0, 2.2},          {"pickup truck", 2.0, 5.5, 1.9},
            {"motorcycle", 0.8, 2.1, 1.2},   {"bicycle", 0.6, 1.8, 1.1},
            {"scooter", 0.7, 1.8, 1.2},      {"horse", 0.6, 2.4, 1.7},
            {"cow", 0.8, 2.4, 1.5},          {"elephant", 1.8, 3.5, 3.0},
            {"camel", 0.8, 2.8, 2.0},        {"giraffe", 1.0, 2.5, 4.5},
            {"bear", 0.9, 1.8, 1.2},         {"lion", 0.7, 1.9, 1.1},
            {"tiger", 0.7, 2.0, 1.0},        {"zebra", 0.6, 2.2, 1.4},
            {"deer", 0.5, 1.6, 1.3},         {"dog", 0.4, 1.0, 0.7},
            {"sheep", 0.5, 1.2, 0.9},        {"goat", 0.4, 1.1, 0.8},
            {"pig", 0.5, 1.3, 0.8},          {"kangaroo", 0.6, 1.2, 1.6},
            {"gorilla", 0.9, 0.8, 1.6},      {"ostrich", 0.7, 1.4, 2.2},
            {"penguin", 0.5, 0.4, 1.1},      {"sofa", 2.0, 0.9, 0.9},
            {"armchair", 0.9, 0.9, 1.0},     {"bed", 1.6, 2.1, 1.0},
            {"dining table", 1.8, 0.9, 0.75}, {"desk", 1.4, 0.7, 0.75},
            {"bookshelf", 1.0, 0.35, 1.9},   {"wardrobe", 1.2, 0.6, 2.0},
            {"refrigerator", 0.8, 0.75, 1.8}, {"washing machine", 0.6, 0.6, 0.85},
            {"piano", 1.5, 0.6, 1.3},        {"bench", 1.6, 0.5, 0.8},
            {"mailbox", 0.5, 0.5, 1.2},      {"vending machine", 1.0, 0.8, 1.9},
            {"statue", 0.8, 0.8, 2.0},       {"tractor", 2.0, 3.5, 2.6},
            {"boat", 1.8, 4.5, 1.2},
        };
        std::vector<AssetTemplate> out;
        for (auto const& r : rows) out.push_back({r.label, {r.w, r.d, r.h}, 0.15});
        return out;
    }();
    return templates;
}

Json to_json(AssetTemplate const& t) {
    return Json{{"label", t.label}, {"dims", to_json(t.dims)}, {"jitter", t.jitter}};
}

// Config ----------------------------------------------------------------------

void validate_config(GenConfig const& cfg) {
    if (cfg.n_scenes < 0) bad_config("n_scenes must be >= 0");
    if (cfg.objects_min < 1 || cfg.objects_max > 4 || cfg.objects_min > cfg.objects_max) {
        bad_config("objects_per_scene must be a sub-range of [1, 4]");
    }
    if (!(cfg.placement_radius >= 0) || !std::isfinite(cfg.placement_radius)) {
        bad_config("placement_radius must be finite and >= 0");
    }
    if (!(cfg.camera_radius.lo > 0 && cfg.camera_radius.lo <= cfg.camera_radius.hi &&
          std::isfinite(cfg.camera_radius.hi))) {
        bad_config("camera_radius must satisfy 0 < lo <= hi");
    }
    if (!(cfg.camera_elevation.lo >= 0 && cfg.camera_elevation.lo <= cfg.camera_elevation.hi &&
          cfg.camera_elevation.hi < std::numbers::pi / 2)) {
        bad_config("camera_elevation must satisfy 0 <= lo <= hi < pi/2");
    }
    if (!(cfg.fov_deg > 10 && cfg.fov_deg < 120)) bad_config("fov_deg must lie in (10, 120)");
    if (cfg.image_size < 8 || cfg.image_size > 4096) bad_config("image_size must lie in [8, 4096]");
    if (cfg.asset_templates.size() < static_cast<std::size_t>(cfg.objects_max)) {
        bad_config("need at least objects_per_scene.max asset templates");
    }
    for (auto const& t : cfg.asset_templates) {
        if (count_words(t.label) == 0) bad_config("asset template with empty label");
        if (!(t.dims.array() > 0).all() || !t.dims.allFinite()) {
            bad_config("asset template '" + t.label + "' needs positive dims");
        }
        if (!(t.jitter >= 0 && t.jitter < 1)) {
            bad_config("asset template '" + t.label + "' jitter must lie in [0, 1)");
        }
    }
    if (!(0 < cfg.visibility_low && cfg.visibility_low < cfg.visibility_high &&
          cfg.visibility_high < 1)) {
        bad_config("need 0 < visibility_low < visibility_high < 1");
    }
    if (!(0 < cfg.bbox_side_min_frac && cfg.bbox_side_min_frac < cfg.bbox_side_max_frac &&
          cfg.bbox_side_max_frac < 1)) {
        bad_config("need 0 < bbox_side_min_frac < bbox_side_max_frac < 1");
    }
    if (!(cfg.score_threshold >= -1 && cfg.score_threshold <= 1)) {
        bad_config("score_threshold must lie in [-1, 1]");
    }
    if (cfg.max_rejections_per_scene < 0) bad_config("max_rejections_per_scene must be >= 0");
    if (!(cfg.alpha > 0 && cfg.alpha < 1)) bad_config("alpha must lie in (0, 1)");
}

Json to_json(GenConfig const& cfg) {
    Json templates = Json::array();
    for (auto const& t : cfg.asset_templates) templates.push_back(to_json(t));
    return Json{{"seed", cfg.seed},
                {"n_scenes", cfg.n_scenes},
                {"objects_per_scene", {cfg.objects_min, cfg.objects_max}},
                {"placement_radius", cfg.placement_radius},
                {"camera_radius", range_json(cfg.camera_radius.lo, cfg.camera_radius.hi)},
                {"camera_elevation", range_json(cfg.camera_elevation.lo, cfg.camera_elevation.hi)},
                {"fov_deg", cfg.fov_deg},
                {"image_size", cfg.image_size},
                {"asset_templates", templates},
                {"visibility_low", cfg.visibility_low},
                {"visibility_high", cfg.visibility_high},
                {"bbox_side_min_frac", cfg.bbox_side_min_frac},
                {"bbox_side_max_frac", cfg.bbox_side_max_frac},
                {"score_threshold", cfg.score_threshold},
                {"max_rejections_per_scene", cfg.max_rejections_per_scene},
                {"alpha", cfg.alpha}};
}

GenConfig gen_config_from_json(Json const& j) {
    if (!j.is_object()) throw Error(Errc::SchemaError, "config: expected an object");
    require_known_fields(j, "config",
                         {"v", "seed", "n_scenes", "objects_per_scene", "placement_radius",
                          "camera_radius", "camera_elevation", "fov_deg", "image_size",
                          "asset_templates", "visibility_low", "visibility_high",
                          "bbox_side_min_frac", "bbox_side_max_frac", "score_threshold",
                          "max_rejections_per_scene", "alpha"});
    GenConfig cfg;
    auto num = [&](char const* key, double& out) {
        if (j.contains(key)) out = get_number(j, key, "config");
    };
    auto integer = [&](char const* key, int& out) {
        if (j.contains(key)) out = get_int(j, key, "config");
    };
    if (j.contains("v") && j["v"] != 1) throw Error(Errc::SchemaError, "config.v: must be 1");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            throw Error(Errc::SchemaError, "config.seed: expected a non-negative integer");
        }
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    integer("n_scenes", cfg.n_scenes);
    if (j.contains("objects_per_scene")) {
        Range const r = range_from_json(j["objects_per_scene"], "config.objects_per_scene");
        cfg.objects_min = static_cast<int>(r.lo);
        cfg.objects_max = static_cast<int>(r.hi);
        if (cfg.objects_min != r.lo || cfg.objects_max != r.hi) {
            throw Error(Errc::SchemaError, "config.objects_per_scene: expected integers");
        }
    }
    num("placement_radius", cfg.placement_radius);
    if (j.contains("camera_radius")) {
        cfg.camera_radius = range_from_json(j["camera_radius"], "config.camera_radius");
    }
    if (j.contains("camera_elevation")) {
        cfg.camera_elevation = range_from_json(j["camera_elevation"], "config.camera_elevation");
    }
    num("fov_deg", cfg.fov_deg);
    integer("image_size", cfg.image_size);
    if (j.contains("asset_templates")) {
        Json const& arr = j["asset_templates"];
        if (!arr.is_array()) throw Error(Errc::SchemaError, "config.asset_templates: expected array");
        cfg.asset_templates.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string const path = "config.asset_templates[" + std::to_string(i) + "]";
            require_known_fields(arr[i], path, {"label", "dims", "jitter"});
            AssetTemplate t;
            t.label = get_string(arr[i], "label", path);
            t.dims = vec3_from_json(get_field(arr[i], "dims", path), path + ".dims");
            if (arr[i].contains("jitter")) t.jitter = get_number(arr[i], "jitter", path);
            cfg.asset_templates.push_back(std::move(t));
        }
    }
    num("visibility_low", cfg.visibility_low);
    num("visibility_high", cfg.visibility_high);
    num("bbox_side_min_frac", cfg.bbox_side_min_frac);
    num("bbox_side_max_frac", cfg.bbox_side_max_frac);
    num("score_threshold", cfg.score_threshold);
    integer("max_rejections_per_scene", cfg.max_rejections_per_scene);
    num("alpha", cfg.alpha);
    validate_config(cfg);
    return cfg;
}

// Sampling --------------------------------------------------------------------

SceneRng::SceneRng(std::uint64_t seed, std::uint64_t index)
    : engine_(splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ull))) {}

std::uint64_t SceneRng::next() { return engine_(); }

double SceneRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

int SceneRng::uniform_int(int lo, int hi) {
    auto const n = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t const limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return lo + static_cast<int>(x % n);
}

SceneLayout sample_scene(GenConfig const& cfg, std::uint64_t index) {
    SceneRng rng(cfg.seed, index);
    int const n = rng.uniform_int(cfg.objects_min, cfg.objects_max);

    std::vector<std::size_t> order(cfg.asset_templates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int i = 0; i < n; ++i) {
        int const j = rng.uniform_int(i, static_cast<int>(order.size()) - 1);
        std::swap(order[i], order[j]);
    }

    SceneLayout layout;
    std::string prompt = "a photo of";
    int tokens = 3;
    for (int i = 0; i < n; ++i) {
        AssetTemplate const& t = cfg.asset_templates[order[i]];
        if (i > 0) {
            prompt += " and";
            ++tokens;
        }
        prompt += " a " + t.label;
        ++tokens;
        int const words = count_words(t.label);

        OrientedBox box;
        box.id = i;
        box.label = t.label;
        for (int k = 0; k < 3; ++k) box.dims[k] = t.dims[k] * (1.0 + rng.uniform(-t.jitter, t.jitter));
        double const r = cfg.placement_radius * std::sqrt(rng.uniform());
        double const theta = rng.uniform(0.0, kTwoPi);
        box.center = {r * std::cos(theta), r * std::sin(theta), box.dims.z() / 2.0};
        box.yaw = normalize_yaw(rng.uniform(0.0, kTwoPi));
        box.noun_span = {tokens, tokens + words};
        tokens += words;
        layout.boxes.push_back(std::move(box));
    }
    layout.prompt = prompt;

    layout.camera.azimuth = rng.uniform(0.0, kTwoPi);
    layout.camera.elevation = rng.uniform(cfg.camera_elevation.lo, cfg.camera_elevation.hi);
    layout.camera.radius = rng.uniform(cfg.camera_radius.lo, cfg.camera_radius.hi);
    layout.camera.fov_deg = cfg.fov_deg;
    layout.camera.image_size = {cfg.image_size, cfg.image_size};
    return layout;
}

// Collision -------------------------------------------------------------------

bool check_collision(OrientedBox const& a, OrientedBox const& b) {
    double const a_lo = a.center.z() - a.dims.z() / 2, a_hi = a.center.z() + a.dims.z() / 2;
    double const b_lo = b.center.z() - b.dims.z() / 2, b_hi = b.center.z() + b.dims.z() / 2;
    if (!(a_lo < b_hi && b_lo < a_hi)) return false;

    struct Rect {
        Eigen::Vector2d c, ux, uy;
        double hx, hy;
    };
    auto rect = [](OrientedBox const& o) {
        double const yaw = normalize_yaw(o.yaw);
        Eigen::Vector2d const ux(std::cos(yaw), std::sin(yaw));
        return Rect{o.center.head<2>(), ux, {-ux.y(), ux.x()}, o.dims.x() / 2, o.dims.y() / 2};
    };
    Rect const ra = rect(a), rb = rect(b);
    auto radius = [](Rect const& r, Eigen::Vector2d const& axis) {
        return r.hx * std::abs(r.ux.dot(axis)) + r.hy * std::abs(r.uy.dot(axis));
    };
    for (Eigen::Vector2d const& axis : {ra.ux, ra.uy, rb.ux, rb.uy}) {
        double const dist = std::abs((rb.c - ra.c).dot(axis));
        if (dist >= radius(ra, axis) + radius(rb, axis)) return false;
    }
    return true;
}

std::optional<std::pair<int, int>> find_collision(SceneLayout const& layout) {
    for (std::size_t i = 0; i < layout.boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < layout.boxes.size(); ++j) {
            if (check_collision(layout.boxes[i], layout.boxes[j])) {
                return std::pair{layout.boxes[i].id, layout.boxes[j].id};
            }
        }
    }
    return std::nullopt;
}

// Acceptance ------------------------------------------------------------------

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::Accepted: return "accepted";
        case Verdict::Collision: return "collision";
        case Verdict::Offscreen: return "offscreen";
        case Verdict::TooSmall: return "too_small";
        case Verdict::TooLarge: return "too_large";
        case Verdict::TooHidden: return "too_hidden";
        case Verdict::AllVisible: return "all_visible";
    }
    return "unknown";
}

namespace {

Verdict verdict_from_string(std::string const& s) {
    for (Verdict v : {Verdict::Accepted, Verdict::Collision, Verdict::Offscreen, Verdict::TooSmall,
                      Verdict::TooLarge, Verdict::TooHidden, Verdict::AllVisible}) {
        if (to_string(v) == s) return v;
    }
    throw Error(Errc::SchemaError, "accept report: unknown verdict '" + s + "'");
}

AcceptReport collision_report(std::pair<int, int> pair) {
    AcceptReport r;
    r.verdict = Verdict::Collision;
    r.detail = "boxes " + std::to_string(pair.first) + " and " + std::to_string(pair.second) +
               " intersect";
    return r;
}

std::string box_detail(int id, std::string const& what) {
    return "box " + std::to_string(id) + ": " + what;
}

}  // namespace

AcceptReport accept_scene(SceneLayout const& candidate, RenderOutput const& render,
                          GenConfig const& cfg) {
    if (auto pair = find_collision(candidate)) return collision_report(*pair);

    AcceptReport r;
    double const width = render.oscr.width();
    for (std::size_t i = 0; i < render.box_ids.size(); ++i) {
        BoxReport b;
        b.box_id = render.box_ids[i];
        b.amodal_px = render.amodal_masks[i].count();
        b.visible_px = render.visible_masks[i].count();
        if (b.amodal_px > 0) b.visibility = static_cast<double>(b.visible_px) / b.amodal_px;
        b.bbox_side_frac = mask_bounds(render.amodal_masks[i]).largest_side() / width;
        if (b.visibility && (!r.min_visibility || *b.visibility < *r.min_visibility)) {
            r.min_visibility = b.visibility;
        }
        r.boxes.push_back(b);
    }

    auto reject = [&](Verdict v, std::string detail) {
        r.verdict = v;
        r.detail = std::move(detail);
        return r;
    };
    for (auto const& b : r.boxes) {
        if (b.amodal_px == 0) return reject(Verdict::Offscreen, box_detail(b.box_id, "no pixels"));
    }
    for (auto const& b : r.boxes) {
        if (b.bbox_side_frac < cfg.bbox_side_min_frac) {
            return reject(Verdict::TooSmall,
                          box_detail(b.box_id, "bbox side fraction " + std::to_string(b.bbox_side_frac)));
        }
        if (b.bbox_side_frac > cfg.bbox_side_max_frac) {
            return reject(Verdict::TooLarge,
                          box_detail(b.box_id, "bbox side fraction " + std::to_string(b.bbox_side_frac)));
        }
    }
    for (auto const& b : r.boxes) {
        if (*b.visibility < cfg.visibility_low) {
            return reject(Verdict::TooHidden,
                          box_detail(b.box_id, "visibility " + std::to_string(*b.visibility)));
        }
    }
    if (r.min_visibility && *r.min_visibility > cfg.visibility_high) {
        return reject(Verdict::AllVisible,
                      "min visibility " + std::to_string(*r.min_visibility));
    }
    return r;
}

Json to_json(AcceptReport const& r) {
    Json boxes = Json::array();
    for (auto const& b : r.boxes) {
        boxes.push_back({{"id", b.box_id},
                         {"amodal_px", b.amodal_px},
                         {"visible_px", b.visible_px},
                         {"visibility", b.visibility ? Json(*b.visibility) : Json(nullptr)},
                         {"bbox_side_frac", b.bbox_side_frac}});
    }
    return Json{{"verdict", std::string(to_string(r.verdict))},
                {"detail", r.detail},
                {"min_visibility", r.min_visibility ? Json(*r.min_visibility) : Json(nullptr)},
                {"boxes", boxes}};
}

AcceptReport accept_report_from_json(Json const& j) {
    std::string const path = "accept_report";
    require_known_fields(j, path, {"verdict", "detail", "min_visibility", "boxes"});
    AcceptReport r;
    r.verdict = verdict_from_string(get_string(j, "verdict", path));
    r.detail = get_string(j, "detail", path);
    if (!get_field(j, "min_visibility", path).is_null()) {
        r.min_visibility = get_number(j, "min_visibility", path);
    }
    Json const& boxes = get_field(j, "boxes", path);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        std::string const bp = path + ".boxes[" + std::to_string(i) + "]";
        require_known_fields(boxes[i], bp,
                             {"id", "amodal_px", "visible_px", "visibility", "bbox_side_frac"});
        BoxReport b;
        b.box_id = get_int(boxes[i], "id", bp);
        b.amodal_px = get_int(boxes[i], "amodal_px", bp);
        b.visible_px = get_int(boxes[i], "visible_px", bp);
        if (!get_field(boxes[i], "visibility", bp).is_null()) {
            b.visibility = get_number(boxes[i], "visibility", bp);
        }
        b.bbox_side_frac = get_number(boxes[i], "bbox_side_frac", bp);
        r.boxes.push_back(b);
    }
    return r;
}

CandidateResult evaluate_candidate(GenConfig const& cfg, std::uint64_t index) {
    CandidateResult out{index, sample_scene(cfg, index), {}, std::nullopt};
    if (auto pair = find_collision(out.layout)) {
        out.report = collision_report(*pair);
        return out;
    }
    out.render = render_oscr(out.layout, default_face_colors(), cfg.alpha);
    out.report = accept_scene(out.layout, *out.render, cfg);
    return out;
}

}  // namespace oscr
