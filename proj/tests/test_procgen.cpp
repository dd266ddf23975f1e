#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "oscr/error.hpp"
#include "oscr/procgen.hpp"
#include "support.hpp"

using namespace oscr;
using namespace oscr::testing;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

fs::path scratch_dir(std::string const& name) {
    fs::path const p = fs::temp_directory_path() / ("oscr_test_procgen_" + name);
    fs::remove_all(p);
    return p;
}

GenConfig small_config() {
    GenConfig cfg;
    cfg.seed = 11;
    cfg.n_scenes = 10;
    cfg.image_size = 128;
    cfg.max_rejections_per_scene = 5000;
    return cfg;
}

// Synthetic render output with square amodal masks and prescribed visible
// pixel counts, for exercising accept_scene's decision table directly.
RenderOutput fake_render(std::vector<std::pair<int, int>> amodal_side_and_visible, int width = 128) {
    RenderOutput r;
    r.oscr = RgbImage(width, width, Vector3d::Ones());
    int x0 = 0;
    int id = 0;
    for (auto const& [side, visible] : amodal_side_and_visible) {
        Mask a = Mask::Constant(width, width, false);
        Mask v = Mask::Constant(width, width, false);
        if (side > 0) a.block(0, x0, side, side).setConstant(true);
        for (int k = 0; k < visible; ++k) v(k / side, x0 + k % side) = true;
        r.box_ids.push_back(id++);
        r.amodal_masks.push_back(a);
        r.visible_masks.push_back(v);
        x0 += std::max(side, 1);
    }
    return r;
}

SceneLayout separated_layout(int n) {
    std::vector<OrientedBox> boxes;
    for (int i = 0; i < n; ++i) boxes.push_back(floor_box(i, {10.0 * i, 0}, {1, 1, 1}, 0));
    return make_layout(boxes, make_camera(10, 0, 0.2, 128));
}

}  // namespace

TEST_CASE("templates: catalog of common objects") {
    auto const& t = default_templates();
    CHECK(t.size() >= 30);
    std::set<std::string> labels;
    for (auto const& a : t) {
        CHECK((a.dims.array() > 0).all());
        labels.insert(a.label);
    }
    CHECK(labels.size() == t.size());
}

TEST_CASE("config: JSON round trip and strict schema") {
    GenConfig cfg = small_config();
    cfg.camera_elevation = {0.1, 0.4};
    cfg.asset_templates.resize(5);
    CHECK(gen_config_from_json(to_json(cfg)) == cfg);
    CHECK(gen_config_from_json(Json::object()) == GenConfig{});

    Json bad = to_json(cfg);
    bad["bogus"] = 1;
    CHECK_THROWS_WITH_AS(gen_config_from_json(bad), doctest::Contains("bogus"), Error);

    bad = to_json(cfg);
    bad["visibility_low"] = 0.8;
    CHECK_THROWS_AS(gen_config_from_json(bad), Error);
    bad = to_json(cfg);
    bad["objects_per_scene"] = {1, 5};
    CHECK_THROWS_AS(gen_config_from_json(bad), Error);
    bad = to_json(cfg);
    bad["bbox_side_min_frac"] = 0.8;
    CHECK_THROWS_AS(gen_config_from_json(bad), Error);
}

TEST_CASE("sample_scene: object count, floor contact, determinism") {
    GenConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 2;
    for (std::uint64_t i = 0; i < 200; ++i) {
        auto const l = sample_scene(cfg, i);
        REQUIRE(l.boxes.size() == 2);
        CHECK(validate_layout(l).empty());
        CHECK(l.boxes[0].label != l.boxes[1].label);
        for (auto const& b : l.boxes) {
            CHECK(b.center.z() == doctest::Approx(b.dims.z() / 2));
            CHECK(b.center.head<2>().norm() <= cfg.placement_radius + 1e-12);
            CHECK(b.yaw >= 0);
            CHECK(b.yaw < 2 * kPi);
        }
        CHECK(l.camera.radius >= cfg.camera_radius.lo);
        CHECK(l.camera.radius <= cfg.camera_radius.hi);
        CHECK(l.camera.elevation >= cfg.camera_elevation.lo);
        CHECK(l.camera.elevation <= cfg.camera_elevation.hi);
    }
    CHECK(sample_scene(cfg, 42) == sample_scene(cfg, 42));
    CHECK_FALSE(sample_scene(cfg, 42) == sample_scene(cfg, 43));
    GenConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK_FALSE(sample_scene(cfg, 42) == sample_scene(other, 42));
}

TEST_CASE("sample_scene: noun spans cover the label words") {
    GenConfig const cfg = small_config();
    for (std::uint64_t i = 0; i < 100; ++i) {
        auto const l = sample_scene(cfg, i);
        std::vector<std::string> words;
        std::istringstream in(l.prompt);
        for (std::string w; in >> w;) words.push_back(w);
        for (auto const& b : l.boxes) {
            std::string joined;
            for (int k = b.noun_span.start; k < b.noun_span.end; ++k) {
                joined += (k > b.noun_span.start ? " " : "") + words.at(k);
            }
            CHECK(joined == b.label);
        }
    }
}

double yaw_uniformity_p(std::uint64_t seed, int n) {
    GenConfig cfg;
    cfg.seed = seed;
    std::vector<double> counts(36, 0);
    for (int i = 0; i < n; ++i) {
        double const yaw = sample_scene(cfg, static_cast<std::uint64_t>(i)).boxes[0].yaw;
        counts[std::min(35, static_cast<int>(yaw / (2 * kPi) * 36))] += 1;
    }
    double const expected = n / 36.0;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    return boost::math::cdf(boost::math::complement(
        boost::math::chi_squared_distribution<double>(35), chi2));
}

TEST_CASE("sample_scene: yaw is uniform (chi-squared, 36 bins)") {
    double const p = yaw_uniformity_p(GenConfig{}.seed, 10000);
    MESSAGE("default seed p = " << p);
    CHECK(p > 0.01);

    // A single test at 0.01 fails 1% of the time; across 20 streams more
    // than two failures has probability ~0.001 under uniformity.
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) failures += yaw_uniformity_p(seed, 10000) <= 0.01;
    MESSAGE(failures << " of 20 seeds below p = 0.01");
    CHECK(failures <= 2);
}

TEST_CASE("check_collision: examples") {
    auto const a = floor_box(0, {0, 0}, {1, 1, 1}, 0);
    CHECK(check_collision(a, a));
    CHECK_FALSE(check_collision(a, floor_box(1, {10, 0}, {1, 1, 1}, 0.3)));
    // Face contact has zero measure.
    CHECK_FALSE(check_collision(a, floor_box(1, {1, 0}, {1, 1, 1}, 0)));
    CHECK(check_collision(a, floor_box(1, {0.999, 0}, {1, 1, 1}, 0)));
    // Stacked: z intervals touch only.
    auto top = make_box(1, {0, 0, 1.5}, {1, 1, 1});
    CHECK_FALSE(check_collision(a, top));

    auto const sq0 = floor_box(0, {0, 0}, {2, 2, 1}, 0);
    auto const sq45 = floor_box(1, {2.6, 0}, {2, 2, 1}, kPi / 4);
    std::mt19937_64 rng(5);
    bool const oracle = monte_carlo_collides(sq0, sq45, 1'000'000, rng);
    CHECK_FALSE(check_collision(sq0, sq45));
    CHECK(oracle == check_collision(sq0, sq45));
    CHECK(std::abs(critical_separation(sq0, sq45, {1, 0}) - (1 + std::sqrt(2.0))) < 1e-5);
    CHECK(check_collision(sq0, floor_box(1, {2.4, 0}, {2, 2, 1}, kPi / 4)));
}

TEST_CASE("check_collision: symmetric and agrees with Monte-Carlo oracle") {
    std::mt19937_64 rng(2024);
    int compared = 0, skipped = 0, collisions = 0;
    for (int i = 0; i < 40; ++i) {
        Vector3d const da(uniform(rng, 0.3, 3), uniform(rng, 0.3, 3), uniform(rng, 0.3, 2));
        Vector3d const db(uniform(rng, 0.3, 3), uniform(rng, 0.3, 3), uniform(rng, 0.3, 2));
        auto const a = floor_box(0, {0, 0}, da, uniform(rng, 0, 2 * kPi));
        double const th = uniform(rng, 0, 2 * kPi);
        Vector2d const dir(std::cos(th), std::sin(th));
        auto b = floor_box(1, {0, 0}, db, uniform(rng, 0, 2 * kPi));
        double const crit = critical_separation(a, b, dir);
        double const s = uniform(rng, 0.5, 1.5) * crit;
        b.center.head<2>() = s * dir;
        CHECK(check_collision(a, b) == check_collision(b, a));
        if (std::abs(s - crit) < 1e-3) {
            ++skipped;
            continue;
        }
        bool const sat = check_collision(a, b);
        CHECK(sat == (s < crit));
        CHECK(sat == monte_carlo_collides(a, b, 200'000, rng));
        collisions += sat;
        ++compared;
    }
    MESSAGE(compared << " compared, " << skipped << " near-critical skipped, " << collisions
                     << " colliding");
    CHECK(collisions > 5);
    CHECK(compared - collisions > 5);
}

TEST_CASE("accept_scene: decision table and check order") {
    GenConfig const cfg;
    auto const l2 = separated_layout(2);
    // side 40 of 128 -> 0.3125 of the width, inside the size window.
    CHECK(accept_scene(l2, fake_render({{40, 1600}, {40, 1600}}), cfg).verdict == Verdict::AllVisible);
    CHECK(accept_scene(l2, fake_render({{40, 400}, {40, 1440}}), cfg).verdict == Verdict::TooHidden);
    auto const ok = accept_scene(l2, fake_render({{40, 880}, {40, 1520}}), cfg);
    CHECK(ok.verdict == Verdict::Accepted);
    CHECK(ok.boxes[0].visibility.value() == doctest::Approx(0.55));
    CHECK(ok.min_visibility.value() == doctest::Approx(0.55));
    CHECK(ok.boxes[0].bbox_side_frac == doctest::Approx(40.0 / 128));

    // Boundaries are inclusive: x = 0.3 passes, min x = 0.7 counts as occluded.
    CHECK(accept_scene(l2, fake_render({{40, 480}, {40, 1120}}), cfg).verdict == Verdict::Accepted);
    CHECK(accept_scene(l2, fake_render({{16, 256}, {40, 1120}}), cfg).verdict == Verdict::Accepted);
    CHECK(accept_scene(l2, fake_render({{15, 225}, {40, 1120}}), cfg).verdict == Verdict::TooSmall);
    CHECK(accept_scene(l2, fake_render({{97, 97 * 97}, {20, 200}}), cfg).verdict == Verdict::TooLarge);

    // Order: collision, offscreen, size, too_hidden, all_visible.
    auto colliding = l2;
    colliding.boxes[1].center = colliding.boxes[0].center;
    CHECK(accept_scene(colliding, fake_render({{0, 0}, {10, 1}}), cfg).verdict == Verdict::Collision);
    CHECK(accept_scene(l2, fake_render({{0, 0}, {10, 1}}), cfg).verdict == Verdict::Offscreen);
    CHECK(accept_scene(l2, fake_render({{10, 1}, {40, 1600}}), cfg).verdict == Verdict::TooSmall);
    CHECK(accept_scene(l2, fake_render({{40, 100}, {40, 1600}}), cfg).verdict == Verdict::TooHidden);

    auto const report = accept_scene(l2, fake_render({{40, 400}, {40, 1440}}), cfg);
    CHECK(report.detail.find("box 0") != std::string::npos);
    auto const round = accept_report_from_json(to_json(report));
    CHECK(to_json(round) == to_json(report));
}

TEST_CASE("accept_scene: real render of two disjoint boxes is all_visible") {
    auto l = make_layout({floor_box(0, {0, -2}, {1.5, 1.5, 1.5}, 0), floor_box(1, {0, 2}, {1.5, 1.5, 1.5}, 0)},
                         make_camera(8, 0, 0.1, 128));
    auto const r = accept_scene(l, render_oscr(l), GenConfig{});
    CHECK(r.verdict == Verdict::AllVisible);
    CHECK(r.min_visibility.value() == 1.0);
}

TEST_CASE("generate_dataset: small run, artifacts, re-check") {
    GenConfig const cfg = small_config();
    fs::path const dir = scratch_dir("small");
    auto const result = generate_dataset(cfg, dir);
    CHECK_FALSE(result.budget_exhausted);
    auto const& m = result.manifest;
    REQUIRE(m["scenes"].size() == 10);
    CHECK(m["status"] == "complete");
    CHECK(m["stats"]["accepted"] == 10);
    CHECK(load_json_file(dir / "manifest.json") == m);
    for (auto const& s : m["scenes"]) {
        CHECK(s["report"]["verdict"] == "accepted");
        fs::path const sd = dir / s["dir"].get<std::string>();
        for (char const* f : {"layout.json", "oscr.png", "depth.pfm", "depth.json", "meta.json", "accept.json"}) {
            CHECK(fs::exists(sd / f));
        }
        auto const layout = load_layout(sd / "layout.json");
        CHECK(layout == layout_from_json(s["layout"]));
        for (auto const& b : layout.boxes) {
            CHECK(fs::exists(sd / ("amodal_" + std::to_string(b.id) + ".png")));
            CHECK(fs::exists(sd / ("visible_" + std::to_string(b.id) + ".png")));
        }
        auto const again = accept_scene(layout, render_oscr(layout, default_face_colors(), cfg.alpha), cfg);
        CHECK(again.accepted());
        CHECK(to_json(again) == s["report"]);
    }
    fs::remove_all(dir);
}

TEST_CASE("generate_dataset: deterministic and independent of thread count") {
    GenConfig cfg = small_config();
    cfg.n_scenes = 6;
    fs::path const a = scratch_dir("det_a"), b = scratch_dir("det_b");
    generate_dataset(cfg, a, {.threads = 1, .write_images = true});
    generate_dataset(cfg, b, {.threads = 3, .write_images = true});
    CHECK(read_text_file(a / "manifest.json") == read_text_file(b / "manifest.json"));
    CHECK(read_text_file(a / "scenes/scene_000003/oscr.png") ==
          read_text_file(b / "scenes/scene_000003/oscr.png"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("generate_dataset: impossible window exhausts the budget") {
    GenConfig cfg = small_config();
    cfg.visibility_low = 0.69;
    cfg.visibility_high = 0.70;
    cfg.max_rejections_per_scene = 500;
    fs::path const dir = scratch_dir("budget");
    auto const r = generate_dataset(cfg, dir, {.threads = 1, .write_images = false});
    CHECK(r.budget_exhausted);
    CHECK(r.manifest["status"] == "budget_exhausted");
    CHECK(r.manifest["scenes"].size() < 10);
    CHECK(fs::exists(dir / "manifest.json"));
    fs::remove_all(dir);
}

TEST_CASE("filter_augmentations: threshold, missing scores, monotone") {
    Json manifest{{"scenes", Json::array()}};
    auto scene = [](int id, int n) {
        Json boxes = Json::array();
        for (int b = 0; b < n; ++b) boxes.push_back({{"id", b}});
        return Json{{"id", id}, {"layout", {{"boxes", boxes}}}};
    };
    manifest["scenes"] = {scene(0, 2), scene(1, 2), scene(2, 2)};
    Json const scores_json = parse_json(R"({"scenes":[
        {"id":0,"box_scores":{"0":0.31,"1":0.28}},
        {"id":1,"box_scores":{"0":0.31,"1":0.19}},
        {"id":2,"box_scores":{"0":0.40}}]})");
    ScoreTable const scores = score_table_from_json(scores_json);
    Json const f = filter_augmentations(manifest, scores);
    CHECK(f["kept"] == Json::array({0}));
    REQUIRE(f["rejected"].size() == 2);
    CHECK(f["rejected"][0]["id"] == 1);
    CHECK(f["rejected"][0]["reason"] == "low_score");
    CHECK(f["rejected"][1]["id"] == 2);
    CHECK(f["rejected"][1]["reason"] == "missing_score");
    CHECK(f["rejected"][1]["box_id"] == 1);

    std::mt19937_64 rng(3);
    ScoreTable random_scores;
    Json many{{"scenes", Json::array()}};
    for (int s = 0; s < 60; ++s) {
        many["scenes"].push_back(scene(s, 3));
        for (int b = 0; b < 3; ++b) {
            if (uniform(rng, 0, 1) < 0.95) random_scores.set(s, b, uniform(rng, -0.2, 0.6));
        }
    }
    std::set<int> previous;
    bool first = true;
    for (double t = -1.0; t <= 1.0; t += 0.05) {
        std::set<int> kept;
        for (auto const& id : filter_augmentations(many, random_scores, t)["kept"]) kept.insert(id.get<int>());
        if (!first) CHECK(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end()));
        previous = kept;
        first = false;
    }
}

TEST_CASE("score_table_from_json: errors name the entry") {
    CHECK_THROWS_WITH_AS(score_table_from_json(parse_json(R"({"scenes":[{"id":0,"box_scores":{"0":1.5}}]})")),
                         doctest::Contains("scores.scenes[0].box_scores[\"0\"]"), Error);
    CHECK_THROWS_WITH_AS(score_table_from_json(parse_json(R"({"scenes":[{"id":0,"box_scores":{"x":0.5}}]})")),
                         doctest::Contains("box_scores[\"x\"]"), Error);
    CHECK_THROWS_WITH_AS(score_table_from_json(parse_json(R"({"scenes":[{"id":0}]})")),
                         doctest::Contains("scores.scenes[0].box_scores"), Error);
    CHECK_THROWS_WITH_AS(score_table_from_json(parse_json(R"({"scenes":[{"id":0,"box_scores":{"0":"a"}}]})")),
                         doctest::Contains("box_scores[\"0\"]"), Error);
}

TEST_CASE("dataset_stats: counts, edges, empty manifest") {
    GenConfig cfg = small_config();
    cfg.n_scenes = 1;
    fs::path const dir = scratch_dir("stats");
    auto const m = generate_dataset(cfg, dir, {.threads = 1, .write_images = false}).manifest;
    auto const s = dataset_stats(m);
    auto const n_boxes = static_cast<long>(m["scenes"][0]["layout"]["boxes"].size());
    CHECK(s.min_visibility.total() == 1);
    CHECK(s.camera_elevation.total() == 1);
    CHECK(s.yaw.total() == n_boxes);
    CHECK(s.bbox_side_frac.total() == n_boxes);
    CHECK(s.min_visibility.counts.size() == kHistogramBins);

    Json flat = m;
    for (int k = 0; k < 5; ++k) flat["scenes"].push_back(m["scenes"][0]);
    for (auto& sc : flat["scenes"]) {
        for (auto& b : sc["layout"]["boxes"]) b["yaw"] = 0.0;
    }
    auto const fs_ = dataset_stats(flat);
    CHECK(std::count_if(fs_.yaw.counts.begin(), fs_.yaw.counts.end(), [](long c) { return c > 0; }) == 1);
    CHECK(fs_.yaw.counts[0] == 6 * n_boxes);

    Json empty = m;
    empty["scenes"] = Json::array();
    CHECK_THROWS_AS_MESSAGE(dataset_stats(empty), Error, "EmptyManifest");
    try {
        dataset_stats(empty);
    } catch (Error const& e) {
        CHECK(e.code() == Errc::EmptyManifest);
    }

    Histogram h{"x", 0, 1, std::vector<long>(20, 0)};
    h.add(0.0);
    h.add(1.0);
    h.add(0.05);
    CHECK(h.counts[0] == 1);
    CHECK(h.counts[1] == 1);
    CHECK(h.counts[19] == 1);
    auto const img = render_histogram(h, 200, 100);
    CHECK(img.width() == 200);
    CHECK(img.height() == 100);
    auto const j = to_json(s);
    CHECK(j["histograms"]["yaw"]["edges"].size() == kHistogramBins + 1);
    fs::remove_all(dir);
}
