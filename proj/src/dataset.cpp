#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "oscr/artifacts.hpp"
#include "oscr/error.hpp"
#include "oscr/procgen.hpp"

namespace oscr {

namespace {

std::string scene_dir_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%06d", id);
    return std::string("scenes/") + buf;
}

std::vector<CandidateResult> evaluate_batch(GenConfig const& cfg, std::uint64_t first,
                                            int count, int threads) {
    std::vector<CandidateResult> out(count);
    auto work = [&](int t) {
        for (int k = t; k < count; k += threads) out[k] = evaluate_candidate(cfg, first + k);
    };
    if (threads <= 1) {
        work(0);
        return out;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                work(t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto const& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace

GenerationResult generate_dataset(GenConfig const& cfg, std::filesystem::path const& out_dir,
                                  GenerateOptions const& options) {
    validate_config(cfg);
    std::filesystem::create_directories(out_dir);
    int const threads = std::max(1, options.threads);
    int const batch = threads == 1 ? 1 : threads * 4;

    Json scenes = Json::array();
    std::map<std::string, long> rejections;
    for (Verdict v : {Verdict::Collision, Verdict::Offscreen, Verdict::TooSmall, Verdict::TooLarge,
                      Verdict::TooHidden, Verdict::AllVisible}) {
        rejections[std::string(to_string(v))] = 0;
    }
    long candidates = 0;
    int consecutive = 0;
    bool exhausted = false;
    std::uint64_t next_index = 0;

    while (static_cast<int>(scenes.size()) < cfg.n_scenes && !exhausted) {
        auto results = evaluate_batch(cfg, next_index, batch, threads);
        next_index += batch;
        for (auto& c : results) {
            if (static_cast<int>(scenes.size()) >= cfg.n_scenes) break;
            ++candidates;
            if (!c.report.accepted()) {
                ++rejections[std::string(to_string(c.report.verdict))];
                if (++consecutive > cfg.max_rejections_per_scene) {
                    exhausted = true;
                    break;
                }
                continue;
            }
            consecutive = 0;
            int const id = static_cast<int>(scenes.size());
            std::string const dir = scene_dir_name(id);
            Json const layout = to_json(c.layout);
            Json const report = to_json(c.report);
            if (options.write_images) {
                std::filesystem::path const path = out_dir / dir;
                write_render_artifacts(*c.render, path);
                write_text_file(path / "layout.json", dump_json(layout));
                write_text_file(path / "accept.json", dump_json(report));
            }
            scenes.push_back({{"id", id},
                              {"candidate_index", c.index},
                              {"dir", dir},
                              {"layout", layout},
                              {"report", report}});
        }
    }

    long const accepted = static_cast<long>(scenes.size());
    Json stats{{"candidates", candidates},
               {"accepted", accepted},
               {"acceptance_rate", candidates > 0 ? static_cast<double>(accepted) / candidates : 0.0},
               {"rejections", rejections}};
    GenerationResult result;
    result.budget_exhausted = exhausted;
    result.manifest = Json{{"v", 1},
                           {"status", exhausted ? "budget_exhausted" : "complete"},
                           {"config", to_json(cfg)},
                           {"stats", stats},
                           {"scenes", scenes}};
    write_text_file(out_dir / "manifest.json", dump_json(result.manifest));
    return result;
}

// Augmentation filtering ------------------------------------------------------

std::optional<double> ScoreTable::get(int scene_id, int box_id) const {
    auto it = scores_.find({scene_id, box_id});
    if (it == scores_.end()) return std::nullopt;
    return it->second;
}

ScoreTable score_table_from_json(Json const& j) {
    if (!j.is_object()) throw Error(Errc::SchemaError, "scores: expected an object");
    require_known_fields(j, "scores", {"v", "scenes"});
    Json const& scenes = get_field(j, "scenes", "scores");
    if (!scenes.is_array()) throw Error(Errc::SchemaError, "scores.scenes: expected an array");
    ScoreTable table;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "scores.scenes[" + std::to_string(i) + "]";
        require_known_fields(scenes[i], path, {"id", "box_scores"});
        int const scene_id = get_int(scenes[i], "id", path);
        Json const& box_scores = get_field(scenes[i], "box_scores", path);
        if (!box_scores.is_object()) {
            throw Error(Errc::SchemaError, path + ".box_scores: expected an object");
        }
        for (auto const& [key, value] : box_scores.items()) {
            std::string const entry = path + ".box_scores[\"" + key + "\"]";
            int box_id = 0;
            std::size_t used = 0;
            try {
                box_id = std::stoi(key, &used);
            } catch (std::exception const&) {
                used = 0;
            }
            if (used != key.size() || key.empty()) {
                throw Error(Errc::SchemaError, entry + ": key is not an integer box id");
            }
            if (!value.is_number()) throw Error(Errc::SchemaError, entry + ": expected a number");
            double const s = value.get<double>();
            if (!(s >= -1.0 && s <= 1.0)) {
                throw Error(Errc::SchemaError, entry + ": score outside [-1, 1]");
            }
            table.set(scene_id, box_id, s);
        }
    }
    return table;
}

Json filter_augmentations(Json const& manifest, ScoreTable const& scores, double threshold) {
    Json const& scenes = get_field(manifest, "scenes", "manifest");
    Json kept_ids = Json::array(), kept = Json::array(), rejected = Json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "manifest.scenes[" + std::to_string(i) + "]";
        int const scene_id = get_int(scenes[i], "id", path);
        Json const& boxes = get_field(get_field(scenes[i], "layout", path), "boxes", path + ".layout");
        Json missing = nullptr, low = nullptr;
        for (auto const& b : boxes) {
            int const box_id = get_int(b, "id", path + ".layout.boxes[]");
            auto const s = scores.get(scene_id, box_id);
            if (!s) {
                if (missing.is_null()) {
                    missing = {{"id", scene_id}, {"reason", "missing_score"}, {"box_id", box_id}};
                }
            } else if (*s < threshold && low.is_null()) {
                low = {{"id", scene_id}, {"reason", "low_score"}, {"box_id", box_id}, {"score", *s}};
            }
        }
        if (!missing.is_null()) {
            rejected.push_back(missing);
        } else if (!low.is_null()) {
            rejected.push_back(low);
        } else {
            kept_ids.push_back(scene_id);
            kept.push_back(scenes[i]);
        }
    }
    return Json{{"v", 1},
                {"threshold", threshold},
                {"kept", kept_ids},
                {"rejected", rejected},
                {"scenes", kept}};
}

// Statistics ------------------------------------------------------------------

long Histogram::total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
}

double Histogram::bin_center(std::size_t i) const {
    double const w = (hi - lo) / static_cast<double>(counts.size());
    return lo + (static_cast<double>(i) + 0.5) * w;
}

void Histogram::add(double value) {
    auto const n = static_cast<long>(counts.size());
    auto bin = static_cast<long>(std::floor((value - lo) / (hi - lo) * static_cast<double>(n)));
    counts[std::clamp(bin, 0L, n - 1)] += 1;
}

namespace {

Histogram make_histogram(std::string name, double lo, double hi) {
    return Histogram{std::move(name), lo, hi, std::vector<long>(kHistogramBins, 0)};
}

}  // namespace

DatasetStats dataset_stats(Json const& manifest) {
    if (!manifest.is_object() || !manifest.contains("scenes") || !manifest["scenes"].is_array()) {
        throw Error(Errc::SchemaError, "manifest: missing field manifest.scenes");
    }
    Json const& scenes = manifest["scenes"];
    if (scenes.empty()) throw Error(Errc::EmptyManifest, "manifest lists no scenes");

    DatasetStats s{make_histogram("min_visibility", 0.0, 1.0),
                   make_histogram("yaw", 0.0, 2.0 * std::numbers::pi),
                   make_histogram("bbox_side_frac", 0.0, 1.0),
                   make_histogram("camera_elevation", 0.0, std::numbers::pi / 2),
                   0, 0};
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "manifest.scenes[" + std::to_string(i) + "]";
        SceneLayout const layout = layout_from_json(get_field(scenes[i], "layout", path));
        AcceptReport const report = accept_report_from_json(get_field(scenes[i], "report", path));
        ++s.n_scenes;
        s.camera_elevation.add(layout.camera.elevation);
        if (report.min_visibility) s.min_visibility.add(*report.min_visibility);
        for (auto const& b : layout.boxes) {
            ++s.n_boxes;
            s.yaw.add(normalize_yaw(b.yaw));
        }
        for (auto const& b : report.boxes) s.bbox_side_frac.add(b.bbox_side_frac);
    }
    return s;
}

Json to_json(DatasetStats const& s) {
    auto h = [](Histogram const& x) {
        Json edges = Json::array();
        double const w = (x.hi - x.lo) / static_cast<double>(x.counts.size());
        for (std::size_t i = 0; i <= x.counts.size(); ++i) edges.push_back(x.lo + w * static_cast<double>(i));
        return Json{{"name", x.name}, {"lo", x.lo}, {"hi", x.hi}, {"edges", edges},
                    {"counts", x.counts}, {"total", x.total()}};
    };
    return Json{{"v", 1},
                {"n_scenes", s.n_scenes},
                {"n_boxes", s.n_boxes},
                {"binning", "20 equal-width bins over [lo, hi]; bins are [e_k, e_k+1), the top edge falls in the last bin"},
                {"histograms",
                 {{"min_visibility", h(s.min_visibility)},
                  {"yaw", h(s.yaw)},
                  {"bbox_side_frac", h(s.bbox_side_frac)},
                  {"camera_elevation", h(s.camera_elevation)}}}};
}

RgbImage render_histogram(Histogram const& h, int width, int height) {
    RgbImage img(height, width, Eigen::Vector3d::Ones());
    int const margin = 10;
    int const n = static_cast<int>(h.counts.size());
    long const peak = n > 0 ? *std::max_element(h.counts.begin(), h.counts.end()) : 0;
    int const plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    int const baseline = height - margin;
    Eigen::Vector3d const bar(0.25, 0.45, 0.8), axis(0.0, 0.0, 0.0);
    for (int i = 0; i < n && peak > 0; ++i) {
        int const x0 = margin + plot_w * i / n;
        int const x1 = margin + plot_w * (i + 1) / n - 1;
        int const bar_h = static_cast<int>(std::lround(static_cast<double>(plot_h) * h.counts[i] / peak));
        for (int y = baseline - bar_h; y < baseline; ++y) {
            for (int x = x0; x < x1; ++x) img.set(y, x, bar);
        }
    }
    for (int x = margin; x < width - margin; ++x) img.set(baseline, x, axis);
    for (int y = margin; y <= baseline; ++y) img.set(y, margin - 1, axis);
    return img;
}

}  // namespace oscr
