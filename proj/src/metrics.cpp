#include "oscr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "oscr/error.hpp"

namespace oscr {

namespace {

int tol_sign(double d, double tol) {
    if (std::abs(d) < tol) return 0;
    return d > 0 ? 1 : -1;
}

double to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

Json opt(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

DepthOrderResult depth_order_score(std::vector<SceneEval> const& scenes, MetricsConfig const& cfg) {
    DepthOrderResult r;
    for (auto const& s : scenes) {
        std::vector<ObjectEval const*> kept;
        for (auto const& o : s.objects) {
            if (o.retained && o.est_depth) kept.push_back(&o);
        }
        long pairs = 0, correct = 0;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size(); ++j) {
                int const est = tol_sign(*kept[i]->est_depth - *kept[j]->est_depth, cfg.tie_tolerance);
                int const gt = tol_sign(kept[i]->gt_depth - kept[j]->gt_depth, cfg.tie_tolerance);
                ++pairs;
                if (est == gt) ++correct;
            }
        }
        if (pairs > 0) {
            ++r.n_images;
            r.n_pairs += pairs;
            r.n_correct += correct;
        }
    }
    if (r.n_pairs == 0) throw Error(Errc::NoPairs, "no scene has two comparable objects");
    r.pair_accuracy = static_cast<double>(r.n_correct) / r.n_pairs;
    r.correct_pairs_per_image = static_cast<double>(r.n_correct) / r.n_images;
    return r;
}

double angular_error_deg(double gt_deg, double est_deg, bool relaxed) {
    auto strict = [](double delta) {
        double const d = std::fmod(std::abs(delta), 360.0);
        return std::min(d, 360.0 - d);
    };
    double const delta = est_deg - gt_deg;
    double const e = strict(delta);
    return relaxed ? std::min(e, strict(delta + 180.0)) : e;
}

ObjectnessAggregate objectness_aggregate(Json const& manifest, ScoreTable const& scores,
                                         double threshold) {
    ObjectnessAggregate a;
    double sum = 0;
    Json const& scenes = get_field(manifest, "scenes", "manifest");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "manifest.scenes[" + std::to_string(i) + "]";
        int const scene_id = get_int(scenes[i], "id", path);
        SceneLayout const layout = layout_from_json(get_field(scenes[i], "layout", path));
        for (auto const& b : layout.boxes) {
            auto const s = scores.get(scene_id, b.id);
            if (!s) {
                a.missing.emplace_back(scene_id, b.id);
                continue;
            }
            ++a.n_scored;
            sum += *s;
            if (*s >= threshold) a.retained.emplace_back(scene_id, b.id);
        }
    }
    if (a.n_scored > 0) a.mean = sum / a.n_scored;
    return a;
}

EstimateTable estimates_from_json(Json const& j) {
    require_known_fields(j, "estimates", {"v", "scenes"});
    Json const& scenes = get_field(j, "scenes", "estimates");
    if (!scenes.is_array()) throw Error(Errc::SchemaError, "estimates.scenes: expected an array");
    EstimateTable t;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "estimates.scenes[" + std::to_string(i) + "]";
        require_known_fields(scenes[i], path, {"id", "boxes"});
        int const scene_id = get_int(scenes[i], "id", path);
        Json const& boxes = get_field(scenes[i], "boxes", path);
        if (!boxes.is_array()) throw Error(Errc::SchemaError, path + ".boxes: expected an array");
        for (std::size_t k = 0; k < boxes.size(); ++k) {
            std::string const bp = path + ".boxes[" + std::to_string(k) + "]";
            require_known_fields(boxes[k], bp, {"id", "depth", "yaw"});
            int const box_id = get_int(boxes[k], "id", bp);
            Estimate e;
            for (auto [key, slot] : {std::pair{"depth", &e.depth}, std::pair{"yaw", &e.yaw}}) {
                if (!boxes[k].contains(key) || boxes[k][key].is_null()) continue;
                double const v = get_number(boxes[k], key, bp);
                if (!std::isfinite(v)) throw Error(Errc::SchemaError, bp + "." + key + ": not finite");
                *slot = v;
            }
            if (!t.emplace(std::pair{scene_id, box_id}, e).second) {
                throw Error(Errc::SchemaError, bp + ": duplicate estimate for scene " +
                                                   std::to_string(scene_id) + " box " +
                                                   std::to_string(box_id));
            }
        }
    }
    return t;
}

std::vector<SceneEval> eval_inputs(Json const& manifest, EstimateTable const& estimates,
                                   ScoreTable const* scores, MetricsConfig const& cfg) {
    std::vector<SceneEval> out;
    std::set<std::pair<int, int>> known;
    Json const& scenes = get_field(manifest, "scenes", "manifest");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        std::string const path = "manifest.scenes[" + std::to_string(i) + "]";
        SceneEval s;
        s.scene_id = get_int(scenes[i], "id", path);
        SceneLayout const layout = layout_from_json(get_field(scenes[i], "layout", path));
        auto const pose = camera_pose(layout.camera);
        for (auto const& b : layout.boxes) {
            ObjectEval o;
            o.box_id = b.id;
            o.gt_depth = pose.to_camera(b.center).z();
            o.gt_yaw = b.yaw;
            if (auto it = estimates.find({s.scene_id, b.id}); it != estimates.end()) {
                o.est_depth = it->second.depth;
                o.est_yaw = it->second.yaw;
            }
            if (scores) {
                auto const sc = scores->get(s.scene_id, b.id);
                o.retained = sc && *sc >= cfg.objectness_threshold;
            }
            known.insert({s.scene_id, b.id});
            s.objects.push_back(o);
        }
        out.push_back(std::move(s));
    }
    for (auto const& [key, e] : estimates) {
        if (!known.contains(key)) {
            throw Error(Errc::SchemaError, "estimates: scene " + std::to_string(key.first) + " box " +
                                               std::to_string(key.second) + " is not in the manifest");
        }
    }
    return out;
}

MetricReport evaluate(Json const& manifest, EstimateTable const& estimates, ScoreTable const* scores,
                      MetricsConfig const& cfg) {
    std::vector<SceneEval> const inputs = eval_inputs(manifest, estimates, scores, cfg);
    MetricReport r;
    if (scores) r.objectness = objectness_aggregate(manifest, *scores, cfg.objectness_threshold);

    double strict_sum = 0, relaxed_sum = 0;
    long evaluated = 0;
    for (auto const& s : inputs) {
        double s_strict = 0, s_relaxed = 0;
        long s_ang = 0, s_kept = 0;
        for (auto const& o : s.objects) {
            ++r.n_objects;
            if (!o.retained) {
                ++r.n_filtered;
                continue;
            }
            if (o.est_depth || o.est_yaw) ++s_kept;
            if (!o.est_yaw) continue;
            double const gt = to_deg(o.gt_yaw), est = to_deg(*o.est_yaw);
            s_strict += angular_error_deg(gt, est, false);
            s_relaxed += angular_error_deg(gt, est, true);
            ++s_ang;
        }
        evaluated += s_kept;
        strict_sum += s_strict;
        relaxed_sum += s_relaxed;
        r.n_angular += s_ang;
        Json entry{{"id", s.scene_id}, {"objects", s.objects.size()}, {"evaluated", s_kept}};
        entry["angular_error_deg"] = s_ang ? Json(s_strict / s_ang) : Json(nullptr);
        entry["relaxed_angular_error_deg"] = s_ang ? Json(s_relaxed / s_ang) : Json(nullptr);
        try {
            auto const d = depth_order_score({s}, cfg);
            entry["pairs"] = d.n_pairs;
            entry["correct_pairs"] = d.n_correct;
        } catch (Error const&) {
            entry["pairs"] = 0;
            entry["correct_pairs"] = 0;
        }
        r.per_scene.push_back(std::move(entry));
    }
    if (r.n_angular > 0) {
        r.angular_error_deg = strict_sum / r.n_angular;
        r.relaxed_angular_error_deg = relaxed_sum / r.n_angular;
    }
    try {
        r.depth = depth_order_score(inputs, cfg);
    } catch (Error const& e) {
        if (e.code() != Errc::NoPairs) throw;
    }
    r.all_filtered = evaluated == 0;
    return r;
}

Json to_json(MetricReport const& r) {
    Json j{{"v", 1}};
    if (r.depth) {
        j["depth_pair_accuracy"] = r.depth->pair_accuracy;
        j["correct_pairs_per_image"] = r.depth->correct_pairs_per_image;
        j["depth_pairs"] = r.depth->n_pairs;
        j["depth_correct_pairs"] = r.depth->n_correct;
        j["depth_images"] = r.depth->n_images;
    } else {
        j["depth_pair_accuracy"] = nullptr;
        j["correct_pairs_per_image"] = nullptr;
        j["depth_pairs"] = 0;
    }
    j["angular_error_deg"] = opt(r.angular_error_deg);
    j["relaxed_angular_error_deg"] = opt(r.relaxed_angular_error_deg);
    j["angular_objects"] = r.n_angular;
    if (r.objectness) {
        Json missing = Json::array();
        for (auto const& [s, b] : r.objectness->missing) missing.push_back({{"scene", s}, {"box", b}});
        j["objectness_mean"] = opt(r.objectness->mean);
        j["objectness_scored"] = r.objectness->n_scored;
        j["objectness_retained"] = r.objectness->retained.size();
        j["missing_scores"] = missing;
    } else {
        j["objectness_mean"] = nullptr;
    }
    j["n_objects"] = r.n_objects;
    j["n_filtered"] = r.n_filtered;
    j["all_filtered"] = r.all_filtered;
    j["scenes"] = r.per_scene;
    return j;
}

std::string format_table(MetricReport const& r) {
    auto cell = [](std::optional<double> v, char const* fmt) {
        if (!v) return std::string("n/a");
        char buf[64];
        std::snprintf(buf, sizeof buf, fmt, *v);
        return std::string(buf);
    };
    std::optional<double> acc, cpi, obj;
    if (r.depth) {
        acc = r.depth->pair_accuracy;
        cpi = r.depth->correct_pairs_per_image;
    }
    if (r.objectness) obj = r.objectness->mean;
    std::string out;
    auto row = [&](char const* name, std::string const& value) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-28s %s\n", name, value.c_str());
        out += buf;
    };
    row("depth ord. (pair accuracy)", cell(acc, "%.4f"));
    row("depth ord. (correct/image)", cell(cpi, "%.4f"));
    row("obj. score (mean)", cell(obj, "%.4f"));
    row("angular err. (deg)", cell(r.angular_error_deg, "%.2f"));
    row("relaxed angular err. (deg)", cell(r.relaxed_angular_error_deg, "%.2f"));
    row("objects / filtered", std::to_string(r.n_objects) + " / " + std::to_string(r.n_filtered));
    if (r.all_filtered) out += "all objects filtered or without estimates\n";
    return out;
}

}  // namespace oscr
