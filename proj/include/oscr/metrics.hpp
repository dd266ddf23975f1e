#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oscr/json_io.hpp"
#include "oscr/procgen.hpp"

namespace oscr {

struct ObjectEval {
    int box_id = 0;
    double gt_depth = 0;  // camera-space depth of the box center
    double gt_yaw = 0;    // radians
    std::optional<double> est_depth;
    std::optional<double> est_yaw;  // radians
    bool retained = true;           // passed the objectness filter
};

struct SceneEval {
    int scene_id = 0;
    std::vector<ObjectEval> objects;
};

struct MetricsConfig {
    double objectness_threshold = 0.25;
    double tie_tolerance = 1e-6;
};

struct DepthOrderResult {
    double pair_accuracy = 0;
    double correct_pairs_per_image = 0;  // averaged over images with >= 1 pair
    long n_pairs = 0;
    long n_correct = 0;
    long n_images = 0;
};

/// Pairwise ordering agreement over retained objects with depth estimates.
/// Throws NoPairs when nothing is comparable.
DepthOrderResult depth_order_score(std::vector<SceneEval> const& scenes,
                                   MetricsConfig const& cfg = {});

/// Circular error in degrees, [0, 180]; relaxed forgives 180 degree flips, [0, 90].
double angular_error_deg(double gt_deg, double est_deg, bool relaxed);

struct ObjectnessAggregate {
    std::optional<double> mean;  // over every scored box
    std::vector<std::pair<int, int>> retained;  // (scene, box) with score >= threshold
    std::vector<std::pair<int, int>> missing;
    long n_scored = 0;
};

ObjectnessAggregate objectness_aggregate(Json const& manifest, ScoreTable const& scores,
                                         double threshold);

struct Estimate {
    std::optional<double> depth;
    std::optional<double> yaw;
};
using EstimateTable = std::map<std::pair<int, int>, Estimate>;

/// {"scenes":[{"id", "boxes":[{"id", "depth": float|null, "yaw": float|null}]}]}
EstimateTable estimates_from_json(Json const& j);

/// Ground truth (center depth, world yaw) for every box of every manifest
/// scene, estimates attached where present, retention from the scores.
std::vector<SceneEval> eval_inputs(Json const& manifest, EstimateTable const& estimates,
                                   ScoreTable const* scores, MetricsConfig const& cfg);

struct MetricReport {
    std::optional<DepthOrderResult> depth;
    std::optional<double> angular_error_deg;
    std::optional<double> relaxed_angular_error_deg;
    long n_angular = 0;
    std::optional<ObjectnessAggregate> objectness;
    long n_objects = 0;
    long n_filtered = 0;  // objects dropped by the objectness filter
    bool all_filtered = false;
    std::vector<Json> per_scene;
};

/// Without scores every object is retained and no objectness is reported.
MetricReport evaluate(Json const& manifest, EstimateTable const& estimates,
                      ScoreTable const* scores, MetricsConfig const& cfg = {});

Json to_json(MetricReport const& r);
std::string format_table(MetricReport const& r);

}  // namespace oscr
