#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oscr/json_io.hpp"
#include "oscr/render.hpp"
#include "oscr/scene.hpp"

namespace oscr {

// ---------------------------------------------------------------------------
// Asset templates
// ---------------------------------------------------------------------------

/// Nominal object dimensions (width x, depth y, height z), front along +Y.
/// Sampled dims are nominal * (1 + U(-jitter, jitter)) per axis.
struct AssetTemplate {
    std::string label;
    Eigen::Vector3d dims;
    double jitter = 0.15;
    bool operator==(AssetTemplate const&) const = default;
};

/// Built-in catalog of common objects (animals, vehicles, furniture, ...).
std::vector<AssetTemplate> const& default_templates();

Json to_json(AssetTemplate const& t);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Range {
    double lo;
    double hi;
    bool operator==(Range const&) const = default;
};

struct GenConfig {
    std::uint64_t seed = 0;
    int n_scenes = 100;
    int objects_min = 4;
    int objects_max = 4;
    double placement_radius = 3.0;  // object centers lie in this floor disc
    Range camera_radius{6.0, 8.0};
    Range camera_elevation{0.0, 0.1};  // radians
    double fov_deg = kDefaultFovDeg;
    int image_size = 256;
    std::vector<AssetTemplate> asset_templates = default_templates();
    double visibility_low = 0.3;
    double visibility_high = 0.7;
    double bbox_side_min_frac = 0.125;
    double bbox_side_max_frac = 0.750;
    double score_threshold = 0.25;
    int max_rejections_per_scene = 500;
    double alpha = 0.5;

    bool operator==(GenConfig const&) const = default;
};

/// Throws ValidationFailed naming the first broken invariant.
void validate_config(GenConfig const& cfg);

Json to_json(GenConfig const& cfg);
/// Every field optional (defaults above); unknown fields rejected.
GenConfig gen_config_from_json(Json const& j);

// ---------------------------------------------------------------------------
// Sampling and filtering
// ---------------------------------------------------------------------------

/// Independent deterministic random stream for (seed, index).
class SceneRng {
public:
    SceneRng(std::uint64_t seed, std::uint64_t index);
    std::uint64_t next();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi);  // inclusive

private:
    std::mt19937_64 engine_;
};

/// Candidate scene: boxes resting on the floor inside the placement disc,
/// camera on the hemisphere looking at the origin. Deterministic in
/// (cfg.seed, index).
SceneLayout sample_scene(GenConfig const& cfg, std::uint64_t index);

/// Volumes intersect with positive measure (touching does not count).
bool check_collision(OrientedBox const& a, OrientedBox const& b);

enum class Verdict {
    Accepted,
    Collision,
    Offscreen,
    TooSmall,
    TooLarge,
    TooHidden,
    AllVisible,
};

std::string_view to_string(Verdict v) noexcept;

struct BoxReport {
    int box_id;
    long amodal_px;
    long visible_px;
    std::optional<double> visibility;  // absent when off screen
    double bbox_side_frac;             // largest amodal bbox side / image width
};

struct AcceptReport {
    Verdict verdict = Verdict::Accepted;
    std::string detail;  // which box or pair failed
    std::vector<BoxReport> boxes;
    std::optional<double> min_visibility;

    bool accepted() const { return verdict == Verdict::Accepted; }
};

/// First colliding pair in box-list order, if any.
std::optional<std::pair<int, int>> find_collision(SceneLayout const& layout);

/// Check order: collision, offscreen, size, too_hidden, all_visible.
AcceptReport accept_scene(SceneLayout const& candidate, RenderOutput const& render,
                          GenConfig const& cfg);

Json to_json(AcceptReport const& r);
AcceptReport accept_report_from_json(Json const& j);

struct CandidateResult {
    std::uint64_t index;
    SceneLayout layout;
    AcceptReport report;
    std::optional<RenderOutput> render;  // absent when rejected before rendering
};

/// sample -> render -> accept for one candidate index.
CandidateResult evaluate_candidate(GenConfig const& cfg, std::uint64_t index);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct GenerationResult {
    Json manifest;
    bool budget_exhausted = false;
};

struct GenerateOptions {
    int threads = 1;
    bool write_images = true;
};

/// Samples candidates in index order until cfg.n_scenes are accepted or
/// more than cfg.max_rejections_per_scene consecutive rejections occur.
/// Writes one directory per accepted scene plus manifest.json. The result
/// is independent of the thread count.
GenerationResult generate_dataset(GenConfig const& cfg,
                                  std::filesystem::path const& out_dir,
                                  GenerateOptions const& options = {});

/// Per-(scene id, box id) similarity scores from an external scorer.
class ScoreTable {
public:
    void set(int scene_id, int box_id, double score) { scores_[{scene_id, box_id}] = score; }
    std::optional<double> get(int scene_id, int box_id) const;
    std::size_t size() const { return scores_.size(); }

private:
    std::map<std::pair<int, int>, double> scores_;
};

/// {"scenes":[{"id":int, "box_scores":{"<box_id>": float}}]}; scores must lie
/// in [-1, 1]. Parse errors name the offending entry.
ScoreTable score_table_from_json(Json const& j);

/// Keeps a scene iff every box has a score >= threshold.
Json filter_augmentations(Json const& manifest, ScoreTable const& scores,
                          double threshold = 0.25);

struct Histogram {
    std::string name;
    double lo;
    double hi;
    std::vector<long> counts;

    long total() const;
    double bin_center(std::size_t i) const;
    void add(double value);
};

struct DatasetStats {
    Histogram min_visibility;    // per scene, [0, 1]
    Histogram yaw;               // per box, [0, 2pi)
    Histogram bbox_side_frac;    // per box, [0, 1]
    Histogram camera_elevation;  // per scene, [0, pi/2]
    long n_scenes = 0;
    long n_boxes = 0;
};

inline constexpr int kHistogramBins = 20;

/// Throws EmptyManifest when the manifest lists no scenes.
DatasetStats dataset_stats(Json const& manifest);
Json to_json(DatasetStats const& s);
/// Simple bar chart of the counts.
RgbImage render_histogram(Histogram const& h, int width = 400, int height = 200);

}  // namespace oscr
