#include "oscr/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <ostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "oscr/artifacts.hpp"
#include "oscr/binding.hpp"
#include "oscr/error.hpp"
#include "oscr/metrics.hpp"
#include "oscr/procgen.hpp"
#include "oscr/service.hpp"

namespace oscr {

void configure_logging() {
    static auto const logger = [] {
        auto l = spdlog::stderr_logger_st("oscr");
        l->set_pattern("[%l] %v");
        spdlog::set_default_logger(l);
        return l;
    }();
    char const* env = std::getenv("OSCR_LOG");
    std::string const level = env ? env : "warn";
    if (level == "error") {
        logger->set_level(spdlog::level::err);
    } else if (level == "info") {
        logger->set_level(spdlog::level::info);
    } else if (level == "debug") {
        logger->set_level(spdlog::level::debug);
    } else {
        logger->set_level(spdlog::level::warn);
        if (level != "warn") spdlog::warn("OSCR_LOG='{}' not recognized, using warn", level);
    }
}

namespace {

namespace fs = std::filesystem;

Mask mask_from_png(fs::path const& path) {
    std::string const text = read_text_file(path);
    DecodedPng const png = decode_png({text.begin(), text.end()});
    Mask m(png.height, png.width);
    for (int i = 0; i < png.width * png.height; ++i) m.data()[i] = png.pixels[i * png.channels] >= 128;
    return m;
}

void write_files(RenderFiles const& files, fs::path const& dir) {
    fs::create_directories(dir);
    for (auto const& [name, bytes] : files.files) write_binary_file(dir / name, bytes);
}

struct RenderArgs {
    std::string layout, out, mode = "oscr", colors;
    double alpha = 0.5;
};

int cmd_render(RenderArgs const& a, std::ostream& out) {
    RenderRequest req;
    req.layout = load_layout(a.layout);
    req.alpha = a.alpha;
    req.mode = render_mode_from_string(a.mode);
    if (!a.colors.empty()) req.colors = face_colors_from_json(load_json_file(a.colors));
    RenderFiles const files = render_files(req);
    write_files(files, a.out);
    spdlog::info("render: wrote {} files to {}", files.files.size(), a.out);
    if (files.meta.value("empty_render", false)) spdlog::warn("render: no box is visible");
    out << a.out << "\n";
    return kExitOk;
}

struct GenArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_scenes;
    int threads = 1;
    bool no_images = false;
};

int cmd_gen(GenArgs const& a, std::ostream& out, std::ostream& err) {
    GenConfig cfg = a.config.empty() ? GenConfig{} : gen_config_from_json(load_json_file(a.config));
    if (a.seed) cfg.seed = *a.seed;
    if (a.n_scenes) cfg.n_scenes = *a.n_scenes;
    validate_config(cfg);
    GenerateOptions opts;
    opts.threads = a.threads;
    opts.write_images = !a.no_images;
    GenerationResult const r = generate_dataset(cfg, a.out, opts);
    Json const& stats = r.manifest["stats"];
    spdlog::info("gen: {} accepted of {} candidates", stats["accepted"].get<long>(),
                 stats["candidates"].get<long>());
    out << (fs::path(a.out) / "manifest.json").string() << "\n";
    if (r.budget_exhausted) {
        err << "error: " << to_string(Errc::BudgetExhausted) << ": more than "
            << cfg.max_rejections_per_scene << " consecutive rejections after "
            << stats["accepted"].get<long>() << " accepted scenes; partial manifest written\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_filter(std::string const& manifest, std::string const& scores, double threshold,
               std::string const& out_path, std::ostream& out) {
    Json const m = load_json_file(manifest);
    ScoreTable const table = score_table_from_json(load_json_file(scores));
    Json const filtered = filter_augmentations(m, table, threshold);
    if (out_path.empty()) {
        out << dump_json(filtered);
    } else {
        write_text_file(out_path, dump_json(filtered));
        out << out_path << "\n";
    }
    return kExitOk;
}

int cmd_stats(std::string const& manifest, std::string out_dir, std::ostream& out) {
    DatasetStats const s = dataset_stats(load_json_file(manifest));
    if (out_dir.empty()) out_dir = (fs::path(manifest).parent_path() / "stats").string();
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "stats.json", dump_json(to_json(s)));
    for (Histogram const* h : {&s.min_visibility, &s.yaw, &s.bbox_side_frac, &s.camera_elevation}) {
        write_binary_file(fs::path(out_dir) / ("hist_" + h->name + ".png"), encode_png(render_histogram(*h)));
    }
    out << (fs::path(out_dir) / "stats.json").string() << "\n";
    return kExitOk;
}

struct MaskArgs {
    std::string layout, render_dir, out, summary;
    std::optional<int> personalize;
    int n_appearance = 0;
    int patch = kDefaultPatchPx;
};

int cmd_mask(MaskArgs const& a, std::ostream& out) {
    SceneLayout const layout = load_layout(a.layout);
    require_valid(layout);
    std::vector<int> ids;
    for (auto const& b : layout.boxes) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());

    std::vector<Mask> amodal;
    if (a.render_dir.empty()) {
        amodal = render_oscr(layout).amodal_masks;
    } else {
        for (int id : ids) {
            fs::path const p = fs::path(a.render_dir) / ("amodal_" + std::to_string(id) + ".png");
            if (!fs::exists(p)) {
                throw Error(Errc::MissingMask, "no amodal mask for box " + std::to_string(id) + " (" +
                                                   p.string() + ")");
            }
            amodal.push_back(mask_from_png(p));
        }
    }
    AttentionMask mask = build_attention_mask(layout, amodal, a.patch);
    if (a.personalize) {
        auto const it = std::find(ids.begin(), ids.end(), *a.personalize);
        if (it == ids.end()) {
            throw Error(Errc::MissingMask, "--personalize: no box with id " + std::to_string(*a.personalize));
        }
        mask = build_personalization_mask(mask, static_cast<int>(it - ids.begin()), a.n_appearance);
    }
    export_mask(mask, a.out);
    if (!a.summary.empty()) write_text_file(a.summary, dump_json(summarize_mask(mask)));
    out << a.out << "\n";
    return kExitOk;
}

int cmd_eval(std::string const& manifest, std::string const& estimates, std::string const& scores,
             std::string const& report, double threshold, std::ostream& out) {
    Json const m = load_json_file(manifest);
    EstimateTable const est = estimates_from_json(load_json_file(estimates));
    std::optional<ScoreTable> table;
    if (!scores.empty()) table = score_table_from_json(load_json_file(scores));
    MetricsConfig cfg;
    cfg.objectness_threshold = threshold;
    MetricReport const r = evaluate(m, est, table ? &*table : nullptr, cfg);
    if (!report.empty()) write_text_file(report, dump_json(to_json(r)));
    out << format_table(r);
    return kExitOk;
}

Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int cmd_serve(ServiceConfig const& cfg, std::ostream& out) {
    Service service(cfg);
    int const port = service.bind();
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    out << "serving on http://" << cfg.host << ":" << port << "\n" << std::flush;
    spdlog::info("serve: static dir {}", cfg.static_dir.string());
    service.listen();
    g_service = nullptr;
    return kExitOk;
}

}  // namespace

int cli_main(std::vector<std::string> const& args, std::ostream& out, std::ostream& err) {
    configure_logging();
    CLI::App app{"Occlusion-aware 3D layout conditioning toolkit", "oscr"};
    app.require_subcommand(1);

    RenderArgs ra;
    auto* render = app.add_subcommand("render", "Render a layout (OSCR, depth or layer modes)");
    render->add_option("--layout", ra.layout, "Layout JSON")->required();
    render->add_option("--out", ra.out, "Output directory")->required();
    render->add_option("--alpha", ra.alpha, "Face opacity in (0,1)");
    render->add_option("--colors", ra.colors, "Face color JSON {\"+X\":[r,g,b],...}");
    render->add_option("--mode", ra.mode, "oscr | depth | layers");

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "Generate a procedural dataset");
    gen->add_option("--config", ga.config, "Generator config JSON");
    gen->add_option("--out", ga.out, "Output directory")->required();
    gen->add_option("--seed", ga.seed, "Override the config seed");
    gen->add_option("--n", ga.n_scenes, "Override the scene count");
    gen->add_option("--threads", ga.threads, "Worker threads")->check(CLI::Range(1, 256));
    gen->add_flag("--no-images", ga.no_images, "Write the manifest only");

    std::string f_manifest, f_scores, f_out;
    double f_threshold = 0.25;
    auto* filter = app.add_subcommand("filter-aug", "Filter augmentations by external scores");
    filter->add_option("--manifest", f_manifest)->required();
    filter->add_option("--scores", f_scores)->required();
    filter->add_option("--threshold", f_threshold);
    filter->add_option("--out", f_out, "Output file (stdout if omitted)");

    std::string s_manifest, s_out;
    auto* stats = app.add_subcommand("stats", "Dataset histograms (JSON + PNG)");
    stats->add_option("--manifest", s_manifest)->required();
    stats->add_option("--out", s_out, "Output directory (default: <manifest dir>/stats)");

    MaskArgs ma;
    auto* mask = app.add_subcommand("mask", "Build the binding attention mask");
    mask->add_option("--layout", ma.layout)->required();
    mask->add_option("--render-dir", ma.render_dir, "Directory with amodal_<id>.png (rendered if omitted)");
    mask->add_option("--out", ma.out)->required();
    mask->add_option("--summary", ma.summary);
    mask->add_option("--personalize", ma.personalize, "Box id bound to appearance tokens");
    mask->add_option("--n-appearance", ma.n_appearance);
    mask->add_option("--patch", ma.patch, "Pixels per token side");

    std::string e_manifest, e_estimates, e_scores, e_report;
    double e_threshold = MetricsConfig{}.objectness_threshold;
    auto* eval = app.add_subcommand("eval", "Layout-adherence metrics");
    eval->add_option("--manifest", e_manifest)->required();
    eval->add_option("--estimates", e_estimates)->required();
    eval->add_option("--scores", e_scores);
    eval->add_option("--report", e_report);
    eval->add_option("--threshold", e_threshold, "Objectness filter threshold");

    ServiceConfig sc;
    std::string static_dir = sc.static_dir.string();
    long timeout_ms = sc.render_timeout.count();
    auto* serve = app.add_subcommand("serve", "Local HTTP service and UI");
    serve->add_option("--host", sc.host);
    serve->add_option("--port", sc.port);
    serve->add_option("--static", static_dir, "UI bundle directory");
    serve->add_option("--max-body", sc.max_body_bytes, "Request size limit in bytes");
    serve->add_option("--timeout-ms", timeout_ms, "Render timeout");

    std::vector<std::string> argv_rest(args.rbegin(), args.rend() - 1);
    try {
        app.parse(argv_rest);
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return kExitOk;
    } catch (CLI::CallForAllHelp const&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (CLI::ParseError const& e) {
        err << "error: Usage: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (*render) return cmd_render(ra, out);
        if (*gen) return cmd_gen(ga, out, err);
        if (*filter) return cmd_filter(f_manifest, f_scores, f_threshold, f_out, out);
        if (*stats) return cmd_stats(s_manifest, s_out, out);
        if (*mask) return cmd_mask(ma, out);
        if (*eval) return cmd_eval(e_manifest, e_estimates, e_scores, e_report, e_threshold, out);
        if (*serve) {
            sc.static_dir = static_dir;
            sc.render_timeout = std::chrono::milliseconds(timeout_ms);
            return cmd_serve(sc, out);
        }
    } catch (Error const& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << to_string(e.code()) << ": " << msg << "\n";
        return e.is_input_error() ? kExitInput : kExitRuntime;
    } catch (std::exception const& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: Internal: " << msg << "\n";
        return kExitRuntime;
    }
    return kExitInput;
}

}  // namespace oscr
