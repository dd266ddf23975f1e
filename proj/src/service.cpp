#include "oscr/service.hpp"

#include <future>
#include <thread>

#include <httplib.h>

#include "oscr/artifacts.hpp"
#include "oscr/error.hpp"

namespace oscr {

RenderMode render_mode_from_string(std::string_view s) {
    if (s == "oscr") return RenderMode::Oscr;
    if (s == "depth") return RenderMode::Depth;
    if (s == "layers") return RenderMode::Layers;
    throw Error(Errc::SchemaError, "unknown render mode '" + std::string(s) +
                                       "' (expected oscr, depth or layers)");
}

std::string_view to_string(RenderMode m) noexcept {
    switch (m) {
        case RenderMode::Oscr: return "oscr";
        case RenderMode::Depth: return "depth";
        case RenderMode::Layers: return "layers";
    }
    return "oscr";
}

RenderRequest render_request_from_json(Json const& j) {
    require_known_fields(j, "request", {"v", "layout", "alpha", "mode", "colors"});
    if (j.contains("v") && j["v"] != 1) throw Error(Errc::SchemaError, "request.v: must be 1");
    RenderRequest req;
    req.layout = layout_from_json(get_field(j, "layout", "request"));
    if (j.contains("alpha")) req.alpha = get_number(j, "alpha", "request");
    if (j.contains("mode")) req.mode = render_mode_from_string(get_string(j, "mode", "request"));
    if (j.contains("colors") && !j["colors"].is_null()) {
        req.colors = face_colors_from_json(j["colors"]);
    }
    return req;
}

std::vector<std::uint8_t> const* RenderFiles::find(std::string_view name) const {
    for (auto const& [n, bytes] : files) {
        if (n == name) return &bytes;
    }
    return nullptr;
}

namespace {

std::vector<std::uint8_t> text_bytes(std::string const& s) { return {s.begin(), s.end()}; }

}  // namespace

RenderFiles render_files(RenderRequest const& req) {
    require_valid(req.layout);
    RenderFiles out;
    RenderOptions opts;
    if (req.colors) opts.colors = *req.colors;
    opts.alpha = req.alpha;

    switch (req.mode) {
        case RenderMode::Oscr: {
            RenderOutput const r = render_oscr(req.layout, opts);
            EncodedRender enc = encode_render(r);
            out.meta = enc.meta;
            out.meta["mode"] = "oscr";
            out.files.emplace_back("oscr.png", std::move(enc.oscr_png));
            for (std::size_t i = 0; i < enc.box_ids.size(); ++i) {
                std::string const id = std::to_string(enc.box_ids[i]);
                out.files.emplace_back("amodal_" + id + ".png", std::move(enc.amodal_png[i]));
                out.files.emplace_back("visible_" + id + ".png", std::move(enc.visible_png[i]));
            }
            out.files.emplace_back("depth.pfm", std::move(enc.depth_pfm));
            out.files.emplace_back("depth.json", text_bytes(dump_json(depth_sidecar_json())));
            break;
        }
        case RenderMode::Depth: {
            LayoutDepth const d = render_layout_depth(req.layout);
            out.meta = Json{{"mode", "depth"},
                            {"min_depth", d.min_depth},
                            {"max_depth", d.max_depth},
                            {"empty_render", d.empty_render},
                            {"encoding", "8-bit gray, 0 nearest box surface, 255 farthest or empty"},
                            {"camera", to_json(req.layout.camera)}};
            out.files.emplace_back("depth.png", encode_layout_depth_png(d));
            break;
        }
        case RenderMode::Layers: {
            Json layers = Json::array();
            auto const stack = render_layer_map(req.layout);
            for (std::size_t k = 0; k < stack.size(); ++k) {
                char name[32];
                std::snprintf(name, sizeof name, "layer_%02zu.png", k);
                layers.push_back({{"index", k},
                                  {"id", stack[k].box_id},
                                  {"center_distance", stack[k].center_distance},
                                  {"file", name}});
                out.files.emplace_back(name, encode_mask_png(stack[k].mask));
            }
            out.meta = Json{{"mode", "layers"},
                            {"order", "nearest box center first"},
                            {"layers", layers},
                            {"camera", to_json(req.layout.camera)}};
            break;
        }
    }
    out.files.emplace_back("meta.json", text_bytes(dump_json(out.meta)));
    return out;
}

Json render_response(RenderRequest const& req, RenderFiles const& files) {
    Json j{{"v", 1}, {"mode", std::string(to_string(req.mode))}, {"meta", files.meta}};
    Json all = Json::object();
    for (auto const& [name, bytes] : files.files) all[name] = base64_encode(bytes);
    j["files"] = all;
    if (req.mode == RenderMode::Oscr) {
        j["oscr"] = all["oscr.png"];
        Json masks = Json::array();
        for (auto const& m : files.meta["masks"]) {
            std::string const id = std::to_string(m["id"].get<int>());
            Json e = m;
            e["amodal"] = all["amodal_" + id + ".png"];
            e["visible"] = all["visible_" + id + ".png"];
            masks.push_back(std::move(e));
        }
        j["masks"] = masks;
        j["intersections"] = files.meta["overlaps"];
    } else if (req.mode == RenderMode::Depth) {
        j["depth"] = all["depth.png"];
    } else {
        Json layers = Json::array();
        for (auto const& l : files.meta["layers"]) {
            Json e = l;
            e["mask"] = all[l["file"].get<std::string>()];
            layers.push_back(std::move(e));
        }
        j["layers"] = layers;
    }
    return j;
}

Json error_body(Errc code, std::string const& message, std::vector<Violation> const& violations) {
    Json err{{"code", std::string(to_string(code))}, {"message", message}};
    if (!violations.empty()) {
        Json v = Json::array();
        for (auto const& x : violations) {
            v.push_back({{"box_id", x.box_id < 0 ? Json(nullptr) : Json(x.box_id)},
                         {"code", x.code},
                         {"message", x.message}});
        }
        err["violations"] = v;
    }
    return Json{{"v", 1}, {"error", err}};
}

Json templates_response() {
    Json arr = Json::array();
    for (auto const& t : default_templates()) arr.push_back(to_json(t));
    return Json{{"v", 1}, {"templates", arr}};
}

Json procgen_response(Json const& request) {
    require_known_fields(request, "request", {"v", "seed", "index", "config"});
    if (request.contains("v") && request["v"] != 1) {
        throw Error(Errc::SchemaError, "request.v: must be 1");
    }
    GenConfig cfg = request.contains("config") ? gen_config_from_json(request["config"]) : GenConfig{};
    if (request.contains("seed")) {
        if (!request["seed"].is_number_unsigned()) {
            throw Error(Errc::SchemaError, "request.seed: expected a non-negative integer");
        }
        cfg.seed = request["seed"].get<std::uint64_t>();
    }
    std::uint64_t index = 0;
    if (request.contains("index")) {
        if (!request["index"].is_number_unsigned()) {
            throw Error(Errc::SchemaError, "request.index: expected a non-negative integer");
        }
        index = request["index"].get<std::uint64_t>();
    }
    CandidateResult const c = evaluate_candidate(cfg, index);
    return Json{{"v", 1},
                {"seed", cfg.seed},
                {"index", index},
                {"candidate", to_json(c.layout)},
                {"report", to_json(c.report)}};
}

void validate_service_config(ServiceConfig const& cfg) {
    if (cfg.port < 0 || cfg.port > 65535) {
        throw Error(Errc::ValidationFailed, "port must lie in [0, 65535]");
    }
    if (cfg.render_timeout.count() <= 0) {
        throw Error(Errc::ValidationFailed, "render timeout must be > 0");
    }
    if (cfg.max_body_bytes == 0) throw Error(Errc::ValidationFailed, "request size limit must be > 0");
}

// Server ----------------------------------------------------------------------

namespace {

constexpr char kFallbackPage[] =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>OSCR layout studio</title></head>"
    "<body><h1>OSCR layout studio</h1><p>UI bundle not found. The JSON API is available at "
    "<code>/api/render</code>, <code>/api/templates</code> and <code>/api/procgen</code>.</p>"
    "</body></html>\n";

void send_json(httplib::Response& res, int status, Json const& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Error const& e) {
    send_json(res, e.is_input_error() ? 400 : 500, error_body(e.code(), e.what()));
}

}  // namespace

struct Service::Impl {
    ServiceConfig cfg;
    httplib::Server server;
    int port = -1;

    void install_routes();
    void handle_render(httplib::Request const& req, httplib::Response& res);
};

void Service::Impl::handle_render(httplib::Request const& http_req, httplib::Response& res) {
    RenderRequest req;
    try {
        req = render_request_from_json(parse_json(http_req.body, "request body"));
    } catch (Error const& e) {
        return send_error(res, e);
    }
    auto const violations = validate_layout(req.layout);
    if (!violations.empty()) {
        return send_json(res, 400,
                         error_body(Errc::ValidationFailed, describe(violations), violations));
    }

    auto promise = std::make_shared<std::promise<Json>>();
    auto future = promise->get_future();
    std::thread([promise, req] {
        try {
            promise->set_value(render_response(req, render_files(req)));
        } catch (...) {
            promise->set_exception(std::current_exception());
        }
    }).detach();

    if (future.wait_for(cfg.render_timeout) != std::future_status::ready) {
        return send_json(res, 504, error_body(Errc::Timeout, "render exceeded " +
                                                                 std::to_string(cfg.render_timeout.count()) +
                                                                 " ms"));
    }
    try {
        send_json(res, 200, future.get());
    } catch (Error const& e) {
        send_error(res, e);
    }
}

void Service::Impl::install_routes() {
    server.set_payload_max_length(cfg.max_body_bytes);
    server.Post("/api/render", [this](auto const& req, auto& res) { handle_render(req, res); });
    server.Get("/api/templates", [](auto const&, auto& res) { send_json(res, 200, templates_response()); });
    server.Post("/api/procgen", [](httplib::Request const& req, httplib::Response& res) {
        try {
            Json const body = req.body.empty() ? Json::object() : parse_json(req.body, "request body");
            send_json(res, 200, procgen_response(body));
        } catch (Error const& e) {
            send_error(res, e);
        }
    });

    std::error_code ec;
    bool const has_index = std::filesystem::is_regular_file(cfg.static_dir / "index.html", ec);
    if (has_index) server.set_mount_point("/", cfg.static_dir.string());
    server.Get("/", [](auto const&, auto& res) { res.set_content(kFallbackPage, "text/html"); });

    server.set_error_handler([](httplib::Request const&, httplib::Response& res) {
        if (!res.body.empty()) return;
        Errc const code = res.status == 413 ? Errc::SchemaError : Errc::Io;
        std::string const msg = res.status == 413   ? "request body exceeds the size limit"
                                : res.status == 404 ? "no such route"
                                                    : "HTTP " + std::to_string(res.status);
        res.set_content(error_body(code, msg).dump(), "application/json");
    });
}

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>()) {
    validate_service_config(cfg);
    impl_->cfg = std::move(cfg);
    impl_->install_routes();
}

Service::~Service() { stop(); }

int Service::bind() {
    auto& s = impl_->server;
    if (impl_->cfg.port == 0) {
        impl_->port = s.bind_to_any_port(impl_->cfg.host);
    } else {
        impl_->port = s.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1;
    }
    if (impl_->port < 0) {
        throw Error(Errc::Io, "cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
    }
    return impl_->port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

int Service::port() const { return impl_->port; }

}  // namespace oscr
