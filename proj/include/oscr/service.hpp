#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oscr/json_io.hpp"
#include "oscr/procgen.hpp"
#include "oscr/render.hpp"

namespace oscr {

enum class RenderMode { Oscr, Depth, Layers };

RenderMode render_mode_from_string(std::string_view s);  // throws SchemaError
std::string_view to_string(RenderMode m) noexcept;

struct RenderRequest {
    SceneLayout layout;
    double alpha = 0.5;
    RenderMode mode = RenderMode::Oscr;
    std::optional<FaceColorMap> colors;
};

/// {"v":1, "layout":{...}, "alpha"?, "mode"?, "colors"?}
RenderRequest render_request_from_json(Json const& j);

/// Named output files and their bytes. CLI writes them to disk, the HTTP
/// service embeds them as base64, so both surfaces share one encoder.
struct RenderFiles {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
    Json meta;

    std::vector<std::uint8_t> const* find(std::string_view name) const;
};

/// Validates the layout (ValidationFailed) and renders in the requested mode.
RenderFiles render_files(RenderRequest const& req);

/// HTTP response body for a successful render.
Json render_response(RenderRequest const& req, RenderFiles const& files);

/// {"v":1, "error":{"code", "message", "violations"?}}
Json error_body(Errc code, std::string const& message,
                std::vector<Violation> const& violations = {});

/// {"v":1, "templates":[{"label","dims","jitter"}]}
Json templates_response();

/// Request {"v":1, "seed":N, "index"?:K, "config"?:{...}}; response carries
/// the candidate layout and its acceptance report.
Json procgen_response(Json const& request);

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path static_dir = "ui/dist";
    std::size_t max_body_bytes = 1 << 20;
    std::chrono::milliseconds render_timeout{10000};
};

void validate_service_config(ServiceConfig const& cfg);

/// Local HTTP service. Routes: POST /api/render, GET /api/templates,
/// POST /api/procgen, GET / (static UI).
class Service {
public:
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(Service const&) = delete;
    Service& operator=(Service const&) = delete;

    /// Binds the socket; returns the bound port. Throws Io on failure.
    int bind();
    /// Blocks serving requests until stop().
    void listen();
    void stop();
    void wait_until_ready() const;
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oscr
