#include "oscr/artifacts.hpp"

namespace oscr {

Json to_json(RenderMeta const& meta) {
    return Json{{"colors", to_json(meta.colors)},
                {"alpha", meta.alpha},
                {"background", to_json(meta.background)},
                {"backface_culling", meta.backface_culling},
                {"camera", to_json(meta.camera)},
                {"near_plane", meta.near_plane},
                {"empty_render", meta.empty_render},
                {"world_frame", "Z up, ground plane z=0, yaw about +Z, front = local +Y"}};
}

Json depth_sidecar_json() {
    return Json{{"format", "PFM little-endian float32, rows stored bottom to top"},
                {"units", "meters along the camera forward axis"},
                {"empty_value", 0.0},
                {"empty_means", "no surface (infinite depth)"}};
}

Json overlaps_json(RenderOutput const& out) {
    Json arr = Json::array();
    for (auto const& o : amodal_overlaps(out)) {
        arr.push_back({{"boxes", {o.box_a, o.box_b}},
                       {"pixels", o.pixels},
                       {"bbox", {o.bounds.min_x, o.bounds.min_y, o.bounds.max_x, o.bounds.max_y}}});
    }
    return arr;
}

Json mask_stats_json(RenderOutput const& out) {
    Json arr = Json::array();
    for (std::size_t i = 0; i < out.box_ids.size(); ++i) {
        long const a = out.amodal_masks[i].count();
        long const v = out.visible_masks[i].count();
        auto const b = mask_bounds(out.amodal_masks[i]);
        Json e{{"id", out.box_ids[i]}, {"amodal_px", a}, {"visible_px", v}};
        e["visibility"] = a > 0 ? Json(static_cast<double>(v) / a) : Json(nullptr);
        e["bbox"] = b.empty() ? Json(nullptr)
                              : Json::array({b.min_x, b.min_y, b.max_x, b.max_y});
        arr.push_back(std::move(e));
    }
    return arr;
}

EncodedRender encode_render(RenderOutput const& out) {
    EncodedRender enc;
    enc.oscr_png = encode_png(out.oscr);
    enc.box_ids = out.box_ids;
    for (std::size_t i = 0; i < out.box_ids.size(); ++i) {
        enc.amodal_png.push_back(encode_mask_png(out.amodal_masks[i]));
        enc.visible_png.push_back(encode_mask_png(out.visible_masks[i]));
    }
    enc.depth_pfm = encode_pfm(out.depth);
    enc.meta = to_json(out.meta);
    enc.meta["masks"] = mask_stats_json(out);
    enc.meta["overlaps"] = overlaps_json(out);
    return enc;
}

void write_render_artifacts(RenderOutput const& out, std::filesystem::path const& dir) {
    std::filesystem::create_directories(dir);
    EncodedRender const enc = encode_render(out);
    write_binary_file(dir / "oscr.png", enc.oscr_png);
    for (std::size_t i = 0; i < enc.box_ids.size(); ++i) {
        std::string const id = std::to_string(enc.box_ids[i]);
        write_binary_file(dir / ("amodal_" + id + ".png"), enc.amodal_png[i]);
        write_binary_file(dir / ("visible_" + id + ".png"), enc.visible_png[i]);
    }
    write_binary_file(dir / "depth.pfm", enc.depth_pfm);
    write_text_file(dir / "depth.json", dump_json(depth_sidecar_json()));
    write_text_file(dir / "meta.json", dump_json(enc.meta));
}

std::vector<std::uint8_t> encode_layout_depth_png(LayoutDepth const& depth) {
    GrayImage g(depth.image.rows(), depth.image.cols());
    for (Eigen::Index i = 0; i < depth.image.size(); ++i) {
        g.data()[i] = to_u8(depth.image.data()[i]);
    }
    return encode_png(g);
}

}  // namespace oscr
