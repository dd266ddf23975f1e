#include "oscr/binding.hpp"

#include <algorithm>
#include <numeric>

#include "oscr/error.hpp"

namespace oscr {

int TokenLayout::n_appearance() const {
    return std::accumulate(appearance.begin(), appearance.end(), 0);
}

int TokenLayout::v_begin(std::size_t segment) const {
    int b = z_begin() + n_spatial();
    for (std::size_t s = 0; s < segment && s < appearance.size(); ++s) b += appearance[s];
    return b;
}

TokenLayout TokenLayout::for_image(int n_prompt, ImageSize image, int patch_px) {
    if (patch_px <= 0 || image.width % patch_px != 0 || image.height % patch_px != 0) {
        throw Error(Errc::DimensionMismatch,
                    "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                        " is not divisible into " + std::to_string(patch_px) + " px patches");
    }
    TokenLayout t;
    t.n_prompt = n_prompt;
    t.rows = image.height / patch_px;
    t.cols = image.width / patch_px;
    t.patch_px = patch_px;
    return t;
}

TokenMask token_mask_from_pixels(Mask const& pixels, int patch_px) {
    if (patch_px <= 0 || pixels.rows() % patch_px != 0 || pixels.cols() % patch_px != 0) {
        throw Error(Errc::DimensionMismatch,
                    "mask " + std::to_string(pixels.cols()) + "x" + std::to_string(pixels.rows()) +
                        " is not divisible into " + std::to_string(patch_px) + " px patches");
    }
    auto const rows = pixels.rows() / patch_px, cols = pixels.cols() / patch_px;
    TokenMask t(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            t(r, c) = pixels.block(r * patch_px, c * patch_px, patch_px, patch_px).any();
        }
    }
    return t;
}

AttentionMask build_attention_mask(TokenLayout const& layout,
                                   std::vector<TokenMask> const& token_masks,
                                   std::vector<NounSpan> const& noun_spans) {
    if (token_masks.size() != noun_spans.size()) {
        throw Error(Errc::MissingMask, std::to_string(noun_spans.size()) + " boxes but " +
                                           std::to_string(token_masks.size()) + " token masks");
    }
    for (std::size_t i = 0; i < token_masks.size(); ++i) {
        if (token_masks[i].rows() != layout.rows || token_masks[i].cols() != layout.cols) {
            throw Error(Errc::DimensionMismatch,
                        "token mask " + std::to_string(i) + " does not match the " +
                            std::to_string(layout.rows) + "x" + std::to_string(layout.cols) + " grid");
        }
    }
    for (std::size_t i = 0; i < noun_spans.size(); ++i) {
        auto const& s = noun_spans[i];
        if (s.start < 0 || s.end > layout.n_prompt || s.start >= s.end) {
            throw Error(Errc::ValidationFailed,
                        "noun span " + std::to_string(i) + " is empty or outside the prompt");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (s.intersects(noun_spans[j])) {
                throw Error(Errc::SpanOverlap, "noun spans of boxes " + std::to_string(j) +
                                                   " and " + std::to_string(i) + " intersect");
            }
        }
    }

    AttentionMask m;
    m.layout = layout;
    m.layout.appearance.clear();
    m.token_masks = token_masks;
    m.noun_spans = noun_spans;
    int const n = m.layout.total();
    m.allowed = Plane<bool>::Constant(n, n, true);

    int const z0 = m.layout.z_begin(), x0 = m.layout.x_begin(), ns = m.layout.n_spatial();
    m.allowed.block(z0, x0, ns, ns).setConstant(false);
    for (int g = 0; g < ns; ++g) {
        int const r = g / layout.cols, c = g % layout.cols;
        for (std::size_t i = 0; i < noun_spans.size(); ++i) {
            bool const inside = token_masks[i](r, c);
            auto const& s = noun_spans[i];
            m.allowed.row(z0 + g).segment(s.start, s.end - s.start).setConstant(inside);
        }
    }
    return m;
}

AttentionMask build_personalization_mask(AttentionMask const& base, int box_index,
                                         int n_appearance) {
    if (n_appearance <= 0) {
        throw Error(Errc::NoAppearanceTokens, "personalization needs at least one appearance token");
    }
    if (box_index < 0 || box_index >= static_cast<int>(base.token_masks.size())) {
        throw Error(Errc::MissingMask, "no token mask for box index " + std::to_string(box_index));
    }
    AttentionMask m = base;
    int const old_n = base.layout.total();
    m.layout.appearance.push_back(n_appearance);
    m.appearance_box.push_back(box_index);
    int const n = m.layout.total();
    m.allowed = Plane<bool>::Constant(n, n, true);
    m.allowed.topLeftCorner(old_n, old_n) = base.allowed;

    int const v0 = old_n, z0 = m.layout.z_begin(), ns = m.layout.n_spatial();
    TokenMask const& tm = m.token_masks[box_index];
    for (int g = 0; g < ns; ++g) {
        bool const inside = tm(g / m.layout.cols, g % m.layout.cols);
        m.allowed.row(z0 + g).segment(v0, n_appearance).setConstant(inside);
    }
    m.allowed.block(v0, m.layout.x_begin(), n_appearance, ns).setConstant(false);
    return m;
}

AttentionMask build_attention_mask(SceneLayout const& layout, std::vector<Mask> const& amodal_masks,
                                   int patch_px) {
    std::vector<OrientedBox const*> boxes;
    for (auto const& b : layout.boxes) boxes.push_back(&b);
    std::sort(boxes.begin(), boxes.end(), [](auto a, auto b) { return a->id < b->id; });
    if (boxes.size() != amodal_masks.size()) {
        throw Error(Errc::MissingMask, std::to_string(boxes.size()) + " boxes but " +
                                           std::to_string(amodal_masks.size()) + " masks");
    }
    std::vector<TokenMask> tokens;
    std::vector<NounSpan> spans;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        tokens.push_back(token_mask_from_pixels(amodal_masks[i], patch_px));
        spans.push_back(boxes[i]->noun_span);
    }
    TokenLayout const t =
        TokenLayout::for_image(layout.prompt_token_count(), layout.camera.image_size, patch_px);
    return build_attention_mask(t, tokens, spans);
}

// File format -----------------------------------------------------------------

std::vector<std::uint8_t> encode_mask_bits(Plane<bool> const& m) {
    if (m.rows() > 0xFFFF || m.cols() > 0xFFFF) {
        throw Error(Errc::DimensionMismatch, "mask too large for the 16-bit header");
    }
    auto const rows = static_cast<std::uint16_t>(m.rows()), cols = static_cast<std::uint16_t>(m.cols());
    std::vector<std::uint8_t> out{'O', 'S', 'M', '1',
                                  static_cast<std::uint8_t>(rows & 0xFF), static_cast<std::uint8_t>(rows >> 8),
                                  static_cast<std::uint8_t>(cols & 0xFF), static_cast<std::uint8_t>(cols >> 8)};
    std::size_t const bits = static_cast<std::size_t>(rows) * cols;
    out.resize(8 + (bits + 7) / 8, 0);
    for (std::size_t k = 0; k < bits; ++k) {
        if (m.data()[k]) out[8 + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    }
    return out;
}

Plane<bool> decode_mask_bits(std::vector<std::uint8_t> const& bytes) {
    if (bytes.size() < 8 || bytes[0] != 'O' || bytes[1] != 'S' || bytes[2] != 'M' || bytes[3] != '1') {
        throw Error(Errc::ParseError, "mask file: bad magic");
    }
    int const rows = bytes[4] | (bytes[5] << 8), cols = bytes[6] | (bytes[7] << 8);
    std::size_t const bits = static_cast<std::size_t>(rows) * cols;
    if (bytes.size() != 8 + (bits + 7) / 8) {
        throw Error(Errc::ParseError, "mask file: expected " + std::to_string(8 + (bits + 7) / 8) +
                                          " bytes, got " + std::to_string(bytes.size()));
    }
    Plane<bool> m(rows, cols);
    for (std::size_t k = 0; k < bits; ++k) m.data()[k] = (bytes[8 + k / 8] >> (k % 8)) & 1u;
    return m;
}

void export_mask(AttentionMask const& mask, std::filesystem::path const& path) {
    write_binary_file(path, encode_mask_bits(mask.allowed));
}

Plane<bool> import_mask(std::filesystem::path const& path) {
    std::string const text = read_text_file(path);
    return decode_mask_bits(std::vector<std::uint8_t>(text.begin(), text.end()));
}

Json summarize_mask(AttentionMask const& mask) {
    TokenLayout const& t = mask.layout;
    struct Sector {
        char const* name;
        int begin, size;
    };
    Sector const sectors[] = {{"p", 0, t.n_prompt},
                              {"x_t", t.x_begin(), t.n_spatial()},
                              {"z", t.z_begin(), t.n_spatial()},
                              {"v", t.v_begin(), t.n_appearance()}};
    Json layout{{"n_prompt", t.n_prompt}, {"rows", t.rows}, {"cols", t.cols},
                {"patch_px", t.patch_px}, {"appearance", t.appearance}};
    Json sizes = Json::object(), counts = Json::object();
    for (auto const& q : sectors) {
        sizes[q.name] = q.size;
        for (auto const& k : sectors) {
            long c = q.size > 0 && k.size > 0
                         ? static_cast<long>(mask.allowed.block(q.begin, k.begin, q.size, k.size).count())
                         : 0L;
            counts[std::string(q.name) + "->" + k.name] = c;
        }
    }
    return Json{{"v", 1},
                {"total_tokens", t.total()},
                {"layout", layout},
                {"sector_sizes", sizes},
                {"allowed", counts},
                {"allowed_total", static_cast<long>(mask.allowed.count())},
                {"appearance_box", mask.appearance_box}};
}

}  // namespace oscr
