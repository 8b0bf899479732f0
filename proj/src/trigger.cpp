#include "badsad/trigger.hpp"

#include <algorithm>
#include <numeric>

#include "badsad/rng.hpp"

namespace badsad {

std::string trigger_kind_name(TriggerKind k) {
    switch (k) {
        case TriggerKind::corner4: return "corner4";
        case TriggerKind::sub_lower_right: return "sub_lower_right";
        case TriggerKind::distinct_center: return "distinct_center";
    }
    return "corner4";
}

TriggerKind trigger_kind_from_name(const std::string& s) {
    if (s == "corner4") return TriggerKind::corner4;
    if (s == "sub_lower_right") return TriggerKind::sub_lower_right;
    if (s == "distinct_center") return TriggerKind::distinct_center;
    throw ConfigError("unknown trigger kind: " + s);
}

namespace {

void fill_block(Image& m, int y0, int x0, int s) {
    for (int ch = 0; ch < m.c; ++ch)
        for (int y = y0; y < y0 + s; ++y)
            for (int x = x0; x < x0 + s; ++x) m.at(ch, y, x) = 1.0f;
}

Image mask_flat(TriggerKind kind, int s, int c, int w) {
    if (2 * s > w) {
        throw ConfigError("trigger square_size " + std::to_string(s) +
                          " oversize for flat width " + std::to_string(w));
    }
    Image m(c, 1, w);
    if (kind == TriggerKind::distinct_center) {
        const int x0 = (w - s) / 2;
        if (x0 + s > w - s) {
            throw ConfigError("distinct_center block overlaps the flat corner block");
        }
        for (int ch = 0; ch < c; ++ch)
            for (int x = x0; x < x0 + s; ++x) m.at(ch, 0, x) = 1.0f;
    } else {
        // corner4 and sub_lower_right both collapse to the rightmost block
        for (int ch = 0; ch < c; ++ch)
            for (int x = w - s; x < w; ++x) m.at(ch, 0, x) = 1.0f;
    }
    return m;
}

Image mask_image(TriggerKind kind, int s, int c, int h, int w) {
    if (2 * s > std::min(h, w)) {
        throw ConfigError("trigger square_size " + std::to_string(s) + " oversize for " +
                          std::to_string(h) + "x" + std::to_string(w) + " images");
    }
    Image m(c, h, w);
    switch (kind) {
        case TriggerKind::corner4:
            fill_block(m, 0, 0, s);
            fill_block(m, 0, w - s, s);
            fill_block(m, h - s, 0, s);
            fill_block(m, h - s, w - s, s);
            break;
        case TriggerKind::sub_lower_right:
            fill_block(m, h - s, w - s, s);
            break;
        case TriggerKind::distinct_center: {
            const int y0 = (h - s) / 2;
            const int x0 = (w - s) / 2;
            // must stay clear of all four corner blocks
            if ((y0 < s || y0 + s > h - s) && (x0 < s || x0 + s > w - s)) {
                throw ConfigError("distinct_center block overlaps corner4");
            }
            fill_block(m, y0, x0, s);
            break;
        }
    }
    return m;
}

}  // namespace

TriggerMask build_mask(TriggerKind kind, int square_size, int c, int h, int w, float mu) {
    if (square_size < 1) throw ConfigError("trigger square_size must be >= 1");
    if (c < 1 || h < 1 || w < 1) throw ConfigError("trigger shape extents must be >= 1");
    if (!(mu >= 0.0f && mu <= 1.0f)) throw ConfigError("trigger mu must lie in [0,1]");
    TriggerMask t;
    t.kind = kind;
    t.square_size = square_size;
    t.mu = mu;
    t.mask = (h == 1) ? mask_flat(kind, square_size, c, w)
                      : mask_image(kind, square_size, c, h, w);
    return t;
}

Image apply_trigger(const Image& image, const TriggerMask& trigger) {
    if (!image.same_shape(trigger.mask)) {
        throw DimensionError("apply_trigger: image " + image.shape_str() + " vs mask " +
                             trigger.mask.shape_str());
    }
    Image out = image;
    for (std::size_t i = 0; i < out.pix.size(); ++i) {
        if (trigger.mask.pix[i] == 1.0f) out.pix[i] = trigger.mu;
    }
    return out;
}

std::vector<Image> poison_set(const std::vector<Image>& source, const PoisonSpec& spec) {
    if (spec.count > source.size()) {
        throw CapacityError("poison_set: requested " + std::to_string(spec.count) +
                            " poisoned images from " + std::to_string(source.size()) +
                            " sources");
    }
    std::vector<std::size_t> idx(source.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(spec.source_seed, 0x70));
    rng.shuffle(idx);
    idx.resize(spec.count);
    std::sort(idx.begin(), idx.end());

    std::vector<Image> out;
    out.reserve(spec.count);
    for (std::size_t i : idx) out.push_back(apply_trigger(source[i], spec.mask));
    return out;
}

std::size_t mask_popcount(const TriggerMask& trigger) {
    std::size_t n = 0;
    for (float v : trigger.mask.pix) n += (v == 1.0f) ? 1 : 0;
    return n;
}

}  // namespace badsad
