#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "badsad/errors.hpp"
#include "badsad/tensor.hpp"

namespace badsad {

// C x H x W pixel array, row-major, the unit of all data flow. Image
// datasets keep values in [0,1]; synthetic points use one flat row
// (c=1, h=1, w=dims) and are not range-restricted.
struct Image {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> pix;

    Image() = default;
    Image(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), pix(static_cast<std::size_t>(c_) * h_ * w_, 0.0f) {}

    std::size_t numel() const { return pix.size(); }

    float& at(int ch, int y, int x) { return pix[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
    float at(int ch, int y, int x) const {
        return pix[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }

    bool same_shape(const Image& o) const { return c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

struct LabeledImage {
    Image image;
    int class_id = 0;
};

// Packs images into an [N,C,H,W] batch tensor of the training scalar type.
template <typename T>
Tensor<T> make_batch(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw UsageError("make_batch: empty image list");
    const Image& first = *imgs.front();
    Tensor<T> out({imgs.size(), static_cast<std::size_t>(first.c),
                   static_cast<std::size_t>(first.h), static_cast<std::size_t>(first.w)});
    std::size_t off = 0;
    for (const Image* im : imgs) {
        if (!im->same_shape(first)) {
            throw DimensionError("make_batch: image shape " + im->shape_str() +
                                 " differs from " + first.shape_str());
        }
        for (float v : im->pix) out[off++] = static_cast<T>(v);
    }
    return out;
}

}  // namespace badsad
