#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "badsad/image.hpp"

namespace badsad {

enum class TriggerKind { corner4, sub_lower_right, distinct_center };

std::string trigger_kind_name(TriggerKind k);
TriggerKind trigger_kind_from_name(const std::string& s);

// Binary mask T plus visibility scalar mu. The poisoning transformation is
// X*(1-T) + T*mu, applied elementwise.
//
// For 2-d images: corner4 places square_size blocks flush against the four
// corners across all channels, sub_lower_right keeps only the lower-right
// block, distinct_center places one block at the image center with no
// overlap against corner4.
//
// For flat rows (h == 1, synthetic points): corner4 degenerates to the
// rightmost square_size coordinates, sub_lower_right equals it, and
// distinct_center takes a centered coordinate block.
struct TriggerMask {
    Image mask;
    float mu = 1.0f;
    TriggerKind kind = TriggerKind::corner4;
    int square_size = 3;
};

struct PoisonSpec {
    TriggerMask mask;
    std::size_t count = 500;
    std::uint64_t source_seed = 0;
};

TriggerMask build_mask(TriggerKind kind, int square_size, int c, int h, int w, float mu = 1.0f);

Image apply_trigger(const Image& image, const TriggerMask& trigger);

// Deterministically selects spec.count source images (ascending source
// order) and returns their triggered copies; sources are not modified.
std::vector<Image> poison_set(const std::vector<Image>& source, const PoisonSpec& spec);

std::size_t mask_popcount(const TriggerMask& trigger);

}  // namespace badsad
