#include "badsad/datasets.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "badsad/rng.hpp"

namespace badsad {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
    if (off + 4 > b.size()) throw IoError("truncated header in " + path);
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

std::vector<std::size_t> indices_of_class(const std::vector<LabeledImage>& pool, int cls,
                                          bool equal) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if ((pool[i].class_id == cls) == equal) out.push_back(i);
    }
    return out;
}

// consumes `count` indices from the front of `src`, erasing them
std::vector<std::size_t> take(std::vector<std::size_t>& src, std::size_t count,
                              const std::string& subset) {
    if (src.size() < count) {
        throw CapacityError("subset '" + subset + "' needs " + std::to_string(count) +
                            " images but only " + std::to_string(src.size()) +
                            " remain in its pool");
    }
    std::vector<std::size_t> out(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(count));
    src.erase(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

std::vector<Image> gather(const std::vector<LabeledImage>& pool,
                          const std::vector<std::size_t>& idx) {
    std::vector<Image> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(pool[i].image);
    return out;
}

}  // namespace

std::vector<LabeledImage> load_idx(const std::string& images_path,
                                   const std::string& labels_path) {
    const auto ib = read_file(images_path);
    const auto lb = read_file(labels_path);

    const std::uint32_t imagic = read_be32(ib, 0, images_path);
    if (imagic != kIdxImagesMagic) {
        throw FormatError("bad IDX image magic in " + images_path + ": observed " + hex32(imagic) +
                          ", expected " + hex32(kIdxImagesMagic));
    }
    const std::uint32_t lmagic = read_be32(lb, 0, labels_path);
    if (lmagic != kIdxLabelsMagic) {
        throw FormatError("bad IDX label magic in " + labels_path + ": observed " + hex32(lmagic) +
                          ", expected " + hex32(kIdxLabelsMagic));
    }
    const std::uint32_t n_images = read_be32(ib, 4, images_path);
    const std::uint32_t rows = read_be32(ib, 8, images_path);
    const std::uint32_t cols = read_be32(ib, 12, images_path);
    const std::uint32_t n_labels = read_be32(lb, 4, labels_path);
    if (n_images != n_labels) {
        throw FormatError("IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                          std::to_string(n_labels) + " labels");
    }
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (ib.size() < 16 + static_cast<std::size_t>(n_images) * pixels) {
        throw IoError("truncated IDX image payload in " + images_path);
    }
    if (lb.size() < 8 + n_labels) {
        throw IoError("truncated IDX label payload in " + labels_path);
    }

    std::vector<LabeledImage> out(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        Image img(1, static_cast<int>(rows), static_cast<int>(cols));
        const std::size_t base = 16 + static_cast<std::size_t>(i) * pixels;
        for (std::size_t p = 0; p < pixels; ++p) {
            img.pix[p] = static_cast<float>(ib[base + p]) / 255.0f;
        }
        out[i].image = std::move(img);
        out[i].class_id = lb[8 + i];
    }
    return out;
}

std::vector<LabeledImage> load_cifar10(const std::vector<std::string>& batch_paths) {
    std::vector<LabeledImage> out;
    for (const auto& path : batch_paths) {
        const auto b = read_file(path);
        if (b.empty() || b.size() % kCifarRecord != 0) {
            throw FormatError("CIFAR-10 file length " + std::to_string(b.size()) +
                              " is not a multiple of 3073: " + path);
        }
        const std::size_t n = b.size() / kCifarRecord;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = i * kCifarRecord;
            const int label = b[base];
            if (label > 9) {
                throw FormatError("CIFAR-10 label byte " + std::to_string(label) +
                                  " out of range in record " + std::to_string(i) + " of " + path);
            }
            Image img(3, 32, 32);
            for (std::size_t p = 0; p < 3072; ++p) {
                img.pix[p] = static_cast<float>(b[base + 1 + p]) / 255.0f;
            }
            out.push_back({std::move(img), label});
        }
    }
    return out;
}

DatasetSplit build_split(const std::vector<LabeledImage>& train_pool,
                         const std::vector<LabeledImage>& test_pool, int normal_class,
                         const SplitSizes& sizes, std::uint64_t seed) {
    auto train_norm = indices_of_class(train_pool, normal_class, true);
    auto train_abn = indices_of_class(train_pool, normal_class, false);
    auto test_norm = indices_of_class(test_pool, normal_class, true);
    auto test_abn = indices_of_class(test_pool, normal_class, false);

    Rng r_tn(derive_seed(seed, 1));
    Rng r_ta(derive_seed(seed, 2));
    Rng r_vn(derive_seed(seed, 3));
    Rng r_va(derive_seed(seed, 4));
    r_tn.shuffle(train_norm);
    r_ta.shuffle(train_abn);
    r_vn.shuffle(test_norm);
    r_va.shuffle(test_abn);

    DatasetSplit split;
    split.normal_class = normal_class;
    split.seed = seed;
    split.sizes = sizes;

    auto& src = split.source_indices;
    src["unlabeled"] = take(train_norm, sizes.unlabeled, "unlabeled");
    src["labeled_normal"] = take(train_norm, sizes.labeled_normal, "labeled_normal");
    src["labeled_abnormal"] = take(train_abn, sizes.labeled_abnormal, "labeled_abnormal");
    src["val_normal"] = take(test_norm, sizes.val_normal, "val_normal");
    src["test_normal"] = take(test_norm, sizes.test_normal, "test_normal");
    src["val_abnormal"] = take(test_abn, sizes.val_abnormal, "val_abnormal");
    src["test_abnormal"] = take(test_abn, sizes.test_abnormal, "test_abnormal");
    src["asr_abnormal"] = take(test_abn, sizes.asr_abnormal, "asr_abnormal");

    split.unlabeled = gather(train_pool, src["unlabeled"]);
    split.labeled_normal = gather(train_pool, src["labeled_normal"]);
    split.labeled_abnormal = gather(train_pool, src["labeled_abnormal"]);
    split.val_normal = gather(test_pool, src["val_normal"]);
    split.test_normal = gather(test_pool, src["test_normal"]);
    split.val_abnormal = gather(test_pool, src["val_abnormal"]);
    split.test_abnormal = gather(test_pool, src["test_abnormal"]);
    split.asr_abnormal = gather(test_pool, src["asr_abnormal"]);
    return split;
}

DatasetSplit synth_blobs(const SyntheticSpec& spec) {
    if (!(spec.spread > 0.0)) throw ConfigError("synth_blobs: spread must be > 0");
    if (spec.normal_center.size() != spec.dims || spec.abnormal_center.size() != spec.dims) {
        throw ConfigError("synth_blobs: center dimensionality does not match dims");
    }
    if (spec.normal_center == spec.abnormal_center) {
        throw ConfigError("synth_blobs: centers must be distinct");
    }

    auto sample_group = [&](const std::vector<double>& center, std::uint64_t tag) {
        Rng rng(derive_seed(spec.seed, 0x5b, tag));
        std::vector<Image> out;
        out.reserve(spec.n_per_group);
        for (std::size_t i = 0; i < spec.n_per_group; ++i) {
            Image img(1, 1, static_cast<int>(spec.dims));
            for (std::size_t j = 0; j < spec.dims; ++j) {
                img.pix[j] = static_cast<float>(center[j] + spec.spread * rng.normal());
            }
            out.push_back(std::move(img));
        }
        return out;
    };

    DatasetSplit split;
    split.synthetic = true;
    split.normal_class = 0;
    split.seed = spec.seed;
    split.sizes = SplitSizes{spec.n_per_group, spec.n_per_group, spec.n_per_group,
                             spec.n_per_group, spec.n_per_group, spec.n_per_group,
                             spec.n_per_group, spec.n_per_group};
    split.unlabeled = sample_group(spec.normal_center, 1);
    split.labeled_normal = sample_group(spec.normal_center, 2);
    split.val_normal = sample_group(spec.normal_center, 3);
    split.test_normal = sample_group(spec.normal_center, 4);
    split.labeled_abnormal = sample_group(spec.abnormal_center, 5);
    split.val_abnormal = sample_group(spec.abnormal_center, 6);
    split.test_abnormal = sample_group(spec.abnormal_center, 7);
    split.asr_abnormal = sample_group(spec.abnormal_center, 8);
    return split;
}

std::string split_manifest_json(const DatasetSplit& split) {
    nlohmann::json j;
    j["normal_class"] = split.normal_class;
    j["seed"] = split.seed;
    j["synthetic"] = split.synthetic;
    j["sizes"] = {{"unlabeled", split.sizes.unlabeled},
                  {"labeled_normal", split.sizes.labeled_normal},
                  {"labeled_abnormal", split.sizes.labeled_abnormal},
                  {"val_normal", split.sizes.val_normal},
                  {"val_abnormal", split.sizes.val_abnormal},
                  {"test_normal", split.sizes.test_normal},
                  {"test_abnormal", split.sizes.test_abnormal},
                  {"asr_abnormal", split.sizes.asr_abnormal}};
    nlohmann::json subsets = nlohmann::json::object();
    for (const auto& [name, idx] : split.source_indices) {
        const bool train_role =
            name == "unlabeled" || name == "labeled_normal" || name == "labeled_abnormal";
        subsets[name] = {{"partition", train_role ? "train" : "test"}, {"indices", idx}};
    }
    j["subsets"] = subsets;
    return j.dump(2);
}

}  // namespace badsad
