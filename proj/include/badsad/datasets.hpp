#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "badsad/image.hpp"

namespace badsad {

struct SplitSizes {
    std::size_t unlabeled = 4000;
    std::size_t labeled_normal = 500;
    std::size_t labeled_abnormal = 500;
    std::size_t val_normal = 200;
    std::size_t val_abnormal = 180;
    std::size_t test_normal = 760;
    std::size_t test_abnormal = 430;
    std::size_t asr_abnormal = 500;
};

// The named subsets of one experiment. Train-role subsets come from the
// training partition, val/test/asr from the test partition; subsets drawn
// from the same partition are disjoint by source index. poisoned starts
// empty and is materialized by the trigger module.
struct DatasetSplit {
    std::vector<Image> unlabeled;
    std::vector<Image> labeled_normal;
    std::vector<Image> labeled_abnormal;
    std::vector<Image> poisoned;
    std::vector<Image> val_normal;
    std::vector<Image> val_abnormal;
    std::vector<Image> test_normal;
    std::vector<Image> test_abnormal;
    std::vector<Image> asr_abnormal;

    int normal_class = 0;
    std::uint64_t seed = 0;
    SplitSizes sizes;
    bool synthetic = false;

    // subset name -> source indices into its pool (empty for synthetic data)
    std::map<std::string, std::vector<std::size_t>> source_indices;
};

struct SyntheticSpec {
    std::size_t n_per_group = 500;
    std::size_t dims = 2;
    std::vector<double> normal_center = {0.6, 0.5};
    std::vector<double> abnormal_center = {0.9, 0.1};
    double spread = 0.07;
    std::uint64_t seed = 1;
};

// IDX: big-endian header, then raw unsigned bytes; pixels normalized to [0,1].
std::vector<LabeledImage> load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary: repeated 3073-byte records (label, 1024 R, 1024 G, 1024 B).
std::vector<LabeledImage> load_cifar10(const std::vector<std::string>& batch_paths);

DatasetSplit build_split(const std::vector<LabeledImage>& train_pool,
                         const std::vector<LabeledImage>& test_pool, int normal_class,
                         const SplitSizes& sizes, std::uint64_t seed);

// Isotropic Gaussian blobs shaped as 1x1xdims flat images; every role gets
// n_per_group points.
DatasetSplit synth_blobs(const SyntheticSpec& spec);

// JSON manifest recording normal_class, seed, sizes and per-subset source
// indices so a run is exactly reconstructable.
std::string split_manifest_json(const DatasetSplit& split);

}  // namespace badsad
