#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "iilab/tensor.hpp"

namespace iilab {

// One video/music feature-sequence pair with its cluster label. Sequences
// are (L, E) matrices with L >= 1 and finite values.
struct PairRecord {
    int64_t pair_id = 0;
    int64_t category = 0;
    Tensor video;
    Tensor music;
};

struct Dataset {
    std::vector<PairRecord> records;
    size_t video_dim = 0;
    size_t music_dim = 0;
};

struct SynthConfig {
    size_t n_categories = 64;
    size_t pairs_per_category = 40;
    size_t latent_dim = 16;
    size_t video_dim = 32;
    size_t music_dim = 24;
    size_t seq_len_min = 20;
    size_t seq_len_max = 60;
    // Noise levels sized so false negatives measurably hurt the plain
    // contrastive objective while category structure stays learnable.
    double cluster_spread = 0.4;  // latent sigma within a category
    double frame_noise = 2.5;     // per-frame observation sigma
    uint64_t seed = 11;

    void validate() const;
};

// Global sparse sampling: split L frames evenly into t clips and mean each
// clip; when L < t some clips are empty and fall back to the single frame
// at the clip's start index.
Tensor gs_sample(const Tensor& frames, size_t t);

// Fixed-duration sampling: centered window of w frames, edge-padded
// symmetrically when the sequence is shorter than w.
Tensor fd_sample(const Tensor& frames, size_t w);

Tensor temporal_mean(const Tensor& frames);

Dataset generate_synthetic(const SynthConfig& cfg);

// Writes one tensor file per sequence plus manifest.csv into dir.
// Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& ds);

// Manifest lines are `pair_id,category,video_path,music_path`, paths
// relative to the manifest's directory; `#` lines are comments.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Per-category random holdout of test_pairs_per_category records.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, size_t test_pairs_per_category,
                                             uint64_t seed);

}  // namespace iilab
