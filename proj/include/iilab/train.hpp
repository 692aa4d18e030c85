#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "iilab/data.hpp"
#include "iilab/encoders.hpp"
#include "iilab/eval.hpp"
#include "iilab/losses.hpp"

namespace iilab {

// Batch composition. uniform shuffles the epoch; the noise modes inject a
// controlled number of same-category (false-negative) pairs per batch.
enum class SamplerMode { uniform, no_noise, with_noise, more_noise, most_noise };
SamplerMode sampler_mode_from_name(const std::string& name);
const char* sampler_mode_name(SamplerMode m);

enum class SamplingKind { gs, fd };
SamplingKind sampling_kind_from_name(const std::string& name);
const char* sampling_kind_name(SamplingKind k);

struct TrainConfig {
    size_t batch_n = 24;
    size_t epochs = 30;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights weights;
    double temp_init = 0.07;
    SamplerMode sampler = SamplerMode::uniform;
    size_t gs_t = 16;
    SamplingKind sampling = SamplingKind::gs;
    size_t fd_window = 30;
    uint64_t seed = 1;
    TruthMode eval_mode = TruthMode::pair;  // per-epoch test metric mode

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    size_t step = 0;
};

struct EpochMetrics {
    size_t epoch = 0;         // 1-based
    double inter_loss = 0.0;  // mean over the epoch's batches
    double intra_loss = 0.0;  // beta-weighted sum of both intra terms, mean over batches
    double r1 = 0.0, r10 = 0.0, r25 = 0.0;
};

struct ModelState {
    EncoderConfig video_cfg;
    EncoderConfig music_cfg;
    EncoderParams video_params;
    EncoderParams music_params;
    double n_t = 0.07;
};

// Batches of pair_ids for one epoch. The uniform sampler partitions a
// shuffle of the whole set (remainder dropped); noise modes draw each batch
// independently by category. Deterministic given epoch_seed.
std::vector<std::vector<int64_t>> make_batches(const Dataset& ds, const TrainConfig& cfg,
                                               uint64_t epoch_seed);

struct ParamRef {
    std::string name;
    Tensor* tensor = nullptr;
};

// Standard Adam with bias correction. Non-finite gradients abort.
void adam_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

Tensor sample_sequence(const Tensor& frames, SamplingKind kind, size_t gs_t, size_t fd_window);

enum class Side { video, music };

// Embeds every record of ds with no tape recording; row i corresponds to
// ds.records[i]. Matches the training forward path bit for bit.
Tensor encode_corpus(const EncoderConfig& cfg, const EncoderParams& params, const Dataset& ds,
                     Side side, SamplingKind kind, size_t gs_t, size_t fd_window);

// Full training loop. Per epoch: sample batches, minimize the combined
// loss, then evaluate video->music R@{1,10,25} on ds_test (k clamped to
// the pool size). Deterministic given cfg.seed.
std::pair<ModelState, std::vector<EpochMetrics>> train(const Dataset& ds_train,
                                                       const Dataset& ds_test,
                                                       const EncoderConfig& video_cfg,
                                                       const EncoderConfig& music_cfg,
                                                       const TrainConfig& cfg);

// Video->music retrieval recalls for a trained model, one value per k.
std::vector<double> model_recalls(const ModelState& model, const Dataset& ds, SamplingKind kind,
                                  size_t gs_t, size_t fd_window, TruthMode mode,
                                  const std::vector<size_t>& ks);

// Checkpoint: a directory of tensor files plus index.txt describing both
// encoder configs, the temperature, and the name->file parameter map.
void save_model(const std::filesystem::path& dir, const ModelState& model);
ModelState load_model(const std::filesystem::path& dir);

}  // namespace iilab
