#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "iilab/config.hpp"
#include "iilab/data.hpp"
#include "iilab/train.hpp"

namespace iilab {

struct GammaRow {
    double gamma2 = 0.0;
    uint64_t seed = 0;
    double r1 = 0.0, r10 = 0.0, r25 = 0.0;
};

struct BatchRow {
    size_t batch_n = 0;
    std::string variant;  // inter_only | ii
    uint64_t seed = 0;
    double r1 = 0.0, r10 = 0.0, r25 = 0.0;
};

struct NoiseRow {
    std::string mode;     // no_noise | with_noise | more_noise | most_noise
    std::string variant;  // inter_only | ii
    uint64_t seed = 0;
    double r1 = 0.0, r5 = 0.0, r10 = 0.0;
};

// Dataset per [data] source: regenerated from [synth] or loaded from a
// manifest.
Dataset materialize_dataset(const RunConfig& rc);
std::pair<Dataset, Dataset> materialize_split(const RunConfig& rc);

// Sweep computations, row order matching the emitted CSVs. Independent
// trainings run on up to experiment.jobs workers; results do not depend on
// the worker count.
std::vector<GammaRow> run_sweep_gamma(const RunConfig& rc);
std::vector<BatchRow> run_sweep_batch(const RunConfig& rc);
std::vector<NoiseRow> run_noise_exp(const RunConfig& rc);

struct TrainOutputs {
    std::filesystem::path metrics_csv;
    std::filesystem::path checkpoint_dir;
    std::vector<EpochMetrics> metrics;
};

struct GenDataOutputs {
    int64_t n_records = 0;
    std::filesystem::path manifest;
};

// Command layer shared by the CLI and the tests: each runs one unit of the
// external interface and writes its artifacts under output.dir.
GenDataOutputs cmd_gen_data(const RunConfig& rc);
TrainOutputs cmd_train(const RunConfig& rc);
std::filesystem::path cmd_eval(const RunConfig& rc);         // eval.csv
std::filesystem::path cmd_sweep_gamma(const RunConfig& rc);  // sweep_gamma.csv
std::filesystem::path cmd_sweep_batch(const RunConfig& rc);  // sweep_batch.csv
std::filesystem::path cmd_noise_exp(const RunConfig& rc);    // noise_exp.csv
int cmd_grad_check(std::string& report);  // returns process exit code

}  // namespace iilab
