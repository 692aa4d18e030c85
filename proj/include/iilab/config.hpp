#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iilab/data.hpp"
#include "iilab/encoders.hpp"
#include "iilab/eval.hpp"
#include "iilab/train.hpp"

namespace iilab {

// Minimal sectioned key=value document: `[section]` headers, `key = value`
// lines, `#` comments. Entries keep file order.
struct IniDoc {
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
        size_t line = 0;
    };
    std::vector<Entry> entries;
};

IniDoc parse_ini(const std::string& text, const std::string& origin);

struct DataConfig {
    std::string source = "synth";  // synth | manifest
    std::string manifest;          // required when source == manifest
    size_t test_pairs_per_category = 2;
    uint64_t split_seed = 9001;

    void validate() const;
};

struct EvalConfig {
    std::string checkpoint;  // model directory, required by the eval command
    TruthMode mode = TruthMode::pair;
    std::vector<size_t> ks = {1, 10, 25};
};

struct ExperimentConfig {
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<double> gammas = {0, 3, 6, 10};
    std::vector<size_t> batches = {24, 48, 96};
    size_t jobs = 1;

    void validate() const;
};

struct OutputConfig {
    std::string dir = "out";
};

struct RunConfig {
    DataConfig data;
    SynthConfig synth;
    EncoderConfig video_encoder;
    EncoderConfig music_encoder;
    TrainConfig train;
    EvalConfig eval;
    ExperimentConfig experiment;
    OutputConfig output;

    void validate() const;
};

// Desk-scale defaults; every command starts from this and applies the
// config file on top.
RunConfig default_run_config();

// Applies one key. `context` prefixes error messages (file:line or the
// override source). Unknown sections or keys are hard errors.
void apply_config_kv(RunConfig& rc, const std::string& section, const std::string& key,
                     const std::string& value, const std::string& context);

RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

// Dotted form `section.key`, used by CLI flags and the shared-library API.
void apply_override(RunConfig& rc, const std::string& dotted_key, const std::string& value);

// Value parsers shared with the checkpoint index reader.
size_t parse_size(const std::string& s, const std::string& context);
uint64_t parse_u64(const std::string& s, const std::string& context);
double parse_double(const std::string& s, const std::string& context);
std::vector<uint64_t> parse_u64_list(const std::string& s, const std::string& context);
std::vector<double> parse_double_list(const std::string& s, const std::string& context);
std::vector<size_t> parse_size_list(const std::string& s, const std::string& context);

}  // namespace iilab
