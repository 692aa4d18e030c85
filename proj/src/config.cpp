#include "iilab/config.hpp"

#include <fstream>
#include <sstream>

#include "iilab/common.hpp"

namespace iilab {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

[[noreturn]] void bad_value(const std::string& context, const std::string& what,
                            const std::string& value) {
    throw InvalidInput(context + ": expected " + what + ", got '" + value + "'");
}

}  // namespace

size_t parse_size(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size() || v < 0) throw std::invalid_argument("range");
        return static_cast<size_t>(v);
    } catch (const std::exception&) {
        bad_value(context, "a non-negative integer", s);
    }
}

uint64_t parse_u64(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size() || (!s.empty() && s[0] == '-')) throw std::invalid_argument("range");
        return static_cast<uint64_t>(v);
    } catch (const std::exception&) {
        bad_value(context, "an unsigned integer", s);
    }
}

double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        bad_value(context, "a number", s);
    }
}

std::vector<uint64_t> parse_u64_list(const std::string& s, const std::string& context) {
    std::vector<uint64_t> out;
    for (const std::string& item : split_list(s)) out.push_back(parse_u64(item, context));
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& context) {
    std::vector<double> out;
    for (const std::string& item : split_list(s)) out.push_back(parse_double(item, context));
    return out;
}

std::vector<size_t> parse_size_list(const std::string& s, const std::string& context) {
    std::vector<size_t> out;
    for (const std::string& item : split_list(s)) out.push_back(parse_size(item, context));
    return out;
}

IniDoc parse_ini(const std::string& text, const std::string& origin) {
    IniDoc doc;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    size_t line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::string context = origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw InvalidInput(context + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw InvalidInput(context + ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput(context + ": expected `key = value` or `[section]`");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw InvalidInput(context + ": empty key");
        doc.entries.push_back({section, key, trim(line.substr(eq + 1)), line_no});
    }
    return doc;
}

void DataConfig::validate() const {
    if (source != "synth" && source != "manifest")
        throw InvalidInput("data.source must be synth or manifest, got '" + source + "'");
    if (source == "manifest" && manifest.empty())
        throw InvalidInput("data.source=manifest requires data.manifest");
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw InvalidInput("experiment.seeds must be nonempty");
    if (gammas.empty()) throw InvalidInput("experiment.gammas must be nonempty");
    if (batches.empty()) throw InvalidInput("experiment.batches must be nonempty");
    if (jobs < 1) throw InvalidInput("experiment.jobs must be >= 1");
    for (double g : gammas)
        if (!(g >= 0.0)) throw InvalidInput("experiment.gammas entries must be >= 0");
}

void RunConfig::validate() const {
    data.validate();
    synth.validate();
    train.validate();
    experiment.validate();
    for (const EncoderConfig* e : {&video_encoder, &music_encoder}) {
        if (e->output_dim < 1) throw InvalidInput("encoder output_dim must be >= 1");
        if (e->kind == EncoderKind::mlp && e->hidden_dim < 1)
            throw InvalidInput("mlp encoder hidden_dim must be >= 1");
    }
    for (size_t k : eval.ks)
        if (k < 1) throw InvalidInput("eval.ks entries must be >= 1");
}

RunConfig default_run_config() {
    RunConfig rc;
    rc.video_encoder.kind = EncoderKind::mlp;
    rc.video_encoder.hidden_dim = 64;
    rc.video_encoder.output_dim = 32;
    rc.video_encoder.seed = 101;
    rc.music_encoder.kind = EncoderKind::mlp;
    rc.music_encoder.hidden_dim = 64;
    rc.music_encoder.output_dim = 32;
    rc.music_encoder.seed = 202;
    return rc;
}

void apply_config_kv(RunConfig& rc, const std::string& section, const std::string& key,
                     const std::string& value, const std::string& context) {
    const auto unknown_key = [&]() -> void {
        throw InvalidInput(context + ": unknown key '" + key + "' in section [" + section + "]");
    };

    if (section == "data") {
        if (key == "source") rc.data.source = value;
        else if (key == "manifest") rc.data.manifest = value;
        else if (key == "test_pairs_per_category")
            rc.data.test_pairs_per_category = parse_size(value, context);
        else if (key == "split_seed") rc.data.split_seed = parse_u64(value, context);
        else unknown_key();
        return;
    }
    if (section == "synth") {
        if (key == "categories") rc.synth.n_categories = parse_size(value, context);
        else if (key == "pairs_per_category") rc.synth.pairs_per_category = parse_size(value, context);
        else if (key == "latent_dim") rc.synth.latent_dim = parse_size(value, context);
        else if (key == "video_dim") rc.synth.video_dim = parse_size(value, context);
        else if (key == "music_dim") rc.synth.music_dim = parse_size(value, context);
        else if (key == "seq_len_min") rc.synth.seq_len_min = parse_size(value, context);
        else if (key == "seq_len_max") rc.synth.seq_len_max = parse_size(value, context);
        else if (key == "cluster_spread") rc.synth.cluster_spread = parse_double(value, context);
        else if (key == "frame_noise") rc.synth.frame_noise = parse_double(value, context);
        else if (key == "seed") rc.synth.seed = parse_u64(value, context);
        else unknown_key();
        return;
    }
    if (section == "video_encoder" || section == "music_encoder") {
        EncoderConfig& e = section[0] == 'v' ? rc.video_encoder : rc.music_encoder;
        if (key == "kind") e.kind = encoder_kind_from_name(value);
        else if (key == "hidden_dim") e.hidden_dim = parse_size(value, context);
        else if (key == "output_dim") e.output_dim = parse_size(value, context);
        else if (key == "seed") e.seed = parse_u64(value, context);
        else unknown_key();
        return;
    }
    if (section == "loss") {
        LossWeights& w = rc.train.weights;
        if (key == "alpha1") w.alpha1 = parse_double(value, context);
        else if (key == "alpha2") w.alpha2 = parse_double(value, context);
        else if (key == "beta1") w.beta1 = parse_double(value, context);
        else if (key == "beta2") w.beta2 = parse_double(value, context);
        else if (key == "gamma1") w.gamma1 = parse_double(value, context);
        else if (key == "gamma2") w.gamma2 = parse_double(value, context);
        else if (key == "delta1") w.delta1 = parse_double(value, context);
        else if (key == "delta2") w.delta2 = parse_double(value, context);
        else unknown_key();
        return;
    }
    if (section == "train") {
        TrainConfig& t = rc.train;
        if (key == "batch_n") t.batch_n = parse_size(value, context);
        else if (key == "epochs") t.epochs = parse_size(value, context);
        else if (key == "lr") t.lr = parse_double(value, context);
        else if (key == "adam_beta1") t.adam_beta1 = parse_double(value, context);
        else if (key == "adam_beta2") t.adam_beta2 = parse_double(value, context);
        else if (key == "adam_eps") t.adam_eps = parse_double(value, context);
        else if (key == "temp_init") t.temp_init = parse_double(value, context);
        else if (key == "sampler") t.sampler = sampler_mode_from_name(value);
        else if (key == "sampling") t.sampling = sampling_kind_from_name(value);
        else if (key == "gs_t") t.gs_t = parse_size(value, context);
        else if (key == "fd_window") t.fd_window = parse_size(value, context);
        else if (key == "seed") t.seed = parse_u64(value, context);
        else if (key == "eval_mode") t.eval_mode = truth_mode_from_name(value);
        else unknown_key();
        return;
    }
    if (section == "eval") {
        if (key == "checkpoint") rc.eval.checkpoint = value;
        else if (key == "mode") rc.eval.mode = truth_mode_from_name(value);
        else if (key == "ks") rc.eval.ks = parse_size_list(value, context);
        else unknown_key();
        return;
    }
    if (section == "experiment") {
        if (key == "seeds") rc.experiment.seeds = parse_u64_list(value, context);
        else if (key == "gammas") rc.experiment.gammas = parse_double_list(value, context);
        else if (key == "batches") rc.experiment.batches = parse_size_list(value, context);
        else if (key == "jobs") rc.experiment.jobs = parse_size(value, context);
        else unknown_key();
        return;
    }
    if (section == "output") {
        if (key == "dir") rc.output.dir = value;
        else unknown_key();
        return;
    }
    if (section.empty())
        throw InvalidInput(context + ": key '" + key + "' appears before any [section]");
    throw InvalidInput(context + ": unknown section [" + section + "]");
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig rc = default_run_config();
    for (const IniDoc::Entry& e : parse_ini(text, origin).entries)
        apply_config_kv(rc, e.section, e.key, e.value,
                        origin + ":" + std::to_string(e.line));
    rc.validate();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw RuntimeFailure("read failed for " + path.string());
    return parse_run_config(text, path.string());
}

void apply_override(RunConfig& rc, const std::string& dotted_key, const std::string& value) {
    const size_t dot = dotted_key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= dotted_key.size())
        throw InvalidInput("override key must be section.key, got '" + dotted_key + "'");
    apply_config_kv(rc, dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value,
                    "override " + dotted_key);
}

}  // namespace iilab
