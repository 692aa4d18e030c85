#include "iilab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "iilab/config.hpp"
#include "iilab/kernels.hpp"
#include "iilab/rng.hpp"
#include "iilab/tensor_io.hpp"

namespace iilab {

namespace {

struct BatchPart {
    size_t categories;
    size_t pairs_each;
};

std::vector<BatchPart> partition_for(SamplerMode mode, size_t batch_n) {
    switch (mode) {
        case SamplerMode::no_noise: return {{batch_n, 1}};
        case SamplerMode::with_noise: return {{batch_n / 3, 1}, {batch_n / 3, 2}};
        case SamplerMode::more_noise: return {{batch_n / 2, 2}};
        case SamplerMode::most_noise: return {{batch_n / 4, 4}};
        case SamplerMode::uniform: break;
    }
    throw InvalidInput("uniform sampler has no category partition");
}

std::string checkpoint_file_name(const std::string& param_name) {
    std::string f = param_name;
    for (char& c : f)
        if (c == '.') c = '_';
    return f + ".tnsr";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.flush();
    if (!f) throw RuntimeFailure("write failed for " + path.string());
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_encoder_section(std::string& out, const char* section, const EncoderConfig& cfg) {
    out += std::string("[") + section + "]\n";
    out += std::string("kind = ") + encoder_kind_name(cfg.kind) + "\n";
    out += "input_dim = " + std::to_string(cfg.input_dim) + "\n";
    out += "hidden_dim = " + std::to_string(cfg.hidden_dim) + "\n";
    out += "output_dim = " + std::to_string(cfg.output_dim) + "\n";
    out += "seed = " + std::to_string(cfg.seed) + "\n";
}

}  // namespace

SamplerMode sampler_mode_from_name(const std::string& name) {
    if (name == "uniform") return SamplerMode::uniform;
    if (name == "no_noise") return SamplerMode::no_noise;
    if (name == "with_noise") return SamplerMode::with_noise;
    if (name == "more_noise") return SamplerMode::more_noise;
    if (name == "most_noise") return SamplerMode::most_noise;
    throw InvalidInput("unknown sampler mode '" + name + "'");
}

const char* sampler_mode_name(SamplerMode m) {
    switch (m) {
        case SamplerMode::uniform: return "uniform";
        case SamplerMode::no_noise: return "no_noise";
        case SamplerMode::with_noise: return "with_noise";
        case SamplerMode::more_noise: return "more_noise";
        case SamplerMode::most_noise: return "most_noise";
    }
    throw InvalidInput("unknown sampler mode");
}

SamplingKind sampling_kind_from_name(const std::string& name) {
    if (name == "gs") return SamplingKind::gs;
    if (name == "fd") return SamplingKind::fd;
    throw InvalidInput("unknown sampling kind '" + name + "' (expected gs or fd)");
}

const char* sampling_kind_name(SamplingKind k) { return k == SamplingKind::gs ? "gs" : "fd"; }

void TrainConfig::validate() const {
    if (batch_n < 2) throw InvalidInput("train.batch_n must be >= 2 for contrastive batches");
    if (sampler != SamplerMode::uniform && batch_n % 12 != 0)
        throw InvalidInput("noise sampler modes need train.batch_n divisible by 12");
    if (!(lr > 0.0)) throw InvalidInput("train.lr must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw InvalidInput("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw InvalidInput("train.adam_eps must be > 0");
    if (gs_t < 1) throw InvalidInput("train.gs_t must be >= 1");
    if (fd_window < 1) throw InvalidInput("train.fd_window must be >= 1");
    if (!std::isfinite(temp_init)) throw InvalidInput("train.temp_init must be finite");
    weights.validate();
}

std::vector<std::vector<int64_t>> make_batches(const Dataset& ds, const TrainConfig& cfg,
                                               uint64_t epoch_seed) {
    cfg.validate();
    const size_t n = ds.records.size();
    const size_t n_batches = n / cfg.batch_n;
    if (n_batches == 0)
        throw InvalidInput("dataset of " + std::to_string(n) +
                           " records is smaller than one batch of " + std::to_string(cfg.batch_n));

    Rng rng(epoch_seed);
    std::vector<std::vector<int64_t>> batches;
    batches.reserve(n_batches);

    if (cfg.sampler == SamplerMode::uniform) {
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        for (size_t b = 0; b < n_batches; ++b) {
            std::vector<int64_t> batch(cfg.batch_n);
            for (size_t j = 0; j < cfg.batch_n; ++j)
                batch[j] = ds.records[order[b * cfg.batch_n + j]].pair_id;
            batches.push_back(std::move(batch));
        }
        return batches;
    }

    const std::vector<BatchPart> parts = partition_for(cfg.sampler, cfg.batch_n);
    size_t cats_needed = 0, max_need = 0;
    for (const BatchPart& p : parts) {
        cats_needed += p.categories;
        max_need = std::max(max_need, p.pairs_each);
    }

    // Categories in ascending label order; only those able to serve the
    // largest per-category draw are eligible.
    std::map<int64_t, std::vector<int64_t>> by_category;
    for (const PairRecord& r : ds.records) by_category[r.category].push_back(r.pair_id);
    std::vector<const std::vector<int64_t>*> eligible;
    for (const auto& [cat, ids] : by_category)
        if (ids.size() >= max_need) eligible.push_back(&ids);
    if (eligible.size() < cats_needed)
        throw InvalidInput(std::string("sampler mode ") + sampler_mode_name(cfg.sampler) +
                           " needs " + std::to_string(cats_needed) + " categories with >= " +
                           std::to_string(max_need) + " records, found " +
                           std::to_string(eligible.size()));

    std::vector<size_t> cat_order(eligible.size());
    std::vector<int64_t> pool;
    for (size_t b = 0; b < n_batches; ++b) {
        for (size_t i = 0; i < cat_order.size(); ++i) cat_order[i] = i;
        rng.shuffle(cat_order);
        std::vector<int64_t> batch;
        batch.reserve(cfg.batch_n);
        size_t cursor = 0;
        for (const BatchPart& part : parts)
            for (size_t c = 0; c < part.categories; ++c) {
                pool = *eligible[cat_order[cursor++]];
                for (size_t j = 0; j < part.pairs_each; ++j) {
                    const size_t pick = j + static_cast<size_t>(rng.below(pool.size() - j));
                    std::swap(pool[j], pool[pick]);
                    batch.push_back(pool[j]);
                }
            }
        batches.push_back(std::move(batch));
    }
    return batches;
}

void adam_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size())
        throw InvalidInput("adam_step: got " + std::to_string(grads.size()) + " gradients for " +
                           std::to_string(params.size()) + " parameters");
    if (state.m.empty()) {
        for (const ParamRef& p : params) {
            state.m.emplace_back(p.tensor->shape);
            state.v.emplace_back(p.tensor->shape);
        }
    }
    if (state.m.size() != params.size())
        throw InvalidInput("adam_step: optimizer state does not match parameter list");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = *params[i].tensor;
        const Tensor& g = grads[i];
        if (g.shape != theta.shape)
            throw InvalidInput("adam_step: gradient shape " + g.shape.str() +
                               " does not match parameter '" + params[i].name + "' " +
                               theta.shape.str());
        if (!g.all_finite())
            throw RuntimeFailure("non-finite gradient in parameter '" + params[i].name +
                                 "' at optimizer step " + std::to_string(state.step));
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (size_t e = 0; e < theta.count(); ++e) {
            const double ge = g.data[e];
            m.data[e] = beta1 * m.data[e] + (1.0 - beta1) * ge;
            v.data[e] = beta2 * v.data[e] + (1.0 - beta2) * ge * ge;
            const double mhat = m.data[e] / bc1;
            const double vhat = v.data[e] / bc2;
            theta.data[e] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Tensor sample_sequence(const Tensor& frames, SamplingKind kind, size_t gs_t, size_t fd_window) {
    return kind == SamplingKind::gs ? gs_sample(frames, gs_t) : fd_sample(frames, fd_window);
}

Tensor encode_corpus(const EncoderConfig& cfg, const EncoderParams& params, const Dataset& ds,
                     Side side, SamplingKind kind, size_t gs_t, size_t fd_window) {
    if (ds.records.empty()) throw InvalidInput("encode_corpus: empty dataset");
    const size_t t = kind == SamplingKind::gs ? gs_t : fd_window;
    const size_t e = side == Side::video ? ds.video_dim : ds.music_dim;
    Tensor slab(Shape{ds.records.size(), t, e});
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const Tensor& seq = side == Side::video ? ds.records[i].video : ds.records[i].music;
        const Tensor sampled = sample_sequence(seq, kind, gs_t, fd_window);
        for (size_t j = 0; j < t; ++j)
            for (size_t c = 0; c < e; ++c) slab.at3(i, j, c) = sampled.at(j, c);
    }
    return encode_plain(cfg, params, slab);
}

namespace {

std::vector<int64_t> labels_for(const Dataset& ds, TruthMode mode) {
    std::vector<int64_t> labels(ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i)
        labels[i] = mode == TruthMode::pair ? ds.records[i].pair_id : ds.records[i].category;
    return labels;
}

}  // namespace

std::vector<double> model_recalls(const ModelState& model, const Dataset& ds, SamplingKind kind,
                                  size_t gs_t, size_t fd_window, TruthMode mode,
                                  const std::vector<size_t>& ks) {
    const Tensor queries =
        encode_corpus(model.video_cfg, model.video_params, ds, Side::video, kind, gs_t, fd_window);
    const Tensor corpus =
        encode_corpus(model.music_cfg, model.music_params, ds, Side::music, kind, gs_t, fd_window);
    const std::vector<int64_t> labels = labels_for(ds, mode);
    const RetrievalResult rr = evaluate_retrieval(queries, corpus, labels, labels, ks);
    std::vector<double> out;
    out.reserve(rr.recalls.size());
    for (const auto& [k, r] : rr.recalls) out.push_back(r);
    return out;
}

std::pair<ModelState, std::vector<EpochMetrics>> train(const Dataset& ds_train,
                                                       const Dataset& ds_test,
                                                       const EncoderConfig& video_cfg,
                                                       const EncoderConfig& music_cfg,
                                                       const TrainConfig& cfg) {
    cfg.validate();
    if (ds_train.records.empty()) throw InvalidInput("train: empty training dataset");
    if (ds_test.records.empty()) throw InvalidInput("train: empty test dataset");

    // Resolve input dims from the data and derive per-run init seeds, so
    // different run seeds give independent inits while a sweep arm and a
    // plain run at the same seed match exactly.
    ModelState model;
    model.video_cfg = video_cfg;
    model.video_cfg.input_dim = ds_train.video_dim;
    model.video_cfg.seed = mix_seed(video_cfg.seed, cfg.seed);
    model.music_cfg = music_cfg;
    model.music_cfg.input_dim = ds_train.music_dim;
    model.music_cfg.seed = mix_seed(music_cfg.seed, cfg.seed);
    model.video_params = init_params(model.video_cfg);
    model.music_params = init_params(model.music_cfg);
    model.n_t = clamp_temperature(cfg.temp_init);

    std::vector<EpochMetrics> metrics;
    if (cfg.epochs == 0) return {std::move(model), std::move(metrics)};

    const size_t t_v = cfg.sampling == SamplingKind::gs ? cfg.gs_t : cfg.fd_window;

    // Sampling is deterministic, so sample every training sequence once.
    std::map<int64_t, size_t> index_of;
    std::vector<Tensor> sampled_v(ds_train.records.size());
    std::vector<Tensor> sampled_m(ds_train.records.size());
    for (size_t i = 0; i < ds_train.records.size(); ++i) {
        const PairRecord& r = ds_train.records[i];
        if (!index_of.emplace(r.pair_id, i).second)
            throw InvalidInput("train: duplicate pair_id " + std::to_string(r.pair_id));
        sampled_v[i] = sample_sequence(r.video, cfg.sampling, cfg.gs_t, cfg.fd_window);
        sampled_m[i] = sample_sequence(r.music, cfg.sampling, cfg.gs_t, cfg.fd_window);
    }

    Tensor n_t_param = Tensor::scalar(model.n_t);
    std::vector<ParamRef> refs;
    for (auto& [name, tensor] : model.video_params.named) refs.push_back({"video." + name, &tensor});
    for (auto& [name, tensor] : model.music_params.named) refs.push_back({"music." + name, &tensor});
    refs.push_back({"temperature.n_t", &n_t_param});
    AdamState adam;

    const size_t pool = ds_test.records.size();
    const std::vector<size_t> ks = {std::min<size_t>(1, pool), std::min<size_t>(10, pool),
                                    std::min<size_t>(25, pool)};
    const std::vector<int64_t> test_labels = labels_for(ds_test, cfg.eval_mode);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = make_batches(ds_train, cfg, mix_seed(cfg.seed, epoch));
        double inter_sum = 0.0, intra_sum = 0.0;

        for (const std::vector<int64_t>& batch : batches) {
            const size_t n = batch.size();
            Tensor vslab(Shape{n, t_v, ds_train.video_dim});
            Tensor mslab(Shape{n, t_v, ds_train.music_dim});
            for (size_t i = 0; i < n; ++i) {
                const auto it = index_of.find(batch[i]);
                if (it == index_of.end())
                    throw RuntimeFailure("batch references unknown pair_id " +
                                         std::to_string(batch[i]));
                const Tensor& sv = sampled_v[it->second];
                const Tensor& sm = sampled_m[it->second];
                for (size_t j = 0; j < t_v; ++j) {
                    for (size_t c = 0; c < ds_train.video_dim; ++c)
                        vslab.at3(i, j, c) = sv.at(j, c);
                    for (size_t c = 0; c < ds_train.music_dim; ++c)
                        mslab.at3(i, j, c) = sm.at(j, c);
                }
            }

            Tape tape;
            EncoderNodes vn = params_to_tape(tape, model.video_params, true);
            EncoderNodes mn = params_to_tape(tape, model.music_params, true);
            NodeId nt = tape.leaf(n_t_param, true);
            NodeId vb = tape.leaf(std::move(vslab), false);
            NodeId mb = tape.leaf(std::move(mslab), false);

            const LossBreakdown lb = ii_loss(tape, model.video_cfg, vn, model.music_cfg, mn, vb,
                                             mb, nt, cfg.weights);
            if (!std::isfinite(lb.total_value))
                throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch + 1));

            const GradTable grads = tape.backward(lb.total);
            std::vector<Tensor> grad_list;
            grad_list.reserve(refs.size());
            for (const auto& [name, id] : vn.named) grad_list.push_back(grads.at(id));
            for (const auto& [name, id] : mn.named) grad_list.push_back(grads.at(id));
            grad_list.push_back(grads.at(nt));

            adam_step(refs, grad_list, adam, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            n_t_param.data[0] = clamp_temperature(n_t_param.data[0]);

            inter_sum += lb.inter_value;
            intra_sum += cfg.weights.beta1 * lb.intra_v_value +
                         cfg.weights.beta2 * lb.intra_m_value;
        }

        model.n_t = n_t_param.data[0];
        const std::vector<double> recalls = model_recalls(model, ds_test, cfg.sampling, cfg.gs_t,
                                                          cfg.fd_window, cfg.eval_mode, ks);
        EpochMetrics em;
        em.epoch = epoch + 1;
        em.inter_loss = inter_sum / static_cast<double>(batches.size());
        em.intra_loss = intra_sum / static_cast<double>(batches.size());
        em.r1 = recalls[0];
        em.r10 = recalls[1];
        em.r25 = recalls[2];
        metrics.push_back(em);
    }
    return {std::move(model), std::move(metrics)};
}

void save_model(const std::filesystem::path& dir, const ModelState& model) {
    std::filesystem::create_directories(dir);
    std::string index;
    append_encoder_section(index, "video_encoder", model.video_cfg);
    append_encoder_section(index, "music_encoder", model.music_cfg);
    index += "[temperature]\nn_t = " + format_g17(model.n_t) + "\n";
    index += "[params]\n";
    for (const auto* params : {&model.video_params, &model.music_params}) {
        const char* prefix = params == &model.video_params ? "video." : "music.";
        for (const auto& [name, tensor] : params->named) {
            const std::string full = prefix + name;
            const std::string file = checkpoint_file_name(full);
            save_tensor(dir / file, tensor);
            index += full + " = " + file + "\n";
        }
    }
    write_text_file(dir / "index.txt", index);
}

ModelState load_model(const std::filesystem::path& dir) {
    const auto index_path = dir / "index.txt";
    std::ifstream f(index_path);
    if (!f) throw InvalidInput("cannot open checkpoint index " + index_path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw RuntimeFailure("read failed for " + index_path.string());

    ModelState model;
    bool have_temp = false;
    std::vector<std::pair<std::string, std::string>> param_files;
    for (const IniDoc::Entry& e : parse_ini(text, index_path.string()).entries) {
        const std::string context = index_path.string() + ":" + std::to_string(e.line);
        if (e.section == "video_encoder" || e.section == "music_encoder") {
            EncoderConfig& cfg = e.section[0] == 'v' ? model.video_cfg : model.music_cfg;
            if (e.key == "kind") cfg.kind = encoder_kind_from_name(e.value);
            else if (e.key == "input_dim") cfg.input_dim = parse_size(e.value, context);
            else if (e.key == "hidden_dim") cfg.hidden_dim = parse_size(e.value, context);
            else if (e.key == "output_dim") cfg.output_dim = parse_size(e.value, context);
            else if (e.key == "seed") cfg.seed = parse_u64(e.value, context);
            else throw InvalidInput(context + ": unknown checkpoint key '" + e.key + "'");
        } else if (e.section == "temperature") {
            if (e.key != "n_t")
                throw InvalidInput(context + ": unknown checkpoint key '" + e.key + "'");
            model.n_t = parse_double(e.value, context);
            have_temp = true;
        } else if (e.section == "params") {
            param_files.emplace_back(e.key, e.value);
        } else {
            throw InvalidInput(context + ": unknown checkpoint section [" + e.section + "]");
        }
    }
    if (!have_temp) throw InvalidInput(index_path.string() + ": missing [temperature] n_t");

    // Initialize to get the canonical parameter list, then overwrite every
    // tensor from its file.
    model.video_params = init_params(model.video_cfg);
    model.music_params = init_params(model.music_cfg);
    std::set<std::string> loaded;
    for (const auto& [full, file] : param_files) {
        const size_t dot = full.find('.');
        if (dot == std::string::npos)
            throw InvalidInput(index_path.string() + ": parameter name '" + full +
                               "' must be side.name");
        const std::string side = full.substr(0, dot), name = full.substr(dot + 1);
        EncoderParams& params =
            side == "video" ? model.video_params
                            : (side == "music" ? model.music_params
                                               : throw InvalidInput("unknown parameter side '" +
                                                                    side + "'"));
        Tensor& dst = params.at(name);
        Tensor loaded_tensor = load_tensor(dir / file);
        if (loaded_tensor.shape != dst.shape)
            throw InvalidInput("checkpoint tensor '" + full + "' has shape " +
                               loaded_tensor.shape.str() + ", expected " + dst.shape.str());
        dst = std::move(loaded_tensor);
        loaded.insert(full);
    }
    for (const auto* params : {&model.video_params, &model.music_params}) {
        const char* prefix = params == &model.video_params ? "video." : "music.";
        for (const auto& [name, tensor] : params->named)
            if (!loaded.count(prefix + name))
                throw InvalidInput("checkpoint is missing parameter '" + std::string(prefix) +
                                   name + "'");
    }
    return model;
}

}  // namespace iilab
