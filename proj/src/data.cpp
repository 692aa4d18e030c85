#include "iilab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "iilab/common.hpp"
#include "iilab/rng.hpp"
#include "iilab/tensor_io.hpp"

namespace iilab {

namespace {

void require_sequence(const Tensor& frames, const char* op) {
    if (frames.rank() != 2)
        throw InvalidInput(std::string(op) + ": sequence must be rank 2, got " + frames.shape.str());
}

// Orthonormalizes the rows of a (k, d) Gaussian draw in place, k <= d.
void gram_schmidt_rows(Tensor& m) {
    const size_t k = m.rows(), d = m.cols();
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (size_t c = 0; c < d; ++c) dot += m.at(i, c) * m.at(j, c);
            for (size_t c = 0; c < d; ++c) m.at(i, c) -= dot * m.at(j, c);
        }
        double norm = 0.0;
        for (size_t c = 0; c < d; ++c) norm += m.at(i, c) * m.at(i, c);
        norm = std::sqrt(norm);
        if (norm < 1e-8) throw RuntimeFailure("projection rows degenerate during orthonormalization");
        for (size_t c = 0; c < d; ++c) m.at(i, c) /= norm;
    }
}

Tensor gaussian_matrix(size_t rows, size_t cols, Rng& rng) {
    Tensor m(Shape{rows, cols});
    for (double& v : m.data) v = rng.normal();
    return m;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int64_t parse_int_field(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InvalidInput(context + ": not an integer: '" + s + "'");
    }
}

}  // namespace

void SynthConfig::validate() const {
    if (n_categories < 1 || pairs_per_category < 1)
        throw InvalidInput("synth: need at least one category and one pair per category");
    if (latent_dim < 1 || video_dim < 1 || music_dim < 1)
        throw InvalidInput("synth: dims must be >= 1");
    if (seq_len_min < 1 || seq_len_min > seq_len_max)
        throw InvalidInput("synth: need 1 <= seq_len_min <= seq_len_max");
    if (cluster_spread < 0.0 || frame_noise < 0.0)
        throw InvalidInput("synth: noise sigmas must be >= 0");
    if (latent_dim > video_dim || latent_dim > music_dim)
        throw InvalidInput("synth: latent_dim must not exceed video_dim or music_dim "
                           "(projection rows cannot be orthonormal otherwise)");
}

Tensor gs_sample(const Tensor& frames, size_t t) {
    require_sequence(frames, "gs_sample");
    if (t < 1) throw InvalidInput("gs_sample: clip count must be >= 1");
    const size_t len = frames.rows(), e = frames.cols();
    Tensor out(Shape{t, e});
    for (size_t i = 0; i < t; ++i) {
        const size_t lo = i * len / t;
        const size_t hi = (i + 1) * len / t;
        if (hi > lo) {
            for (size_t r = lo; r < hi; ++r)
                for (size_t c = 0; c < e; ++c) out.at(i, c) += frames.at(r, c);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            for (size_t c = 0; c < e; ++c) out.at(i, c) *= inv;
        } else {
            const size_t r = std::min(lo, len - 1);
            for (size_t c = 0; c < e; ++c) out.at(i, c) = frames.at(r, c);
        }
    }
    return out;
}

Tensor fd_sample(const Tensor& frames, size_t w) {
    require_sequence(frames, "fd_sample");
    if (w < 1) throw InvalidInput("fd_sample: window must be >= 1");
    const size_t len = frames.rows(), e = frames.cols();
    Tensor out(Shape{w, e});
    if (len >= w) {
        const size_t start = (len - w) / 2;
        for (size_t i = 0; i < w; ++i)
            for (size_t c = 0; c < e; ++c) out.at(i, c) = frames.at(start + i, c);
    } else {
        const int64_t pad_left = static_cast<int64_t>(w - len) / 2;
        for (size_t i = 0; i < w; ++i) {
            int64_t src = static_cast<int64_t>(i) - pad_left;
            src = std::clamp<int64_t>(src, 0, static_cast<int64_t>(len) - 1);
            for (size_t c = 0; c < e; ++c) out.at(i, c) = frames.at(static_cast<size_t>(src), c);
        }
    }
    return out;
}

Tensor temporal_mean(const Tensor& frames) {
    require_sequence(frames, "temporal_mean");
    const size_t len = frames.rows(), e = frames.cols();
    Tensor out(Shape{e});
    for (size_t r = 0; r < len; ++r)
        for (size_t c = 0; c < e; ++c) out.data[c] += frames.at(r, c);
    for (double& v : out.data) v /= static_cast<double>(len);
    return out;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    // Draw order is part of the format: projections, centers, then per pair
    // latent, lengths, video frames, music frames.
    Tensor proj_v = gaussian_matrix(cfg.latent_dim, cfg.video_dim, rng);
    gram_schmidt_rows(proj_v);
    Tensor proj_m = gaussian_matrix(cfg.latent_dim, cfg.music_dim, rng);
    gram_schmidt_rows(proj_m);

    Tensor centers(Shape{cfg.n_categories, cfg.latent_dim});
    for (size_t c = 0; c < cfg.n_categories; ++c) {
        double norm = 0.0;
        for (size_t j = 0; j < cfg.latent_dim; ++j) {
            const double v = rng.normal();
            centers.at(c, j) = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-8) throw RuntimeFailure("degenerate latent center draw");
        for (size_t j = 0; j < cfg.latent_dim; ++j) centers.at(c, j) /= norm;
    }

    const size_t span = cfg.seq_len_max - cfg.seq_len_min + 1;
    std::vector<double> z(cfg.latent_dim);

    auto make_sequence = [&](size_t len, const Tensor& proj, size_t out_dim) {
        Tensor frames(Shape{len, out_dim});
        for (size_t r = 0; r < len; ++r)
            for (size_t c = 0; c < out_dim; ++c) {
                double v = 0.0;
                for (size_t j = 0; j < cfg.latent_dim; ++j) v += z[j] * proj.at(j, c);
                frames.at(r, c) = v + cfg.frame_noise * rng.normal();
            }
        return frames;
    };

    Dataset ds;
    ds.video_dim = cfg.video_dim;
    ds.music_dim = cfg.music_dim;
    ds.records.reserve(cfg.n_categories * cfg.pairs_per_category);
    for (size_t c = 0; c < cfg.n_categories; ++c)
        for (size_t p = 0; p < cfg.pairs_per_category; ++p) {
            for (size_t j = 0; j < cfg.latent_dim; ++j)
                z[j] = centers.at(c, j) + cfg.cluster_spread * rng.normal();
            const size_t len_v = cfg.seq_len_min + rng.below(span);
            const size_t len_m = cfg.seq_len_min + rng.below(span);
            PairRecord rec;
            rec.pair_id = static_cast<int64_t>(c * cfg.pairs_per_category + p);
            rec.category = static_cast<int64_t>(c);
            rec.video = make_sequence(len_v, proj_v, cfg.video_dim);
            rec.music = make_sequence(len_m, proj_m, cfg.music_dim);
            ds.records.push_back(std::move(rec));
        }
    return ds;
}

std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    std::string manifest = "# pair_id,category,video_tensor_path,music_tensor_path\n";
    char name[64];
    for (const PairRecord& rec : ds.records) {
        std::snprintf(name, sizeof(name), "video_%06lld.tnsr", static_cast<long long>(rec.pair_id));
        const std::string vname = name;
        std::snprintf(name, sizeof(name), "music_%06lld.tnsr", static_cast<long long>(rec.pair_id));
        const std::string mname = name;
        save_tensor(dir / vname, rec.video);
        save_tensor(dir / mname, rec.music);
        manifest += std::to_string(rec.pair_id) + "," + std::to_string(rec.category) + "," +
                    vname + "," + mname + "\n";
    }
    const auto manifest_path = dir / "manifest.csv";
    std::ofstream f(manifest_path, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot open " + manifest_path.string() + " for writing");
    f.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    f.flush();
    if (!f) throw RuntimeFailure("write failed for " + manifest_path.string());
    return manifest_path;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw RuntimeFailure("cannot open manifest " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    Dataset ds;
    std::set<int64_t> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::string context = manifest_path.string() + ":" + std::to_string(line_no);

        std::vector<std::string> fields;
        std::stringstream ss(text);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (fields.size() != 4)
            throw InvalidInput(context + ": expected 4 comma-separated fields, got " +
                               std::to_string(fields.size()));

        PairRecord rec;
        rec.pair_id = parse_int_field(fields[0], context);
        rec.category = parse_int_field(fields[1], context);
        if (rec.category < 0) throw InvalidInput(context + ": category must be >= 0");
        if (!seen_ids.insert(rec.pair_id).second)
            throw InvalidInput(context + ": duplicate pair_id " + std::to_string(rec.pair_id));

        for (int side = 0; side < 2; ++side) {
            const auto path = base / fields[side == 0 ? 2 : 3];
            if (!std::filesystem::exists(path))
                throw InvalidInput(context + ": referenced tensor file missing: " + path.string());
            Tensor t = load_tensor(path);
            if (t.rank() != 2)
                throw InvalidInput(context + ": sequence tensor must be rank 2, got " +
                                   t.shape.str());
            if (!t.all_finite())
                throw InvalidInput(context + ": sequence contains non-finite values");
            (side == 0 ? rec.video : rec.music) = std::move(t);
        }

        if (ds.records.empty()) {
            ds.video_dim = rec.video.cols();
            ds.music_dim = rec.music.cols();
        } else {
            if (rec.video.cols() != ds.video_dim)
                throw InvalidInput(context + ": video dim " + std::to_string(rec.video.cols()) +
                                   " does not match dataset dim " + std::to_string(ds.video_dim));
            if (rec.music.cols() != ds.music_dim)
                throw InvalidInput(context + ": music dim " + std::to_string(rec.music.cols()) +
                                   " does not match dataset dim " + std::to_string(ds.music_dim));
        }
        ds.records.push_back(std::move(rec));
    }
    if (f.bad()) throw RuntimeFailure("read failed for " + manifest_path.string());
    if (ds.records.empty())
        throw InvalidInput(manifest_path.string() + ": manifest contains no records");
    return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, size_t test_pairs_per_category,
                                             uint64_t seed) {
    std::map<int64_t, std::vector<size_t>> by_category;
    for (size_t i = 0; i < ds.records.size(); ++i)
        by_category[ds.records[i].category].push_back(i);

    Rng rng(seed);
    std::set<size_t> test_indices;
    for (auto& [category, indices] : by_category) {
        if (indices.size() <= test_pairs_per_category)
            throw InvalidInput("category " + std::to_string(category) + " has " +
                               std::to_string(indices.size()) +
                               " records, not enough to hold out " +
                               std::to_string(test_pairs_per_category));
        rng.shuffle(indices);
        for (size_t k = 0; k < test_pairs_per_category; ++k) test_indices.insert(indices[k]);
    }

    Dataset train, test;
    train.video_dim = test.video_dim = ds.video_dim;
    train.music_dim = test.music_dim = ds.music_dim;
    for (size_t i = 0; i < ds.records.size(); ++i)
        (test_indices.count(i) ? test : train).records.push_back(ds.records[i]);
    return {std::move(train), std::move(test)};
}

}  // namespace iilab
