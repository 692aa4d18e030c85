#include "iilab/encoders.hpp"

#include <cmath>

#include "iilab/kernels.hpp"
#include "iilab/rng.hpp"

namespace iilab {

namespace {

Tensor xavier_uniform(Shape shape, size_t fan_in, size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

double attn_scale(size_t e) { return 1.0 / std::sqrt(static_cast<double>(e)); }

void require_batch(const Shape& s, const EncoderConfig& cfg) {
    if (s.rank() != 3)
        throw InvalidInput("encode: batch must be rank 3 (N,T,E), got " + s.str());
    if (s.dims[2] != cfg.input_dim)
        throw InvalidInput("encode: batch feature dim " + std::to_string(s.dims[2]) +
                           " does not match encoder input_dim " + std::to_string(cfg.input_dim));
}

}  // namespace

const char* encoder_kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::meanpool_linear: return "meanpool_linear";
        case EncoderKind::mlp: return "mlp";
        case EncoderKind::attnpool: return "attnpool";
    }
    throw InvalidInput("unknown encoder kind");
}

EncoderKind encoder_kind_from_name(const std::string& name) {
    if (name == "meanpool_linear") return EncoderKind::meanpool_linear;
    if (name == "mlp") return EncoderKind::mlp;
    if (name == "attnpool") return EncoderKind::attnpool;
    throw InvalidInput("unknown encoder kind '" + name +
                       "' (expected meanpool_linear, mlp, or attnpool)");
}

void EncoderConfig::validate() const {
    if (input_dim < 1 || output_dim < 1)
        throw InvalidInput("encoder dims must be >= 1");
    if ((kind == EncoderKind::mlp) && hidden_dim < 1)
        throw InvalidInput("mlp encoder needs hidden_dim >= 1");
}

Tensor& EncoderParams::at(const std::string& name) {
    for (auto& [n, t] : named)
        if (n == name) return t;
    throw InvalidInput("no parameter named '" + name + "'");
}

const Tensor& EncoderParams::at(const std::string& name) const {
    return const_cast<EncoderParams*>(this)->at(name);
}

NodeId EncoderNodes::at(const std::string& name) const {
    for (const auto& [n, id] : named)
        if (n == name) return id;
    throw InvalidInput("no parameter node named '" + name + "'");
}

EncoderParams init_params(const EncoderConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    EncoderParams p;
    switch (cfg.kind) {
        case EncoderKind::meanpool_linear:
            p.named.emplace_back("w", xavier_uniform(Shape{cfg.input_dim, cfg.output_dim},
                                                     cfg.input_dim, cfg.output_dim, rng));
            p.named.emplace_back("b", Tensor(Shape{cfg.output_dim}));
            break;
        case EncoderKind::mlp:
            p.named.emplace_back("w1", xavier_uniform(Shape{cfg.input_dim, cfg.hidden_dim},
                                                      cfg.input_dim, cfg.hidden_dim, rng));
            p.named.emplace_back("b1", Tensor(Shape{cfg.hidden_dim}));
            p.named.emplace_back("w2", xavier_uniform(Shape{cfg.hidden_dim, cfg.output_dim},
                                                      cfg.hidden_dim, cfg.output_dim, rng));
            p.named.emplace_back("b2", Tensor(Shape{cfg.output_dim}));
            break;
        case EncoderKind::attnpool:
            p.named.emplace_back("q", xavier_uniform(Shape{cfg.input_dim}, cfg.input_dim, 1, rng));
            p.named.emplace_back("w", xavier_uniform(Shape{cfg.input_dim, cfg.output_dim},
                                                     cfg.input_dim, cfg.output_dim, rng));
            p.named.emplace_back("b", Tensor(Shape{cfg.output_dim}));
            break;
    }
    return p;
}

EncoderNodes params_to_tape(Tape& tape, const EncoderParams& params, bool requires_grad) {
    EncoderNodes nodes;
    for (const auto& [name, tensor] : params.named)
        nodes.named.emplace_back(name, tape.leaf(tensor, requires_grad));
    return nodes;
}

NodeId encode(Tape& tape, const EncoderConfig& cfg, const EncoderNodes& nodes, NodeId batch) {
    require_batch(tape.value(batch).shape, cfg);
    switch (cfg.kind) {
        case EncoderKind::meanpool_linear: {
            NodeId m = tape.seq_mean(batch);
            return tape.add_rowvec(tape.matmul(m, nodes.at("w")), nodes.at("b"));
        }
        case EncoderKind::mlp: {
            NodeId m = tape.seq_mean(batch);
            NodeId h = tape.tanh(tape.add_rowvec(tape.matmul(m, nodes.at("w1")), nodes.at("b1")));
            return tape.add_rowvec(tape.matmul(h, nodes.at("w2")), nodes.at("b2"));
        }
        case EncoderKind::attnpool: {
            NodeId scores = tape.scale(tape.seq_matvec(batch, nodes.at("q")),
                                       attn_scale(cfg.input_dim));
            NodeId att = tape.row_softmax(scores);
            NodeId pooled = tape.seq_weighted_sum(batch, att);
            return tape.add_rowvec(tape.matmul(pooled, nodes.at("w")), nodes.at("b"));
        }
    }
    throw InvalidInput("unknown encoder kind");
}

Tensor encode_plain(const EncoderConfig& cfg, const EncoderParams& params, const Tensor& batch) {
    require_batch(batch.shape, cfg);
    switch (cfg.kind) {
        case EncoderKind::meanpool_linear: {
            Tensor m = kernels::seq_mean(batch);
            return kernels::add_rowvec(kernels::matmul(m, params.at("w")), params.at("b"));
        }
        case EncoderKind::mlp: {
            Tensor m = kernels::seq_mean(batch);
            Tensor h = kernels::tanh(
                kernels::add_rowvec(kernels::matmul(m, params.at("w1")), params.at("b1")));
            return kernels::add_rowvec(kernels::matmul(h, params.at("w2")), params.at("b2"));
        }
        case EncoderKind::attnpool: {
            Tensor scores = kernels::scale(kernels::seq_matvec(batch, params.at("q")),
                                           attn_scale(cfg.input_dim));
            Tensor att = kernels::row_softmax(scores);
            Tensor pooled = kernels::seq_weighted_sum(batch, att);
            return kernels::add_rowvec(kernels::matmul(pooled, params.at("w")), params.at("b"));
        }
    }
    throw InvalidInput("unknown encoder kind");
}

}  // namespace iilab
